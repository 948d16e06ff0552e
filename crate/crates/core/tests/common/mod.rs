//! Test-only oracles and fixtures, kept independent of the library's
//! numerical paths.
#![allow(dead_code)]

use chrono::NaiveDate;
use fxcorr::rng::NoiseStream;
use fxcorr::{Matrix, RatePanel};

/// Number of eigenvalues of the symmetric `a` strictly below `x`, from the
/// signs of the LDLᵀ pivots of `a - xI` (Sylvester's law of inertia).
pub fn count_below(a: &Matrix, x: f64) -> usize {
    let n = a.rows();
    let mut l = vec![vec![0.0; n]; n];
    let mut d = vec![0.0; n];
    let mut negative = 0;
    for j in 0..n {
        let mut dj = a[(j, j)] - x;
        for k in 0..j {
            dj -= l[j][k] * l[j][k] * d[k];
        }
        if dj == 0.0 {
            dj = -1e-300;
        }
        d[j] = dj;
        if dj < 0.0 {
            negative += 1;
        }
        for i in j + 1..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[i][k] * l[j][k] * d[k];
            }
            l[i][j] = v / dj;
        }
    }
    negative
}

/// All eigenvalues, ascending, by bisection on the inertia count.
pub fn bisection_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let bound = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    (0..n)
        .map(|k| {
            // k-th smallest: smallest x with count_below(x) > k
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(a, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-14 {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Textbook Pearson coefficient of two raw series.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation (no ties expected).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    pearson(&ranks(x), &ranks(y))
}

pub fn dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    (0..n)
        .map(|k| start + chrono::Days::new(k as u64))
        .collect()
}

/// Random-walk panel of `n` listed currencies quoted in `USD`, with
/// per-currency volatilities between 0.3% and 1.5%.
pub fn random_walk_panel(n: usize, len: usize, seed: u64) -> RatePanel {
    let mut rng = NoiseStream::gaussian(seed);
    let codes: Vec<String> = (0..n).map(|i| format!("K{i:02}")).collect();
    let prices = (0..n)
        .map(|i| {
            let vol = 0.003 + 0.012 * i as f64 / n.max(1) as f64;
            let mut level = rng.next_gaussian();
            (0..len)
                .map(|_| {
                    level += vol * rng.next_gaussian();
                    level.exp()
                })
                .collect()
        })
        .collect();
    RatePanel::new(codes, "USD", dates(len), prices).unwrap()
}

/// Symmetric matrix from a random Gram matrix, rescaled to unit diagonal.
pub fn random_correlation(m: usize, samples: usize, seed: u64) -> Matrix {
    let mut rng = NoiseStream::gaussian(seed);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..samples).map(|_| rng.next_gaussian()).collect())
        .collect();
    let mut c = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            c[(i, j)] = pearson(&rows[i], &rows[j]);
        }
        c[(i, i)] = 1.0;
    }
    for i in 0..m {
        for j in 0..i {
            c[(j, i)] = c[(i, j)];
        }
    }
    c
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
