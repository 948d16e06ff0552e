mod common;

use fxcorr::corrmat::CorrelationMatrix;
use fxcorr::rates::{log_returns, normalize};
use fxcorr::spectra::symmetric_eigen;
use fxcorr::{
    collectivity_summary, correlation_matrix, eigendecompose, ipr, one_factor_panel, random_panel,
    rmt_bounds, Matrix, NullSpec,
};
use proptest::prelude::*;

use common::{bisection_eigenvalues, median, random_correlation};

fn wrap(m: Matrix) -> CorrelationMatrix {
    let codes = (0..m.rows()).map(|i| format!("X{i}")).collect();
    CorrelationMatrix::from_values("B", codes, m, 0).unwrap()
}

fn quote_spectrum(loading_sq: f64, n: usize, samples: usize, seed: u64) -> fxcorr::EigenSpectrum {
    let panel =
        one_factor_panel(&NullSpec::one_factor(n, samples, loading_sq.sqrt(), seed)).unwrap();
    let rp = normalize(&log_returns(&panel, "Q", 1).unwrap()).unwrap();
    eigendecompose(&correlation_matrix(&rp).unwrap()).unwrap()
}

#[test]
fn random_six_by_six_matches_bisection() {
    for seed in 0..100 {
        let c = random_correlation(6, 8, seed);
        let s = eigendecompose(&wrap(c.clone())).unwrap();
        let oracle = bisection_eigenvalues(&c);
        for (a, b) in s.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn reconstruction_and_orthonormality() {
    for seed in 0..20 {
        let c = random_correlation(12, 40, seed);
        let s = eigendecompose(&wrap(c.clone())).unwrap();
        let v = &s.eigenvectors;
        let mut d = Matrix::zeros(12, 12);
        for k in 0..12 {
            d[(k, k)] = s.eigenvalues[k];
        }
        let rebuilt = v.matmul(&d).matmul(&v.transpose());
        assert!(rebuilt.max_abs_diff(&c) < 1e-9);
        assert!(v.transpose().matmul(v).max_abs_diff(&Matrix::identity(12)) < 1e-10);
        assert!((s.trace_check - 12.0).abs() < 1e-8);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        for (k, &p) in s.ipr.iter().enumerate() {
            assert!((1.0 / 12.0 - 1e-12..=1.0 + 1e-12).contains(&p));
            assert_eq!(p, ipr(&s, k));
            let col = s.eigenvector(k);
            let big = col.iter().cloned().fold(0.0f64, |a, x| a.max(x.abs()));
            let first = col.iter().find(|x| x.abs() >= big - 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }
}

#[test]
fn all_rho_family_closed_form() {
    for &rho in &[0.0, 0.3, 0.7, 0.99] {
        for m in [2usize, 5, 59] {
            let mut c = Matrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    c[(i, j)] = if i == j { 1.0 } else { rho };
                }
            }
            let s = eigendecompose(&wrap(c)).unwrap();
            for &l in &s.eigenvalues[..m - 1] {
                assert!((l - (1.0 - rho)).abs() < 1e-10);
            }
            assert!((s.lambda_max() - (1.0 + (m - 1) as f64 * rho)).abs() < 1e-10);
        }
    }
}

#[test]
fn fifty_nine_at_point_nine() {
    let m = 59;
    let mut c = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            c[(i, j)] = if i == j { 1.0 } else { 0.9 };
        }
    }
    let s = eigendecompose(&wrap(c)).unwrap();
    let summary = collectivity_summary(&s);
    assert!((summary.trace_fraction - (1.0 + 58.0 * 0.9) / 59.0).abs() < 1e-12);
    assert!((summary.gap - 59.0 * 0.9).abs() < 1e-9);
    let top = s.eigenvector(m - 1);
    assert!(top
        .iter()
        .all(|&x| (x - 1.0 / (m as f64).sqrt()).abs() < 1e-10));
}

#[test]
fn enslavement_of_the_bulk() {
    // As the factor absorbs the trace, the rest of the spectrum is pushed down.
    let loadings = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99];
    let mut previous = f64::INFINITY;
    let mut previous_fraction = 0.0;
    for &l2 in &loadings {
        let meds: Vec<f64> = (0..10)
            .map(|seed| {
                let s = quote_spectrum(l2, 30, 600, seed);
                median(s.eigenvalues[..s.dim() - 1].to_vec())
            })
            .collect();
        let fractions: Vec<f64> = (0..10)
            .map(|seed| collectivity_summary(&quote_spectrum(l2, 30, 600, seed)).trace_fraction)
            .collect();
        let med = median(meds);
        let frac = median(fractions);
        assert!(frac > previous_fraction);
        assert!(med <= previous, "loading² {l2}: {med} > {previous}");
        previous = med;
        previous_fraction = frac;
    }
}

#[test]
fn one_factor_top_vector_is_delocalized() {
    let m = 59;
    for seed in 0..10 {
        let s = quote_spectrum(0.95, m, 1656, seed);
        let p = ipr(&s, m - 1);
        assert!((p * m as f64 - 1.0).abs() < 0.2, "seed {seed}: {p}");
    }
}

#[test]
fn random_null_has_few_eigenvalues_above_the_edge() {
    for seed in 0..20 {
        let rp = normalize(&random_panel(&NullSpec::random(59, 1656, seed)).unwrap()).unwrap();
        let s = eigendecompose(&correlation_matrix(&rp).unwrap()).unwrap();
        let b = rmt_bounds(&s, 1656);
        assert!(b.count_above <= 1, "seed {seed}: {}", b.count_above);
        assert_eq!(
            b.count_above + b.count_below,
            s.eigenvalues
                .iter()
                .filter(|&&l| l > b.lambda_plus || l < b.lambda_minus)
                .count()
        );
    }
}

#[test]
fn output_layouts() {
    let s = eigendecompose(&wrap(random_correlation(3, 10, 1))).unwrap();
    let mut out = Vec::new();
    s.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "index,eigenvalue,ipr");
    assert!(text.lines().nth(1).unwrap().starts_with("1,"));
    let mut out = Vec::new();
    s.write_eigenvectors_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "code,v1,v2,v3");
    assert!(text.lines().nth(1).unwrap().starts_with("X0,"));

    let b = rmt_bounds(&s, 10);
    let json = serde_json::to_value(&b).unwrap();
    for key in [
        "q",
        "lambda_minus",
        "lambda_plus",
        "count_above",
        "count_below",
    ] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn permutation_permutes_spectrum(seed in any::<u64>(), m in 2usize..9, shift in 1usize..8) {
        let c = random_correlation(m, 3 * m, seed);
        let order: Vec<usize> = (0..m).map(|k| (k + shift) % m).collect();
        let (la, va) = symmetric_eigen(&c).unwrap();
        let (lb, vb) = symmetric_eigen(&c.permuted(&order)).unwrap();
        for (a, b) in la.iter().zip(&lb) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        // Compare each well separated eigenvector up to sign.
        for k in 0..m {
            let separated = (k == 0 || la[k] - la[k - 1] > 1e-6) && (k + 1 == m || la[k + 1] - la[k] > 1e-6);
            if !separated {
                continue;
            }
            let dot: f64 = (0..m).map(|r| vb[(r, k)] * va[(order[r], k)]).sum();
            prop_assert!((dot.abs() - 1.0).abs() < 1e-8, "k {} dot {}", k, dot);
        }
    }

    #[test]
    fn trace_is_preserved_and_spectrum_nonnegative(seed in any::<u64>(), m in 2usize..12) {
        let c = random_correlation(m, m + 5, seed);
        let s = eigendecompose(&wrap(c)).unwrap();
        prop_assert!((s.eigenvalues.iter().sum::<f64>() - m as f64).abs() < 1e-8);
        prop_assert!(s.eigenvalues.iter().all(|&l| l >= -1e-10));
    }
}
