mod common;

use fxcorr::corrmat::{read_binary, DEFAULT_BINS};
use fxcorr::rates::{log_returns, normalize, rebase};
use fxcorr::{correlation_matrix, offdiag_histogram, one_factor_panel, random_panel, NullSpec};
use proptest::prelude::*;

use common::{pearson, random_walk_panel};

#[test]
fn entries_match_textbook_pearson() {
    for seed in 0..5 {
        let panel = random_walk_panel(6, 120, seed);
        let raw = log_returns(&panel, "K03", 1).unwrap();
        let cm = correlation_matrix(&normalize(&raw).unwrap()).unwrap();
        for (i, a) in raw.returns().iter().enumerate() {
            for (j, b) in raw.returns().iter().enumerate() {
                let err = (cm.values()[(i, j)] - pearson(a, b)).abs();
                assert!(err < 1e-12, "seed {seed} ({i},{j}): {err}");
            }
        }
    }
}

#[test]
fn invariants_hold_on_panel_data() {
    let panel = random_walk_panel(9, 40, 4);
    for base in panel.universe() {
        let cm = correlation_matrix(&normalize(&log_returns(&panel, &base, 1).unwrap()).unwrap())
            .unwrap();
        let m = cm.dim();
        let v = cm.values();
        assert!((v.trace() - m as f64).abs() < 1e-10);
        for i in 0..m {
            assert!((v[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..m {
                assert_eq!(v[(i, j)], v[(j, i)]);
                assert!(v[(i, j)].abs() <= 1.0);
            }
        }
        // Oracle: no eigenvalue below -1e-10.
        assert_eq!(common::count_below(v, -1e-10), 0);
    }
}

#[test]
fn rebase_matches_direct_cross_rate_matrix() {
    // Oracle: Pearson on log returns of directly divided prices.
    for seed in 0..20 {
        let panel = random_walk_panel(7, 150, 1000 + seed);
        let rp = log_returns(&panel, "USD", 1).unwrap();
        for base in panel.codes() {
            let cm = correlation_matrix(&normalize(&rebase(&rp, base).unwrap()).unwrap()).unwrap();
            let pb = panel.price_series(base).unwrap();
            let direct: Vec<Vec<f64>> = cm
                .codes()
                .iter()
                .map(|c| {
                    let p = panel.price_series(c).unwrap();
                    (1..panel.len())
                        .map(|t| (p[t] / pb[t] / (p[t - 1] / pb[t - 1])).ln())
                        .collect()
                })
                .collect();
            for i in 0..cm.dim() {
                for j in 0..cm.dim() {
                    let err = (cm.values()[(i, j)] - pearson(&direct[i], &direct[j])).abs();
                    assert!(err < 1e-10, "seed {seed} base {base}: {err}");
                }
            }
        }
    }
}

#[test]
fn random_null_histogram_is_tight_around_zero() {
    let m = 59;
    let t = 1656;
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for seed in 0..20 {
        let rp = normalize(&random_panel(&NullSpec::random(m, t, seed)).unwrap()).unwrap();
        let cm = correlation_matrix(&rp).unwrap();
        let h = offdiag_histogram(&cm, DEFAULT_BINS).unwrap();
        assert_eq!(h.count, m * (m - 1) / 2);
        let integral: f64 = h.density.iter().sum::<f64>() * h.bin_width();
        assert!((integral - 1.0).abs() < 1e-9);
        // Oracle: direct moments of the entries.
        let xs = cm.off_diagonal();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - h.mean).abs() < 1e-14);
        means.push(mean);
        stds.push((xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt());
    }
    let expected = 1.0 / (t as f64).sqrt();
    for (mean, sd) in means.iter().zip(&stds) {
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((sd / expected - 1.0).abs() < 0.15, "std {sd}");
    }
}

#[test]
fn one_factor_world_has_high_correlations() {
    // Idiosyncratic share 5%: closed-form correlation 0.95 in the quote base.
    let rho: f64 = 0.95;
    let panel = one_factor_panel(&NullSpec::one_factor(59, 1656, rho.sqrt(), 21)).unwrap();
    let cm =
        correlation_matrix(&normalize(&log_returns(&panel, "Q", 1).unwrap()).unwrap()).unwrap();
    let h = offdiag_histogram(&cm, DEFAULT_BINS).unwrap();
    assert!((h.mode_bin - 0.9).abs() <= 0.075, "mode {}", h.mode_bin);
    let xs = cm.off_diagonal();
    let above = xs.iter().filter(|&&x| x > 0.7).count() as f64 / xs.len() as f64;
    assert!(above > 0.9, "{above}");
}

#[test]
fn csv_and_binary_layouts() {
    let panel = random_walk_panel(3, 30, 2);
    let cm =
        correlation_matrix(&normalize(&log_returns(&panel, "USD", 1).unwrap()).unwrap()).unwrap();

    let mut csv = Vec::new();
    cm.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let first = text.lines().next().unwrap();
    assert_eq!(first, "USD,K00,K01,K02");
    assert_eq!(text.lines().count(), 4);

    let mut bin = Vec::new();
    cm.write_binary(&mut bin).unwrap();
    assert_eq!(&bin[..4], b"FXCM");
    assert_eq!(u32::from_le_bytes(bin[4..8].try_into().unwrap()), 3);
    assert_eq!(bin.len(), 4 + 4 + 4 + 3 + 9 * 8);
    let (base, values) = read_binary(bin.as_slice()).unwrap();
    assert_eq!(base, "USD");
    assert_eq!(&values, cm.values());

    let h = offdiag_histogram(&cm, 20).unwrap();
    let mut out = Vec::new();
    h.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "bin_center,density");
    assert_eq!(text.lines().count(), 21);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn permutation_equivariance(seed in any::<u64>(), shift in 1usize..6) {
        let panel = random_walk_panel(6, 60, seed);
        let rp = normalize(&log_returns(&panel, "USD", 1).unwrap()).unwrap();
        let n = rp.n_series();
        let order: Vec<usize> = (0..n).map(|k| (k + shift) % n).collect();
        let a = correlation_matrix(&rp).unwrap();
        let b = correlation_matrix(&rp.reordered(&order)).unwrap();
        prop_assert!(b.values().max_abs_diff(&a.values().permuted(&order)) < 1e-15);
        let ha = offdiag_histogram(&a, DEFAULT_BINS).unwrap();
        let hb = offdiag_histogram(&b, DEFAULT_BINS).unwrap();
        prop_assert_eq!(ha.density, hb.density);
    }
}
