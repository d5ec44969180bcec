use bai_core::numerics::{
    bonus, c_gaussian, lambert_w_bar, riemann_zeta, threshold, BonusSpec, ThresholdKind, ThresholdSpec,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn lambert_identity_and_sandwich(log_x in 0.0f64..(1e6f64).ln()) {
        let x = log_x.exp();
        let y = lambert_w_bar(x).unwrap();
        prop_assert!((y - y.ln() - x).abs() <= 1e-9 * x.max(1.0), "x={x} y={y}");
        let lo = x + x.ln();
        let hi = lo + 0.5f64.min(1.0 / x.sqrt());
        prop_assert!(lo - 1e-12 <= y && y <= hi + 1e-12, "x={x} y={y}");
    }

    #[test]
    fn lambert_is_increasing(a in 1.0f64..1e4, b in 1.0f64..1e4) {
        prop_assume!(a < b);
        prop_assert!(lambert_w_bar(a).unwrap() < lambert_w_bar(b).unwrap());
    }

    #[test]
    fn c_gaussian_is_bracketed(x in 1.0f64..200.0) {
        let c = c_gaussian(x).unwrap();
        prop_assert!(c >= x);
        prop_assert!(c <= x + x.ln() + 3.0);
    }

    #[test]
    fn zeta_decreases(a in 1.05f64..8.0, b in 1.05f64..8.0) {
        prop_assume!(a < b);
        prop_assert!(riemann_zeta(a).unwrap() > riemann_zeta(b).unwrap());
    }

    #[test]
    fn heuristic_threshold_matches_formula(n in 1u64..10_000_000, delta in 1e-6f64..0.99) {
        let spec = ThresholdSpec::new(ThresholdKind::Heuristic, 5).unwrap();
        let c = threshold(&spec, n, delta).unwrap();
        let expected = ((1.0 + (n as f64).ln()) / delta).ln();
        prop_assert!((c - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }
}

#[test]
fn thresholds_monotone_on_grid() {
    let ns: Vec<u64> = (0..20).map(|i| (10f64.powf(i as f64 * 7.0 / 19.0)).round() as u64 + 1).collect();
    let deltas: Vec<f64> = (0..20).map(|i| 10f64.powf(-0.05 - i as f64 * 0.5)).collect();
    for kind in [ThresholdKind::Exact, ThresholdKind::Heuristic] {
        let spec = ThresholdSpec::new(kind, 10).unwrap();
        let grid: Vec<Vec<f64>> = deltas
            .iter()
            .map(|&d| ns.iter().map(|&n| threshold(&spec, n, d).unwrap()).collect())
            .collect();
        for (i, row) in grid.iter().enumerate() {
            for j in 1..row.len() {
                assert!(row[j] >= row[j - 1], "{kind}: not nondecreasing in n at {}", ns[j]);
            }
            if i > 0 {
                for j in 0..row.len() {
                    assert!(row[j] > grid[i - 1][j], "{kind}: not decreasing in delta at {}", deltas[i]);
                }
            }
        }
    }
}

#[test]
fn bonuses_nondecreasing_in_n() {
    for spec in [BonusSpec::mixture(), BonusSpec::union()] {
        let mut prev = 0.0;
        for n in [2u64, 3, 10, 100, 1_000, 10_000, 1_000_000, 10_000_000] {
            let g = bonus(&spec, n);
            assert!(g >= prev);
            prev = g;
        }
    }
    assert_eq!(bonus(&BonusSpec::zero(), 1000), 0.0);
}
