mod support;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracles;
use tlens_core::stats::{auc, d_prime_c_prime, d_prime_from_rates, normal_quantile, spearman_rho};

#[test]
fn quantile_matches_bisection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let p: f64 = rng.random_range(1e-4..1.0 - 1e-4);
        let z = normal_quantile(p).unwrap();
        assert!((z - oracles::quantile_bisect(p)).abs() < 1e-9, "p = {p}");
    }
}

#[test]
fn symmetric_sdt_case_matches_oracle() {
    let (d, c) = oracles::sdt(0.9, 0.1);
    assert!((d - 2.563_103).abs() < 1e-6, "oracle d' = {d}");
    assert!(c.abs() < 1e-12);
    let r = d_prime_c_prime(9, 1, 1, 9).unwrap();
    assert!((r.d_prime - d).abs() < 1e-9);
    assert!(r.c_prime.abs() < 1e-9);
}

#[test]
fn half_count_extremes_match_oracle() {
    for n in [1u64, 2, 5, 10, 40] {
        for (hits, fas) in [(n, 0), (0, n), (n, n), (0, 0)] {
            let r = d_prime_c_prime(hits, n - hits, fas, n - fas).unwrap();
            let h = if hits == 0 {
                1.0 / (2.0 * n as f64)
            } else {
                1.0 - 1.0 / (2.0 * n as f64)
            };
            let f = if fas == 0 {
                1.0 / (2.0 * n as f64)
            } else {
                1.0 - 1.0 / (2.0 * n as f64)
            };
            let (d, c) = oracles::sdt(h, f);
            assert!((r.d_prime - d).abs() < 1e-6);
            assert!((r.c_prime - c).abs() < 1e-6);
        }
    }
}

#[test]
fn rank_metrics_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.random_range(2..=50);
        // Coarse grid forces ties.
        let x: Vec<f64> = (0..n)
            .map(|_| (rng.random_range(0.0..1.0f64) * 10.0).round() / 10.0)
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        if let Ok(rho) = spearman_rho(&x, &y) {
            assert!((rho - oracles::spearman_brute(&x, &y)).abs() < 1e-9);
        }
        if let Ok(a) = auc(&x, &y) {
            assert!((a - oracles::auc_brute(&x, &y)).abs() < 1e-9);
        }
        checked += 1;
    }
}

proptest! {
    #[test]
    fn spearman_invariant_under_monotone_maps(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(rho) = spearman_rho(&x, &y) {
            let tx: Vec<f64> = x.iter().map(|v| v * v * v + 5.0 * v).collect();
            let ty: Vec<f64> = y.iter().map(|v| (v / 50.0).exp()).collect();
            prop_assert!((spearman_rho(&tx, &ty).unwrap() - rho).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&rho));
        }
    }

    #[test]
    fn auc_monotone_and_reflection(
        pairs in prop::collection::vec((-10.0f64..10.0, 0.0f64..=1.0), 2..40)
    ) {
        let (s, l): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(a) = auc(&s, &l) {
            prop_assert!((0.0..=1.0).contains(&a));
            let ts: Vec<f64> = s.iter().map(|v| v.exp()).collect();
            prop_assert!((auc(&ts, &l).unwrap() - a).abs() < 1e-12);
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let mut sorted = s.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            if sorted.len() == s.len() {
                prop_assert!((auc(&neg, &l).unwrap() - (1.0 - a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sdt_symmetries(h in 0.001f64..0.999, f in 0.001f64..0.999) {
        let (d, c) = d_prime_from_rates(h, f).unwrap();
        let (d_swap, c_swap) = d_prime_from_rates(f, h).unwrap();
        prop_assert!((d + d_swap).abs() < 1e-9);
        prop_assert!((c - c_swap).abs() < 1e-9);
        // Mirroring the rates keeps sensitivity and flips the sign of bias.
        let (d_m, c_m) = d_prime_from_rates(1.0 - f, 1.0 - h).unwrap();
        prop_assert!((d - d_m).abs() < 1e-9);
        prop_assert!((c + c_m).abs() < 1e-9);
    }
}
