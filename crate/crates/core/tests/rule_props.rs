use nbmc::rule::{
    achievable_curves, asymptotic_confidence, check_conditions_legacy, check_conditions_new, confidence_interval_for,
    estimate, legacy_mu1_bound, legacy_p_bound, min_margin, min_margin_for_confidence, min_n_for,
    min_occurrences_for_margin, mu1_bound, mu2_bound, PCondition, DEFAULT_MAX_N,
};
use proptest::prelude::*;

#[test]
fn new_mu1_bound_is_below_legacy() {
    for n in 3..=10_000u64 {
        assert!(mu1_bound(n) < legacy_mu1_bound(n), "N={n}");
    }
}

#[test]
fn legacy_p_bound_uses_integer_ceiling() {
    // ceil(7N/2 - 1) for odd and even N
    assert_eq!(legacy_p_bound(30, 1.0), 29.0 / 104.0);
    assert_eq!(legacy_p_bound(31, 1.0), 30.0 / 108.0);
    let r = check_conditions_legacy(30, 1.2451, 1.2451, 0.2);
    assert!(r.all_ok());
    assert!(matches!(r.p_ok, PCondition::Checked { ok: true, .. }));
    assert!(!check_conditions_legacy(30, 1.2451, 1.2451, 0.23).all_ok());
}

#[test]
fn worked_margin_and_its_inverse() {
    let m = min_margin_for_confidence(30, 0.75).unwrap();
    assert!((m - 0.237).abs() < 5e-4);
    assert!(asymptotic_confidence(30, 1.0 + m, 1.0 + m).unwrap() > 0.75);
    assert_eq!(min_n_for(m, 0.75, DEFAULT_MAX_N).unwrap(), 30);
    assert!(check_conditions_new(30, 1.0 + m, 1.0 + m).all_ok());
}

#[test]
fn min_occurrences_inverts_min_margin() {
    for n in 3..=5000u64 {
        let k = min_occurrences_for_margin(min_margin(n)).unwrap();
        assert!(k <= n);
        assert!(min_margin(k) <= min_margin(n));
        assert!(k == 3 || min_margin(k - 1) > min_margin(n));
    }
}

#[test]
fn curves_increase_and_min_curve_lies_below() {
    let grid: Vec<f64> = (1..=100).map(|i| i as f64 * 0.01).collect();
    let rows = achievable_curves(&grid, &[5, 10, 30, 100]).unwrap();
    for n in [5u64, 10, 30, 100] {
        let curve: Vec<_> = rows.iter().filter(|r| !r.is_min_curve && r.occurrences == n).collect();
        assert_eq!(curve[0].m, min_margin(n));
        assert!(curve.windows(2).all(|w| w[1].m > w[0].m && w[1].c_bar > w[0].c_bar));
        for r in rows.iter().filter(|r| r.is_min_curve) {
            if let Some(d) = curve.iter().find(|d| d.m == r.m) {
                assert!(r.c_bar <= d.c_bar);
            }
        }
    }
}

proptest! {
    #[test]
    fn c_bar_monotone_in_each_factor(n in 3u64..2000, mu1 in 1.001f64..5.0, mu2 in 1.001f64..5.0, d in 0.0f64..2.0) {
        let base = asymptotic_confidence(n, mu1, mu2).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(asymptotic_confidence(n, mu1 + d, mu2).unwrap() >= base);
        prop_assert!(asymptotic_confidence(n, mu1, mu2 + d).unwrap() >= base);
    }

    #[test]
    fn symmetric_c_bar_monotone_in_n(n in 3u64..3000, mu in 1.001f64..10.0) {
        let a = asymptotic_confidence(n, mu, mu).unwrap();
        let b = asymptotic_confidence(n + 1, mu, mu).unwrap();
        prop_assert!(b >= a - 1e-15);
    }

    #[test]
    fn required_margin_nonincreasing_in_n(n in 3u64..300, c in 0.05f64..0.99) {
        let a = min_margin_for_confidence(n, c).unwrap();
        let b = min_margin_for_confidence(n + 1, c).unwrap();
        prop_assert!(b <= a + 2.0 * nbmc::rule::MARGIN_TOLERANCE);
    }

    #[test]
    fn min_n_is_minimal(m in 0.05f64..3.0, c in 0.1f64..0.99) {
        let n = min_n_for(m, c, DEFAULT_MAX_N).unwrap();
        prop_assert!(min_margin(n) <= m);
        prop_assert!(asymptotic_confidence(n, 1.0 + m, 1.0 + m).unwrap() > c);
        if n > 3 {
            let prev_ok = min_margin(n - 1) <= m
                && asymptotic_confidence(n - 1, 1.0 + m, 1.0 + m).unwrap() > c;
            prop_assert!(!prev_ok);
        }
    }

    #[test]
    fn bounds_match_their_closed_forms(n in 3u64..100_000) {
        let nf = n as f64;
        prop_assert!((mu2_bound(n) - (nf + nf.sqrt()) / (nf - 1.0)).abs() < 1e-15 * mu2_bound(n));
        let h = nf - 0.5;
        prop_assert!((mu1_bound(n) - (nf - 1.0) / (h - h.sqrt())).abs() < 1e-15 * mu1_bound(n));
        prop_assert!(mu1_bound(n) <= mu2_bound(n));
    }

    #[test]
    fn interval_contains_estimate(trials in 3u64..1_000_000, n in 3u64..100, mu1 in 1.0f64..3.0, mu2 in 1.0f64..3.0) {
        prop_assume!(trials >= n);
        let p_hat = estimate(trials, n).unwrap();
        let ci = confidence_interval_for(p_hat, mu1, mu2).unwrap();
        prop_assert!(ci.low <= p_hat && p_hat <= ci.high || ci.upper_clamped);
        prop_assert!(ci.high <= 1.0);
    }
}
