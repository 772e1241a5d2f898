//! Integral-versus-sum inequality and coefficient formulas against quadrature,
//! exact rational sums and hand-derived closed forms.

use nbmc::appendix::{
    coefficient_x, coefficient_x_prime, coefficients_nonnegative_sweep, direct_x, direct_x_prime, lemma1_check,
    lemma1_lhs, lemma1_n_star_max, lemma1_rhs, series_partial_sum, Family, SamplingPolicy,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

mod common;
use common::integrate;

/// `ln ∫_{N−1}^{n*} t^{N−1} e^{−pt} dt` by quadrature, scaled by the integrand's peak.
fn ln_quad_lhs(occurrences: u64, p: f64, n_star: u64) -> f64 {
    let k = (occurrences - 1) as f64;
    let (a, b) = (k, n_star as f64);
    let peak_t = (k / p).clamp(a, b);
    let shift = k * peak_t.ln() - p * peak_t;
    let f = move |t: f64| (k * t.ln() - p * t - shift).exp();
    let pieces = 32;
    let total: f64 = (0..pieces)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / pieces as f64;
            let hi = a + (b - a) * (i + 1) as f64 / pieces as f64;
            integrate(&f, lo, hi, 12)
        })
        .sum();
    total.ln() + shift
}

fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact `Σ_{n=N}^{n*} (n−1)^{(N−1)} (1−p)^{n−N}`.
fn rational_rhs(occurrences: u64, p: &BigRational, n_star: u64) -> BigRational {
    let q = BigRational::one() - p;
    let mut sum = BigRational::zero();
    let mut q_pow = BigRational::one();
    for n in occurrences..=n_star {
        let falling: BigInt = (n + 1 - occurrences..n).map(BigInt::from).product();
        sum += BigRational::from_integer(falling) * &q_pow;
        q_pow *= &q;
    }
    sum
}

#[test]
fn rhs_small_case_is_exact() {
    // 2 + 6/2 + 12/4 + 20/8
    assert_eq!(rational_rhs(3, &rational(1, 2), 6), rational(21, 2));
    assert!((lemma1_rhs(3, 0.5, 6).unwrap() - 10.5).abs() < 1e-13);
}

#[test]
fn rhs_matches_rational_sums() {
    for &(n, num, den, n_star) in &[(5u64, 1i64, 10i64, 60u64), (10, 1, 2, 40), (30, 1, 100, 2000)] {
        let exact = rational_rhs(n, &rational(num, den), n_star).to_f64().unwrap();
        let got = lemma1_rhs(n, num as f64 / den as f64, n_star).unwrap();
        assert!(((got - exact) / exact).abs() < 1e-12, "N={n} n*={n_star}: {got} vs {exact}");
    }
}

#[test]
fn lhs_matches_quadrature_examples() {
    for &(n, p, n_star) in &[(3u64, 0.5, 6u64), (30, 0.01, 2000), (10, 0.2, 30), (50, 0.05, 700)] {
        let got = lemma1_lhs(n, p, n_star).unwrap().ln();
        let want = ln_quad_lhs(n, p, n_star);
        assert!(((got - want) / want).abs() < 1e-11, "N={n} p={p} n*={n_star}: {got} vs {want}");
        assert!((got.exp() / want.exp() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn check_agrees_with_unnormalized_sides() {
    let report = lemma1_check(10, 0.1).unwrap();
    assert!(report.all_hold);
    let worst = report.worst_n_star.unwrap();
    let margin = lemma1_lhs(10, 0.1, worst).unwrap() / lemma1_rhs(10, 0.1, worst).unwrap() - 1.0;
    assert!((margin - report.worst_relative_margin.unwrap()).abs() < 1e-10);
}

#[test]
fn check_examples() {
    // n*_max = 2 < N: vacuous
    let r = lemma1_check(3, 0.5).unwrap();
    assert!(r.all_hold && r.points_checked == 0);
    let r = lemma1_check(3, 0.05).unwrap();
    assert!(r.all_hold && r.points_checked == r.n_star_max - 2);
    let r = lemma1_check(30, 0.1).unwrap();
    assert!(r.all_hold);
    assert_eq!(r.sampling, SamplingPolicy::Exhaustive);
    assert_eq!(r.points_checked, r.n_star_max - 30 + 1);
    let r = lemma1_check(3, 0.9).unwrap();
    assert!(r.all_hold);
    assert_eq!(r.points_checked, 0);
    assert!(r.worst_relative_margin.is_none());
}

#[test]
fn coefficient_closed_forms() {
    // x_1 at N=3 (M=2): (4v^3 - 6Mv^2 + 2(M-1)^3 + 3(M-1)^2 + M - 1) / (12 v^2)
    for &nu in &[0.3f64, 1.0, 2.5] {
        let m = 2.0;
        let want = (4.0 * nu * nu * nu - 6.0 * m * nu * nu + 2.0 + 3.0 + m - 1.0) / (12.0 * nu * nu);
        assert!((coefficient_x(3, nu, 1).unwrap() - want).abs() < 1e-14);
    }
    assert!((coefficient_x(3, 1.0, 1).unwrap() + 1.0 / 6.0).abs() < 1e-15);
    // x'_j at N=3
    for j in 0..6u32 {
        for &nu in &[0.4f64, 1.0, 1.7] {
            let jf = j as f64;
            let s = 0.5f64.powi(j as i32 + 1) + 1.5f64.powi(j as i32 + 1);
            let want = ((jf + 2.0) * s + (jf + 1.0) * nu.powi(j as i32 + 2) - 2.5 * (jf + 2.0) * nu.powi(j as i32 + 1))
                / ((jf + 2.0) * (jf + 1.0) * nu.powi(j as i32 + 1));
            assert!((coefficient_x_prime(3, nu, j).unwrap() - want).abs() < 1e-13, "j={j} nu={nu}");
        }
    }
    assert!((coefficient_x_prime(3, 1.0, 2).unwrap() - 7.0 / 12.0).abs() < 1e-15);
}

#[test]
fn coefficients_at_the_boundary() {
    let nu = Family::X.nu_limit(5);
    assert!(coefficient_x(5, nu, 3).unwrap() >= 0.0);
    // x_0 = M(M-1)/(2v) + v/2 - M vanishes at v = M - sqrt(M)
    for &n in &[3u64, 10, 101] {
        let m = (n - 1) as f64;
        let v = m - m.sqrt();
        assert!(coefficient_x(n, v, 0).unwrap().abs() < 1e-12 * m);
    }
    // x'_0 stays nonnegative up to M' - sqrt(M' - 1/4)
    for &n in &[3u64, 10, 101] {
        let m = n as f64 - 0.5;
        assert!(coefficient_x_prime(n, m - (m - 0.25).sqrt(), 0).unwrap() >= -1e-12 * m);
    }
    assert!(coefficient_x(10, 1e-3, 4).unwrap() > 1e9);
}

#[test]
fn series_matches_direct_examples() {
    for &(n, p, trials) in &[(5u64, 0.1, 20u64), (3, 0.01, 50)] {
        for family in [Family::X, Family::XPrime] {
            let direct = match family {
                Family::X => direct_x(n, p, trials).unwrap(),
                Family::XPrime => direct_x_prime(n, p, trials).unwrap(),
            };
            let series = series_partial_sum(family, n, p, trials, 30).unwrap();
            assert!((direct - series).abs() < 1e-9, "{family:?} N={n}: {direct} vs {series}");
        }
    }
}

#[test]
fn sweep_small_grid_holds() {
    let r = coefficients_nonnegative_sweep(3..=12, 10, 50).unwrap();
    assert!(r.all_hold);
    assert_eq!(r.families.len(), 2);
    for f in &r.families {
        assert_eq!(f.points_checked, 10 * 11 * 50);
        assert_eq!(f.failures, 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lhs_matches_quadrature_on_random_points(n in 3u64..40, p in 0.01f64..0.6, t in 0.0f64..1.0) {
        let top = lemma1_n_star_max(n, p).unwrap().max(n);
        let n_star = n + ((top - n) as f64 * t) as u64;
        let got = lemma1_lhs(n, p, n_star).unwrap();
        let want = ln_quad_lhs(n, p, n_star).exp();
        prop_assert!((got / want - 1.0).abs() < 1e-9, "{} vs {}", got, want);
    }

    #[test]
    fn series_matches_direct_on_random_points(n in 3u64..20, p in 0.001f64..0.1, extra in 0u64..400) {
        let trials = 4 * n + extra;
        for family in [Family::X, Family::XPrime] {
            let direct = match family {
                Family::X => direct_x(n, p, trials).unwrap(),
                Family::XPrime => direct_x_prime(n, p, trials).unwrap(),
            };
            let series = series_partial_sum(family, n, p, trials, 30).unwrap();
            prop_assert!((direct - series).abs() < 1e-9, "{:?}: {} vs {}", family, direct, series);
        }
    }

    #[test]
    fn coefficients_nonnegative_in_claimed_region(n in 3u64..400, j in 0u32..=38, t in 0.001f64..=1.0) {
        for family in [Family::X, Family::XPrime] {
            let nu = t * family.nu_limit(n);
            let v = match family {
                Family::X => coefficient_x(n, nu, j).unwrap(),
                Family::XPrime => coefficient_x_prime(n, nu, j).unwrap(),
            };
            let m = family.big_m(n);
            prop_assert!(v >= -1e-12 * m.max(1.0) || v.is_infinite(), "{:?} N={} j={} nu={}: {}", family, n, j, nu, v);
        }
    }
}
