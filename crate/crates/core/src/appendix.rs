//! Numerical certification of the integral-versus-sum inequality behind the
//! `μ1` condition, and of the nonnegativity of the power-series coefficients
//! used to prove it.
//!
//! The inequality compares, for `N ≤ n* ≤ (N − ½ − √(N − ½))/p + ½`,
//!
//! ```text
//! ∫_{N−1}^{n*} t^{N−1} e^{−pt} dt  ≥  Σ_{n=N}^{n*} (n−1)^{(N−1)} (1−p)^{n−N}
//! ```
//!
//! Multiplying both sides by `p^N/(N−1)!` turns the left side into
//! `γ(N, p n*) − γ(N, p(N−1))` and the right side into `Pr[n ≤ n*]`, which is
//! how [`lemma1_check`] evaluates it.

use std::ops::RangeInclusive;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_occurrences, check_probability, invalid, Error, Result, TERM_CAP};
use crate::specfun::{falling_factorial_log, ln_reg_gamma_diff, log_factorial, negbin_log_pmf, CompensatedSum, LogSum};

/// Relative slack allowed when comparing the two sides of an inequality.
pub const VERIFY_TOLERANCE: f64 = 1e-12;
/// Ranges of `n*` up to this length are checked exhaustively.
pub const EXHAUSTIVE_LIMIT: u64 = 100_000;
/// In subsampled ranges, every `n*` up to this value is still checked.
pub const DENSE_PREFIX: u64 = 1_000;
/// Growth factor between consecutive subsampled `n*` values.
pub const GEOMETRIC_RATIO: f64 = 1.01;
/// Largest power `j + 1` accepted by the coefficient formulas.
pub const MAX_POWER: u32 = 40;

fn check_lemma_args(occurrences: u64, p: f64) -> Result<()> {
    check_occurrences(occurrences)?;
    check_probability(p)
}

/// Left side `∫_{N−1}^{n*} t^{N−1} e^{−pt} dt`, via the incomplete gamma function.
pub fn lemma1_lhs(occurrences: u64, p: f64, n_star: u64) -> Result<f64> {
    check_lemma_args(occurrences, p)?;
    if n_star + 1 < occurrences {
        return Err(invalid(format!("n* = {n_star} is below the lower integration limit N-1 = {}", occurrences - 1)));
    }
    let n = occurrences as f64;
    let ln_diff = ln_reg_gamma_diff(occurrences, p * (n - 1.0), p * n_star as f64)?;
    Ok((log_factorial(occurrences - 1) - n * p.ln() + ln_diff).exp())
}

/// Right side `Σ_{n=N}^{n*} (n−1)^{(N−1)} (1−p)^{n−N}` (empty when `n* < N`).
pub fn lemma1_rhs(occurrences: u64, p: f64, n_star: u64) -> Result<f64> {
    check_lemma_args(occurrences, p)?;
    if n_star < occurrences {
        return Ok(0.0);
    }
    let needed = n_star - occurrences + 1;
    if needed > TERM_CAP {
        return Err(Error::TermCapExceeded { needed, cap: TERM_CAP });
    }
    let ln_q = (-p).ln_1p();
    let mut acc = LogSum::new();
    for n in occurrences..=n_star {
        let ln_term = falling_factorial_log((n - 1) as f64, occurrences - 1)? + (n - occurrences) as f64 * ln_q;
        acc.add_ln(ln_term);
    }
    Ok(acc.ln().exp())
}

/// Largest `n*` covered by the inequality: `⌊(N − ½ − √(N − ½))/p + ½⌋`.
pub fn lemma1_n_star_max(occurrences: u64, p: f64) -> Result<u64> {
    check_lemma_args(occurrences, p)?;
    let h = occurrences as f64 - 0.5;
    let v = ((h - h.sqrt()) / p + 0.5).floor();
    if v >= u64::MAX as f64 {
        return Err(Error::Overflow(v));
    }
    Ok(v as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplingPolicy {
    Exhaustive,
    /// Every `n* ≤ dense_prefix`, then `n*` growing by `ratio`, then `n_star_max`.
    Geometric {
        dense_prefix: u64,
        ratio: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaReport {
    #[serde(rename = "N")]
    pub occurrences: u64,
    pub p: f64,
    pub n_star_max: u64,
    pub points_checked: u64,
    /// `lhs/rhs − 1` at the tightest checked `n*`; `None` when the range is empty.
    pub worst_relative_margin: Option<f64>,
    pub worst_n_star: Option<u64>,
    pub all_hold: bool,
    pub sampling: SamplingPolicy,
}

/// Checks the integral-versus-sum inequality for every admissible `n*`.
pub fn lemma1_check(occurrences: u64, p: f64) -> Result<LemmaReport> {
    let n_star_max = lemma1_n_star_max(occurrences, p)?;
    let mut report = LemmaReport {
        occurrences,
        p,
        n_star_max,
        points_checked: 0,
        worst_relative_margin: None,
        worst_n_star: None,
        all_hold: true,
        sampling: SamplingPolicy::Exhaustive,
    };
    if n_star_max < occurrences {
        return Ok(report);
    }
    let span = n_star_max - occurrences + 1;
    if span > TERM_CAP {
        return Err(Error::TermCapExceeded { needed: span, cap: TERM_CAP });
    }
    if span > EXHAUSTIVE_LIMIT {
        report.sampling = SamplingPolicy::Geometric { dense_prefix: DENSE_PREFIX, ratio: GEOMETRIC_RATIO };
    }

    let lower = p * (occurrences - 1) as f64;
    let mut rhs = LogSum::new();
    let mut next_sample = DENSE_PREFIX as f64;
    for n_star in occurrences..=n_star_max {
        rhs.add_ln(negbin_log_pmf(n_star, occurrences, p)?);
        let checked = match report.sampling {
            SamplingPolicy::Exhaustive => true,
            SamplingPolicy::Geometric { .. } => {
                if n_star <= DENSE_PREFIX || n_star == n_star_max {
                    true
                } else if n_star as f64 >= next_sample {
                    while next_sample <= n_star as f64 {
                        next_sample *= GEOMETRIC_RATIO;
                    }
                    true
                } else {
                    false
                }
            }
        };
        if !checked {
            continue;
        }
        let ln_lhs = ln_reg_gamma_diff(occurrences, lower, p * n_star as f64)?;
        let margin = (ln_lhs - rhs.ln()).exp_m1();
        report.points_checked += 1;
        if report.worst_relative_margin.is_none_or(|w| margin < w) {
            report.worst_relative_margin = Some(margin);
            report.worst_n_star = Some(n_star);
        }
    }
    report.all_hold = report.worst_relative_margin.is_none_or(|w| w >= -VERIFY_TOLERANCE);
    Ok(report)
}

/// Which of the two coefficient families a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `x_j`, with `M = N − 1` and power sums of `i − 1`.
    X,
    /// `x′_j`, with `M′ = N − ½` and power sums of `i − ½`.
    XPrime,
}

impl Family {
    pub fn big_m(self, occurrences: u64) -> f64 {
        match self {
            Family::X => (occurrences - 1) as f64,
            Family::XPrime => occurrences as f64 - 0.5,
        }
    }

    /// Right end `M − √M` of the `ν` range on which the coefficients are claimed nonnegative.
    pub fn nu_limit(self, occurrences: u64) -> f64 {
        let m = self.big_m(occurrences);
        m - m.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientPoint {
    #[serde(rename = "N")]
    pub occurrences: u64,
    pub j: u32,
    pub nu: f64,
    pub family: Family,
    pub value: f64,
}

fn check_coefficient_args(occurrences: u64, nu: f64, j: u32) -> Result<()> {
    check_occurrences(occurrences)?;
    if !(nu > 0.0) {
        return Err(invalid(format!("nu must be positive, got {nu}")));
    }
    if j + 1 > MAX_POWER {
        return Err(invalid(format!("power j+1 = {} exceeds the supported maximum {MAX_POWER}", j + 1)));
    }
    Ok(())
}

/// `Σ_{i=1}^{N−1} (i−1)^{j+1}` or `Σ_{i=1}^{N−1} (i−½)^{j+1}`, summed exactly.
pub fn power_sum(family: Family, occurrences: u64, j: u32) -> f64 {
    let power = j + 1;
    let mut sum = BigUint::zero();
    for i in 1..occurrences {
        let base = match family {
            Family::X => i - 1,
            Family::XPrime => 2 * i - 1,
        };
        sum += BigUint::from(base).pow(power);
    }
    let value = sum.to_f64().unwrap_or(f64::INFINITY);
    match family {
        Family::X => value,
        // (2i-1)^{j+1} / 2^{j+1}; scaling by a power of two is exact
        Family::XPrime => value * 0.5f64.powi(power as i32),
    }
}

/// Coefficient value and the magnitude of its largest term.
fn coefficient_terms(family: Family, occurrences: u64, nu: f64, j: u32, sum: f64) -> (f64, f64) {
    let jf = j as f64;
    let first = sum / ((jf + 1.0) * nu.powi(j as i32 + 1));
    let second = nu / (jf + 2.0);
    let third = family.big_m(occurrences) / (jf + 1.0);
    let mut acc = CompensatedSum::new();
    acc.add(first);
    acc.add(second);
    acc.add(-third);
    (acc.value(), first.abs().max(second).max(third))
}

/// `x_j = Σ_{i=1}^{N−1} (i−1)^{j+1} / ((j+1) ν^{j+1}) + ν/(j+2) − M/(j+1)`.
pub fn coefficient_x(occurrences: u64, nu: f64, j: u32) -> Result<f64> {
    check_coefficient_args(occurrences, nu, j)?;
    let sum = power_sum(Family::X, occurrences, j);
    Ok(coefficient_terms(Family::X, occurrences, nu, j, sum).0)
}

/// `x′_j = Σ_{i=1}^{N−1} (i−½)^{j+1} / ((j+1) ν′^{j+1}) + ν′/(j+2) − M′/(j+1)`.
pub fn coefficient_x_prime(occurrences: u64, nu_prime: f64, j: u32) -> Result<f64> {
    check_coefficient_args(occurrences, nu_prime, j)?;
    let sum = power_sum(Family::XPrime, occurrences, j);
    Ok(coefficient_terms(Family::XPrime, occurrences, nu_prime, j, sum).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilySweep {
    pub family: Family,
    pub points_checked: u64,
    pub failures: u64,
    /// Most negative `value / scale` seen (zero or positive when all hold).
    pub worst_relative: f64,
    pub worst: CoefficientPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub n_min: u64,
    pub n_max: u64,
    pub j_max: u32,
    pub grid_density: u32,
    pub families: Vec<FamilySweep>,
    pub all_hold: bool,
}

/// Evaluates both coefficient families on a uniform `ν` grid over `(0, M − √M]`.
///
/// A point fails when its value is below `−1e-12` times its largest term.
pub fn coefficients_nonnegative_sweep(
    n_range: RangeInclusive<u64>,
    j_max: u32,
    grid_density: u32,
) -> Result<SweepReport> {
    let (n_min, n_max) = (*n_range.start(), *n_range.end());
    if n_min < 3 || n_max > 1000 || n_min > n_max {
        return Err(invalid(format!("N range must be a non-empty subset of [3, 1000], got {n_min}..={n_max}")));
    }
    if j_max + 1 > MAX_POWER {
        return Err(invalid(format!("j_max must be at most {}, got {j_max}", MAX_POWER - 1)));
    }
    if grid_density == 0 {
        return Err(invalid("grid density must be at least 1"));
    }

    let mut families = Vec::new();
    for family in [Family::X, Family::XPrime] {
        let cells: Vec<(u64, u32)> = n_range.clone().flat_map(|n| (0..=j_max).map(move |j| (n, j))).collect();
        // (worst relative, worst point, failures) per (N, j) cell, in cell order
        let per_cell: Vec<(f64, CoefficientPoint, u64)> =
            cells.par_iter().map(|&(n, j)| sweep_cell(family, n, j, grid_density)).collect();
        let mut summary = FamilySweep {
            family,
            points_checked: cells.len() as u64 * grid_density as u64,
            failures: 0,
            worst_relative: f64::INFINITY,
            worst: per_cell[0].1,
        };
        for (rel, point, failures) in per_cell {
            summary.failures += failures;
            if rel < summary.worst_relative {
                summary.worst_relative = rel;
                summary.worst = point;
            }
        }
        families.push(summary);
    }
    let all_hold = families.iter().all(|f| f.failures == 0);
    Ok(SweepReport { n_min, n_max, j_max, grid_density, families, all_hold })
}

fn sweep_cell(family: Family, occurrences: u64, j: u32, density: u32) -> (f64, CoefficientPoint, u64) {
    let sum = power_sum(family, occurrences, j);
    let limit = family.nu_limit(occurrences);
    let mut worst = (f64::INFINITY, None, 0u64);
    for k in 1..=density {
        let nu = limit * k as f64 / density as f64;
        let (value, scale) = coefficient_terms(family, occurrences, nu, j, sum);
        let rel = value / scale;
        if value < -VERIFY_TOLERANCE * scale {
            worst.2 += 1;
        }
        if rel < worst.0 {
            worst.0 = rel;
            worst.1 = Some(CoefficientPoint { occurrences, j, nu, family, value });
        }
    }
    (worst.0, worst.1.expect("density >= 1"), worst.2)
}

fn check_direct_args(occurrences: u64, p: f64, n: u64) -> Result<()> {
    check_lemma_args(occurrences, p)?;
    if n < occurrences {
        return Err(invalid(format!("n = {n} gives a non-positive logarithm argument (need n >= N = {occurrences})")));
    }
    Ok(())
}

/// `x = (1/p) ln[(n−1)^{N−1} e^{−(n−1)p} / ((n−1)^{(N−1)} (1−p)^{n−N})]`.
pub fn direct_x(occurrences: u64, p: f64, n: u64) -> Result<f64> {
    check_direct_args(occurrences, p, n)?;
    let denom = (n - 1) as f64;
    let mut acc = CompensatedSum::new();
    for i in 1..occurrences {
        acc.add(-((-((i - 1) as f64) / denom).ln_1p()) / p);
    }
    acc.add(-((n - occurrences) as f64 / p) * (-p).ln_1p());
    acc.add(-denom);
    Ok(acc.value())
}

/// `x′ = (1/p) ln[(n−½)^{N−1} e^{−(n−½)p} / ((n−1)^{(N−1)} (1−p)^{n−N})]`.
pub fn direct_x_prime(occurrences: u64, p: f64, n: u64) -> Result<f64> {
    check_direct_args(occurrences, p, n)?;
    let denom = n as f64 - 0.5;
    let mut acc = CompensatedSum::new();
    for i in 1..occurrences {
        acc.add(-((-(i as f64 - 0.5) / denom).ln_1p()) / p);
    }
    acc.add(-((n - occurrences) as f64 / p) * (-p).ln_1p());
    acc.add(-denom);
    Ok(acc.value())
}

/// Partial sum `Σ_{j=0}^{J} c_j(ν) p^j` of the series for `x` (or `x′`).
pub fn series_partial_sum(family: Family, occurrences: u64, p: f64, n: u64, j_last: u32) -> Result<f64> {
    check_direct_args(occurrences, p, n)?;
    let nu = match family {
        Family::X => (n - 1) as f64 * p,
        Family::XPrime => (n as f64 - 0.5) * p,
    };
    let mut acc = CompensatedSum::new();
    let mut p_pow = 1.0;
    for j in 0..=j_last {
        check_coefficient_args(occurrences, nu, j)?;
        let sum = power_sum(family, occurrences, j);
        acc.add(coefficient_terms(family, occurrences, nu, j, sum).0 * p_pow);
        p_pow *= p;
    }
    Ok(acc.value())
}
