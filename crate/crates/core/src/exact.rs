//! Exact confidence of the relative interval for a concrete `p`.
//!
//! The event `p/μ2 ≤ p̂ ≤ p·μ1` is `n̆1 ≤ n ≤ n̆2` with
//! `n̆1 = ⌈(N−1)/(p μ1)⌉` and `n̆2 = ⌊(N−1) μ2/p⌋`, so the confidence is a
//! difference of two negative-binomial cdf values.

use serde::Serialize;

use crate::error::{check_factor, check_occurrences, check_probability, Error, Result};
use crate::rule::{asymptotic_confidence, check_conditions_new};
use crate::specfun::{negbin_cdf_at, reg_lower_incomplete_gamma, reg_upper_incomplete_gamma};

/// Real values within this many units in the last place of an integer are
/// treated as that integer before taking the floor or ceiling.
pub const SNAP_ULPS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactConfidence {
    #[serde(rename = "N")]
    pub occurrences: u64,
    pub p: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub n1: u64,
    pub n2: u64,
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
    pub c_bar: f64,
    pub c1_bar: f64,
    pub c2_bar: f64,
    /// `n̆2 < N`: the interval lies entirely below the support of `n`.
    pub below_support: bool,
}

impl ExactConfidence {
    pub fn margin(&self) -> f64 {
        self.c - self.c_bar
    }
}

fn ulp(x: f64) -> f64 {
    let x = x.abs();
    x.next_up() - x
}

/// Nearest integer to `x` if `x` lies within [`SNAP_ULPS`] ulps of it.
fn snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP_ULPS * ulp(r) {
        r
    } else {
        x
    }
}

fn to_count(x: f64) -> Result<u64> {
    // u64::MAX as f64 rounds up to 2^64
    if !x.is_finite() || x >= u64::MAX as f64 {
        return Err(Error::Overflow(x));
    }
    Ok(x as u64)
}

/// `(n̆1, n̆2)` for the interval `[p/μ2, p μ1]`.
pub fn interval_bounds(occurrences: u64, p: f64, mu1: f64, mu2: f64) -> Result<(u64, u64)> {
    check_occurrences(occurrences)?;
    check_probability(p)?;
    check_factor("mu1", mu1)?;
    check_factor("mu2", mu2)?;
    let m = (occurrences - 1) as f64;
    let n1 = to_count(snapped(m / (p * mu1)).ceil())?;
    let n2 = to_count(snapped(m * mu2 / p).floor())?;
    Ok((n1, n2))
}

/// Exact `c1`, `c2`, `c` together with their `p → 0` limits.
pub fn exact_confidence(occurrences: u64, p: f64, mu1: f64, mu2: f64) -> Result<ExactConfidence> {
    let (n1, n2) = interval_bounds(occurrences, p, mu1, mu2)?;
    let below_support = n2 < occurrences;

    // n1 <= n2 + 1 whenever mu1 * mu2 > 1; the min only guards rounding extremes
    let lower_k = n1.saturating_sub(1).min(n2);
    let cdf = negbin_cdf_at(occurrences, p, &[lower_k, n2])?;
    let (c1, cdf_n2) = (cdf[0], cdf[1]);
    let c = if below_support { 0.0 } else { (cdf_n2 - c1).clamp(0.0, 1.0) };

    let m = (occurrences - 1) as f64;
    Ok(ExactConfidence {
        occurrences,
        p,
        mu1,
        mu2,
        n1,
        n2,
        c1,
        c2: 1.0 - cdf_n2,
        c,
        c_bar: asymptotic_confidence(occurrences, mu1, mu2)?,
        c1_bar: reg_lower_incomplete_gamma(occurrences, m / mu1)?,
        c2_bar: reg_upper_incomplete_gamma(occurrences, m * mu2)?,
        below_support,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropositionCheck {
    pub holds: bool,
    pub margin: f64,
    pub exact: ExactConfidence,
}

/// Evaluates `c > c̄` at a point where the all-`p` sufficient conditions hold.
///
/// Fails with [`Error::PreconditionViolated`] when they do not, since the
/// comparison then carries no guarantee either way.
pub fn proposition_holds(occurrences: u64, p: f64, mu1: f64, mu2: f64) -> Result<PropositionCheck> {
    check_occurrences(occurrences)?;
    let report = check_conditions_new(occurrences, mu1, mu2);
    if !report.all_ok() {
        return Err(Error::PreconditionViolated(format!(
            "need mu1 >= {} and mu2 >= {} at N={occurrences}, got mu1={mu1}, mu2={mu2}",
            report.mu1_bound, report.mu2_bound
        )));
    }
    let exact = exact_confidence(occurrences, p, mu1, mu2)?;
    let margin = exact.margin();
    Ok(PropositionCheck { holds: exact.c > exact.c_bar, margin, exact })
}
