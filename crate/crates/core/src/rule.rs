//! The stopping rule: run trials until `N` occurrences, estimate `p̂ = (N−1)/n`.
//!
//! This module holds the asymptotic confidence `c̄`, the sufficient conditions
//! under which `c̄` is a guaranteed lower bound on the confidence for every
//! `p`, the older conditions that additionally restrict `p`, and the planners
//! that pick a margin or an `N`.

use serde::Serialize;

use crate::error::{check_factor, check_occurrences, check_probability, invalid, Error, Result};
use crate::specfun::reg_gamma_diff;

/// Upper end of the margin bracket searched by [`min_margin_for_confidence`].
pub const MARGIN_SEARCH_MAX: f64 = 1e3;
/// Absolute tolerance of the margin bisection.
pub const MARGIN_TOLERANCE: f64 = 1e-6;
/// Default upper limit on `N` for [`min_n_for`].
pub const DEFAULT_MAX_N: u64 = 1_000_000;

/// Parameters of the rule together with the confidence they guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppingPlan {
    #[serde(rename = "N")]
    occurrences: u64,
    mu1: f64,
    mu2: f64,
    c_bar: f64,
}

impl StoppingPlan {
    pub fn new(occurrences: u64, mu1: f64, mu2: f64) -> Result<Self> {
        let c_bar = asymptotic_confidence(occurrences, mu1, mu2)?;
        Ok(StoppingPlan { occurrences, mu1, mu2, c_bar })
    }

    /// Plan with `μ1 = μ2 = 1 + m`.
    pub fn symmetric(occurrences: u64, margin: f64) -> Result<Self> {
        Self::new(occurrences, 1.0 + margin, 1.0 + margin)
    }

    pub fn occurrences(&self) -> u64 {
        self.occurrences
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn c_bar(&self) -> f64 {
        self.c_bar
    }

    pub fn conditions(&self) -> ConditionReport {
        check_conditions_new(self.occurrences, self.mu1, self.mu2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleVersion {
    New,
    Legacy,
}

/// Status of the restriction on `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum PCondition {
    NotApplicable,
    Checked { ok: bool, bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    pub rule_version: RuleVersion,
    pub mu1_ok: bool,
    pub mu2_ok: bool,
    pub p_ok: PCondition,
    pub mu1_bound: f64,
    pub mu2_bound: f64,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        let p_ok = match self.p_ok {
            PCondition::NotApplicable => true,
            PCondition::Checked { ok, .. } => ok,
        };
        self.mu1_ok && self.mu2_ok && p_ok
    }
}

/// `c̄ = γ(N, (N−1)μ2) − γ(N, (N−1)/μ1)`.
pub fn asymptotic_confidence(occurrences: u64, mu1: f64, mu2: f64) -> Result<f64> {
    check_occurrences(occurrences)?;
    check_factor("mu1", mu1)?;
    check_factor("mu2", mu2)?;
    let m = (occurrences - 1) as f64;
    reg_gamma_diff(occurrences, m / mu1, m * mu2)
}

/// Smallest `μ2` accepted by both rules: `(N + √N)/(N − 1)`.
pub fn mu2_bound(occurrences: u64) -> f64 {
    let n = occurrences as f64;
    (n + n.sqrt()) / (n - 1.0)
}

/// Smallest `μ1` accepted by the rule valid for all `p`: `(N−1)/(N − ½ − √(N − ½))`.
pub fn mu1_bound(occurrences: u64) -> f64 {
    let n = occurrences as f64;
    (n - 1.0) / (n - 0.5 - (n - 0.5).sqrt())
}

/// Smallest `μ1` accepted by the legacy rule: `(N−1)/(N − √(3N/2))`.
pub fn legacy_mu1_bound(occurrences: u64) -> f64 {
    let n = occurrences as f64;
    (n - 1.0) / (n - (1.5 * n).sqrt())
}

/// Legacy restriction on `p`: `p < (N−1)/(⌈7N/2 − 1⌉ μ1)`.
pub fn legacy_p_bound(occurrences: u64, mu1: f64) -> f64 {
    // ceil(7N/2 - 1) = floor((7N - 1)/2) for integer N
    let ceil_term = (7 * occurrences - 1) / 2;
    (occurrences - 1) as f64 / (ceil_term as f64 * mu1)
}

/// Conditions under which `c > c̄` holds for every `p ∈ (0, 1)`.
///
/// Comparisons are inclusive and exact; no tolerance is applied.
pub fn check_conditions_new(occurrences: u64, mu1: f64, mu2: f64) -> ConditionReport {
    let (b1, b2) = (mu1_bound(occurrences), mu2_bound(occurrences));
    ConditionReport {
        rule_version: RuleVersion::New,
        mu1_ok: mu1 >= b1,
        mu2_ok: mu2 >= b2,
        p_ok: PCondition::NotApplicable,
        mu1_bound: b1,
        mu2_bound: b2,
    }
}

/// The older conditions, which also require `p` to be small.
pub fn check_conditions_legacy(occurrences: u64, mu1: f64, mu2: f64, p: f64) -> ConditionReport {
    let (b1, b2) = (legacy_mu1_bound(occurrences), mu2_bound(occurrences));
    let p_bound = legacy_p_bound(occurrences, mu1);
    ConditionReport {
        rule_version: RuleVersion::Legacy,
        mu1_ok: mu1 >= b1,
        mu2_ok: mu2 >= b2,
        p_ok: PCondition::Checked { ok: p < p_bound, bound: p_bound },
        mu1_bound: b1,
        mu2_bound: b2,
    }
}

/// Smallest symmetric margin the conditions allow at `N`: `(√N + 1)/(N − 1)`.
///
/// With `μ1 = μ2 = 1 + m` the `μ2` condition is the binding one.
pub fn min_margin(occurrences: u64) -> f64 {
    let n = occurrences as f64;
    (n.sqrt() + 1.0) / (n - 1.0)
}

/// Smallest `N ≥ 3` whose margin bound admits `m`.
pub fn min_occurrences_for_margin(margin: f64) -> Result<u64> {
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(invalid(format!("margin must be positive and finite, got {margin}")));
    }
    // (sqrt(N)+1)/(N-1) <= m  <=>  sqrt(N) >= (1+m)/m; start below the root and adjust
    let s = (1.0 + margin) / margin;
    let mut n = ((s * s).floor() as u64).saturating_sub(2).max(3);
    while n > 3 && min_margin(n - 1) <= margin {
        n -= 1;
    }
    while min_margin(n) > margin {
        n += 1;
    }
    Ok(n)
}

/// Smallest symmetric margin `m ≥ min_margin(N)` with `c̄(N, 1+m, 1+m) > c_target`.
///
/// Bisection over `[min_margin(N), 10³]`; the returned value satisfies the
/// target and lies within [`MARGIN_TOLERANCE`] of the threshold.
pub fn min_margin_for_confidence(occurrences: u64, c_target: f64) -> Result<f64> {
    check_occurrences(occurrences)?;
    if !(c_target > 0.0 && c_target < 1.0) {
        return Err(invalid(format!("target confidence must lie in (0, 1), got {c_target}")));
    }
    let c_sym = |m: f64| asymptotic_confidence(occurrences, 1.0 + m, 1.0 + m);
    let mut lo = min_margin(occurrences);
    if c_sym(lo)? > c_target {
        return Ok(lo);
    }
    let mut hi = MARGIN_SEARCH_MAX;
    if c_sym(hi)? <= c_target {
        return Err(Error::Unachievable(format!(
            "confidence {c_target} is not reached with N={occurrences} for any margin up to {MARGIN_SEARCH_MAX}"
        )));
    }
    while hi - lo > MARGIN_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if c_sym(mid)? > c_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest `N ≥ 3` with `m ≥ min_margin(N)` and `c̄(N, 1+m, 1+m) > c_target`.
///
/// Scans upward one `N` at a time up to `max_occurrences`.
pub fn min_n_for(margin: f64, c_target: f64, max_occurrences: u64) -> Result<u64> {
    if !(c_target > 0.0 && c_target < 1.0) {
        return Err(invalid(format!("target confidence must lie in (0, 1), got {c_target}")));
    }
    let start = min_occurrences_for_margin(margin)?;
    for n in start..=max_occurrences {
        if min_margin(n) <= margin && asymptotic_confidence(n, 1.0 + margin, 1.0 + margin)? > c_target {
            return Ok(n);
        }
    }
    Err(Error::Unachievable(format!("no N <= {max_occurrences} certifies margin {margin} at confidence {c_target}")))
}

/// Smallest `N ≥ 3` meeting the `μ` conditions of `rule` with `c̄(N, μ1, μ2) > c_target`.
///
/// The `p` restriction of the legacy rule is not part of the search; callers
/// report it at the returned `N` via [`legacy_p_bound`].
pub fn min_n_for_factors(mu1: f64, mu2: f64, c_target: f64, rule: RuleVersion, max_occurrences: u64) -> Result<u64> {
    check_factor("mu1", mu1)?;
    check_factor("mu2", mu2)?;
    if !(c_target > 0.0 && c_target < 1.0) {
        return Err(invalid(format!("target confidence must lie in (0, 1), got {c_target}")));
    }
    let admits = |n: u64| {
        let report = match rule {
            RuleVersion::New => check_conditions_new(n, mu1, mu2),
            RuleVersion::Legacy => check_conditions_legacy(n, mu1, mu2, 0.0),
        };
        report.mu1_ok && report.mu2_ok
    };
    if max_occurrences < 3 || !admits(max_occurrences) {
        return Err(Error::Unachievable(format!(
            "mu1={mu1}, mu2={mu2} do not meet the {rule:?} conditions for any N <= {max_occurrences}"
        )));
    }
    // both bounds decrease in N: bisect for the first admitted N
    let (mut lo, mut hi) = (3, max_occurrences);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if admits(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    for n in lo..=max_occurrences {
        if asymptotic_confidence(n, mu1, mu2)? > c_target {
            return Ok(n);
        }
    }
    Err(Error::Unachievable(format!(
        "no N <= {max_occurrences} reaches confidence {c_target} with mu1={mu1}, mu2={mu2}"
    )))
}

/// Point estimate `p̂ = (N − 1)/n`.
pub fn estimate(trials: u64, occurrences: u64) -> Result<f64> {
    check_occurrences(occurrences)?;
    if trials < occurrences {
        return Err(invalid(format!("trial count {trials} is below the number of occurrences {occurrences}")));
    }
    Ok((occurrences - 1) as f64 / trials as f64)
}

/// Interval `[p̂/μ1, p̂·μ2]` for `p`; the upper end is clamped to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub upper_clamped: bool,
}

/// `p/μ2 ≤ p̂ ≤ p·μ1` rearranged for `p`. Factors may equal 1 (degenerate interval).
pub fn confidence_interval_for(p_hat: f64, mu1: f64, mu2: f64) -> Result<ConfidenceInterval> {
    check_probability(p_hat)?;
    if mu1.is_nan() || mu1 < 1.0 || mu2.is_nan() || mu2 < 1.0 {
        return Err(invalid(format!("interval factors must be >= 1, got {mu1}, {mu2}")));
    }
    let high = p_hat * mu2;
    Ok(ConfidenceInterval { low: p_hat / mu1, high: high.min(1.0), upper_clamped: high > 1.0 })
}

pub fn confidence_interval(p_hat: f64, plan: &StoppingPlan) -> Result<ConfidenceInterval> {
    confidence_interval_for(p_hat, plan.mu1, plan.mu2)
}

/// Outcome of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimationResult {
    pub trials: u64,
    #[serde(rename = "N")]
    pub occurrences: u64,
    pub p_hat: f64,
    pub interval: ConfidenceInterval,
    pub plan: StoppingPlan,
}

impl EstimationResult {
    pub fn from_trials(trials: u64, plan: StoppingPlan) -> Result<Self> {
        let p_hat = estimate(trials, plan.occurrences)?;
        Ok(EstimationResult {
            trials,
            occurrences: plan.occurrences,
            p_hat,
            interval: confidence_interval(p_hat, &plan)?,
            plan,
        })
    }
}

/// One row of the guaranteed-confidence figure data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: f64,
    #[serde(rename = "N")]
    pub occurrences: u64,
    pub c_bar: f64,
    pub is_min_curve: bool,
}

/// Fixed-`N` curves over `m ≥ min_margin(N)` and the minimum-guarantee curve.
///
/// Each fixed-`N` curve starts exactly at `min_margin(N)`, followed by the grid
/// values above it. The minimum curve uses, for each grid `m`, the smallest `N`
/// whose margin bound admits `m`.
pub fn achievable_curves(m_grid: &[f64], n_grid: &[u64]) -> Result<Vec<CurvePoint>> {
    if m_grid.is_empty() || n_grid.is_empty() {
        return Err(invalid("curve grids must not be empty"));
    }
    let mut rows = Vec::new();
    for &n in n_grid {
        check_occurrences(n)?;
        let start = min_margin(n);
        let ms = std::iter::once(start).chain(m_grid.iter().copied().filter(|&m| m > start));
        for m in ms {
            rows.push(CurvePoint {
                m,
                occurrences: n,
                c_bar: asymptotic_confidence(n, 1.0 + m, 1.0 + m)?,
                is_min_curve: false,
            });
        }
    }
    for &m in m_grid {
        let n = min_occurrences_for_margin(m)?;
        rows.push(CurvePoint {
            m,
            occurrences: n,
            c_bar: asymptotic_confidence(n, 1.0 + m, 1.0 + m)?,
            is_min_curve: true,
        });
    }
    Ok(rows)
}
