//! Negative-binomial Monte Carlo estimation of an event probability.
//!
//! Trials are run until `N` occurrences of the event are seen; with `n` the
//! number of trials, `p̂ = (N−1)/n` estimates `p`. For factors `μ1, μ2 > 1`
//! the probability that `p/μ2 ≤ p̂ ≤ p·μ1` tends to
//! `c̄ = γ(N, (N−1)μ2) − γ(N, (N−1)/μ1)` as `p → 0`, and it exceeds `c̄` for
//! every `p` whenever `μ2 ≥ (N+√N)/(N−1)` and `μ1 ≥ (N−1)/(N−½−√(N−½))`.
//!
//! - [`specfun`]: integer-order incomplete gamma and negative-binomial pmf/cdf.
//! - [`rule`]: `c̄`, the sufficient conditions, planners and the estimator.
//! - [`exact`]: exact confidence for a given `p`.
//! - [`appendix`]: numerical certification of the supporting inequalities.
//! - [`engine`]: trial sources, sequential sessions, coverage experiments.

pub mod appendix;
pub mod engine;
pub mod error;
pub mod exact;
pub mod rule;
pub mod specfun;

pub use appendix::{
    coefficient_x, coefficient_x_prime, coefficients_nonnegative_sweep, direct_x, lemma1_check, lemma1_lhs, lemma1_rhs,
    CoefficientPoint, Family, LemmaReport, SamplingPolicy, SweepReport,
};
pub use engine::{
    coverage_experiment, make_synthetic_source, run_until_stop, CoverageReport, Outcome, ReplaySource, RunOutcome,
    SessionRecord, SessionStatus, SourceKind, SyntheticSource, TrialSource,
};
pub use error::{Error, Result, TERM_CAP};
pub use exact::{exact_confidence, interval_bounds, proposition_holds, ExactConfidence, PropositionCheck};
pub use rule::{
    achievable_curves, asymptotic_confidence, check_conditions_legacy, check_conditions_new, confidence_interval,
    estimate, min_margin, min_margin_for_confidence, min_n_for, min_n_for_factors, ConditionReport, ConfidenceInterval,
    CurvePoint, EstimationResult, PCondition, RuleVersion, StoppingPlan,
};
pub use specfun::{
    falling_factorial_log, log_factorial, negbin_cdf, negbin_log_pmf, reg_lower_incomplete_gamma, LogProb,
};
