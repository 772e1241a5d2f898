//! Sequential execution of the stopping rule against a stream of trial
//! outcomes, and repeated-run coverage experiments.

use std::io::BufRead;

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_probability, invalid, Error, Result};
use crate::exact::{exact_confidence, ExactConfidence};
use crate::rule::{check_conditions_new, EstimationResult, StoppingPlan};

/// Name and version of the generator behind [`SyntheticSource`]. Golden values
/// in tests are tied to this string.
pub const GENERATOR: &str = "chacha8/rand_chacha-0.9/bernoulli-rand-0.9";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Occurred,
    NotOccurred,
    Exhausted,
}

/// A pull-based stream of trial outcomes.
pub trait TrialSource {
    fn next_outcome(&mut self) -> Result<Outcome>;
}

impl<S: TrialSource + ?Sized> TrialSource for &mut S {
    fn next_outcome(&mut self) -> Result<Outcome> {
        (**self).next_outcome()
    }
}

/// Infinite stream of independent Bernoulli(`p`) outcomes.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    rng: ChaCha8Rng,
    coin: Bernoulli,
    seed: u64,
}

impl SyntheticSource {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        Self::with_stream(p, seed, 0)
    }

    /// Independent sub-stream `stream` of the generator seeded by `seed`.
    pub fn with_stream(p: f64, seed: u64, stream: u64) -> Result<Self> {
        check_probability(p)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let coin = Bernoulli::new(p).map_err(|e| invalid(e.to_string()))?;
        Ok(SyntheticSource { rng, coin, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

pub fn make_synthetic_source(p: f64, seed: u64) -> Result<SyntheticSource> {
    SyntheticSource::new(p, seed)
}

impl TrialSource for SyntheticSource {
    fn next_outcome(&mut self) -> Result<Outcome> {
        Ok(if self.coin.sample(&mut self.rng) { Outcome::Occurred } else { Outcome::NotOccurred })
    }
}

/// Outcomes read from newline-delimited text: `1` occurred, `0` did not.
///
/// Blank lines and lines starting with `#` are skipped. Anything else is a
/// format error carrying the 1-based line number.
#[derive(Debug)]
pub struct ReplaySource<R> {
    reader: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> ReplaySource<R> {
    pub fn new(reader: R) -> Self {
        ReplaySource { reader, line_no: 0, buf: String::new() }
    }
}

impl<R: BufRead> TrialSource for ReplaySource<R> {
    fn next_outcome(&mut self) -> Result<Outcome> {
        loop {
            self.buf.clear();
            if self.reader.read_line(&mut self.buf)? == 0 {
                return Ok(Outcome::Exhausted);
            }
            self.line_no += 1;
            let line = self.buf.trim();
            match line {
                "" => continue,
                "0" => return Ok(Outcome::NotOccurred),
                "1" => return Ok(Outcome::Occurred),
                _ if line.starts_with('#') => continue,
                _ => {
                    return Err(Error::Format {
                        line: self.line_no,
                        message: format!("expected 0 or 1, found {line:?}"),
                    })
                }
            }
        }
    }
}

/// Replays a fixed slice of outcomes, then reports exhaustion.
#[derive(Debug, Clone)]
pub struct SliceSource<'a> {
    outcomes: &'a [bool],
    pos: usize,
}

impl<'a> SliceSource<'a> {
    pub fn new(outcomes: &'a [bool]) -> Self {
        SliceSource { outcomes, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl TrialSource for SliceSource<'_> {
    fn next_outcome(&mut self) -> Result<Outcome> {
        match self.outcomes.get(self.pos) {
            Some(&hit) => {
                self.pos += 1;
                Ok(if hit { Outcome::Occurred } else { Outcome::NotOccurred })
            }
            None => Ok(Outcome::Exhausted),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Running,
    Stopped,
    Exhausted,
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Synthetic,
    Stream,
    Replay,
}

/// State of one sequential run. Capped or exhausted sessions can be resumed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionRecord {
    pub plan: StoppingPlan,
    pub trials: u64,
    pub successes: u64,
    pub status: SessionStatus,
    pub seed: Option<u64>,
    pub source_kind: SourceKind,
    pub generator: Option<&'static str>,
}

impl SessionRecord {
    pub fn new(plan: StoppingPlan, source_kind: SourceKind, seed: Option<u64>) -> Self {
        SessionRecord {
            plan,
            trials: 0,
            successes: 0,
            status: SessionStatus::Running,
            seed,
            source_kind,
            generator: (source_kind == SourceKind::Synthetic).then_some(GENERATOR),
        }
    }

    /// Pulls outcomes until the `N`-th occurrence, exhaustion, or `max_trials`
    /// total trials. Never reads past the stopping outcome.
    pub fn advance<S: TrialSource>(&mut self, source: &mut S, max_trials: Option<u64>) -> Result<SessionStatus> {
        if self.status == SessionStatus::Stopped {
            return Ok(self.status);
        }
        self.status = SessionStatus::Running;
        let target = self.plan.occurrences();
        while self.successes < target {
            if max_trials.is_some_and(|cap| self.trials >= cap) {
                self.status = SessionStatus::Capped;
                return Ok(self.status);
            }
            match source.next_outcome()? {
                Outcome::Occurred => {
                    self.trials += 1;
                    self.successes += 1;
                }
                Outcome::NotOccurred => self.trials += 1,
                Outcome::Exhausted => {
                    self.status = SessionStatus::Exhausted;
                    return Ok(self.status);
                }
            }
        }
        self.status = SessionStatus::Stopped;
        Ok(self.status)
    }

    pub fn result(&self) -> Option<EstimationResult> {
        if self.status != SessionStatus::Stopped {
            return None;
        }
        EstimationResult::from_trials(self.trials, self.plan).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunOutcome {
    Stopped(EstimationResult),
    Partial(SessionRecord),
}

/// Runs the rule on `source` with a fresh session.
pub fn run_until_stop<S: TrialSource>(
    plan: StoppingPlan,
    source: &mut S,
    source_kind: SourceKind,
    seed: Option<u64>,
    max_trials: Option<u64>,
) -> Result<(RunOutcome, SessionRecord)> {
    if let Some(cap) = max_trials {
        if cap < plan.occurrences() {
            return Err(invalid(format!("max_trials {cap} is below N = {}", plan.occurrences())));
        }
    }
    let mut session = SessionRecord::new(plan, source_kind, seed);
    session.advance(source, max_trials)?;
    let outcome = match session.result() {
        Some(result) => RunOutcome::Stopped(result),
        None => RunOutcome::Partial(session.clone()),
    };
    Ok((outcome, session))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub runs: u64,
    pub hits: u64,
    pub seed: u64,
    pub generator: &'static str,
    pub empirical_coverage: f64,
    pub mean_trials: f64,
    /// `√(c(1−c)/runs)` with `c` the exact confidence.
    pub standard_error: f64,
    pub exact: ExactConfidence,
    pub warnings: Vec<String>,
}

/// Runs `runs` independent sessions and counts how often `p_true/μ2 ≤ p̂ ≤ p_true·μ1`.
///
/// Run `i` draws from sub-stream `i` of the generator seeded with `seed`, so the
/// aggregate does not depend on how runs are scheduled across threads.
pub fn coverage_experiment(
    occurrences: u64,
    mu1: f64,
    mu2: f64,
    p_true: f64,
    runs: u64,
    seed: u64,
) -> Result<CoverageReport> {
    if runs == 0 {
        return Err(invalid("runs must be at least 1"));
    }
    let plan = StoppingPlan::new(occurrences, mu1, mu2)?;
    check_probability(p_true)?;
    let exact = exact_confidence(occurrences, p_true, mu1, mu2)?;
    let mut warnings = Vec::new();
    let conditions = check_conditions_new(occurrences, mu1, mu2);
    if !conditions.all_ok() {
        warnings.push(format!(
            "mu1={mu1}, mu2={mu2} violate the guarantee conditions (mu1 >= {}, mu2 >= {}); c_bar is not a lower bound here",
            conditions.mu1_bound, conditions.mu2_bound
        ));
    }

    // p_true/mu2 <= (N-1)/n <= p_true*mu1  <=>  n1 <= n <= n2
    let (n1, n2) = (exact.n1, exact.n2);
    let per_run: Vec<(bool, u64)> = (0..runs)
        .into_par_iter()
        .map(|i| -> Result<(bool, u64)> {
            let mut source = SyntheticSource::with_stream(p_true, seed, i)?;
            let mut session = SessionRecord::new(plan, SourceKind::Synthetic, Some(seed));
            session.advance(&mut source, None)?;
            Ok(((n1..=n2).contains(&session.trials), session.trials))
        })
        .collect::<Result<_>>()?;
    let hits = per_run.iter().filter(|r| r.0).count() as u64;
    let total_trials: u128 = per_run.iter().map(|r| r.1 as u128).sum();
    let c = exact.c;
    Ok(CoverageReport {
        runs,
        hits,
        seed,
        generator: GENERATOR,
        empirical_coverage: hits as f64 / runs as f64,
        mean_trials: total_trials as f64 / runs as f64,
        standard_error: (c * (1.0 - c) / runs as f64).sqrt(),
        exact,
        warnings,
    })
}
