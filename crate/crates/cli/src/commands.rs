use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;

use clap::{ArgGroup, Args, ValueEnum};
use nbmc::appendix::{coefficients_nonnegative_sweep, lemma1_check, FamilySweep, LemmaReport, SamplingPolicy};
use nbmc::engine::{run_until_stop, ReplaySource, RunOutcome, SessionStatus, SourceKind, SyntheticSource};
use nbmc::exact::exact_confidence;
use nbmc::rule::{
    achievable_curves, check_conditions_legacy, check_conditions_new, legacy_p_bound, min_n_for, min_n_for_factors,
    RuleVersion, StoppingPlan, DEFAULT_MAX_N,
};
use serde::Serialize;

use crate::grid::{parse_integer_grid, parse_real_grid};
use crate::report::{write_csv, write_json, Format, ReportEnvelope};
use crate::CliError;

/// Either a symmetric margin or an explicit pair of factors.
#[derive(Debug, Clone, Args, Serialize)]
#[group(id = "factors", required = true, multiple = true)]
pub struct Factors {
    /// Symmetric margin m (a ratio, not a percentage): mu1 = mu2 = 1 + m
    #[arg(long, conflicts_with_all = ["mu1", "mu2"])]
    pub margin: Option<f64>,
    /// Lower-side factor: p_hat <= p * mu1
    #[arg(long, requires = "mu2")]
    pub mu1: Option<f64>,
    /// Upper-side factor: p_hat >= p / mu2
    #[arg(long, requires = "mu1")]
    pub mu2: Option<f64>,
}

impl Factors {
    fn resolve(&self) -> Result<(f64, f64), CliError> {
        match (self.margin, self.mu1, self.mu2) {
            (Some(m), None, None) => {
                if !(m > 0.0 && m.is_finite()) {
                    return Err(CliError::invalid(format!("margin must be a positive ratio, got {m}")));
                }
                Ok((1.0 + m, 1.0 + m))
            }
            (None, Some(a), Some(b)) => Ok((a, b)),
            _ => Err(CliError::invalid("give either --margin or both --mu1 and --mu2")),
        }
    }
}

fn emit<P: Serialize, R: Serialize, T: Serialize>(
    format: Format,
    command: &str,
    parameters: &P,
    results: &R,
    rows: &[T],
    warnings: &[String],
) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match format {
        Format::Json => write_json(
            &mut out,
            &ReportEnvelope { tool_version: crate::report::TOOL_VERSION, command, parameters, results, warnings },
        ),
        Format::Csv => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            write_csv(&mut out, rows)
        }
    }
}

// ---------------------------------------------------------------- plan

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub factors: Factors,
    /// Required asymptotic confidence c in (0, 1)
    #[arg(long)]
    pub confidence: f64,
    /// Largest N considered
    #[arg(long = "max-N", default_value_t = DEFAULT_MAX_N)]
    #[serde(rename = "max_N")]
    pub max_n: u64,
}

#[derive(Debug, Serialize)]
pub struct PlanRow {
    #[serde(rename = "N")]
    n: u64,
    mu1: f64,
    mu2: f64,
    confidence: f64,
    c_bar: f64,
    mu1_bound: f64,
    mu2_bound: f64,
    legacy_certifies: bool,
    legacy_mu1_bound: f64,
    /// Legacy restriction on p at this N, when the legacy rule certifies the point.
    legacy_p_bound: Option<f64>,
    /// Smallest N at which the legacy rule certifies the same target.
    #[serde(rename = "legacy_min_N")]
    legacy_min_n: Option<u64>,
    #[serde(rename = "legacy_p_bound_at_min_N")]
    legacy_p_bound_at_min_n: Option<f64>,
}

pub fn plan(args: &PlanArgs, format: Format) -> Result<(), CliError> {
    let (mu1, mu2) = args.factors.resolve()?;
    let n = match args.factors.margin {
        Some(m) => min_n_for(m, args.confidence, args.max_n)?,
        None => min_n_for_factors(mu1, mu2, args.confidence, RuleVersion::New, args.max_n)?,
    };
    let plan = StoppingPlan::new(n, mu1, mu2)?;
    let conditions = check_conditions_new(n, mu1, mu2);
    let legacy = check_conditions_legacy(n, mu1, mu2, 0.0);
    let legacy_certifies = legacy.mu1_ok && legacy.mu2_ok;
    let legacy_min_n = min_n_for_factors(mu1, mu2, args.confidence, RuleVersion::Legacy, args.max_n).ok();

    let mut warnings = Vec::new();
    if !legacy_certifies {
        warnings
            .push(format!("the legacy rule cannot certify this point at N={n}: it needs mu1 >= {}", legacy.mu1_bound));
    }
    let row = PlanRow {
        n,
        mu1,
        mu2,
        confidence: args.confidence,
        c_bar: plan.c_bar(),
        mu1_bound: conditions.mu1_bound,
        mu2_bound: conditions.mu2_bound,
        legacy_certifies,
        legacy_mu1_bound: legacy.mu1_bound,
        legacy_p_bound: legacy_certifies.then(|| legacy_p_bound(n, mu1)),
        legacy_min_n,
        legacy_p_bound_at_min_n: legacy_min_n.map(|k| legacy_p_bound(k, mu1)),
    };
    emit(format, "plan", args, &row, std::slice::from_ref(&row), &warnings)
}

// ---------------------------------------------------------------- exact

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExactArgs {
    /// Required number of occurrences
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    /// Event probability
    #[arg(long)]
    pub p: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub factors: Factors,
}

#[derive(Debug, Serialize)]
pub struct ExactRow {
    #[serde(rename = "N")]
    n: u64,
    p: f64,
    mu1: f64,
    mu2: f64,
    n1: u64,
    n2: u64,
    c1: f64,
    c2: f64,
    c: f64,
    c_bar: f64,
    margin: f64,
    below_support: bool,
    conditions_hold: bool,
}

pub fn exact(args: &ExactArgs, format: Format) -> Result<(), CliError> {
    let (mu1, mu2) = args.factors.resolve()?;
    let e = exact_confidence(args.n, args.p, mu1, mu2)?;
    let conditions_hold = check_conditions_new(args.n, mu1, mu2).all_ok();
    let mut warnings = Vec::new();
    if e.below_support {
        warnings.push(format!("n2 = {} is below N = {}: the interval cannot be hit and c = 0", e.n2, args.n));
    }
    if !conditions_hold {
        warnings.push("mu1/mu2 are below the bounds that make c_bar a guaranteed lower bound".into());
    }
    let row = ExactRow {
        n: args.n,
        p: args.p,
        mu1,
        mu2,
        n1: e.n1,
        n2: e.n2,
        c1: e.c1,
        c2: e.c2,
        c: e.c,
        c_bar: e.c_bar,
        margin: e.margin(),
        below_support: e.below_support,
        conditions_hold,
    };
    emit(format, "exact", args, &row, std::slice::from_ref(&row), &warnings)
}

// ---------------------------------------------------------------- run

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceArg {
    Synthetic,
    File,
    Stdin,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    /// Required number of occurrences
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub factors: Factors,
    /// Where trial outcomes come from
    #[arg(long, value_enum)]
    pub source: SourceArg,
    /// Event probability of the synthetic source
    #[arg(long, required_if_eq("source", "synthetic"))]
    pub p: Option<f64>,
    /// Seed of the synthetic source
    #[arg(long, required_if_eq("source", "synthetic"))]
    pub seed: Option<u64>,
    /// Outcome file (one 0/1 per line) for --source file
    #[arg(long, required_if_eq("source", "file"))]
    pub path: Option<PathBuf>,
    /// Stop after this many trials even without N occurrences
    #[arg(long)]
    pub max_trials: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct RunRow {
    status: SessionStatus,
    trials: u64,
    successes: u64,
    #[serde(rename = "N")]
    n: u64,
    p_hat: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    upper_clamped: Option<bool>,
    mu1: f64,
    mu2: f64,
    c_bar: f64,
    source_kind: SourceKind,
    seed: Option<u64>,
    generator: Option<&'static str>,
}

pub fn run(args: &RunArgs, format: Format) -> Result<(), CliError> {
    let (mu1, mu2) = args.factors.resolve()?;
    let plan = StoppingPlan::new(args.n, mu1, mu2)?;
    let (outcome, record) = match args.source {
        SourceArg::Synthetic => {
            let (p, seed) =
                args.p.zip(args.seed).ok_or_else(|| CliError::invalid("--source synthetic needs --p and --seed"))?;
            let mut src = SyntheticSource::new(p, seed)?;
            run_until_stop(plan, &mut src, SourceKind::Synthetic, Some(seed), args.max_trials)?
        }
        SourceArg::File => {
            let path = args.path.as_ref().ok_or_else(|| CliError::invalid("--source file needs --path"))?;
            let file =
                File::open(path).map_err(|e| CliError::invalid(format!("cannot open {}: {e}", path.display())))?;
            let mut src = ReplaySource::new(BufReader::new(file));
            run_until_stop(plan, &mut src, SourceKind::Replay, None, args.max_trials)?
        }
        SourceArg::Stdin => {
            let stdin = io::stdin();
            let mut src = ReplaySource::new(stdin.lock());
            run_until_stop(plan, &mut src, SourceKind::Stream, None, args.max_trials)?
        }
    };

    let mut warnings = Vec::new();
    let estimate = match outcome {
        RunOutcome::Stopped(r) => Some(r),
        RunOutcome::Partial(ref s) => {
            warnings.push(
                format!(
                    "run ended {:?} after {} trials with {} of {} occurrences; no estimate",
                    s.status, s.trials, s.successes, args.n
                )
                .to_lowercase(),
            );
            None
        }
    };
    let row = RunRow {
        status: record.status,
        trials: record.trials,
        successes: record.successes,
        n: args.n,
        p_hat: estimate.map(|r| r.p_hat),
        ci_low: estimate.map(|r| r.interval.low),
        ci_high: estimate.map(|r| r.interval.high),
        upper_clamped: estimate.map(|r| r.interval.upper_clamped),
        mu1,
        mu2,
        c_bar: plan.c_bar(),
        source_kind: record.source_kind,
        seed: record.seed,
        generator: record.generator,
    };
    emit(format, "run", args, &row, std::slice::from_ref(&row), &warnings)
}

// ---------------------------------------------------------------- verify

pub const DEFAULT_LEMMA_N: (u64, u64) = (3, 50);
pub const DEFAULT_LEMMA_P: [f64; 4] = [0.01, 0.1, 0.3, 0.7];

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("claim").required(true).args(["lemma1", "coefficients"])))]
pub struct VerifyArgs {
    /// Check the integral-versus-sum inequality
    #[arg(long)]
    pub lemma1: bool,
    /// Check nonnegativity of the series coefficients
    #[arg(long)]
    pub coefficients: bool,
    /// Lemma check: a single N (default: every N in 3..=50)
    #[arg(long = "N", requires = "lemma1")]
    #[serde(rename = "N")]
    pub n: Option<u64>,
    /// Lemma check: a single p (default: 0.01, 0.1, 0.3, 0.7)
    #[arg(long, requires = "lemma1")]
    pub p: Option<f64>,
    /// Coefficient sweep: smallest N
    #[arg(long = "N-min", default_value_t = 3)]
    #[serde(rename = "N_min")]
    pub n_min: u64,
    /// Coefficient sweep: largest N
    #[arg(long = "N-max", default_value_t = 50)]
    #[serde(rename = "N_max")]
    pub n_max: u64,
    /// Coefficient sweep: largest j
    #[arg(long, default_value_t = 20)]
    pub j_max: u32,
    /// Coefficient sweep: grid points per nu interval
    #[arg(long, default_value_t = 200)]
    pub density: u32,
}

#[derive(Debug, Serialize)]
pub struct LemmaRow {
    #[serde(rename = "N")]
    n: u64,
    p: f64,
    n_star_max: u64,
    points_checked: u64,
    worst_relative_margin: Option<f64>,
    worst_n_star: Option<u64>,
    all_hold: bool,
    sampling: String,
}

impl From<&LemmaReport> for LemmaRow {
    fn from(r: &LemmaReport) -> Self {
        LemmaRow {
            n: r.occurrences,
            p: r.p,
            n_star_max: r.n_star_max,
            points_checked: r.points_checked,
            worst_relative_margin: r.worst_relative_margin,
            worst_n_star: r.worst_n_star,
            all_hold: r.all_hold,
            sampling: match r.sampling {
                SamplingPolicy::Exhaustive => "exhaustive".into(),
                SamplingPolicy::Geometric { dense_prefix, ratio } => {
                    format!("dense<={dense_prefix};geometric*{ratio}")
                }
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FamilyRow {
    family: nbmc::appendix::Family,
    points_checked: u64,
    failures: u64,
    worst_relative: f64,
    #[serde(rename = "worst_N")]
    worst_n: u64,
    worst_j: u32,
    worst_nu: f64,
    worst_value: f64,
}

impl From<&FamilySweep> for FamilyRow {
    fn from(f: &FamilySweep) -> Self {
        FamilyRow {
            family: f.family,
            points_checked: f.points_checked,
            failures: f.failures,
            worst_relative: f.worst_relative,
            worst_n: f.worst.occurrences,
            worst_j: f.worst.j,
            worst_nu: f.worst.nu,
            worst_value: f.worst.value,
        }
    }
}

#[derive(Serialize)]
struct VerifyResults<T: Serialize> {
    all_hold: bool,
    checks: Vec<T>,
}

pub fn verify(args: &VerifyArgs, format: Format) -> Result<(), CliError> {
    let all_hold = if args.lemma1 {
        let ns: Vec<u64> = match args.n {
            Some(n) => vec![n],
            None => (DEFAULT_LEMMA_N.0..=DEFAULT_LEMMA_N.1).collect(),
        };
        let ps: Vec<f64> = args.p.map_or_else(|| DEFAULT_LEMMA_P.to_vec(), |p| vec![p]);
        let mut rows = Vec::new();
        for &n in &ns {
            for &p in &ps {
                rows.push(LemmaRow::from(&lemma1_check(n, p)?));
            }
        }
        let all_hold = rows.iter().all(|r| r.all_hold);
        let results = VerifyResults { all_hold, checks: rows };
        emit(format, "verify", args, &results, &results.checks, &[])?;
        all_hold
    } else {
        let report = coefficients_nonnegative_sweep(args.n_min..=args.n_max, args.j_max, args.density)?;
        let rows: Vec<FamilyRow> = report.families.iter().map(FamilyRow::from).collect();
        let results = VerifyResults { all_hold: report.all_hold, checks: rows };
        emit(format, "verify", args, &results, &results.checks, &[])?;
        report.all_hold
    };
    if all_hold {
        Ok(())
    } else {
        Err(CliError::verification("an inequality failed beyond tolerance; see the report"))
    }
}

// ---------------------------------------------------------------- curves

pub const DEFAULT_M_GRID: &str = "0.01:1:0.01";
pub const DEFAULT_N_GRID: &str = "5,10,30,100";

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurvesArgs {
    /// Margins: `a,b,c` or `start:stop:step`
    #[arg(long, default_value = DEFAULT_M_GRID)]
    pub m_grid: String,
    /// Values of N for the fixed-N curves: `a,b,c` or `start:stop:step`
    #[arg(long = "N-grid", default_value = DEFAULT_N_GRID)]
    #[serde(rename = "N_grid")]
    pub n_grid: String,
    /// Write the CSV here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CurvesSummary<'a> {
    out: &'a str,
    rows: usize,
}

pub fn curves(args: &CurvesArgs, format: Format) -> Result<(), CliError> {
    let m_grid = parse_real_grid(&args.m_grid).map_err(|e| CliError::invalid(format!("--m-grid: {e}")))?;
    let n_grid = parse_integer_grid(&args.n_grid).map_err(|e| CliError::invalid(format!("--N-grid: {e}")))?;
    let rows = achievable_curves(&m_grid, &n_grid)?;

    match &args.out {
        Some(path) => {
            let mut file =
                File::create(path).map_err(|e| CliError::invalid(format!("cannot create {}: {e}", path.display())))?;
            write_csv(&mut file, &rows)?;
            file.flush().map_err(CliError::output)?;
            if format == Format::Json {
                let summary = CurvesSummary { out: &path.to_string_lossy(), rows: rows.len() };
                emit::<_, _, ()>(format, "curves", args, &summary, &[], &[])?;
            }
            Ok(())
        }
        None => emit(format, "curves", args, &rows, &rows, &[]),
    }
}
