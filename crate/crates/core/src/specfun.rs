//! Special functions for integer-order gamma tails and the negative-binomial
//! law of the trial count.
//!
//! Everything here works for integer shape parameters only. The incomplete
//! gamma function is evaluated through the Poisson-tail identity
//! `γ(r, x) = 1 − e^{−x} Σ_{k<r} x^k/k!`, taking whichever tail is smaller
//! and recovering the other by complement, so both tails keep full relative
//! precision. Single Poisson and binomial terms use the saddle-point form
//! (`stirlerr` + `bd0`), which stays accurate when `x`, `k` and `n` are large.

use crate::error::{check_probability, invalid, Error, Result, TERM_CAP};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Absolute tail mass below which a negative-binomial sum is truncated.
const TAIL_EPS: f64 = 1e-18;

/// Relative size at which a positive series term stops contributing.
const SERIES_EPS: f64 = 1e-17;

const FACTORIALS: [u64; 21] = [
    1,
    1,
    2,
    6,
    24,
    120,
    720,
    5_040,
    40_320,
    362_880,
    3_628_800,
    39_916_800,
    479_001_600,
    6_227_020_800,
    87_178_291_200,
    1_307_674_368_000,
    20_922_789_888_000,
    355_687_428_096_000,
    6_402_373_705_728_000,
    121_645_100_408_832_000,
    2_432_902_008_176_640_000,
];

// ln(n!) - (n + 1/2) ln(n) + n - ln(2 pi)/2 for n = 0..=15 (n = 0 is a placeholder).
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_22,
    0.041_340_695_955_409_294_094,
    0.027_677_925_684_998_339_149,
    0.020_790_672_103_765_093_112,
    0.016_644_691_189_821_192_163,
    0.013_876_128_823_070_747_999,
    0.011_896_709_945_891_770_095,
    0.010_411_265_261_972_096_497,
    0.009_255_462_182_712_732_917_7,
    0.008_330_563_433_362_871_256_5,
    0.007_573_675_487_951_840_795,
    0.006_942_840_107_209_529_865_7,
    0.006_408_994_188_004_207_068_4,
    0.005_951_370_112_758_847_735_6,
    0.005_554_733_551_962_801_371,
];

/// A probability held on the natural-log scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    pub fn new(ln_value: f64) -> Self {
        debug_assert!(!(ln_value > 1e-12), "log-probability above zero: {ln_value}");
        LogProb(ln_value.min(0.0))
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    /// `ln(1 − e^self)`, the log of the complementary probability.
    pub fn complement(self) -> LogProb {
        LogProb(ln_one_minus_exp(self.0))
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn scale(&mut self, factor: f64) {
        self.sum *= factor;
        self.comp *= factor;
    }
}

/// Streaming log-sum-exp over terms given by their logarithms.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    shift: f64,
    acc: CompensatedSum,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum { shift: f64::NEG_INFINITY, acc: CompensatedSum::new() }
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_ln(&mut self, ln_term: f64) {
        if ln_term == f64::NEG_INFINITY {
            return;
        }
        if ln_term > self.shift {
            if self.shift > f64::NEG_INFINITY {
                self.acc.scale((self.shift - ln_term).exp());
            }
            self.shift = ln_term;
        }
        self.acc.add((ln_term - self.shift).exp());
    }

    /// Logarithm of the accumulated sum (`-inf` when empty).
    pub fn ln(&self) -> f64 {
        if self.shift == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.shift + self.acc.value().ln()
        }
    }
}

/// `ln(1 − e^x)` for `x ≤ 0`.
pub fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Error of Stirling's approximation: `ln n! − (n + ½) ln n + n − ½ ln 2π`.
pub(crate) fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n < STIRLERR_TABLE.len() as u64 {
        return STIRLERR_TABLE[n as usize];
    }
    let n = n as f64;
    let nn = n * n;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// Deviance term `x ln(x/m) + m − x`, accurate when `x ≈ m`.
pub(crate) fn bd0(x: f64, m: f64) -> f64 {
    if x == 0.0 {
        return m;
    }
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let v2 = v * v;
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln(k!)`; exact table below 21, Stirling series with correction above.
pub fn log_factorial(k: u64) -> f64 {
    if k < FACTORIALS.len() as u64 {
        return (FACTORIALS[k as usize] as f64).ln();
    }
    let kf = k as f64;
    (kf + 0.5) * kf.ln() - kf + 0.5 * LN_2PI + stirlerr(k)
}

/// `ln(x^k e^{−x} / k!)`, one Poisson probability.
pub(crate) fn ln_poisson_term(k: u64, x: f64) -> f64 {
    if k == 0 {
        return -x;
    }
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    let kf = k as f64;
    -stirlerr(k) - bd0(kf, x) - 0.5 * (LN_2PI + kf.ln())
}

/// `ln C(n, x) p^x q^{n−x}` for `0 < x < n`.
fn ln_binomial_term(x: u64, n: u64, p: f64, q: f64) -> f64 {
    let (xf, nf) = (x as f64, n as f64);
    let yf = nf - xf;
    stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(xf, nf * p) - bd0(yf, nf * q)
        + 0.5 * (nf.ln() - LN_2PI - xf.ln() - yf.ln())
}

fn check_gamma_args(r: u64, x: f64) -> Result<()> {
    if r == 0 {
        return Err(invalid("incomplete gamma order must be at least 1"));
    }
    if x.is_nan() || x < 0.0 {
        return Err(invalid(format!("incomplete gamma argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// `ln P(r, x)` for `x < r`: `e^{−x} Σ_{k≥r} x^k/k!`.
fn ln_lower_series(r: u64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = CompensatedSum::new();
    sum.add(1.0);
    let mut i = 1u64;
    loop {
        term *= x / (r + i) as f64;
        sum.add(term);
        if term < sum.value() * SERIES_EPS {
            break;
        }
        i += 1;
    }
    ln_poisson_term(r, x) + sum.value().ln()
}

/// `ln Q(r, x)` for `x ≥ r`: `e^{−x} Σ_{k<r} x^k/k!`, summed downward from `k = r − 1`.
fn ln_upper_sum(r: u64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = CompensatedSum::new();
    sum.add(1.0);
    for i in 0..r - 1 {
        term *= (r - 1 - i) as f64 / x;
        sum.add(term);
        if term < sum.value() * SERIES_EPS {
            break;
        }
    }
    ln_poisson_term(r - 1, x) + sum.value().ln()
}

/// Both tails `(ln P, ln Q)` of the regularized incomplete gamma function.
fn ln_gamma_tails(r: u64, x: f64) -> (LogProb, LogProb) {
    if x == 0.0 {
        return (LogProb::ZERO, LogProb::ONE);
    }
    if x == f64::INFINITY {
        return (LogProb::ONE, LogProb::ZERO);
    }
    if x < r as f64 {
        let lp = LogProb::new(ln_lower_series(r, x));
        (lp, lp.complement())
    } else {
        let lq = LogProb::new(ln_upper_sum(r, x));
        (lq.complement(), lq)
    }
}

/// `ln γ(r, x)` (regularized lower incomplete gamma, integer order).
pub fn ln_reg_lower_gamma(r: u64, x: f64) -> Result<LogProb> {
    check_gamma_args(r, x)?;
    Ok(ln_gamma_tails(r, x).0)
}

/// `ln(1 − γ(r, x))`.
pub fn ln_reg_upper_gamma(r: u64, x: f64) -> Result<LogProb> {
    check_gamma_args(r, x)?;
    Ok(ln_gamma_tails(r, x).1)
}

/// Regularized lower incomplete gamma function `γ(r, x) = 1/Γ(r) ∫_0^x e^{−t} t^{r−1} dt`.
pub fn reg_lower_incomplete_gamma(r: u64, x: f64) -> Result<f64> {
    Ok(ln_reg_lower_gamma(r, x)?.prob())
}

/// `1 − γ(r, x)`, computed without cancellation.
pub fn reg_upper_incomplete_gamma(r: u64, x: f64) -> Result<f64> {
    Ok(ln_reg_upper_gamma(r, x)?.prob())
}

/// `ln(γ(r, b) − γ(r, a))` for `0 ≤ a ≤ b`.
///
/// Differences are taken inside a single tail (lower tail below `r`, upper
/// tail above it), and a range that straddles `r` is split there.
pub fn ln_reg_gamma_diff(r: u64, a: f64, b: f64) -> Result<f64> {
    check_gamma_args(r, a)?;
    check_gamma_args(r, b)?;
    if a > b {
        return Err(invalid(format!("gamma difference needs a <= b, got a={a}, b={b}")));
    }
    if a == b {
        return Ok(f64::NEG_INFINITY);
    }
    let rf = r as f64;
    let within_lower = |lo: f64, hi: f64| {
        let (pl, _) = ln_gamma_tails(r, lo);
        let (ph, _) = ln_gamma_tails(r, hi);
        ph.ln() + ln_one_minus_exp(pl.ln() - ph.ln())
    };
    let within_upper = |lo: f64, hi: f64| {
        let (_, ql) = ln_gamma_tails(r, lo);
        let (_, qh) = ln_gamma_tails(r, hi);
        ql.ln() + ln_one_minus_exp(qh.ln() - ql.ln())
    };
    if b <= rf {
        Ok(within_lower(a, b))
    } else if a >= rf {
        Ok(within_upper(a, b))
    } else {
        let mut acc = LogSum::new();
        acc.add_ln(within_lower(a, rf));
        acc.add_ln(within_upper(rf, b));
        Ok(acc.ln())
    }
}

/// `γ(r, b) − γ(r, a)` for `0 ≤ a ≤ b`.
pub fn reg_gamma_diff(r: u64, a: f64, b: f64) -> Result<f64> {
    Ok(ln_reg_gamma_diff(r, a, b)?.exp())
}

/// `ln k^{(i)} = ln(k (k−1) ⋯ (k−i+1))`, with `k^{(0)} = 1`.
pub fn falling_factorial_log(k: f64, i: u64) -> Result<f64> {
    if i == 0 {
        return Ok(0.0);
    }
    if !k.is_finite() || k - i as f64 + 1.0 <= 0.0 {
        return Err(invalid(format!("falling factorial {k}^({i}) has a non-positive factor")));
    }
    let mut acc = CompensatedSum::new();
    for j in 0..i {
        acc.add((k - j as f64).ln());
    }
    Ok(acc.value())
}

/// `ln Pr[n = trials]` when trials run until the `occurrences`-th success
/// with success probability `p`.
pub fn negbin_log_pmf(trials: u64, occurrences: u64, p: f64) -> Result<f64> {
    if occurrences == 0 {
        return Err(invalid("number of occurrences must be at least 1"));
    }
    check_probability(p)?;
    if trials < occurrences {
        return Err(invalid(format!("trial count {trials} is below the number of occurrences {occurrences}")));
    }
    Ok(ln_pmf_unchecked(trials, occurrences, p, 1.0 - p))
}

fn ln_pmf_unchecked(trials: u64, occurrences: u64, p: f64, q: f64) -> f64 {
    if trials == occurrences {
        return occurrences as f64 * p.ln();
    }
    // C(n-1, N-1) = (N/n) C(n, N)
    (occurrences as f64 / trials as f64).ln() + ln_binomial_term(occurrences, trials, p, q)
}

/// `Pr[n ≤ k]` for the negative-binomial trial count.
pub fn negbin_cdf(k: u64, occurrences: u64, p: f64) -> Result<f64> {
    Ok(negbin_cdf_at(occurrences, p, &[k])?[0])
}

/// `Pr[n ≤ k]` at each of the ascending checkpoints `ks`, from one summation pass.
///
/// Terms are added in ascending `n` with compensated summation. Past the mode,
/// the walk stops once the remaining tail is provably below `1e-18`.
pub fn negbin_cdf_at(occurrences: u64, p: f64, ks: &[u64]) -> Result<Vec<f64>> {
    if occurrences == 0 {
        return Err(invalid("number of occurrences must be at least 1"));
    }
    check_probability(p)?;
    if ks.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("cdf checkpoints must be ascending"));
    }
    let q = 1.0 - p;
    let Some(&k_max) = ks.last() else {
        return Ok(Vec::new());
    };
    if k_max >= occurrences {
        let needed = (k_max - occurrences).saturating_add(1);
        if needed > TERM_CAP && !truncates_before(occurrences + TERM_CAP - 1, occurrences, p, q) {
            return Err(Error::TermCapExceeded { needed, cap: TERM_CAP });
        }
    }

    let mut out = Vec::with_capacity(ks.len());
    let mut idx = 0;
    while idx < ks.len() && ks[idx] < occurrences {
        out.push(0.0);
        idx += 1;
    }
    let mut acc = CompensatedSum::new();
    let mut n = occurrences;
    let mut truncated = false;
    while idx < ks.len() {
        if !truncated {
            let ln_term = ln_pmf_unchecked(n, occurrences, p, q);
            acc.add(ln_term.exp());
            truncated = tail_bound(n, occurrences, q, ln_term) < TAIL_EPS;
        }
        while idx < ks.len() && (ks[idx] == n || truncated) {
            out.push(acc.value().clamp(0.0, 1.0));
            idx += 1;
        }
        n += 1;
    }
    Ok(out)
}

/// Upper bound on `Σ_{m>n} Pr[n = m]` once `n` is past the mode; `+inf` before it.
fn tail_bound(n: u64, occurrences: u64, q: f64, ln_term: f64) -> f64 {
    let ratio = n as f64 * q / (n - occurrences + 1) as f64;
    if ratio < 1.0 {
        ln_term.exp() * ratio / (1.0 - ratio)
    } else {
        f64::INFINITY
    }
}

fn truncates_before(n: u64, occurrences: u64, p: f64, q: f64) -> bool {
    tail_bound(n, occurrences, q, ln_pmf_unchecked(n, occurrences, p, q)) < TAIL_EPS
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn log_factorial_small_values() {
        assert_eq!(log_factorial(0), 0.0);
        assert_eq!(log_factorial(1), 0.0);
        assert!(rel(log_factorial(10), 3_628_800f64.ln()) < 1e-15);
    }

    #[test]
    fn log_factorial_joins_table_and_series() {
        // 21! = 51090942171709440000
        let exact = 51_090_942_171_709_440_000f64.ln();
        assert!(rel(log_factorial(21), exact) < 1e-14);
        let by_sum: f64 = (1..=200u64).map(|i| (i as f64).ln()).sum();
        assert!(rel(log_factorial(200), by_sum) < 1e-13);
    }

    #[test]
    fn stirlerr_table_matches_series_near_boundary() {
        let n = 15u64;
        let nf = n as f64;
        let nn = nf * nf;
        let series =
            (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / 1188.0 / nn) / nn) / nn) / nn) / nf;
        assert!((stirlerr(n) - series).abs() < 1e-15);
    }

    #[test]
    fn gamma_order_one_is_exponential_cdf() {
        for &x in &[1e-8, 0.5, 1.0, 3.0, 40.0] {
            let v = reg_lower_incomplete_gamma(1, x).unwrap();
            assert!(rel(v, -(-x).exp_m1()) < 1e-14, "x={x}");
        }
        assert!((reg_lower_incomplete_gamma(1, 1.0).unwrap() - 0.632_120_558_8).abs() < 1e-10);
    }

    #[test]
    fn gamma_endpoints() {
        assert_eq!(reg_lower_incomplete_gamma(30, 0.0).unwrap(), 0.0);
        assert_eq!(reg_upper_incomplete_gamma(30, 0.0).unwrap(), 1.0);
        assert_eq!(reg_lower_incomplete_gamma(30, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn gamma_rejects_bad_arguments() {
        assert!(reg_lower_incomplete_gamma(0, 1.0).is_err());
        assert!(reg_lower_incomplete_gamma(3, -1.0).is_err());
        assert!(reg_lower_incomplete_gamma(3, f64::NAN).is_err());
    }

    #[test]
    fn gamma_diff_matches_plain_difference_away_from_cancellation() {
        let (r, a, b) = (10, 4.0, 15.0);
        let d = reg_gamma_diff(r, a, b).unwrap();
        let plain = reg_lower_incomplete_gamma(r, b).unwrap() - reg_lower_incomplete_gamma(r, a).unwrap();
        assert!(rel(d, plain) < 1e-13);
        assert_eq!(reg_gamma_diff(r, a, a).unwrap(), 0.0);
        assert!(reg_gamma_diff(r, b, a).is_err());
    }

    #[test]
    fn falling_factorial_examples() {
        assert_eq!(falling_factorial_log(5.0, 0).unwrap(), 0.0);
        assert!(rel(falling_factorial_log(5.0, 3).unwrap(), 60f64.ln()) < 1e-15);
        assert!(rel(falling_factorial_log(29.0, 29).unwrap(), log_factorial(29)) < 1e-14);
        assert!(falling_factorial_log(2.0, 4).is_err());
        assert!(falling_factorial_log(2.5, 3).is_ok());
    }

    #[test]
    fn pmf_examples() {
        let p = 0.3;
        assert!(rel(negbin_log_pmf(7, 7, p).unwrap(), 7.0 * p.ln()) < 1e-15);
        assert!(rel(negbin_log_pmf(4, 3, 0.5).unwrap(), (3.0 * 0.5f64.powi(4)).ln()) < 1e-14);
        assert!(negbin_log_pmf(2, 3, 0.5).is_err());
        assert!(negbin_log_pmf(5, 3, 1.0).is_err());
    }

    #[test]
    fn pmf_agrees_with_falling_factorial_form() {
        for &(n, big_n, p) in &[(50u64, 3u64, 0.1f64), (1000, 30, 0.02), (37, 5, 0.7), (9, 1, 0.4)] {
            let direct = big_n as f64 * p.ln()
                + (n - big_n) as f64 * (1.0 - p).ln()
                + falling_factorial_log((n - 1) as f64, big_n - 1).unwrap()
                - log_factorial(big_n - 1);
            let got = negbin_log_pmf(n, big_n, p).unwrap();
            assert!((got - direct).abs() < 1e-12 * direct.abs().max(1.0), "{n} {big_n} {p}");
        }
    }

    #[test]
    fn cdf_below_support_and_at_infinity() {
        assert_eq!(negbin_cdf(29, 30, 0.4).unwrap(), 0.0);
        let total = negbin_cdf(u64::MAX, 30, 0.4).unwrap();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn cdf_small_exact_value() {
        // Pr[n <= 5] with N = 3, p = 1/2: 1/8 + 3/16 + 6/32 = 1/2
        assert!((negbin_cdf(5, 3, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cdf_rejects_oversized_sums() {
        // mean trial count 3e9 >> cap
        let err = negbin_cdf(4_000_000_000, 30, 1e-8).unwrap_err();
        assert!(matches!(err, Error::TermCapExceeded { .. }));
    }

    #[test]
    fn cdf_checkpoints_must_ascend() {
        assert!(negbin_cdf_at(3, 0.5, &[5, 4]).is_err());
        let v = negbin_cdf_at(3, 0.5, &[1, 3, 5]).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 0.125).abs() < 1e-16);
        assert!((v[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_sum_handles_growing_terms() {
        let mut s = LogSum::new();
        assert_eq!(s.ln(), f64::NEG_INFINITY);
        for ln in [-800.0, -10.0, 700.0, 0.0] {
            s.add_ln(ln);
        }
        assert!((s.ln() - 700.0).abs() < 1e-12);
    }
}
