//! Scalar special functions and root finding shared by the solvers, the
//! sampling rules and the stopping rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default concentration parameters for the UCB bonus.
pub const DEFAULT_ALPHA: f64 = 1.2;
pub const DEFAULT_S: f64 = 1.2;

/// Bisection on a monotone function with a sign change on `[lo, hi]`.
///
/// Works for increasing and decreasing `f`. Terminates after at most
/// `ceil(log2((hi - lo) / tol))` halvings, or earlier when the bracket can no
/// longer be split in floating point.
pub fn solve_increasing_crossing<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::domain(
            "solve_increasing_crossing",
            format!("need lo < hi and tol > 0, got [{lo}, {hi}] tol {tol}"),
        ));
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;
    let (mut a, mut b) = (lo, hi);
    let max_steps = ((hi - lo) / tol).log2().ceil().max(0.0) as usize;
    for _ in 0..max_steps {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == lo_negative {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// `W̄₋₁(x) = −W₋₁(−e^{−x})`: the unique `y ≥ 1` with `y − ln y = x`.
pub fn lambert_w_bar(x: f64) -> Result<f64> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(Error::domain("lambert_w_bar", format!("need x >= 1, got {x}")));
    }
    let excess = x - 1.0;
    if excess == 0.0 {
        return Ok(1.0);
    }
    // Work with t = y - 1 so that t - ln(1 + t) stays accurate near x = 1.
    let residual = |t: f64| t - t.ln_1p() - excess;
    let lower = x + x.ln();
    let upper = lower + 0.5f64.min(1.0 / x.sqrt());
    // Near x = 1 the sandwich is loose in floating point; widen it safely.
    let t_lo = (lower - 1.0).max(0.0);
    let t_hi = (upper - 1.0).max(2.0 * excess.sqrt() + excess) + f64::EPSILON;
    let tol = 1e-15 * t_hi.max(1.0);
    let t = solve_increasing_crossing(residual, t_lo, t_hi, tol)?;
    Ok(1.0 + t)
}

const BERNOULLI_EVEN: [f64; 6] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
];

/// Riemann zeta on `s > 1` by Euler–Maclaurin summation.
pub fn riemann_zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(Error::domain("riemann_zeta", format!("need s > 1, got {s}")));
    }
    const N: usize = 12;
    let n = N as f64;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    let mut total = head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);

    // Correction terms B_{2k}/(2k)! * s(s+1)...(s+2k-2) * N^{1-s-2k}.
    let mut rising = s; // s(s+1)...(s+2k-2)
    let mut factorial = 2.0; // (2k)!
    let mut power = n.powf(-s - 1.0); // N^{1-s-2k}
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        total += b / factorial * rising * power;
        let j = 2.0 * (k as f64 + 1.0);
        rising *= (s + j - 1.0) * (s + j);
        factorial *= (j + 1.0) * (j + 2.0);
        power /= n * n;
    }
    Ok(total)
}

/// `g_G(λ) = 2λ − 2λ ln(4λ) + ln ζ(2λ) − ½ ln(1 − λ)` on `λ ∈ (1/2, 1)`.
fn g_gaussian(lambda: f64) -> f64 {
    let zeta = riemann_zeta(2.0 * lambda).unwrap_or(f64::INFINITY);
    2.0 * lambda - 2.0 * lambda * (4.0 * lambda).ln() + zeta.ln() - 0.5 * (1.0 - lambda).ln()
}

const LAMBDA_LO: f64 = 0.5 + 1e-6;
const LAMBDA_HI: f64 = 1.0 - 1e-12;

/// Gaussian calibration function `C_G(x)`: the finite critical value of
/// `(g_G(λ) + x)/λ` over `λ ∈ (1/2, 1)`.
///
/// The objective diverges at both ends of the interval, so the critical
/// value is its minimum. A coarse log-spaced scan in `1 − λ` locates the
/// basin and golden-section search refines it.
pub fn c_gaussian(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("c_gaussian", format!("need x > 0, got {x}")));
    }
    let objective = |lambda: f64| (g_gaussian(lambda) + x) / lambda;

    // The minimiser sits near 1 - 1/(2x) for large x, so scan on a log grid of 1 - λ.
    const SCAN: usize = 400;
    let (log_lo, log_hi) = ((1.0 - LAMBDA_HI).ln(), (1.0 - LAMBDA_LO).ln());
    let lambda_at = |i: usize| 1.0 - (log_lo + (log_hi - log_lo) * i as f64 / SCAN as f64).exp();
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..=SCAN {
        let v = objective(lambda_at(i));
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    // lambda_at is decreasing in i.
    let mut a = lambda_at((best + 1).min(SCAN));
    let mut b = lambda_at(best.saturating_sub(1));

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    while b - a > 1e-10 * (1.0 - a).max(1e-3) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    Ok(objective(0.5 * (a + b)).min(best_val))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BonusKind {
    /// Union bound over time: `2α(1+s) ln n`.
    Union,
    /// Mixture-of-martingales bonus through `W̄₋₁`.
    Mixture,
    /// No bonus; the UCB leader becomes the empirical best.
    Zero,
}

/// Exploration bonus `g(n)` of the UCB leader.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonusSpec {
    pub kind: BonusKind,
    pub alpha: f64,
    pub s: f64,
}

impl BonusSpec {
    pub fn new(kind: BonusKind, alpha: f64, s: f64) -> Result<Self> {
        if kind != BonusKind::Zero && !(alpha > 1.0 && s > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bonus needs alpha > 1 and s > 1, got alpha {alpha}, s {s}"
            )));
        }
        Ok(Self { kind, alpha, s })
    }

    pub fn mixture() -> Self {
        Self {
            kind: BonusKind::Mixture,
            alpha: DEFAULT_ALPHA,
            s: DEFAULT_S,
        }
    }

    pub fn union() -> Self {
        Self {
            kind: BonusKind::Union,
            alpha: DEFAULT_ALPHA,
            s: DEFAULT_S,
        }
    }

    pub fn zero() -> Self {
        Self {
            kind: BonusKind::Zero,
            alpha: DEFAULT_ALPHA,
            s: DEFAULT_S,
        }
    }
}

/// Bonus value at round `n >= 2`.
pub fn bonus(spec: &BonusSpec, n: u64) -> f64 {
    bonus_at(spec, n as f64)
}

/// Bonus evaluated at a real round index, clamped below at 2.
pub fn bonus_at(spec: &BonusSpec, n: f64) -> f64 {
    let log_n = n.max(2.0).ln();
    match spec.kind {
        BonusKind::Union => 2.0 * spec.alpha * (1.0 + spec.s) * log_n,
        BonusKind::Mixture => {
            let arg = 2.0 * spec.s * spec.alpha * log_n
                + 2.0 * (2.0 + spec.alpha * log_n).ln()
                + 2.0;
            // arg > 2 + 2 ln 2 > 1 for every n >= 1.
            lambert_w_bar(arg).expect("mixture bonus argument is always >= 1")
        }
        BonusKind::Zero => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdKind {
    /// Threshold with a proven δ-correctness guarantee for Gaussian arms.
    Exact,
    /// `ln((1 + ln n)/δ)`, the threshold used in experiments.
    Heuristic,
}

impl std::fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ThresholdKind::Exact => "exact",
            ThresholdKind::Heuristic => "heuristic",
        })
    }
}

impl std::str::FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ThresholdKind::Exact),
            "heuristic" => Ok(ThresholdKind::Heuristic),
            other => Err(Error::InvalidParameter(format!(
                "unknown threshold `{other}` (expected exact or heuristic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdSpec {
    pub kind: ThresholdKind,
    pub num_arms: usize,
}

impl ThresholdSpec {
    pub fn new(kind: ThresholdKind, num_arms: usize) -> Result<Self> {
        if num_arms < 2 {
            return Err(Error::InvalidParameter(format!(
                "threshold needs at least two arms, got {num_arms}"
            )));
        }
        Ok(Self { kind, num_arms })
    }
}

/// Stopping threshold `c(n, δ)`.
pub fn threshold(spec: &ThresholdSpec, n: u64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("threshold", format!("need 0 < delta < 1, got {delta}")));
    }
    threshold_log(spec, n as f64, -delta.ln())
}

/// `c(n, δ)` parameterised by `ln(1/δ)`, which keeps extremely small δ representable.
///
/// For the exact threshold, `ln(n/2)` is clamped at `n = 2`; the first stopping
/// check happens after `K >= 2` samples so the clamp never binds in an episode.
pub fn threshold_log(spec: &ThresholdSpec, n: f64, log_inv_delta: f64) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(Error::domain("threshold", format!("need n >= 1, got {n}")));
    }
    if !(log_inv_delta > 0.0) {
        return Err(Error::domain(
            "threshold",
            format!("need ln(1/delta) > 0, got {log_inv_delta}"),
        ));
    }
    match spec.kind {
        ThresholdKind::Heuristic => Ok((1.0 + n.ln()).ln() + log_inv_delta),
        ThresholdKind::Exact => {
            if spec.num_arms < 2 {
                return Err(Error::domain("threshold", "exact threshold needs K >= 2"));
            }
            let x = 0.5 * (((spec.num_arms - 1) as f64).ln() + log_inv_delta);
            let c = c_gaussian_cached(x)?;
            Ok(2.0 * c + 4.0 * (4.0 + (n.max(2.0) / 2.0).ln()).ln())
        }
    }
}

// Episodes evaluate the threshold every round with the same `x`.
fn c_gaussian_cached(x: f64) -> Result<f64> {
    use std::cell::Cell;
    thread_local! {
        static LAST: Cell<(u64, f64)> = const { Cell::new((u64::MAX, f64::NAN)) };
    }
    let key = x.to_bits();
    let (k, v) = LAST.with(Cell::get);
    if k == key {
        return Ok(v);
    }
    let v = c_gaussian(x)?;
    LAST.with(|c| c.set((key, v)));
    Ok(v)
}
