//! Gaussian characteristic times `T*(μ)` and `T*_β(μ)`, their optimal
//! allocations, and the non-asymptotic sample-complexity bound calculators.
//!
//! Both characteristic times reduce to a scalar root-finding problem. At the
//! optimum every transportation cost `Δ_i² / (2(1/w_{i*} + 1/w_i))` is equal,
//! which pins the allocation down once the common radius `r` is known:
//!
//! * unconstrained: `ψ(r) = Σ (rΔ_i² − 1)^{-2} − 1 = 0`,
//!   `w_{i*} = 1/(1 + S)`, `w_i = w_{i*}/(rΔ_i² − 1)`, `T* = 2r(1 + S)` with
//!   `S = Σ (rΔ_i² − 1)^{-1}`;
//! * `β`-constrained: `φ(r) = Σ (rΔ_i² − 1)^{-1} − (1 − β)/β = 0`,
//!   `w_i = β/(rΔ_i² − 1)`, `T*_β = 2r/β`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    self, lambert_w_bar, riemann_zeta, solve_increasing_crossing, BonusKind, BonusSpec,
    ThresholdKind, ThresholdSpec,
};

/// Gaussian bandit instance with unit variance per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    means: Vec<f64>,
}

impl Instance {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "an instance needs at least two arms, got {}",
                means.len()
            )));
        }
        if let Some(m) = means.iter().find(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite mean {m}")));
        }
        Ok(Self { means })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    /// Index of the unique best arm.
    pub fn best_arm(&self) -> Result<usize> {
        let best = crate::argmax(&self.means);
        let top = self.means[best];
        if self.means.iter().filter(|&&m| m == top).count() > 1 {
            return Err(Error::DegenerateInstance {
                means: self.means.clone(),
            });
        }
        Ok(best)
    }
}

/// Gap structure of an instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hardness {
    pub best_arm: usize,
    /// `Δ_i = μ_{i*} − μ_i`, zero at the best arm.
    pub gaps: Vec<f64>,
    /// `H(μ) = Σ_{i≠i*} 2/Δ_i²`.
    pub hardness: f64,
    pub delta_min: f64,
}

pub fn gaps_and_hardness(inst: &Instance) -> Result<Hardness> {
    let best_arm = inst.best_arm()?;
    let top = inst.means[best_arm];
    let gaps: Vec<f64> = inst.means.iter().map(|m| top - m).collect();
    let others = || gaps.iter().enumerate().filter(|&(i, _)| i != best_arm).map(|(_, &g)| g);
    Ok(Hardness {
        best_arm,
        hardness: others().map(|g| 2.0 / (g * g)).sum(),
        delta_min: others().fold(f64::INFINITY, f64::min),
        gaps,
    })
}

/// Result of a characteristic-time solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicResult {
    /// `T*(μ)` or `T*_β(μ)`.
    pub time: f64,
    pub allocation: Vec<f64>,
    /// Root `r(μ)` or `r_β(μ)`; NaN for the brute-force grid oracle.
    pub radius: f64,
}

fn check_pole(h: &Hardness, r: f64, function: &'static str) -> Result<()> {
    let pole = 1.0 / (h.delta_min * h.delta_min);
    if !(r > pole) {
        return Err(Error::domain(function, format!("need r > 1/Δ_min² = {pole}, got {r}")));
    }
    Ok(())
}

fn psi_raw(h: &Hardness, r: f64) -> f64 {
    h.gaps
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != h.best_arm)
        .map(|(_, &g)| (r * g * g - 1.0).powi(-2))
        .sum::<f64>()
        - 1.0
}

fn phi_raw(h: &Hardness, beta: f64, r: f64) -> f64 {
    h.gaps
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != h.best_arm)
        .map(|(_, &g)| 1.0 / (r * g * g - 1.0))
        .sum::<f64>()
        - (1.0 - beta) / beta
}

/// `ψ_μ(r)`, convex and decreasing on `r > 1/Δ_min²`.
pub fn psi(inst: &Instance, r: f64) -> Result<f64> {
    let h = gaps_and_hardness(inst)?;
    check_pole(&h, r, "psi")?;
    Ok(psi_raw(&h, r))
}

/// `φ_{μ,β}(r)`, convex and decreasing on `r > 1/Δ_min²`.
pub fn phi(inst: &Instance, beta: f64, r: f64) -> Result<f64> {
    check_beta(beta)?;
    let h = gaps_and_hardness(inst)?;
    check_pole(&h, r, "phi")?;
    Ok(phi_raw(&h, beta, r))
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

/// Root of a decreasing function on `(1/Δ_min², ∞)`.
fn decreasing_root(h: &Hardness, f: impl Fn(f64) -> f64) -> Result<f64> {
    let pole = 1.0 / (h.delta_min * h.delta_min);
    let lo = pole * (1.0 + 1e-12);
    let mut hi = 2.0 * pole;
    let mut doublings = 0;
    while f(hi) >= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::domain("characteristic root", "no sign change found"));
        }
    }
    solve_increasing_crossing(f, lo, hi, hi * 1e-16)
}

/// `T*(μ)` and the optimal allocation `w*(μ)`.
pub fn solve_unconstrained(inst: &Instance) -> Result<CharacteristicResult> {
    let h = gaps_and_hardness(inst)?;
    let r = decreasing_root(&h, |r| psi_raw(&h, r))?;
    let ratios: Vec<f64> = h
        .gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| if i == h.best_arm { 0.0 } else { 1.0 / (r * g * g - 1.0) })
        .collect();
    let sum: f64 = ratios.iter().sum();
    let w_best = 1.0 / (1.0 + sum);
    let allocation = ratios
        .iter()
        .enumerate()
        .map(|(i, &q)| if i == h.best_arm { w_best } else { w_best * q })
        .collect();
    Ok(CharacteristicResult {
        time: 2.0 * r * (1.0 + sum),
        allocation,
        radius: r,
    })
}

/// `T*_β(μ)` and the `β`-optimal allocation `w*_β(μ)`.
pub fn solve_constrained(inst: &Instance, beta: f64) -> Result<CharacteristicResult> {
    check_beta(beta)?;
    let h = gaps_and_hardness(inst)?;
    let r = decreasing_root(&h, |r| phi_raw(&h, beta, r))?;
    let allocation = h
        .gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| if i == h.best_arm { beta } else { beta / (r * g * g - 1.0) })
        .collect();
    Ok(CharacteristicResult {
        time: 2.0 * r / beta,
        allocation,
        radius: r,
    })
}

/// Transportation costs `Δ_i² / (2(1/w_{i*} + 1/w_i))` for every `i ≠ i*`.
pub fn transportation_costs(h: &Hardness, allocation: &[f64]) -> Vec<f64> {
    let inv_best = 1.0 / allocation[h.best_arm];
    h.gaps
        .iter()
        .zip(allocation)
        .enumerate()
        .filter(|&(i, _)| i != h.best_arm)
        .map(|(_, (&g, &w))| g * g / (2.0 * (inv_best + 1.0 / w)))
        .collect()
}

/// Largest `K` accepted by [`grid_oracle`].
pub const GRID_ORACLE_MAX_ARMS: usize = 5;

/// Brute-force maximisation of the smallest transportation cost over a
/// simplex grid with `resolution` cells per unit of mass.
///
/// With `beta` given, the best arm's weight is fixed to `beta` and the
/// remaining `1 − β` is split on the grid. Ties between grid points resolve to
/// the lexicographically smallest one so the answer does not depend on how
/// the search is chunked across threads.
pub fn grid_oracle(
    inst: &Instance,
    beta: Option<f64>,
    resolution: usize,
) -> Result<CharacteristicResult> {
    let k = inst.num_arms();
    if k > GRID_ORACLE_MAX_ARMS {
        return Err(Error::InvalidParameter(format!(
            "grid oracle supports at most {GRID_ORACLE_MAX_ARMS} arms, got {k}"
        )));
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter("grid resolution must be >= 2".into()));
    }
    if let Some(b) = beta {
        check_beta(b)?;
    }
    let h = gaps_and_hardness(inst)?;
    let free: Vec<usize> = match beta {
        Some(_) => (0..k).filter(|&i| i != h.best_arm).collect(),
        None => (0..k).collect(),
    };
    let mass = beta.map_or(1.0, |b| 1.0 - b);
    let step = mass / resolution as f64;

    // Same arithmetic as `transportation_costs`, without allocating.
    let eval = |counts: &[usize]| -> f64 {
        let mut buf = [0.0; GRID_ORACLE_MAX_ARMS];
        let w = &mut buf[..k];
        if let Some(b) = beta {
            w[h.best_arm] = b;
        }
        for (&arm, &c) in free.iter().zip(counts) {
            w[arm] = c as f64 * step;
        }
        if w.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        let inv_best = 1.0 / w[h.best_arm];
        (0..k)
            .filter(|&i| i != h.best_arm)
            .map(|i| h.gaps[i] * h.gaps[i] / (2.0 * (inv_best + 1.0 / w[i])))
            .fold(f64::INFINITY, f64::min)
    };

    // Enumerate compositions of `resolution` into `free.len()` positive parts,
    // parallelised over the first part.
    let parts = free.len();
    let best = (1..=resolution + 1 - parts)
        .into_par_iter()
        .map(|first| {
            let mut counts = vec![0usize; parts];
            counts[0] = first;
            let mut best: (f64, Vec<usize>) = (f64::NEG_INFINITY, Vec::new());
            enumerate_rest(&mut counts, 1, resolution - first, &mut |c| {
                let v = eval(c);
                if v > best.0 {
                    best = (v, c.to_vec());
                }
            });
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, Vec::new()),
            |a, b| match a.0.partial_cmp(&b.0) {
                Some(std::cmp::Ordering::Greater) => a,
                Some(std::cmp::Ordering::Less) => b,
                _ => {
                    if a.1 <= b.1 || b.1.is_empty() {
                        a
                    } else {
                        b
                    }
                }
            },
        );

    let mut allocation = vec![0.0; k];
    if let Some(b) = beta {
        allocation[h.best_arm] = b;
    }
    for (&arm, &c) in free.iter().zip(&best.1) {
        allocation[arm] = c as f64 * step;
    }
    Ok(CharacteristicResult {
        time: 1.0 / best.0,
        allocation,
        radius: f64::NAN,
    })
}

fn enumerate_rest(counts: &mut [usize], pos: usize, remaining: usize, visit: &mut impl FnMut(&[usize])) {
    let parts = counts.len();
    if pos == parts {
        if remaining == 0 {
            visit(counts);
        }
        return;
    }
    if pos == parts - 1 {
        if remaining >= 1 {
            counts[pos] = remaining;
            visit(counts);
        }
        return;
    }
    let slots_after = parts - pos - 1;
    if remaining < slots_after + 1 {
        return;
    }
    for c in 1..=remaining - slots_after {
        counts[pos] = c;
        enumerate_rest(counts, pos + 1, remaining - c, visit);
    }
}

/// `Ω = T*_{1/2}(μ) / T*(μ)`.
pub fn beta_ratio(inst: &Instance) -> Result<f64> {
    Ok(solve_constrained(inst, 0.5)?.time / solve_unconstrained(inst)?.time)
}

/// `r_K = 2K/(1 + √(K−1))²`, the ratio attained at equal-means instances.
pub fn r_k(num_arms: usize) -> f64 {
    let k = num_arms as f64;
    2.0 * k / (1.0 + (k - 1.0).sqrt()).powi(2)
}

/// `h₁(x) = x W̄₋₁(ln x + (2 + K/β)/x)`, with the argument clamped at 1.
pub fn h1(x: f64, beta: f64, num_arms: usize) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain("h1", format!("need x > 0, got {x}")));
    }
    let arg = x.ln() + (2.0 + num_arms as f64 / beta) / x;
    Ok(x * lambert_w_bar(arg.max(1.0))?)
}

/// `h₃(x) = x W̄₋₁(ln x)` for `x ≥ e`, `x` below.
pub fn h3(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain("h3", format!("need x > 0, got {x}")));
    }
    if x >= std::f64::consts::E {
        Ok(x * lambert_w_bar(x.ln())?)
    } else {
        Ok(x)
    }
}

/// Largest integer `n >= start` satisfying `holds(n)`, or `start - 1` if none
/// does.
///
/// The sets searched here are intervals in practice (a concave right-hand
/// side against a linear left-hand side), but this is not assumed blindly: a
/// candidate is only accepted once the next 64 integers all fail.
fn implicit_sup(start: u64, holds: impl Fn(u64) -> bool) -> u64 {
    const WINDOW: u64 = 64;
    const SCAN: u64 = 4096;
    let mut lo = match (start..start + SCAN).find(|&n| holds(n)) {
        Some(n) => n,
        None => return start - 1,
    };
    loop {
        // Exponential search for a failing upper bracket.
        let mut step = 1u64;
        let mut hi = lo + step;
        while holds(hi) {
            lo = hi;
            step = step.saturating_mul(2);
            hi = lo.saturating_add(step);
            if hi == u64::MAX {
                return u64::MAX;
            }
        }
        // Bisection: holds(lo) and !holds(hi).
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if holds(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        match (lo + 1..=lo + WINDOW).find(|&n| holds(n)) {
            Some(n) => lo = n,
            None => return lo,
        }
    }
}

/// Parameters of the Top Two non-asymptotic bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub s: f64,
    pub eps: f64,
    pub w0: f64,
}

impl BoundParams {
    /// β = 1/2, α = s = 1.2.
    pub fn instantiated(delta: f64, eps: f64, w0: f64) -> Self {
        Self {
            delta,
            beta: 0.5,
            alpha: numerics::DEFAULT_ALPHA,
            s: numerics::DEFAULT_S,
            eps,
            w0,
        }
    }

    fn validate(&self, num_arms: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        check_beta(self.beta)?;
        if !(self.alpha > 1.0 && self.s > 1.0) {
            return bad(format!("need alpha > 1 and s > 1, got {} and {}", self.alpha, self.s));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("eps must lie in (0, 1], got {}", self.eps));
        }
        let w0_max = 1.0 / (num_arms as f64 - 1.0);
        if !(self.w0 >= 0.0 && self.w0 <= w0_max) {
            return bad(format!("w0 must lie in [0, {w0_max}], got {}", self.w0));
        }
        Ok(())
    }
}

/// Every term of the Top Two sample-complexity upper bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub t0_delta: u64,
    pub c_mu: f64,
    /// Implicit constant obtained with the mixture bonus in place of `C_μ`.
    pub c_mu_mixture: u64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub d_mu: usize,
    pub a_mu: f64,
    pub hardness: f64,
    pub t_star_beta: f64,
    /// Multiplier of `(√c(n−1,δ) + √(α(2+s) ln n))²` in the definition of `T₀(δ)`.
    pub leading_constant: f64,
    pub total: f64,
    pub params: BoundParams,
}

fn exact_threshold(num_arms: usize) -> ThresholdSpec {
    ThresholdSpec {
        kind: ThresholdKind::Exact,
        num_arms,
    }
}

/// `sup{n > K : n − 1 ≤ A (√c(n−1, δ) + √(α(2+s) ln n))²}` with the exact threshold.
fn delta_time(num_arms: usize, leading: f64, alpha: f64, s: f64, log_inv_delta: f64) -> Result<u64> {
    let spec = exact_threshold(num_arms);
    // Only the n-independent part of c can fail; check it once.
    numerics::threshold_log(&spec, 2.0, log_inv_delta)?;
    let holds = |n: u64| {
        let nf = n as f64;
        let c = numerics::threshold_log(&spec, (nf - 1.0).max(1.0), log_inv_delta)
            .expect("threshold arguments validated");
        let rhs = leading * (c.sqrt() + (alpha * (2.0 + s) * nf.ln()).sqrt()).powi(2);
        nf - 1.0 <= rhs
    };
    Ok(implicit_sup(num_arms as u64 + 1, holds))
}

/// Pieces of the Top Two bound that do not depend on δ.
struct Theorem2Parts {
    hardness: Hardness,
    t_star_beta: f64,
    d_mu: usize,
    a_mu: f64,
    leading: f64,
}

fn theorem2_parts(inst: &Instance, p: &BoundParams) -> Result<Theorem2Parts> {
    p.validate(inst.num_arms())?;
    let hardness = gaps_and_hardness(inst)?;
    let sol = solve_constrained(inst, p.beta)?;
    let clip = (1.0 - p.beta) * p.w0;
    let others = || {
        sol.allocation
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != hardness.best_arm)
            .map(|(_, &w)| w)
    };
    let d_mu = others().filter(|&w| w < clip).count();
    let shrink = (1.0 - p.w0).powi(d_mu as i32);
    let w_min = others().fold(f64::INFINITY, f64::min);
    let a_mu = shrink * w_min.max(clip);
    let leading = sol.time * (1.0 + p.eps).powi(2) / (p.beta * shrink);
    Ok(Theorem2Parts {
        hardness,
        t_star_beta: sol.time,
        d_mu,
        a_mu,
        leading,
    })
}

/// `T₀(δ)` evaluated at `ln(1/δ) = log_inv_delta`; `params.delta` is ignored.
pub fn t0_time_log(inst: &Instance, params: &BoundParams, log_inv_delta: f64) -> Result<u64> {
    let parts = theorem2_parts(inst, params)?;
    delta_time(inst.num_arms(), parts.leading, params.alpha, params.s, log_inv_delta)
}

/// `C̃_μ = sup{x ∈ ℕ* : x < 2H g_m(x^α)/β + K/β + 2}`.
pub fn implicit_mixture_constant(inst: &Instance, beta: f64, alpha: f64, s: f64) -> Result<u64> {
    check_beta(beta)?;
    let spec = BonusSpec::new(BonusKind::Mixture, alpha, s)?;
    let h = gaps_and_hardness(inst)?;
    let k = inst.num_arms() as f64;
    let holds = |x: u64| {
        let xf = x as f64;
        xf < 2.0 * h.hardness * numerics::bonus_at(&spec, xf.powf(alpha)) / beta + k / beta + 2.0
    };
    Ok(implicit_sup(1, holds))
}

/// The Top Two non-asymptotic bound
/// `max{T₀(δ), C_μ^α, C₀^{α/(α−1)}, C₁^α} + C₂` with every intermediate.
pub fn theorem2_bound(inst: &Instance, params: &BoundParams) -> Result<BoundReport> {
    let parts = theorem2_parts(inst, params)?;
    let k = inst.num_arms();
    let p = params;
    let t0 = delta_time(k, parts.leading, p.alpha, p.s, -p.delta.ln())?;
    let c_mu = h1(
        4.0 * p.alpha * p.alpha * (1.0 + p.s) * parts.hardness.hardness / p.beta,
        p.beta,
        k,
    )?;
    let c0 = 2.0 / (p.eps * parts.a_mu) + 1.0;
    let c1 = 1.0 / (p.beta * p.eps);
    let c2 = (2.0 * k as f64 - 1.0) * riemann_zeta(p.s)? + 1.0;
    let total = [
        t0 as f64,
        c_mu.powf(p.alpha),
        c0.powf(p.alpha / (p.alpha - 1.0)),
        c1.powf(p.alpha),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
        + c2;
    Ok(BoundReport {
        t0_delta: t0,
        c_mu,
        c_mu_mixture: implicit_mixture_constant(inst, p.beta, p.alpha, p.s)?,
        c0,
        c1,
        c2,
        d_mu: parts.d_mu,
        a_mu: parts.a_mu,
        hardness: parts.hardness.hardness,
        t_star_beta: parts.t_star_beta,
        leading_constant: parts.leading,
        total,
        params: *p,
    })
}

/// Terms of the uniform-sampling bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBound {
    pub t1_delta: u64,
    pub h3_term: f64,
    /// `4K/Δ_min²`, the multiplier in the definition of `T₁(δ)`.
    pub leading_constant: f64,
    pub total: f64,
}

/// `max{T₁(δ), h₃(8αK(1+s)/Δ_min²)} + 1 + (2K−1)ζ(s)`.
pub fn uniform_bound(inst: &Instance, delta: f64, alpha: f64, s: f64) -> Result<UniformBound> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(alpha > 1.0 && s > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need alpha > 1 and s > 1, got {alpha} and {s}"
        )));
    }
    let h = gaps_and_hardness(inst)?;
    let k = inst.num_arms();
    let dmin2 = h.delta_min * h.delta_min;
    let leading = 4.0 * k as f64 / dmin2;
    let t1 = delta_time(k, leading, alpha, s, -delta.ln())?;
    let h3_term = h3(8.0 * alpha * k as f64 * (1.0 + s) / dmin2)?;
    let total = (t1 as f64).max(h3_term) + 1.0 + (2.0 * k as f64 - 1.0) * riemann_zeta(s)?;
    Ok(UniformBound {
        t1_delta: t1,
        h3_term,
        leading_constant: leading,
        total,
    })
}

/// `T*(μ) ln(1/(2.4δ))`, the asymptotic lower-bound reference line.
pub fn lower_bound_line(inst: &Instance, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(solve_unconstrained(inst)?.time * (1.0 / (2.4 * delta)).ln())
}
