//! Episode state, the GLR stopping rule and the recommendation rule.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{threshold_log, ThresholdSpec};

/// Interaction record of one episode.
///
/// `n` is the index of the next round, so `n − 1` samples have been observed.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    n: u64,
    pulls: Vec<u64>,
    sums: Vec<f64>,
    leader_counts: Vec<u64>,
    pair_counts: Vec<u64>,
    last_leader: Option<usize>,
    last_challenger: Option<usize>,
}

impl BanditState {
    pub fn new(num_arms: usize) -> Result<Self> {
        if num_arms < 2 {
            return Err(Error::InvalidParameter(format!(
                "a bandit needs at least two arms, got {num_arms}"
            )));
        }
        Ok(Self {
            n: 1,
            pulls: vec![0; num_arms],
            sums: vec![0.0; num_arms],
            leader_counts: vec![0; num_arms],
            pair_counts: vec![0; num_arms * num_arms],
            last_leader: None,
            last_challenger: None,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.pulls.len()
    }

    /// Round index `n`.
    pub fn round(&self) -> u64 {
        self.n
    }

    /// Number of samples observed so far, `n − 1`.
    pub fn samples(&self) -> u64 {
        self.n - 1
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn leader_counts(&self) -> &[u64] {
        &self.leader_counts
    }

    /// `N^leader_{n,arm}`: rounds where `leader` led and `arm` was pulled.
    pub fn pair_count(&self, leader: usize, arm: usize) -> u64 {
        self.pair_counts[leader * self.num_arms() + arm]
    }

    pub fn last_leader(&self) -> Option<usize> {
        self.last_leader
    }

    pub fn last_challenger(&self) -> Option<usize> {
        self.last_challenger
    }

    pub fn all_pulled(&self) -> bool {
        self.pulls.iter().all(|&p| p > 0)
    }

    /// Empirical mean of `arm`; NaN before its first pull.
    pub fn mean(&self, arm: usize) -> f64 {
        self.sums[arm] / self.pulls[arm] as f64
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.num_arms()).map(|i| self.mean(i)).collect()
    }

    /// `î_n`, lowest index on ties.
    pub fn empirical_best(&self) -> usize {
        crate::argmax(&self.means())
    }

    fn check_arm(&self, arm: usize) -> Result<()> {
        if arm >= self.num_arms() {
            return Err(Error::InvalidParameter(format!(
                "arm {arm} out of range for K = {}",
                self.num_arms()
            )));
        }
        Ok(())
    }

    /// Records a sample without leader bookkeeping (initialization and
    /// non Top Two rules).
    pub fn record(&mut self, arm: usize, sample: f64) -> Result<()> {
        self.check_arm(arm)?;
        self.pulls[arm] += 1;
        self.sums[arm] += sample;
        self.n += 1;
        Ok(())
    }

    /// Records a Top Two round.
    pub fn observe(&mut self, leader: usize, challenger: usize, chosen: usize, sample: f64) -> Result<()> {
        self.check_arm(leader)?;
        self.check_arm(challenger)?;
        self.check_arm(chosen)?;
        if chosen != leader && chosen != challenger {
            return Err(Error::InvalidParameter(format!(
                "chosen arm {chosen} is neither the leader {leader} nor the challenger {challenger}"
            )));
        }
        self.record(chosen, sample)?;
        let k = self.num_arms();
        self.leader_counts[leader] += 1;
        self.pair_counts[leader * k + chosen] += 1;
        self.last_leader = Some(leader);
        self.last_challenger = Some(challenger);
        Ok(())
    }
}

/// Outcome of the GLR stopping test at the current round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppingDecision {
    pub stop: bool,
    /// `min_{i≠î} (μ̂_î − μ̂_i)/√(1/N_î + 1/N_i)`.
    pub statistic: f64,
    pub recommendation: usize,
    /// `√(2 c(n − 1, δ))`.
    pub threshold_value: f64,
}

/// Smallest pairwise GLR statistic against the empirical best arm.
pub fn glr_statistic(state: &BanditState) -> Result<(usize, f64)> {
    if !state.all_pulled() {
        return Err(Error::InvalidParameter(
            "GLR statistic needs every arm pulled at least once".into(),
        ));
    }
    let means = state.means();
    let best = crate::argmax(&means);
    let inv_best = 1.0 / state.pulls[best] as f64;
    let stat = (0..state.num_arms())
        .filter(|&i| i != best)
        .map(|i| (means[best] - means[i]) / (inv_best + 1.0 / state.pulls[i] as f64).sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok((best, stat))
}

pub fn glr_check(state: &BanditState, delta: f64, spec: &ThresholdSpec) -> Result<StoppingDecision> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("glr_check", format!("need 0 < delta < 1, got {delta}")));
    }
    glr_check_log(state, -delta.ln(), spec)
}

/// [`glr_check`] parameterised by `ln(1/δ)`.
pub fn glr_check_log(state: &BanditState, log_inv_delta: f64, spec: &ThresholdSpec) -> Result<StoppingDecision> {
    let (recommendation, statistic) = glr_statistic(state)?;
    let c = threshold_log(spec, state.samples().max(1) as f64, log_inv_delta)?;
    let threshold_value = (2.0 * c).sqrt();
    Ok(StoppingDecision {
        stop: statistic >= threshold_value,
        statistic,
        recommendation,
        threshold_value,
    })
}

/// `N_n/(n − 1)`.
pub fn empirical_allocation(state: &BanditState) -> Result<Vec<f64>> {
    if state.samples() == 0 {
        return Err(Error::InvalidParameter("no samples observed yet".into()));
    }
    let t = state.samples() as f64;
    Ok(state.pulls.iter().map(|&p| p as f64 / t).collect())
}
