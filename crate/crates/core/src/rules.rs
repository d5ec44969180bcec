//! Sampling rules: the Top Two family (TTUCB, TTTS, T3C, β-EB-TCI and their
//! tracking, sampling and adaptive variants), LUCB, β-LUCB, Track-and-Stop
//! and uniform sampling.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bandit::BanditState;
use crate::characteristic::{solve_unconstrained, Instance};
use crate::error::{Error, Result};
use crate::numerics::{bonus, threshold_log, BonusKind, BonusSpec, ThresholdSpec};

pub const DEFAULT_MAX_RESAMPLES: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Leader {
    Ucb(BonusSpec),
    /// Thompson sampling leader.
    Ts,
    /// Empirical best, i.e. UCB with a zero bonus.
    Eb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Challenger {
    /// Transportation cost.
    Tc,
    /// Transportation cost plus `ln N_i`.
    Tci,
    /// Re-sampling, falling back to TC after `max_resamples` failures.
    Rs { max_resamples: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    Tracking,
    Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaMode {
    Fixed(f64),
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleConfig {
    TopTwo {
        leader: Leader,
        challenger: Challenger,
        selector: Selector,
        beta: BetaMode,
    },
    Lucb,
    BetaLucb {
        beta: f64,
    },
    TrackAndStop,
    Uniform,
}

impl RuleConfig {
    /// UCB leader with the mixture bonus, TC challenger, tracking, β = 1/2.
    pub fn ttucb(beta: f64) -> Self {
        RuleConfig::TopTwo {
            leader: Leader::Ucb(BonusSpec::mixture()),
            challenger: Challenger::Tc,
            selector: Selector::Tracking,
            beta: BetaMode::Fixed(beta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |b: f64| {
            if b > 0.0 && b < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {b}")))
            }
        };
        match self {
            RuleConfig::TopTwo { leader, beta, .. } => {
                if let Leader::Ucb(spec) = leader {
                    BonusSpec::new(spec.kind, spec.alpha, spec.s)?;
                }
                match beta {
                    BetaMode::Fixed(b) => check(*b),
                    BetaMode::Adaptive => Ok(()),
                }
            }
            RuleConfig::BetaLucb { beta } => check(*beta),
            _ => Ok(()),
        }
    }
}

/// Parses rule names such as `ttucb`, `t3c-adaptive-tracking` or `ttucb@0.3`.
///
/// Top Two names accept `-adaptive` and then `-sampling` or `-tracking`. The `@β` suffix sets a fixed leader proportion for Top Two rules and the
/// coin bias for `beta-lucb`.
impl FromStr for RuleConfig {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        let unknown = || {
            Error::InvalidParameter(format!(
                "unknown rule `{name}` (expected ttucb, t3c, ttts, eb-tci, lucb, beta-lucb, tas or \
                 uniform; Top Two rules take -adaptive, -sampling, -tracking or @beta)"
            ))
        };
        let (base, beta) = match name.split_once('@') {
            Some((b, v)) => (b, Some(v.parse::<f64>().map_err(|_| unknown())?)),
            None => (name, None),
        };
        let (base, selector) = if let Some(b) = base.strip_suffix("-sampling") {
            (b, Some(Selector::Sampling))
        } else if let Some(b) = base.strip_suffix("-tracking") {
            (b, Some(Selector::Tracking))
        } else {
            (base, None)
        };
        let (base, adaptive) = match base.strip_suffix("-adaptive") {
            Some(b) => (b, true),
            None => (base, false),
        };
        let top_two = |leader, challenger, default_selector| {
            let beta = match (beta, adaptive) {
                (Some(_), true) => return Err(unknown()),
                (Some(b), false) => BetaMode::Fixed(b),
                (None, true) => BetaMode::Adaptive,
                (None, false) => BetaMode::Fixed(0.5),
            };
            Ok(RuleConfig::TopTwo {
                leader,
                challenger,
                selector: selector.unwrap_or(default_selector),
                beta,
            })
        };
        let rs = Challenger::Rs {
            max_resamples: DEFAULT_MAX_RESAMPLES,
        };
        let ucb = Leader::Ucb(BonusSpec::mixture());
        let config = match base {
            "ttucb" => top_two(ucb, Challenger::Tc, Selector::Tracking)?,
            "t3c" => top_two(Leader::Ts, Challenger::Tc, Selector::Sampling)?,
            "ttts" => top_two(Leader::Ts, rs, Selector::Sampling)?,
            "eb-tci" => top_two(Leader::Eb, Challenger::Tci, Selector::Sampling)?,
            _ if selector.is_some() || adaptive => return Err(unknown()),
            "lucb" if beta.is_none() => RuleConfig::Lucb,
            "beta-lucb" => RuleConfig::BetaLucb {
                beta: beta.unwrap_or(0.5),
            },
            "tas" if beta.is_none() => RuleConfig::TrackAndStop,
            "uniform" if beta.is_none() => RuleConfig::Uniform,
            _ => return Err(unknown()),
        };
        config.validate()?;
        Ok(config)
    }
}

impl fmt::Display for RuleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleConfig::TopTwo {
                leader,
                challenger,
                selector,
                beta,
            } => {
                let leader = match leader {
                    Leader::Ucb(spec) => match spec.kind {
                        BonusKind::Union => format!("ucb-gu({},{})", spec.alpha, spec.s),
                        BonusKind::Mixture => format!("ucb-gm({},{})", spec.alpha, spec.s),
                        BonusKind::Zero => "eb".to_string(),
                    },
                    Leader::Ts => "ts".to_string(),
                    Leader::Eb => "eb".to_string(),
                };
                let challenger = match challenger {
                    Challenger::Tc => "tc".to_string(),
                    Challenger::Tci => "tci".to_string(),
                    Challenger::Rs { max_resamples } => format!("rs({max_resamples})"),
                };
                let selector = match selector {
                    Selector::Tracking => "tracking",
                    Selector::Sampling => "sampling",
                };
                let beta = match beta {
                    BetaMode::Fixed(b) => b.to_string(),
                    BetaMode::Adaptive => "adaptive".to_string(),
                };
                write!(f, "top-two({leader},{challenger},{selector},{beta})")
            }
            RuleConfig::Lucb => f.write_str("lucb"),
            RuleConfig::BetaLucb { beta } => write!(f, "beta-lucb@{beta}"),
            RuleConfig::TrackAndStop => f.write_str("tas"),
            RuleConfig::Uniform => f.write_str("uniform"),
        }
    }
}

const STREAM_TS: u64 = 1;
const STREAM_RS: u64 = 2;
const STREAM_COIN: u64 = 3;
const STREAM_TIES: u64 = 4;

/// Algorithm-internal random streams of one episode.
///
/// Each purpose draws from its own ChaCha stream of the episode seed, so a
/// rule that never uses e.g. posterior draws leaves the other streams intact.
#[derive(Debug, Clone)]
pub struct RuleRng {
    pub ts: ChaCha8Rng,
    pub rs: ChaCha8Rng,
    pub coin: ChaCha8Rng,
    pub ties: ChaCha8Rng,
}

/// ChaCha8 generator for sub-stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl RuleRng {
    pub fn new(seed: u64) -> Self {
        Self {
            ts: stream_rng(seed, STREAM_TS),
            rs: stream_rng(seed, STREAM_RS),
            coin: stream_rng(seed, STREAM_COIN),
            ties: stream_rng(seed, STREAM_TIES),
        }
    }
}

/// Per-leader running averages of the adaptive proportion.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingState {
    pub avg_beta: Vec<f64>,
    pub counts: Vec<u64>,
}

impl TrackingState {
    pub fn new(num_arms: usize) -> Self {
        Self {
            avg_beta: vec![0.0; num_arms],
            counts: vec![0; num_arms],
        }
    }

    fn fold(&mut self, leader: usize, beta: f64) -> f64 {
        self.counts[leader] += 1;
        let c = self.counts[leader] as f64;
        self.avg_beta[leader] += (beta - self.avg_beta[leader]) / c;
        self.avg_beta[leader]
    }
}

fn argmin(values: impl Iterator<Item = (usize, f64)>) -> usize {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, v) in values {
        if best.0 == usize::MAX || v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// `argmax_i μ̂_i + √(g(n)/N_i)`.
pub fn ucb_leader(state: &BanditState, spec: &BonusSpec) -> usize {
    let g = bonus(spec, state.round());
    let index: Vec<f64> = (0..state.num_arms())
        .map(|i| state.mean(i) + (g / state.pulls()[i] as f64).sqrt())
        .collect();
    crate::argmax(&index)
}

fn posterior_draw<R: Rng + ?Sized>(state: &BanditState, rng: &mut R) -> Vec<f64> {
    (0..state.num_arms())
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            state.mean(i) + z / (state.pulls()[i] as f64).sqrt()
        })
        .collect()
}

/// Argmax of one draw from the Gaussian posterior `N(μ̂_i, 1/N_i)`.
pub fn ts_leader<R: Rng + ?Sized>(state: &BanditState, rng: &mut R) -> usize {
    crate::argmax(&posterior_draw(state, rng))
}

/// Transportation-cost challenger.
///
/// Arms whose empirical mean is at least the leader's all have zero cost; one
/// of them is drawn uniformly from `rng` when there are several.
pub fn tc_challenger<R: Rng + ?Sized>(state: &BanditState, leader: usize, rng: &mut R) -> usize {
    let mu_b = state.mean(leader);
    let at_least: Vec<usize> = (0..state.num_arms())
        .filter(|&i| i != leader && state.mean(i) >= mu_b)
        .collect();
    match at_least.len() {
        0 => {}
        1 => return at_least[0],
        m => return at_least[rng.random_range(0..m)],
    }
    let inv_b = 1.0 / state.pulls()[leader] as f64;
    argmin((0..state.num_arms()).filter(|&i| i != leader).map(|i| {
        let cost = (mu_b - state.mean(i)) / (inv_b + 1.0 / state.pulls()[i] as f64).sqrt();
        (i, cost)
    }))
}

/// Transportation cost with a `ln N_i` penalty.
pub fn tci_challenger(state: &BanditState, leader: usize) -> usize {
    let mu_b = state.mean(leader);
    let inv_b = 1.0 / state.pulls()[leader] as f64;
    argmin((0..state.num_arms()).filter(|&i| i != leader).map(|i| {
        let n_i = state.pulls()[i] as f64;
        let gap = mu_b - state.mean(i);
        let cost = if gap > 0.0 { gap * gap / (2.0 * (inv_b + 1.0 / n_i)) } else { 0.0 };
        (i, cost + n_i.ln())
    }))
}

/// Re-sampling challenger: the argmax of the first posterior draw whose argmax
/// is not the leader.
pub fn rs_challenger<R: Rng + ?Sized>(
    state: &BanditState,
    leader: usize,
    rng: &mut R,
    fallback_rng: &mut R,
    max_resamples: u32,
) -> usize {
    for _ in 0..max_resamples {
        let a = crate::argmax(&posterior_draw(state, rng));
        if a != leader {
            return a;
        }
    }
    tc_challenger(state, leader, fallback_rng)
}

/// Chooses between leader and challenger; returns the arm and the proportion used.
pub fn select_arm<R: Rng + ?Sized>(
    selector: Selector,
    beta: BetaMode,
    state: &BanditState,
    tracking: &mut TrackingState,
    leader: usize,
    challenger: usize,
    rng: &mut R,
) -> (usize, f64) {
    let beta_used = match beta {
        BetaMode::Fixed(b) => b,
        BetaMode::Adaptive => {
            let n_b = state.pulls()[leader] as f64;
            let n_c = state.pulls()[challenger] as f64;
            let beta_n = n_c / (n_b + n_c);
            let avg = tracking.fold(leader, beta_n);
            match selector {
                Selector::Tracking => avg,
                Selector::Sampling => beta_n,
            }
        }
    };
    let pick_leader = match selector {
        Selector::Tracking => {
            let own = state.pair_count(leader, leader) as f64;
            own <= beta_used * (state.leader_counts()[leader] + 1) as f64
        }
        Selector::Sampling => rng.random::<f64>() < beta_used,
    };
    (if pick_leader { leader } else { challenger }, beta_used)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopTwoStep {
    pub leader: usize,
    pub challenger: usize,
    pub chosen: usize,
    pub beta_used: f64,
}

/// One Top Two round. Panics if `config` is not a Top Two rule.
pub fn step_top_two(
    config: &RuleConfig,
    state: &BanditState,
    tracking: &mut TrackingState,
    rng: &mut RuleRng,
) -> TopTwoStep {
    let RuleConfig::TopTwo {
        leader: leader_kind,
        challenger: challenger_kind,
        selector,
        beta,
    } = *config
    else {
        panic!("step_top_two called with {config}");
    };
    let leader = match leader_kind {
        Leader::Ucb(spec) => ucb_leader(state, &spec),
        Leader::Ts => ts_leader(state, &mut rng.ts),
        Leader::Eb => state.empirical_best(),
    };
    let challenger = match challenger_kind {
        Challenger::Tc => tc_challenger(state, leader, &mut rng.ties),
        Challenger::Tci => tci_challenger(state, leader),
        Challenger::Rs { max_resamples } => {
            rs_challenger(state, leader, &mut rng.rs, &mut rng.ties, max_resamples)
        }
    };
    let (chosen, beta_used) = select_arm(selector, beta, state, tracking, leader, challenger, &mut rng.coin);
    TopTwoStep {
        leader,
        challenger,
        chosen,
        beta_used,
    }
}

/// Confidence indices of the LUCB family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LucbIndices {
    pub best: usize,
    /// `argmax_{i≠î} U_i`.
    pub challenger: usize,
    pub stop: bool,
}

/// `U/L = μ̂_i ± √(2c(n−1, δ)/N_i)`; stop when `L_î ≥ max_{i≠î} U_i`.
pub fn lucb_indices(state: &BanditState, log_inv_delta: f64, spec: &ThresholdSpec) -> Result<LucbIndices> {
    let c = threshold_log(spec, state.samples().max(1) as f64, log_inv_delta)?;
    let width = |i: usize| (2.0 * c / state.pulls()[i] as f64).sqrt();
    let best = state.empirical_best();
    let upper: Vec<f64> = (0..state.num_arms())
        .map(|i| if i == best { f64::NEG_INFINITY } else { state.mean(i) + width(i) })
        .collect();
    let challenger = crate::argmax(&upper);
    Ok(LucbIndices {
        best,
        challenger,
        stop: state.mean(best) - width(best) >= upper[challenger],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LucbStep {
    pub arms: Vec<usize>,
    pub stop: bool,
}

/// LUCB pulls both `î` and the challenger; β-LUCB pulls `î` with probability `β`.
pub fn step_lucb<R: Rng + ?Sized>(
    state: &BanditState,
    log_inv_delta: f64,
    spec: &ThresholdSpec,
    beta_variant: Option<f64>,
    rng: &mut R,
) -> Result<LucbStep> {
    let idx = lucb_indices(state, log_inv_delta, spec)?;
    let arms = match beta_variant {
        None => vec![idx.best, idx.challenger],
        Some(beta) => {
            if rng.random::<f64>() < beta {
                vec![idx.best]
            } else {
                vec![idx.challenger]
            }
        }
    };
    Ok(LucbStep { arms, stop: idx.stop })
}

fn least_pulled(state: &BanditState) -> usize {
    argmin(state.pulls().iter().map(|&p| p as f64).enumerate())
}

/// D-tracking of `w*(μ̂_n)` with forced exploration of arms below `√n − K/2`.
pub fn step_track_and_stop(state: &BanditState) -> usize {
    let n = state.round() as f64;
    let k = state.num_arms() as f64;
    let min_pulls = *state.pulls().iter().min().expect("K >= 2") as f64;
    if min_pulls < n.sqrt() - k / 2.0 {
        return least_pulled(state);
    }
    let target = Instance::new(state.means()).and_then(|inst| solve_unconstrained(&inst));
    match target {
        Ok(res) => {
            let deficit: Vec<f64> = res
                .allocation
                .iter()
                .zip(state.pulls())
                .map(|(&w, &p)| n * w - p as f64)
                .collect();
            crate::argmax(&deficit)
        }
        Err(_) => least_pulled(state),
    }
}

/// Round robin: arm `(n − 1) mod K`.
pub fn step_uniform(state: &BanditState) -> usize {
    (state.samples() % state.num_arms() as u64) as usize
}
