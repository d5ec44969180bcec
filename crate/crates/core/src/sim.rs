//! Seeded Monte Carlo engine: instance families, the episode loop, parallel
//! experiments and their CSV outputs.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{glr_check_log, BanditState};
use crate::characteristic::Instance;
use crate::error::{Error, Result};
use crate::numerics::{ThresholdKind, ThresholdSpec};
use crate::rules::{
    lucb_indices, step_lucb, step_top_two, step_track_and_stop, step_uniform, stream_rng,
    RuleConfig, RuleRng, TopTwoStep, TrackingState,
};

pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;
pub const DEFAULT_CHECKPOINT_EVERY: u64 = 10;

const STREAM_INSTANCE: u64 = 0;
const STREAM_OBSERVATION_BASE: u64 = 16;

/// Benchmark instance families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceFamily {
    /// `μ₁ = 0.6`, the other nine means uniform on `[0.2, 0.5]`.
    RandomK10,
    /// `μ₁ = 1/4`, all others 0.
    OneSparse { k: usize },
    /// `μ_i = 1 − ((i − 1)/(K − 1))^α`.
    Alpha { k: usize, alpha: f64 },
    /// Best arm at `top`, every other arm at `top − gap`.
    EqualMeans { k: usize, top: f64, gap: f64 },
    /// `μ₁ = 0.6`; the first `⌈(K − 1)/2⌉` competitors sit at gap
    /// `(0.995 + u/100)/20`, the rest at `(0.995 + u/100)/10`.
    CloseCompetitors { k: usize },
    Explicit { means: Vec<f64> },
}

impl InstanceFamily {
    pub fn num_arms(&self) -> usize {
        match self {
            InstanceFamily::RandomK10 => 10,
            InstanceFamily::OneSparse { k }
            | InstanceFamily::Alpha { k, .. }
            | InstanceFamily::EqualMeans { k, .. }
            | InstanceFamily::CloseCompetitors { k } => *k,
            InstanceFamily::Explicit { means } => means.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("{self}: {msg}")));
        if self.num_arms() < 2 {
            return bad(format!("need at least two arms, got {}", self.num_arms()));
        }
        match self {
            InstanceFamily::Alpha { alpha, .. } if !(*alpha > 0.0 && alpha.is_finite()) => {
                bad(format!("alpha must be positive, got {alpha}"))
            }
            InstanceFamily::EqualMeans { top, gap, .. } if !(*gap > 0.0 && gap.is_finite() && top.is_finite()) => {
                bad(format!("gap must be positive, got {gap}"))
            }
            InstanceFamily::Explicit { means } => Instance::new(means.clone())?.best_arm().map(|_| ()),
            _ => Ok(()),
        }
    }

    /// True when every draw yields the same instance.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, InstanceFamily::RandomK10 | InstanceFamily::CloseCompetitors { .. })
    }
}

impl fmt::Display for InstanceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceFamily::RandomK10 => f.write_str("random-k10"),
            InstanceFamily::OneSparse { k } => write!(f, "one-sparse-k{k}"),
            InstanceFamily::Alpha { k, alpha } => write!(f, "alpha-k{k}-a{alpha}"),
            InstanceFamily::EqualMeans { k, top, gap } => write!(f, "equal-means-k{k}-top{top}-gap{gap}"),
            InstanceFamily::CloseCompetitors { k } => write!(f, "close-competitors-k{k}"),
            InstanceFamily::Explicit { .. } => f.write_str("explicit"),
        }
    }
}

/// The instance an experiment draws for episode seed `seed`.
pub fn instance_for_seed(family: &InstanceFamily, seed: u64) -> Result<Instance> {
    generate(family, &mut stream_rng(seed, STREAM_INSTANCE))
}

/// Draws one instance of `family`.
pub fn generate<R: Rng + ?Sized>(family: &InstanceFamily, rng: &mut R) -> Result<Instance> {
    family.validate()?;
    let k = family.num_arms();
    let means = match family {
        InstanceFamily::RandomK10 => std::iter::once(0.6)
            .chain((1..10).map(|_| rng.random_range(0.2..=0.5)))
            .collect(),
        InstanceFamily::OneSparse { .. } => {
            let mut m = vec![0.0; k];
            m[0] = 0.25;
            m
        }
        InstanceFamily::Alpha { alpha, .. } => (0..k)
            .map(|i| 1.0 - (i as f64 / (k - 1) as f64).powf(*alpha))
            .collect(),
        InstanceFamily::EqualMeans { top, gap, .. } => {
            let mut m = vec![top - gap; k];
            m[0] = *top;
            m
        }
        InstanceFamily::CloseCompetitors { .. } => {
            let close = k / 2;
            std::iter::once(0.6)
                .chain((1..k).map(|i| {
                    let u: f64 = rng.random();
                    let scale = if i <= close { 1.0 / 20.0 } else { 1.0 / 10.0 };
                    0.6 - scale * (0.995 + u / 100.0)
                }))
                .collect()
        }
        InstanceFamily::Explicit { means } => means.clone(),
    };
    Instance::new(means)
}

/// Error indicators `1(î_t ≠ i*)` at sample counts `start, start + every, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTrajectory {
    pub start: u64,
    pub every: u64,
    pub errors: Vec<bool>,
}

impl ErrorTrajectory {
    fn new(num_arms: usize, every: u64) -> Self {
        let k = num_arms as u64;
        Self {
            start: k.div_ceil(every) * every,
            every,
            errors: Vec::new(),
        }
    }

    fn next_checkpoint(&self) -> u64 {
        self.start + self.every * self.errors.len() as u64
    }

    /// Error at sample count `t`; after the last checkpoint the final
    /// recommendation is frozen.
    pub fn error_at(&self, t: u64, final_error: bool) -> bool {
        if t < self.start {
            return true;
        }
        let j = ((t - self.start) / self.every) as usize;
        self.errors.get(j).copied().unwrap_or(final_error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    /// Number of samples at stopping, or `max_steps` when truncated.
    pub stopping_time: u64,
    pub recommended: usize,
    pub correct: bool,
    pub truncated: bool,
    pub error_trajectory: Option<ErrorTrajectory>,
    /// Mean leader proportion used by adaptive Top Two runs.
    pub beta_mean: Option<f64>,
    pub wall_seconds: f64,
}

/// One episode, exposed step by step.
#[derive(Debug, Clone)]
pub struct Episode {
    means: Vec<f64>,
    rule: RuleConfig,
    spec: ThresholdSpec,
    log_inv_delta: f64,
    state: BanditState,
    tracking: TrackingState,
    rng: RuleRng,
    observations: Vec<ChaCha8Rng>,
    beta_sum: f64,
    beta_rounds: u64,
}

impl Episode {
    /// Sets up the episode and pulls every arm once.
    pub fn new(inst: &Instance, rule: RuleConfig, threshold: ThresholdKind, delta: f64, seed: u64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
        }
        rule.validate()?;
        let k = inst.num_arms();
        let mut ep = Self {
            means: inst.means().to_vec(),
            rule,
            spec: ThresholdSpec::new(threshold, k)?,
            log_inv_delta: -delta.ln(),
            state: BanditState::new(k)?,
            tracking: TrackingState::new(k),
            rng: RuleRng::new(seed),
            observations: (0..k as u64)
                .map(|i| stream_rng(seed, STREAM_OBSERVATION_BASE + i))
                .collect(),
            beta_sum: 0.0,
            beta_rounds: 0,
        };
        for arm in 0..k {
            let x = ep.draw(arm);
            ep.state.record(arm, x)?;
        }
        Ok(ep)
    }

    fn draw(&mut self, arm: usize) -> f64 {
        let z: f64 = self.observations[arm].sample(StandardNormal);
        self.means[arm] + z
    }

    pub fn state(&self) -> &BanditState {
        &self.state
    }

    pub fn tracking(&self) -> &TrackingState {
        &self.tracking
    }

    /// Mean of the leader proportions used so far.
    pub fn beta_mean(&self) -> Option<f64> {
        (self.beta_rounds > 0).then(|| self.beta_sum / self.beta_rounds as f64)
    }

    /// Recommendation if the stopping rule fires at the current round.
    pub fn stop_check(&self) -> Result<Option<usize>> {
        match self.rule {
            RuleConfig::Lucb | RuleConfig::BetaLucb { .. } => {
                let idx = lucb_indices(&self.state, self.log_inv_delta, &self.spec)?;
                Ok(idx.stop.then_some(idx.best))
            }
            _ => {
                let d = glr_check_log(&self.state, self.log_inv_delta, &self.spec)?;
                Ok(d.stop.then_some(d.recommendation))
            }
        }
    }

    /// Plays one round of the sampling rule.
    pub fn step(&mut self) -> Result<Option<TopTwoStep>> {
        match self.rule {
            RuleConfig::TopTwo { .. } => {
                let step = step_top_two(&self.rule, &self.state, &mut self.tracking, &mut self.rng);
                let x = self.draw(step.chosen);
                self.state.observe(step.leader, step.challenger, step.chosen, x)?;
                self.beta_sum += step.beta_used;
                self.beta_rounds += 1;
                Ok(Some(step))
            }
            RuleConfig::Lucb | RuleConfig::BetaLucb { .. } => {
                let beta = match self.rule {
                    RuleConfig::BetaLucb { beta } => Some(beta),
                    _ => None,
                };
                let step = step_lucb(&self.state, self.log_inv_delta, &self.spec, beta, &mut self.rng.coin)?;
                for arm in step.arms {
                    let x = self.draw(arm);
                    self.state.record(arm, x)?;
                }
                Ok(None)
            }
            RuleConfig::TrackAndStop => {
                let arm = step_track_and_stop(&self.state);
                let x = self.draw(arm);
                self.state.record(arm, x)?;
                Ok(None)
            }
            RuleConfig::Uniform => {
                let arm = step_uniform(&self.state);
                let x = self.draw(arm);
                self.state.record(arm, x)?;
                Ok(None)
            }
        }
    }
}

/// Per-episode settings shared by every cell of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSettings {
    pub delta: f64,
    pub threshold: ThresholdKind,
    pub max_steps: u64,
    /// Record the error trajectory every this many samples.
    pub checkpoint_every: Option<u64>,
}

impl EpisodeSettings {
    pub fn new(delta: f64, threshold: ThresholdKind) -> Self {
        Self {
            delta,
            threshold,
            max_steps: DEFAULT_MAX_STEPS,
            checkpoint_every: None,
        }
    }
}

/// Runs one episode until the stopping rule fires or `max_steps` samples.
pub fn run_episode(inst: &Instance, rule: &RuleConfig, settings: &EpisodeSettings, seed: u64) -> Result<EpisodeResult> {
    let start = Instant::now();
    let k = inst.num_arms();
    if settings.max_steps <= k as u64 {
        return Err(Error::InvalidParameter(format!(
            "max_steps must exceed K = {k}, got {}",
            settings.max_steps
        )));
    }
    if settings.checkpoint_every == Some(0) {
        return Err(Error::InvalidParameter("checkpoint interval must be positive".into()));
    }
    let best = inst.best_arm()?;
    let mut ep = Episode::new(inst, *rule, settings.threshold, settings.delta, seed)?;
    let mut trajectory = settings.checkpoint_every.map(|every| ErrorTrajectory::new(k, every));

    let (stopping_time, recommended, truncated) = loop {
        let t = ep.state.samples();
        if let Some(tr) = trajectory.as_mut() {
            if tr.next_checkpoint() <= t {
                let wrong = ep.state.empirical_best() != best;
                while tr.next_checkpoint() <= t {
                    tr.errors.push(wrong);
                }
            }
        }
        if let Some(rec) = ep.stop_check()? {
            break (t, rec, false);
        }
        if t >= settings.max_steps {
            break (settings.max_steps, ep.state.empirical_best(), true);
        }
        ep.step()?;
    };

    let adaptive = matches!(
        rule,
        RuleConfig::TopTwo {
            beta: crate::rules::BetaMode::Adaptive,
            ..
        }
    );
    Ok(EpisodeResult {
        stopping_time,
        recommended,
        correct: !truncated && recommended == best,
        truncated,
        error_trajectory: trajectory,
        beta_mean: if adaptive { ep.beta_mean() } else { None },
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// A full experiment: every rule on `episodes` draws of every family.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub families: Vec<InstanceFamily>,
    /// Rule names as accepted by [`RuleConfig`]'s parser.
    pub rules: Vec<String>,
    pub settings: EpisodeSettings,
    pub episodes: usize,
    pub seed: u64,
    pub jobs: usize,
    /// Record wall-clock time per episode; when off the column is zero so
    /// that outputs are byte-identical across runs.
    pub timing: bool,
}

/// One row of the episode CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub run_id: u64,
    pub family: String,
    pub instance_id: u64,
    pub means: String,
    pub rule: String,
    pub delta: f64,
    pub threshold: String,
    pub seed: u64,
    pub stopping_time: u64,
    pub truncated: bool,
    pub recommended: usize,
    pub correct: bool,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: String,
    pub rule: String,
    pub episodes: usize,
    pub mean_stopping_time: f64,
    pub std_stopping_time: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub error_rate: f64,
    pub truncated: usize,
    pub mean_wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurveRow {
    pub rule: String,
    pub n: u64,
    pub error_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Sorted by `run_id`.
    pub rows: Vec<EpisodeRow>,
    /// Parallel to `rows`.
    pub results: Vec<EpisodeResult>,
}

/// Semicolon-joined means, as stored in the `means` CSV column.
pub fn join_means(means: &[f64]) -> String {
    means.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";")
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    if spec.episodes == 0 {
        return Err(Error::InvalidParameter("episodes must be at least 1".into()));
    }
    if spec.families.is_empty() || spec.rules.is_empty() {
        return Err(Error::InvalidParameter("need at least one family and one rule".into()));
    }
    let rules: Vec<RuleConfig> = spec.rules.iter().map(|r| r.parse()).collect::<Result<_>>()?;
    for f in &spec.families {
        f.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?;

    let per_family = spec.episodes as u64;
    let num_rules = rules.len() as u64;
    let total = spec.families.len() as u64 * per_family * num_rules;
    let threshold = spec.settings.threshold.to_string();

    let run = |run_id: u64| -> Result<(EpisodeRow, EpisodeResult)> {
        let instance_id = run_id / num_rules;
        let rule_idx = (run_id % num_rules) as usize;
        let family = &spec.families[(instance_id / per_family) as usize];
        let seed = spec.seed.wrapping_add(instance_id);
        let inst = instance_for_seed(family, seed)?;
        let mut res = run_episode(&inst, &rules[rule_idx], &spec.settings, seed)?;
        if !spec.timing {
            res.wall_seconds = 0.0;
        }
        let row = EpisodeRow {
            run_id,
            family: family.to_string(),
            instance_id,
            means: join_means(inst.means()),
            rule: spec.rules[rule_idx].clone(),
            delta: spec.settings.delta,
            threshold: threshold.clone(),
            seed,
            stopping_time: res.stopping_time,
            truncated: res.truncated,
            recommended: res.recommended,
            correct: res.correct,
            wall_seconds: res.wall_seconds,
        };
        Ok((row, res))
    };

    let pairs: Vec<(EpisodeRow, EpisodeResult)> =
        pool.install(|| (0..total).into_par_iter().map(run).collect::<Result<_>>())?;
    let (rows, results) = pairs.into_iter().unzip();
    Ok(ExperimentOutput { rows, results })
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Groups in first-appearance order.
fn groups<T, K: PartialEq>(items: &[T], key: impl Fn(&T) -> K) -> Vec<(K, Vec<&T>)> {
    let mut out: Vec<(K, Vec<&T>)> = Vec::new();
    for item in items {
        let k = key(item);
        match out.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(item),
            None => out.push((k, vec![item])),
        }
    }
    out
}

/// Per (family, rule) statistics recomputed from episode rows.
pub fn summarize(rows: &[EpisodeRow]) -> Vec<SummaryRow> {
    groups(rows, |r| (r.family.clone(), r.rule.clone()))
        .into_iter()
        .map(|((family, rule), cell)| {
            let mut taus: Vec<f64> = cell.iter().map(|r| r.stopping_time as f64).collect();
            taus.sort_by(f64::total_cmp);
            let n = taus.len() as f64;
            let mean = taus.iter().sum::<f64>() / n;
            let var = if taus.len() > 1 {
                taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            SummaryRow {
                family,
                rule,
                episodes: cell.len(),
                mean_stopping_time: mean,
                std_stopping_time: var.sqrt(),
                min: taus[0],
                q25: quantile(&taus, 0.25),
                median: quantile(&taus, 0.5),
                q75: quantile(&taus, 0.75),
                max: taus[taus.len() - 1],
                error_rate: cell.iter().filter(|r| !r.correct).count() as f64 / n,
                truncated: cell.iter().filter(|r| r.truncated).count(),
                mean_wall_seconds: cell.iter().map(|r| r.wall_seconds).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Wilson score interval at 95%.
pub fn wilson_interval(errors: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = total as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if errors == total { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Error-before-stopping curves per rule, up to the rule's median stopping
/// time. Episodes that stopped earlier keep their final recommendation.
pub fn error_curves(output: &ExperimentOutput) -> Vec<ErrorCurveRow> {
    let pairs: Vec<(&EpisodeRow, &EpisodeResult)> = output.rows.iter().zip(&output.results).collect();
    let mut out = Vec::new();
    for (rule, cell) in groups(&pairs, |(row, _)| row.rule.clone()) {
        let trajectories: Vec<(&ErrorTrajectory, bool)> = cell
            .iter()
            .filter_map(|(row, res)| res.error_trajectory.as_ref().map(|t| (t, !row.correct)))
            .collect();
        let Some((first, _)) = trajectories.first() else {
            continue;
        };
        let mut taus: Vec<f64> = cell.iter().map(|(row, _)| row.stopping_time as f64).collect();
        taus.sort_by(f64::total_cmp);
        let median = quantile(&taus, 0.5);
        let (every, mut t) = (first.every, trajectories.iter().map(|(tr, _)| tr.start).min().unwrap_or(0));
        while t as f64 <= median {
            let errors = trajectories.iter().filter(|(tr, fin)| tr.error_at(t, *fin)).count();
            let total = trajectories.len();
            let (lo, hi) = wilson_interval(errors, total);
            out.push(ErrorCurveRow {
                rule: rule.clone(),
                n: t,
                error_rate: errors as f64 / total as f64,
                wilson_lo: lo,
                wilson_hi: hi,
            });
            t += every;
        }
    }
    out
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_episode_csv(path: &Path) -> Result<Vec<EpisodeRow>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut rows: Vec<EpisodeRow> = r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)?;
    rows.sort_by_key(|row| row.run_id);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristic::gaps_and_hardness;

    #[test]
    fn generators() {
        let mut rng = stream_rng(1, 0);
        let one = generate(&InstanceFamily::OneSparse { k: 10 }, &mut rng).unwrap();
        assert_eq!(one.means()[0], 0.25);
        assert!((gaps_and_hardness(&one).unwrap().hardness - 288.0).abs() < 1e-9);

        let a = generate(&InstanceFamily::Alpha { k: 10, alpha: 0.3 }, &mut rng).unwrap();
        assert_eq!(a.means()[0], 1.0);
        assert_eq!(a.means()[9], 0.0);
        let h = gaps_and_hardness(&a).unwrap().hardness;
        assert!((21.0..=39.0).contains(&h), "{h}");

        for _ in 0..50 {
            let r = generate(&InstanceFamily::RandomK10, &mut rng).unwrap();
            assert_eq!(r.means()[0], 0.6);
            assert!(r.means()[1..].iter().all(|m| (0.2..=0.5).contains(m)));
            let c = generate(&InstanceFamily::CloseCompetitors { k: 10 }, &mut rng).unwrap();
            for (i, m) in c.means().iter().enumerate().skip(1) {
                let gap = 0.6 - m;
                let scale = if i <= 5 { 0.05 } else { 0.1 };
                assert!(gap >= 0.995 * scale - 1e-12 && gap <= 1.005 * scale + 1e-12);
            }
        }

        let em = generate(&InstanceFamily::EqualMeans { k: 35, top: 0.0, gap: 0.5 }, &mut rng).unwrap();
        assert_eq!(em.best_arm().unwrap(), 0);
        assert!(em.means()[1..].iter().all(|&m| m == -0.5));

        assert!(generate(&InstanceFamily::OneSparse { k: 1 }, &mut rng).is_err());
        assert!(generate(&InstanceFamily::Explicit { means: vec![1.0, 1.0] }, &mut rng).is_err());
        assert!(generate(&InstanceFamily::EqualMeans { k: 3, top: 0.0, gap: 0.0 }, &mut rng).is_err());
    }

    #[test]
    fn family_toml_shape() {
        #[derive(Deserialize)]
        struct W {
            f: Vec<InstanceFamily>,
        }
        let w: W = toml::from_str(
            r#"
            [[f]]
            kind = "random-k10"
            [[f]]
            kind = "equal-means"
            k = 5
            top = 0.0
            gap = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(w.f[0], InstanceFamily::RandomK10);
        assert_eq!(w.f[1].to_string(), "equal-means-k5-top0-gap0.5");
        assert!(toml::from_str::<W>("[[f]]\nkind = \"one-sparse\"\nk = 5\nextra = 1\n").is_err());
    }

    #[test]
    fn easy_instance_stops_fast() {
        let inst = Instance::new(vec![3.0, 0.0]).unwrap();
        let settings = EpisodeSettings::new(0.1, ThresholdKind::Heuristic);
        let rule = RuleConfig::ttucb(0.5);
        let fast = (0..100)
            .filter(|&s| run_episode(&inst, &rule, &settings, s).unwrap().stopping_time <= 200)
            .count();
        assert!(fast >= 99);
    }

    #[test]
    fn truncation_is_a_result() {
        let inst = Instance::new(vec![0.01, 0.0]).unwrap();
        let mut settings = EpisodeSettings::new(0.01, ThresholdKind::Heuristic);
        settings.max_steps = 50;
        let r = run_episode(&inst, &"uniform".parse().unwrap(), &settings, 3).unwrap();
        assert!(r.truncated && !r.correct);
        assert_eq!(r.stopping_time, 50);
    }

    #[test]
    fn uniform_pulls_stay_balanced() {
        let inst = Instance::new(vec![0.3, 0.2, 0.1]).unwrap();
        let mut ep = Episode::new(&inst, RuleConfig::Uniform, ThresholdKind::Heuristic, 0.1, 5).unwrap();
        for _ in 0..1000 {
            ep.step().unwrap();
            let p = ep.state().pulls();
            assert!(p.iter().max().unwrap() - p.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn error_trajectory_checkpoints() {
        let inst = Instance::new(vec![0.5, 0.4, 0.3]).unwrap();
        let mut settings = EpisodeSettings::new(0.1, ThresholdKind::Heuristic);
        settings.checkpoint_every = Some(10);
        let r = run_episode(&inst, &"lucb".parse().unwrap(), &settings, 9).unwrap();
        let tr = r.error_trajectory.unwrap();
        assert_eq!(tr.start, 10);
        assert_eq!(tr.errors.len() as u64, (r.stopping_time - 10) / 10 + 1);
        assert!(tr.error_at(5, false));
        assert!(!tr.error_at(r.stopping_time + 1000, false));
    }

    #[test]
    fn quantiles_and_wilson() {
        let d = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&d, 0.5), 2.5);
        assert_eq!(quantile(&d, 0.0), 1.0);
        assert_eq!(quantile(&d, 1.0), 4.0);
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_995).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403_832).abs() < 1e-5 && (hi - 0.596_168).abs() < 1e-5);
    }

    #[test]
    fn summary_statistics() {
        let row = |rule: &str, tau: u64, correct: bool| EpisodeRow {
            run_id: 0,
            family: "f".into(),
            instance_id: 0,
            means: "1;0".into(),
            rule: rule.into(),
            delta: 0.1,
            threshold: "heuristic".into(),
            seed: 0,
            stopping_time: tau,
            truncated: false,
            recommended: 0,
            correct,
            wall_seconds: 0.0,
        };
        let rows = vec![row("a", 10, true), row("b", 5, true), row("a", 20, false), row("a", 30, true)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].rule, "a");
        assert_eq!(s[0].mean_stopping_time, 20.0);
        assert_eq!(s[0].std_stopping_time, 10.0);
        assert_eq!(s[0].median, 20.0);
        assert!((s[0].error_rate - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s[1].episodes, 1);
        assert_eq!(s[1].std_stopping_time, 0.0);
    }
}
