//! Subcommand bodies. Each writes its result to `out` and returns an error
//! that the binary maps to an exit code.

use std::io::Write;
use std::path::Path;

use bai_core::characteristic::{
    beta_ratio, solve_constrained, solve_unconstrained, theorem2_bound, uniform_bound, BoundParams,
    BoundReport, CharacteristicResult, Instance, UniformBound,
};
use bai_core::sim::{error_curves, instance_for_seed, join_means, run_experiment, summarize, write_csv, InstanceFamily};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::{CliError, CliResult};

fn io_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("cannot {what} {}: {e}", path.display()))
}

fn write_out(out: &mut dyn Write, text: &str) -> CliResult<()> {
    writeln!(out, "{text}").map_err(|e| CliError::Runtime(format!("cannot write output: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("reports always serialize")
}

#[derive(Debug, Serialize)]
struct ManifestFiles {
    episodes: String,
    summary: String,
    error_curves: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    version: &'static str,
    config_sha256: String,
    seed: u64,
    episodes: usize,
    files: ManifestFiles,
    config: ExperimentConfig,
}

/// Runs the experiment described by `config` and writes its CSVs and manifest.
/// One line per (family, rule) cell goes to `log`.
pub fn run(config: &ExperimentConfig, log: &mut dyn Write) -> CliResult<()> {
    config.validate()?;
    let out = &config.output;
    std::fs::create_dir_all(&out.dir).map_err(|e| io_err("create output directory", &out.dir, e))?;

    let output = run_experiment(&config.experiment_spec())?;
    let summary = summarize(&output.rows);
    let curves = error_curves(&output);
    write_csv(&out.episodes_path(), &output.rows)?;
    write_csv(&out.summary_path(), &summary)?;
    write_csv(&out.error_curves_path(), &curves)?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: config.content_hash(),
        seed: config.seed,
        episodes: output.rows.len(),
        files: ManifestFiles {
            episodes: out.episodes.clone(),
            summary: out.summary.clone(),
            error_curves: out.error_curves.clone(),
        },
        config: config.clone(),
    };
    let path = out.manifest_path();
    let text = serde_json::to_string_pretty(&manifest).expect("manifest always serializes");
    std::fs::write(&path, text + "\n").map_err(|e| io_err("write", &path, e))?;

    for row in &summary {
        write_out(
            log,
            &format!(
                "{} {}: {} episodes, mean tau {:.1}, error rate {}, truncated {}",
                row.family, row.rule, row.episodes, row.mean_stopping_time, row.error_rate, row.truncated
            ),
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Solution {
    t_star: f64,
    allocation: Vec<f64>,
    radius: f64,
}

impl From<CharacteristicResult> for Solution {
    fn from(r: CharacteristicResult) -> Self {
        Self {
            t_star: r.time,
            allocation: r.allocation,
            radius: r.radius,
        }
    }
}

#[derive(Debug, Serialize)]
struct Constrained {
    beta: f64,
    #[serde(flatten)]
    solution: Solution,
}

#[derive(Debug, Serialize)]
struct OracleReport {
    means: Vec<f64>,
    best_arm: usize,
    #[serde(flatten)]
    solution: Solution,
    /// `T*_{1/2}/T*`.
    ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    constrained: Option<Constrained>,
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Characteristic times and optimal allocations of `means`.
pub fn oracle(means: &[f64], beta: Option<f64>, json: bool, out: &mut dyn Write) -> CliResult<()> {
    let inst = Instance::new(means.to_vec())?;
    let best_arm = inst.best_arm()?;
    let constrained = match beta {
        Some(beta) => Some(Constrained {
            beta,
            solution: solve_constrained(&inst, beta)?.into(),
        }),
        None => None,
    };
    let report = OracleReport {
        means: means.to_vec(),
        best_arm,
        solution: solve_unconstrained(&inst)?.into(),
        ratio: beta_ratio(&inst)?,
        constrained,
    };
    if json {
        return write_out(out, &to_json(&report));
    }
    let s = &report.solution;
    let mut lines = vec![
        format!("best arm      {}", report.best_arm),
        format!("T*            {}", s.t_star),
        format!("w*            {}", fmt_vec(&s.allocation)),
        format!("r             {}", s.radius),
        format!("T*_1/2 / T*   {}", report.ratio),
    ];
    if let Some(c) = &report.constrained {
        lines.push(format!("T*_beta       {} (beta = {})", c.solution.t_star, c.beta));
        lines.push(format!("w*_beta       {}", fmt_vec(&c.solution.allocation)));
        lines.push(format!("r_beta        {}", c.solution.radius));
    }
    write_out(out, &lines.join("\n"))
}

#[derive(Debug, Serialize)]
struct TopTwoBoundOutput {
    kind: &'static str,
    means: Vec<f64>,
    #[serde(flatten)]
    report: BoundReport,
}

#[derive(Debug, Serialize)]
struct UniformBoundOutput {
    kind: &'static str,
    means: Vec<f64>,
    delta: f64,
    alpha: f64,
    s: f64,
    #[serde(flatten)]
    report: UniformBound,
}

/// Prints the Top Two sample-complexity bound, or the uniform-sampling
/// bound when `uniform` is set, as one JSON object.
pub fn bound(means: &[f64], params: &BoundParams, uniform: bool, out: &mut dyn Write) -> CliResult<()> {
    let inst = Instance::new(means.to_vec())?;
    let text = if uniform {
        to_json(&UniformBoundOutput {
            kind: "uniform",
            means: means.to_vec(),
            delta: params.delta,
            alpha: params.alpha,
            s: params.s,
            report: uniform_bound(&inst, params.delta, params.alpha, params.s)?,
        })
    } else {
        to_json(&TopTwoBoundOutput {
            kind: "top-two",
            means: means.to_vec(),
            report: theorem2_bound(&inst, params)?,
        })
    };
    write_out(out, &text)
}

#[derive(Debug, Serialize)]
struct InstanceRow {
    instance_id: u64,
    family: String,
    seed: u64,
    k: usize,
    means: String,
}

/// Emits `count` instances of `family` as CSV. Instance `i` is drawn with
/// seed `seed + i`, as in `run`.
pub fn instances(family: &InstanceFamily, count: u64, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    family.validate()?;
    if count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let csv_err = |e: csv::Error| CliError::Runtime(format!("cannot write output: {e}"));
    let mut w = csv::Writer::from_writer(out);
    for i in 0..count {
        let s = seed.wrapping_add(i);
        let inst = instance_for_seed(family, s)?;
        w.serialize(InstanceRow {
            instance_id: i,
            family: family.to_string(),
            seed: s,
            k: inst.num_arms(),
            means: join_means(inst.means()),
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(format!("cannot write output: {e}")))
}
