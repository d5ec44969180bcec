use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bai_cli::config::ExperimentConfig;
use bai_cli::{commands, CliError, CliResult};
use bai_core::characteristic::BoundParams;
use bai_core::numerics::{DEFAULT_ALPHA, DEFAULT_S};
use bai_core::sim::InstanceFamily;
use clap::{Parser, Subcommand, ValueEnum};

/// Fixed-confidence best-arm identification for Gaussian bandits.
#[derive(Debug, Parser)]
#[command(name = "bai", version)]
struct Cli {
    /// Override the base seed (run) or set it (instances).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for `run`; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the output directory of `run`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment from a TOML config.
    Run { config: PathBuf },
    /// Characteristic times, optimal allocations and the β = 1/2 ratio.
    #[command(allow_negative_numbers = true)]
    Oracle {
        #[arg(required = true, num_args = 2..)]
        means: Vec<f64>,
        /// Also solve the β-constrained problem.
        #[arg(long)]
        beta: Option<f64>,
        /// Print one JSON object instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Non-asymptotic sample-complexity bound, as JSON.
    #[command(allow_negative_numbers = true)]
    Bound {
        #[arg(required = true, num_args = 2..)]
        means: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_S)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        w0: f64,
        /// Bound for uniform sampling instead of Top Two.
        #[arg(long)]
        uniform: bool,
    },
    /// Print generated instances as CSV.
    #[command(allow_negative_numbers = true)]
    Instances {
        family: FamilyName,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        top: f64,
        #[arg(long)]
        gap: Option<f64>,
        /// Comma-separated means for `explicit`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        means: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyName {
    RandomK10,
    OneSparse,
    Alpha,
    EqualMeans,
    CloseCompetitors,
    Explicit,
}

fn family(name: FamilyName, k: usize, alpha: Option<f64>, top: f64, gap: Option<f64>, means: Vec<f64>) -> CliResult<InstanceFamily> {
    let missing = |flag: &str| CliError::Usage(format!("this family needs --{flag}"));
    Ok(match name {
        FamilyName::RandomK10 => InstanceFamily::RandomK10,
        FamilyName::OneSparse => InstanceFamily::OneSparse { k },
        FamilyName::Alpha => InstanceFamily::Alpha {
            k,
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
        },
        FamilyName::EqualMeans => InstanceFamily::EqualMeans {
            k,
            top,
            gap: gap.ok_or_else(|| missing("gap"))?,
        },
        FamilyName::CloseCompetitors => InstanceFamily::CloseCompetitors { k },
        FamilyName::Explicit => {
            if means.is_empty() {
                return Err(missing("means"));
            }
            InstanceFamily::Explicit { means }
        }
    })
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Run { config } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            if let Some(jobs) = cli.jobs {
                config.jobs = jobs;
            }
            if let Some(dir) = cli.out_dir {
                config.output.dir = dir;
            }
            commands::run(&config, &mut std::io::stderr().lock())
        }
        Command::Oracle { means, beta, json } => commands::oracle(&means, beta, json, &mut stdout),
        Command::Bound {
            means,
            delta,
            beta,
            alpha,
            s,
            eps,
            w0,
            uniform,
        } => {
            let params = BoundParams {
                delta,
                beta,
                alpha,
                s,
                eps,
                w0,
            };
            commands::bound(&means, &params, uniform, &mut stdout)
        }
        Command::Instances {
            family: name,
            k,
            alpha,
            top,
            gap,
            means,
            count,
        } => {
            let fam = family(name, k, alpha, top, gap, means)?;
            commands::instances(&fam, count, cli.seed.unwrap_or(0), &mut stdout)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
