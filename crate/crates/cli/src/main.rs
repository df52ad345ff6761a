//! Experiment harness for deterministic replay verification.
//!
//! Four commands: `replicate` (generate, tamper, audit spans),
//! `sweep-detect` (exact detection probabilities over a grid), `simulate`
//! (Monte Carlo trials against the closed form), and `calibrate-cost`
//! (linear cost fit and effort ratios). Every command is deterministic
//! given its configuration and `--seed`; re-running produces byte-identical
//! CSV/JSON payloads, with the wall-clock timestamp confined to one record
//! header field.
//!
//! Exit codes: 0 on success or expected detection, 1 on a statistical
//! acceptance failure, 2 on usage or configuration errors.

mod commands;
mod config;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use commands::calibrate::CalibrateConfig;
use commands::replicate::ReplicateConfig;
use commands::simulate::SimulateConfig;
use commands::sweep::SweepConfig;
use commands::{CommandCtx, OutputFormat, ALT_MODEL_DEFAULTS, MODEL_DEFAULTS};
use config::{parse_axis, pick, FileConfig, ResolvedModel};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Statistical(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn statistical(msg: impl Into<String>) -> Self {
        CliError::Statistical(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Statistical(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "spotcheck",
    version,
    about = "Deterministic replay verification harness: targeted validation, \
             probabilistic audit sampling, detection math, cost calibration"
)]
struct Cli {
    /// Structured config file (TOML); command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed driving every random decision of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for records, CSV/JSON payloads, and charts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Result payload format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Also write an SVG line chart where the command has one.
    #[arg(long, global = true)]
    svg: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sequence, audit spans of the honest and a tampered copy.
    Replicate(ReplicateArgs),
    /// Exact detection probability over a (k, f, r, q) grid.
    SweepDetect(GridArgs),
    /// Monte Carlo simulation of the audit protocol over a grid.
    Simulate(SimulateArgs),
    /// Fit the linear cost model and reproduce effort ratios.
    CalibrateCost(CalibrateArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Reference model identifier.
    #[arg(long)]
    model_id: Option<String>,
    /// Reference model seed (distinct from the master --seed).
    #[arg(long)]
    model_seed: Option<u64>,
    /// Adversary model identifier.
    #[arg(long)]
    alt_model_id: Option<String>,
    /// Adversary model seed.
    #[arg(long)]
    alt_model_seed: Option<u64>,
}

#[derive(Args)]
struct ReplicateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Output length in tokens.
    #[arg(long)]
    m: Option<usize>,
    /// Segment count.
    #[arg(long)]
    k: Option<usize>,
    /// Number of random audit spans.
    #[arg(long)]
    spans: Option<usize>,
    /// Segments to tamper in the adversarial copy (0 skips it).
    #[arg(long)]
    tamper_segments: Option<usize>,
    /// Per-token flip probability for a drifting validator.
    #[arg(long)]
    drift: Option<f64>,
    /// Seed of the drifting validator's divergence.
    #[arg(long)]
    drift_seed: Option<u64>,
}

#[derive(Args)]
struct GridArgs {
    /// Segment-count axis: a value, list `1,2,5`, or range `1..20`.
    #[arg(long)]
    k: Option<String>,
    /// Tampered-count axis.
    #[arg(long)]
    f: Option<String>,
    /// Checks-per-validator axis.
    #[arg(long)]
    r: Option<String>,
    /// Validator-count axis.
    #[arg(long)]
    q: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    /// Trial mode: oracle (index intersection) or full (real replay).
    #[arg(long)]
    mode: Option<String>,
    /// Output length of the simulated claims.
    #[arg(long)]
    m: Option<usize>,
    /// Grid points allowed outside the 3-sigma band before exit 1.
    #[arg(long)]
    allowed_outliers: Option<u64>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Measurement rows (TOML); the bundled reference set otherwise.
    #[arg(long)]
    rows: Option<String>,
    /// Include the prefill column in the fit (degeneracy is reported).
    #[arg(long)]
    include_prefill: Option<bool>,
}

fn resolve_models(file: &FileConfig, args: &ModelArgs) -> (ResolvedModel, ResolvedModel) {
    let model = ResolvedModel::resolve(
        file.model.as_ref(),
        args.model_id.as_deref(),
        args.model_seed,
        MODEL_DEFAULTS,
    );
    let alt = ResolvedModel::resolve(
        file.alt_model.as_ref(),
        args.alt_model_id.as_deref(),
        args.alt_model_seed,
        ALT_MODEL_DEFAULTS,
    );
    (model, alt)
}

fn resolve_axis(
    flag: &Option<String>,
    file: &Option<String>,
    default: &str,
) -> Result<Vec<u32>, CliError> {
    let spec = flag
        .clone()
        .or_else(|| file.clone())
        .unwrap_or_else(|| default.to_string());
    parse_axis(&spec)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let ctx = CommandCtx {
        out_dir: cli.out.unwrap_or_else(|| PathBuf::from(".")),
        master_seed: pick(cli.seed, file.seed, 42),
        format: cli.format.unwrap_or(OutputFormat::Csv),
        svg: cli.svg,
    };

    match &cli.command {
        Command::Replicate(args) => {
            let section = file.replicate.clone().unwrap_or_default();
            let (model, alt_model) = resolve_models(&file, &args.model);
            let cfg = ReplicateConfig {
                model,
                alt_model,
                m: pick(args.m, section.m, 256),
                k: pick(args.k, section.k, 20),
                spans: pick(args.spans, section.spans, 5),
                tamper_segments: pick(args.tamper_segments, section.tamper_segments, 1),
                drift_flip_probability: args.drift.or(section.drift_flip_probability),
                drift_seed: pick(args.drift_seed, section.drift_seed, 1337),
            };
            commands::replicate::run(&ctx, &cfg)
        }
        Command::SweepDetect(args) => {
            let section = file.grid.clone().unwrap_or_default();
            let cfg = SweepConfig {
                k: resolve_axis(&args.k, &section.k, "20")?,
                f: resolve_axis(&args.f, &section.f, "2")?,
                r: resolve_axis(&args.r, &section.r, "1..4")?,
                q: resolve_axis(&args.q, &section.q, "1..20")?,
            };
            commands::sweep::run(&ctx, &cfg)
        }
        Command::Simulate(args) => {
            let grid = file.grid.clone().unwrap_or_default();
            let section = file.simulate.clone().unwrap_or_default();
            let (model, alt_model) = resolve_models(&file, &args.model);
            let cfg = SimulateConfig {
                model,
                alt_model,
                k: resolve_axis(&args.grid.k, &grid.k, "20")?,
                f: resolve_axis(&args.grid.f, &grid.f, "2")?,
                r: resolve_axis(&args.grid.r, &grid.r, "1..4")?,
                q: resolve_axis(&args.grid.q, &grid.q, "1..20")?,
                trials: pick(args.trials, section.trials, 10_000),
                mode: args
                    .mode
                    .clone()
                    .or(section.mode)
                    .unwrap_or_else(|| "oracle".to_string()),
                m: pick(args.m, section.m, 400),
                allowed_outliers: pick(args.allowed_outliers, section.allowed_outliers, 2),
            };
            commands::simulate::run(&ctx, &cfg)
        }
        Command::CalibrateCost(args) => {
            let section = file.calibrate_cost.clone().unwrap_or_default();
            let cfg = CalibrateConfig {
                rows: args.rows.clone().or(section.rows),
                include_prefill: pick(args.include_prefill, section.include_prefill, true),
            };
            commands::calibrate::run(&ctx, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
