//! `multiloc`: batch front end for simulation, localization, training,
//! evaluation and the acceptance suite.
//!
//! Exit status is 0 on success, 2 for configuration errors and 1 for
//! runtime failures (including failed acceptance criteria). Errors are
//! printed to stderr as one JSON record and, when possible, written to
//! `error.json` in the output directory.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Ctx;
use config::ExperimentConfig;
use error::{CliError, FieldError, Stage};

/// Environment variable bounding the worker thread count.
const THREADS_ENV: &str = "MULTILOC_THREADS";
const ERROR_FILE: &str = "error.json";

#[derive(Parser)]
#[command(name = "multiloc", version, about = "Multi-sensor indoor localization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override one config field, e.g. `--set scene.temperature=28`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Comma-separated noise levels in dB, e.g. `10,20`.
    #[arg(long, value_name = "LIST")]
    snr_db: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground truth, recordings and channel snapshots.
    Simulate(Common),
    /// Localize every recording from its microphone WAV files.
    LocalizeAudio(Common),
    /// Train the covariance and impulse-response networks.
    TrainRadio(Common),
    /// Localize every channel snapshot file with a trained model.
    LocalizeRadio(Common),
    /// Align and score estimates against ground truth.
    Evaluate(Common),
    /// Re-render the report table from report.csv.
    Report(Common),
    /// Run the acceptance suite.
    ReproSuite {
        #[command(flatten)]
        common: Common,
        /// Skip the second run that checks determinism.
        #[arg(long)]
        no_rerun: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::LocalizeAudio(_) => "localize-audio",
            Command::TrainRadio(_) => "train-radio",
            Command::LocalizeRadio(_) => "localize-radio",
            Command::Evaluate(_) => "evaluate",
            Command::Report(_) => "report",
            Command::ReproSuite { .. } => "repro-suite",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::LocalizeAudio(c)
            | Command::TrainRadio(c)
            | Command::LocalizeRadio(c)
            | Command::Evaluate(c)
            | Command::Report(c) => c,
            Command::ReproSuite { common, .. } => common,
        }
    }
}

/// Config file, then `--set`, then `--seed` and `--snr-db`.
fn resolve_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut value = config::load(common.config.as_deref())?;
    let mut errs = vec![];
    for s in &common.sets {
        if let Err(e) = config::apply_set(&mut value, s) {
            errs.push(e);
        }
    }
    if !errs.is_empty() {
        return Err(CliError::Validation(errs));
    }
    let mut cfg = config::from_value(value)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(list) = &common.snr_db {
        cfg.snr_db = config::parse_snr_list(list)?;
    }
    let errs = cfg.validate(&common.out);
    if !errs.is_empty() {
        return Err(CliError::Validation(errs));
    }
    Ok(cfg)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| FieldError::new(THREADS_ENV, format!("must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .stage("threads")
}

fn run(command: &Command) -> Result<(), CliError> {
    configure_threads()?;
    let common = command.common();
    let cfg = resolve_config(common)?;
    let out = common.out.as_path();
    std::fs::create_dir_all(out).stage("output")?;
    let ctx = Ctx { cfg: &cfg, out };
    let files = match command {
        Command::Simulate(_) => commands::simulate(&ctx),
        Command::LocalizeAudio(_) => commands::localize_audio_cmd(&ctx),
        Command::TrainRadio(_) => commands::train_radio_cmd(&ctx),
        Command::LocalizeRadio(_) => commands::localize_radio_cmd(&ctx),
        Command::Evaluate(_) => commands::evaluate_cmd(&ctx),
        Command::Report(_) => commands::report_cmd(&ctx),
        Command::ReproSuite { no_rerun, .. } => commands::repro_suite_cmd(&ctx, !no_rerun),
    }?;
    // a record from an earlier failed run would contradict this one
    let _ = std::fs::remove_file(out.join(ERROR_FILE));
    let manifest = manifest::write_manifest(out, command.name(), &cfg, &files)?;
    println!(
        "{}",
        serde_json::json!({
            "status": "ok",
            "command": command.name(),
            "files": files.len(),
            "manifest": manifest,
        })
    );
    Ok(())
}

fn report_error(command: &str, out: &Path, err: &CliError) {
    let record = err.record(command);
    eprintln!("{record}");
    if std::fs::create_dir_all(out).is_ok() {
        // best effort: the error may itself be an unwritable directory
        let _ = std::fs::write(out.join(ERROR_FILE), format!("{record:#}\n"));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(cli.command.name(), &cli.command.common().out, &e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
