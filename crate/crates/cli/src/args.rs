//! Command-line arguments and their mapping onto a configuration.

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::experiments::ExperimentResult;
use crate::output;
use crate::runner::{self, Outcome, RunOptions, CHECKPOINT_FILE};

#[derive(Debug, Parser)]
#[command(name = "xisim", version, about = "Non-intersection exponent experiments for Brownian motion and random walks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check walk samplers against closed forms and exact enumeration.
    Validate(RunArgs),
    /// Two-walk survival table with k(n) and h(n).
    Survival(RunArgs),
    /// Survival for groups of m and n walks.
    Tuple(RunArgs),
    /// Direct Monte Carlo on shell path pairs.
    Pathspace(RunArgs),
    /// Splitting estimates of the shell survival rates.
    Splitting(RunArgs),
    /// Kolmogorov-Smirnov mixing diagnostics between two initial pairs.
    Mixing(RunArgs),
    /// Cone exponents for single walks.
    Cone(RunArgs),
    /// Print a report and write plot data.
    Report(ReportArgs),
    /// Continue an interrupted run from its checkpoint.
    Resume(ResumeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Number of independent walk pairs M.
    #[arg(long, value_name = "M")]
    pub pairs: Option<u64>,
    /// Maximum number of steps.
    #[arg(long, value_name = "N")]
    pub steps: Option<u64>,
    /// Comma-separated checkpoint times.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub checkpoints: Option<Vec<u64>>,
    /// Size of the first group of walks.
    #[arg(long)]
    pub m: Option<u32>,
    /// Size of the second group of walks.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long, value_name = "P")]
    pub particles: Option<usize>,
    #[arg(long, value_name = "R")]
    pub replicates: Option<u64>,
    /// Lattice radius of shell zero.
    #[arg(long = "base-radius", value_name = "R0")]
    pub base_radius: Option<f64>,
    /// Lag m in h(n).
    #[arg(long = "h-lag", value_name = "m")]
    pub h_lag: Option<u64>,
    #[arg(long, value_name = "S")]
    pub shells: Option<u32>,
    #[arg(long, value_name = "T")]
    pub trials: Option<u64>,
    #[arg(long, value_name = "W")]
    pub threads: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long = "checkpoint-every", value_name = "SECONDS")]
    pub checkpoint_every: Option<f64>,
    /// Stop after this many units of work, leaving a checkpoint.
    #[arg(long = "halt-after", hide = true)]
    pub halt_after: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON written by a previous run.
    pub path: PathBuf,
    /// Directory for plot data; defaults to the report's directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ResumeArgs {
    /// Checkpoint file.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Run directory holding `checkpoint.json`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "W")]
    pub threads: Option<usize>,
    #[arg(long = "checkpoint-every", value_name = "SECONDS")]
    pub checkpoint_every: Option<f64>,
    #[arg(long = "halt-after", hide = true)]
    pub halt_after: Option<u64>,
}

impl RunArgs {
    /// Loads or defaults the configuration for `kind` and applies the flags.
    pub fn build_config(&self, kind: ExperimentKind) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                ExperimentConfig::from_json(&text)?
            }
            None => ExperimentConfig::default_for(kind),
        };
        if cfg.experiment != kind {
            return Err(CliError::Usage(format!(
                "config describes a {} experiment, not {}",
                cfg.experiment.name(),
                kind.name()
            )));
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.pairs {
            cfg.survival.pairs = v;
        }
        if let Some(v) = self.steps {
            cfg.survival.max_steps = v;
        }
        match (&self.checkpoints, self.steps) {
            (Some(v), _) => cfg.survival.checkpoints = v.clone(),
            (None, Some(n)) => cfg.survival.checkpoints = even_checkpoints(n),
            (None, None) => {}
        }
        if let Some(v) = self.m {
            cfg.survival.groups[0] = v;
        }
        if let Some(v) = self.n {
            cfg.survival.groups[1] = v;
        }
        if let Some(v) = self.h_lag {
            cfg.survival.h_lag = v;
        }
        if let Some(v) = self.base_radius {
            cfg.paths.base_radius = v;
            cfg.paths.min_base_radius = cfg.paths.min_base_radius.min(v);
        }
        if let Some(v) = self.trials {
            cfg.paths.trials = v;
        }
        if kind == ExperimentKind::Cone {
            if let Some(v) = self.particles {
                cfg.cone.particles = v;
            }
            if let Some(v) = self.replicates {
                cfg.cone.replicates = v;
            }
            if let Some(v) = self.shells {
                cfg.cone.shells = v;
            }
        } else {
            if let Some(v) = self.particles {
                cfg.paths.particles = v;
            }
            if let Some(v) = self.replicates {
                cfg.paths.replicates = v;
            }
            if let Some(v) = self.shells {
                cfg.paths.shells = v;
                cfg.paths.window[1] = cfg.paths.window[1].min(v);
            }
        }
        if self.threads.is_some() {
            cfg.runtime.threads = self.threads;
        }
        if self.out.is_some() {
            cfg.runtime.out = self.out.clone();
        }
        if self.checkpoint_every.is_some() {
            cfg.runtime.checkpoint_every = self.checkpoint_every;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Ten evenly spaced checkpoints ending at `n`, fewer when `n < 10`.
pub fn even_checkpoints(n: u64) -> Vec<u64> {
    let parts = n.min(10);
    let mut v: Vec<u64> = (1..=parts).map(|i| i * n / parts.max(1)).collect();
    v.dedup();
    v
}

pub fn check_runtime(threads: Option<usize>, every: Option<f64>) -> Result<(), CliError> {
    if threads == Some(0) {
        return Err(CliError::Usage("threads: must be at least 1".into()));
    }
    if let Some(s) = every {
        if !(s.is_finite() && s > 0.0) {
            return Err(CliError::Usage("checkpoint-every: must be a positive number of seconds".into()));
        }
    }
    Ok(())
}

fn run_options(cfg: &ExperimentConfig, halt_after: Option<u64>) -> RunOptions {
    RunOptions {
        halt_after,
        ..RunOptions::from_config(cfg)
    }
}

fn finish(outcome: Outcome, out: &mut dyn Write) -> Result<i32, CliError> {
    let stdout = |e| CliError::io("<stdout>", e);
    match outcome {
        Outcome::Complete { report, files } => {
            if files.is_empty() {
                let json = serde_json::to_string_pretty(&report).expect("report serializes");
                writeln!(out, "{json}").map_err(stdout)?;
            } else {
                write!(out, "{}", output::render(&report)?).map_err(stdout)?;
                for f in &files {
                    writeln!(out, "wrote {}", f.display()).map_err(stdout)?;
                }
            }
            match &report.result {
                ExperimentResult::Validate(v) if !v.all_pass => Ok(1),
                _ => Ok(0),
            }
        }
        Outcome::Interrupted { checkpoint, units_done } => {
            writeln!(out, "interrupted after {units_done} units; checkpoint {}", checkpoint.display())
                .map_err(stdout)?;
            Ok(0)
        }
    }
}

/// Executes a parsed command line, returning the process exit code.
pub fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let (kind, args) = match cli.command {
        Command::Validate(a) => (ExperimentKind::Validate, a),
        Command::Survival(a) => (ExperimentKind::Survival, a),
        Command::Tuple(a) => (ExperimentKind::Tuple, a),
        Command::Pathspace(a) => (ExperimentKind::Pathspace, a),
        Command::Splitting(a) => (ExperimentKind::Splitting, a),
        Command::Mixing(a) => (ExperimentKind::Mixing, a),
        Command::Cone(a) => (ExperimentKind::Cone, a),
        Command::Report(a) => {
            let dir = match a.out {
                Some(d) => d,
                None => a.path.parent().map_or_else(|| PathBuf::from("."), PathBuf::from),
            };
            let (text, files) = output::report_command(&a.path, &dir)?;
            let stdout = |e| CliError::io("<stdout>", e);
            write!(out, "{text}").map_err(stdout)?;
            for f in &files {
                writeln!(out, "wrote {}", f.display()).map_err(stdout)?;
            }
            return Ok(0);
        }
        Command::Resume(a) => {
            check_runtime(a.threads, a.checkpoint_every)?;
            let path = match (a.checkpoint, &a.out) {
                (Some(p), _) => p,
                (None, Some(dir)) => dir.join(CHECKPOINT_FILE),
                (None, None) => return Err(CliError::Usage("resume needs --checkpoint PATH or --out DIR".into())),
            };
            let opts = RunOptions {
                out: a.out,
                threads: a.threads,
                checkpoint_every: a.checkpoint_every.map(Duration::from_secs_f64),
                halt_after: a.halt_after,
            };
            return finish(runner::resume(&path, &opts)?, out);
        }
    };
    check_runtime(args.threads, args.checkpoint_every)?;
    let cfg = args.build_config(kind)?;
    let opts = run_options(&cfg, args.halt_after);
    finish(runner::run(&cfg, &opts)?, out)
}
