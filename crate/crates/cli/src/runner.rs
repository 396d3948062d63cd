//! Drives experiments to completion with periodic checkpoints and writes
//! artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use xisim_core::exec::Mode;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::experiments::{ExperimentResult, ExperimentState};

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

pub fn generator() -> String {
    format!("xisim {}", env!("CARGO_PKG_VERSION"))
}

/// Self-describing experiment output: rerunning `config` reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub format_version: u32,
    pub generator: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub generator: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub units_done: u64,
    pub state: ExperimentState,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cp: Checkpoint =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if cp.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(CliError::Data(format!(
                "format_version: unsupported checkpoint version {}",
                cp.format_version
            )));
        }
        if cp.config_hash != cp.config.hash() {
            return Err(CliError::Data("config_hash: does not match the embedded config".into()));
        }
        cp.config.validate()?;
        if !cp.state.matches(&cp.config) {
            return Err(CliError::Data("state: does not match the configured experiment".into()));
        }
        Ok(cp)
    }
}

/// Execution options that never affect results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Artifact directory; `None` keeps everything in memory.
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub checkpoint_every: Option<Duration>,
    /// Stop after this many units of work in this session, leaving a
    /// checkpoint.
    pub halt_after: Option<u64>,
}

impl RunOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        RunOptions {
            out: cfg.runtime.out.clone(),
            threads: cfg.runtime.threads,
            checkpoint_every: cfg.runtime.checkpoint_every.map(Duration::from_secs_f64),
            halt_after: None,
        }
    }
}

#[derive(Debug)]
pub enum Outcome {
    Complete { report: Report, files: Vec<PathBuf> },
    Interrupted { checkpoint: PathBuf, units_done: u64 },
}

impl Outcome {
    pub fn report(self) -> Option<Report> {
        match self {
            Outcome::Complete { report, .. } => Some(report),
            Outcome::Interrupted { .. } => None,
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    #[cfg(feature = "parallel")]
    if let Some(w) = threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Usage(format!("threads: {e}")))?;
        return Ok(pool.install(f));
    }
    let _ = threads;
    Ok(f())
}

/// Runs `cfg` from the beginning.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let cfg = cfg.without_runtime();
    let state = ExperimentState::new(&cfg)?;
    with_threads(opts.threads, || drive(&cfg, state, 0, opts))?
}

/// Continues from a checkpoint file; artifacts go next to it unless
/// `opts.out` says otherwise.
pub fn resume(checkpoint: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    let cp = Checkpoint::load(checkpoint)?;
    let mut opts = opts.clone();
    if opts.out.is_none() {
        opts.out = Some(checkpoint.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
    }
    with_threads(opts.threads, || drive(&cp.config, cp.state, cp.units_done, &opts))?
}

/// Runs to completion in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let opts = RunOptions {
        out: None,
        ..RunOptions::from_config(cfg)
    };
    Ok(run(cfg, &opts)?.report().expect("no halt requested"))
}

fn write_checkpoint(dir: &Path, cfg: &ExperimentConfig, state: &ExperimentState, units_done: u64) -> Result<PathBuf, CliError> {
    let cp = Checkpoint {
        format_version: CHECKPOINT_FORMAT_VERSION,
        generator: generator(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        units_done,
        state: state.clone(),
    };
    let path = dir.join(CHECKPOINT_FILE);
    let tmp = dir.join(format!("{CHECKPOINT_FILE}.tmp"));
    let mut bytes = serde_json::to_vec(&cp).expect("checkpoint serializes");
    bytes.push(b'\n');
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn drive(cfg: &ExperimentConfig, mut state: ExperimentState, mut units_done: u64, opts: &RunOptions) -> Result<Outcome, CliError> {
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mode = Mode::Parallel;
    let mut last_save = Instant::now();
    let mut session_units = 0u64;
    while !state.is_done(cfg) {
        if let (Some(limit), Some(dir)) = (opts.halt_after, &opts.out) {
            if session_units >= limit {
                let checkpoint = write_checkpoint(dir, cfg, &state, units_done)?;
                return Ok(Outcome::Interrupted { checkpoint, units_done });
            }
        }
        if let Err(e) = state.step(cfg, mode) {
            if let Some(dir) = &opts.out {
                write_checkpoint(dir, cfg, &state, units_done)?;
            }
            return Err(e);
        }
        units_done += 1;
        session_units += 1;
        if let (Some(every), Some(dir)) = (opts.checkpoint_every, &opts.out) {
            if last_save.elapsed() >= every && !state.is_done(cfg) {
                write_checkpoint(dir, cfg, &state, units_done)?;
                last_save = Instant::now();
            }
        }
    }
    let report = Report {
        format_version: REPORT_FORMAT_VERSION,
        generator: generator(),
        seed: cfg.seed,
        config: cfg.clone(),
        result: state.result(cfg)?,
    };
    let files = match &opts.out {
        Some(dir) => {
            let files = write_artifacts(dir, &report)?;
            let cp = dir.join(CHECKPOINT_FILE);
            if cp.exists() {
                fs::remove_file(&cp).map_err(|e| CliError::io(&cp, e))?;
            }
            files
        }
        None => Vec::new(),
    };
    Ok(Outcome::Complete { report, files })
}

/// Writes `<kind>.json`, plus `<kind>.csv` for survival tables.
pub fn write_artifacts(dir: &Path, report: &Report) -> Result<Vec<PathBuf>, CliError> {
    let kind = report.config.experiment;
    let json_path = dir.join(format!("{}.json", kind.name()));
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
    bytes.push(b'\n');
    fs::write(&json_path, bytes).map_err(|e| CliError::io(&json_path, e))?;
    let mut files = vec![json_path];
    if let ExperimentResult::Survival(r) | ExperimentResult::Tuple(r) = &report.result {
        debug_assert!(matches!(kind, ExperimentKind::Survival | ExperimentKind::Tuple));
        let csv_path = dir.join(format!("{}.csv", kind.name()));
        let bytes = crate::output::survival_csv(&r.rows)?;
        fs::write(&csv_path, bytes).map_err(|e| CliError::io(&csv_path, e))?;
        files.push(csv_path);
    }
    Ok(files)
}
