//! Experiments as resumable state machines: each `step` does one unit of
//! work, the state is serializable, and the result depends only on the
//! final state.

use serde::{Deserialize, Serialize};

use xisim_core::exec::{self, Mode};
use xisim_core::pathspace::{initial_pair, CurvePair, InitialKind};
use xisim_core::splitting::estimators::{
    estimate_q_from, estimate_xi_from, q_ratio_convergence_from, rho1_from_fractions, sep_fractions, QSequence,
    SepRow, XiEstimate,
};
use xisim_core::splitting::mixing::{diagnose_replicates, replicate_distance, ReplicateDistance, KS_ALPHA};
use xisim_core::splitting::pairs::direct_survival_range;
use xisim_core::splitting::{
    cone_estimate_from, run_replicate, ConeEstimate, ConeModel, DirectSurvival, MixingDiagnostic, PairModel,
};
use xisim_core::stats::{binomial_sigma, wilson, Interval};
use xisim_core::survival::{exact_survival, SurvivalAccumulator, SurvivalParams, SurvivalTable, TableRow};
use xisim_core::walks::{ball_hitting_trial, gamblers_ruin_trial, ConeSpec};
use xisim_core::{derive_stream, StreamId};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;

/// Pairs or trials per unit of work.
const CHUNK: u64 = 4096;

const TAG_CONFIG: u64 = 0x4346_4753; // "CFGS"
const TAG_RUIN: u64 = 0x5255_494e; // "RUIN"
const TAG_HIT: u64 = 0x4849_5453; // "HITS"
const TAG_ENUM: u64 = 0x454e_554d; // "ENUM"

/// Independent master seed for sub-experiment `index`.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    StreamId::tag(TAG_CONFIG).with(seed).with(index).id()
}

/// One exact-law check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub parameter: f64,
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, parameter: f64, trials: u64, successes: u64, expected: f64, tolerance: f64) -> Self {
        let estimate = successes as f64 / trials as f64;
        Self {
            name: name.into(),
            parameter,
            trials,
            successes,
            estimate,
            expected,
            tolerance,
            pass: (estimate - expected).abs() <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Planned {
    Ruin(u32),
    Hitting(f64),
    Enumeration(u32),
}

fn planned_checks(cfg: &ExperimentConfig) -> Vec<Planned> {
    let v = &cfg.validate;
    v.ruin_sizes
        .iter()
        .map(|&n| Planned::Ruin(n))
        .chain(v.hitting_k.iter().map(|&k| Planned::Hitting(k)))
        .chain(v.enumeration_steps.iter().map(|&n| Planned::Enumeration(n)))
        .collect()
}

fn run_check(cfg: &ExperimentConfig, check: Planned, mode: Mode) -> Result<Check, CliError> {
    let v = &cfg.validate;
    let seed = cfg.seed;
    Ok(match check {
        Planned::Ruin(n) => {
            let hits = exec::sum_counts(mode, 0..v.ruin_trials, 1, |i, acc| {
                let mut s = derive_stream(StreamId::tag(TAG_RUIN).with(u64::from(n)).with(i).seed(seed));
                if matches!(gamblers_ruin_trial(1, n as i32, &mut s), Ok(true)) {
                    acc[0] += 1;
                }
            })[0];
            let p = 1.0 / f64::from(n);
            Check::new("gamblers-ruin", f64::from(n), v.ruin_trials, hits, p, 3.0 * binomial_sigma(p, v.ruin_trials))
        }
        Planned::Hitting(k) => {
            let escape = v.escape_radius;
            let hits = exec::sum_counts(mode, 0..v.hitting_trials, 1, |i, acc| {
                let mut s = derive_stream(StreamId::tag(TAG_HIT).with(k.to_bits()).with(i).seed(seed));
                if matches!(ball_hitting_trial(k, &mut s, escape), Ok(true)) {
                    acc[0] += 1;
                }
            })[0];
            Check::new("sphere-hitting", k, v.hitting_trials, hits, (-k).exp(), 0.01)
        }
        Planned::Enumeration(n) => {
            let (alive, total) = exact_survival(n)?;
            let p = alive as f64 / total as f64;
            let params = SurvivalParams::pair(v.enumeration_pairs, u64::from(n), vec![u64::from(n)]);
            let mut acc = SurvivalAccumulator::new(params, StreamId::tag(TAG_ENUM).with(seed).id())?;
            acc.advance(v.enumeration_pairs, mode)?;
            Check::new(
                "enumeration",
                f64::from(n),
                v.enumeration_pairs,
                acc.counts[0],
                p,
                3.0 * binomial_sigma(p, v.enumeration_pairs),
            )
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateState {
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathspaceState {
    pub config: usize,
    pub cursor: u64,
    pub results: Vec<DirectSurvival>,
}

/// Reduced record of one splitting replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub p_hat: Vec<f64>,
    pub ess: Vec<usize>,
    pub distinct_parents: Vec<usize>,
    /// Fraction of survivors in SEP at shells `1..=shells`.
    pub sep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingState {
    pub config: usize,
    pub replicate: u64,
    pub records: Vec<Vec<SplitRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingState {
    pub replicate: u64,
    pub p_hat_a: Vec<Vec<f64>>,
    pub p_hat_b: Vec<Vec<f64>>,
    /// `distances[r][f]`: replicate `r`, functional `f`.
    pub distances: Vec<Vec<ReplicateDistance>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeState {
    pub angle: usize,
    pub replicate: u64,
    /// `p_hat[a][r]`: angle `a`, replicate `r`.
    pub p_hat: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentState {
    Validate(ValidateState),
    Survival(SurvivalAccumulator),
    Pathspace(PathspaceState),
    Splitting(SplittingState),
    Mixing(MixingState),
    Cone(ConeState),
}

fn initial_pairs(cfg: &ExperimentConfig) -> Result<Vec<CurvePair>, CliError> {
    let shell = cfg.paths.shell_config()?;
    cfg.paths
        .initial
        .iter()
        .map(|k| initial_pair(k, shell).map_err(CliError::from))
        .collect()
}

fn mixing_seeds(cfg: &ExperimentConfig) -> (u64, u64) {
    let a = sub_seed(cfg.seed, 0);
    let b = match cfg.paths.second_seed {
        Some(s) => sub_seed(s, 0),
        None => sub_seed(cfg.seed, 1),
    };
    (a, b)
}

fn mixing_shells(cfg: &ExperimentConfig) -> Vec<u32> {
    (cfg.paths.window[0]..=cfg.paths.window[1]).collect()
}

impl ExperimentState {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        Ok(match cfg.experiment {
            ExperimentKind::Validate => ExperimentState::Validate(ValidateState { checks: Vec::new() }),
            ExperimentKind::Survival | ExperimentKind::Tuple => {
                let s = &cfg.survival;
                let params = SurvivalParams {
                    pairs: s.pairs,
                    max_steps: s.max_steps,
                    checkpoints: s.checkpoints.clone(),
                    groups: (s.groups[0], s.groups[1]),
                };
                ExperimentState::Survival(SurvivalAccumulator::new(params, cfg.seed)?)
            }
            ExperimentKind::Pathspace => {
                let shells = cfg.paths.shells as usize;
                let empty = DirectSurvival {
                    trials: 0,
                    alive: vec![0; shells],
                    sep: vec![0; shells],
                };
                ExperimentState::Pathspace(PathspaceState {
                    config: 0,
                    cursor: 0,
                    results: vec![empty; cfg.paths.initial.len()],
                })
            }
            ExperimentKind::Splitting => ExperimentState::Splitting(SplittingState {
                config: 0,
                replicate: 0,
                records: vec![Vec::new(); cfg.paths.initial.len()],
            }),
            ExperimentKind::Mixing => ExperimentState::Mixing(MixingState {
                replicate: 0,
                p_hat_a: Vec::new(),
                p_hat_b: Vec::new(),
                distances: Vec::new(),
            }),
            ExperimentKind::Cone => ExperimentState::Cone(ConeState {
                angle: 0,
                replicate: 0,
                p_hat: vec![Vec::new(); cfg.cone.half_angles.len()],
            }),
        })
    }

    /// Whether this state can belong to `cfg`.
    pub fn matches(&self, cfg: &ExperimentConfig) -> bool {
        matches!(
            (self, cfg.experiment),
            (ExperimentState::Validate(_), ExperimentKind::Validate)
                | (ExperimentState::Survival(_), ExperimentKind::Survival | ExperimentKind::Tuple)
                | (ExperimentState::Pathspace(_), ExperimentKind::Pathspace)
                | (ExperimentState::Splitting(_), ExperimentKind::Splitting)
                | (ExperimentState::Mixing(_), ExperimentKind::Mixing)
                | (ExperimentState::Cone(_), ExperimentKind::Cone)
        )
    }

    pub fn is_done(&self, cfg: &ExperimentConfig) -> bool {
        match self {
            ExperimentState::Validate(s) => s.checks.len() >= planned_checks(cfg).len(),
            ExperimentState::Survival(acc) => acc.is_done(),
            ExperimentState::Pathspace(s) => s.config >= cfg.paths.initial.len(),
            ExperimentState::Splitting(s) => s.config >= cfg.paths.initial.len(),
            ExperimentState::Mixing(s) => s.replicate >= cfg.paths.replicates,
            ExperimentState::Cone(s) => s.angle >= cfg.cone.half_angles.len(),
        }
    }

    /// One unit of work. On error the state is left as it was.
    pub fn step(&mut self, cfg: &ExperimentConfig, mode: Mode) -> Result<(), CliError> {
        match self {
            ExperimentState::Validate(s) => {
                let next = planned_checks(cfg)[s.checks.len()];
                s.checks.push(run_check(cfg, next, mode)?);
            }
            ExperimentState::Survival(acc) => acc.advance(CHUNK, mode)?,
            ExperimentState::Pathspace(s) => {
                let pair = &initial_pairs(cfg)?[s.config];
                let end = (s.cursor + CHUNK).min(cfg.paths.trials);
                let seed = sub_seed(cfg.seed, s.config as u64);
                let part = direct_survival_range(pair, cfg.paths.shells, s.cursor, end, seed, mode)?;
                s.results[s.config].merge(&part);
                s.cursor = end;
                if s.cursor >= cfg.paths.trials {
                    s.config += 1;
                    s.cursor = 0;
                }
            }
            ExperimentState::Splitting(s) => {
                let p = &cfg.paths;
                let pair = &initial_pairs(cfg)?[s.config];
                let seed = sub_seed(cfg.seed, s.config as u64);
                let run = run_replicate(&PairModel, pair, p.particles, p.shells, seed, s.replicate, mode)?;
                let sep = sep_fractions(&run, p.shells)?;
                s.records[s.config].push(SplitRecord {
                    p_hat: run.p_hat,
                    ess: run.ess,
                    distinct_parents: run.distinct_parents,
                    sep,
                });
                s.replicate += 1;
                if s.replicate >= p.replicates {
                    s.config += 1;
                    s.replicate = 0;
                }
            }
            ExperimentState::Mixing(s) => {
                let p = &cfg.paths;
                let pairs = initial_pairs(cfg)?;
                let (seed_a, seed_b) = mixing_seeds(cfg);
                let ra = run_replicate(&PairModel, &pairs[0], p.particles, p.shells, seed_a, s.replicate, mode)?;
                let rb = run_replicate(&PairModel, &pairs[1], p.particles, p.shells, seed_b, s.replicate, mode)?;
                let shells = mixing_shells(cfg);
                let d = p
                    .functionals
                    .iter()
                    .map(|&f| replicate_distance(&ra, &rb, &shells, f, KS_ALPHA))
                    .collect::<Result<Vec<_>, _>>()?;
                s.p_hat_a.push(ra.p_hat);
                s.p_hat_b.push(rb.p_hat);
                s.distances.push(d);
                s.replicate += 1;
            }
            ExperimentState::Cone(s) => {
                let c = &cfg.cone;
                let model = ConeModel {
                    cone: ConeSpec::around_x(c.half_angles[s.angle])?,
                };
                let seed = sub_seed(cfg.seed, s.angle as u64);
                let run = run_replicate(&model, &model.start(), c.particles, c.shells, seed, s.replicate, mode)?;
                s.p_hat[s.angle].push(run.p_hat);
                s.replicate += 1;
                if s.replicate >= c.replicates {
                    s.angle += 1;
                    s.replicate = 0;
                }
            }
        }
        Ok(())
    }

    pub fn result(&self, cfg: &ExperimentConfig) -> Result<ExperimentResult, CliError> {
        if !self.is_done(cfg) {
            return Err(CliError::Data("experiment is not complete".into()));
        }
        Ok(match self {
            ExperimentState::Validate(s) => ExperimentResult::Validate(ValidateResult {
                all_pass: s.checks.iter().all(|c| c.pass),
                checks: s.checks.clone(),
            }),
            ExperimentState::Survival(acc) => {
                let table = acc.table(cfg.survival.h_lag);
                let r = SurvivalResult {
                    rows: table.rows(),
                    table,
                };
                if cfg.experiment == ExperimentKind::Tuple {
                    ExperimentResult::Tuple(r)
                } else {
                    ExperimentResult::Survival(r)
                }
            }
            ExperimentState::Pathspace(s) => ExperimentResult::Pathspace(PathspaceResult {
                configs: cfg
                    .paths
                    .initial
                    .iter()
                    .zip(&s.results)
                    .map(|(k, d)| PathspaceRow::new(k.clone(), d.clone()))
                    .collect(),
            }),
            ExperimentState::Splitting(s) => ExperimentResult::Splitting(SplittingResult {
                configs: cfg
                    .paths
                    .initial
                    .iter()
                    .zip(&s.records)
                    .map(|(k, recs)| SplittingRow::new(cfg, k.clone(), recs))
                    .collect::<Result<_, _>>()?,
            }),
            ExperimentState::Mixing(s) => {
                let shells = mixing_shells(cfg);
                let diagnostics = cfg
                    .paths
                    .functionals
                    .iter()
                    .enumerate()
                    .map(|(i, &f)| {
                        let per: Vec<ReplicateDistance> = s.distances.iter().map(|r| r[i].clone()).collect();
                        diagnose_replicates(f, &shells, &per)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ExperimentResult::Mixing(MixingResult {
                    initial: cfg.paths.initial.clone(),
                    shells: shells.clone(),
                    diagnostics,
                    q_a: q_means(&s.p_hat_a, cfg.paths.shells)?,
                    q_b: q_means(&s.p_hat_b, cfg.paths.shells)?,
                })
            }
            ExperimentState::Cone(s) => ExperimentResult::Cone(ConeResult {
                estimates: cfg
                    .cone
                    .half_angles
                    .iter()
                    .zip(&s.p_hat)
                    .map(|(&a, p)| cone_estimate_from(a, cfg.cone.shells, p))
                    .collect(),
            }),
        })
    }
}

fn refs(p: &[Vec<f64>]) -> Vec<&[f64]> {
    p.iter().map(Vec::as_slice).collect()
}

fn q_means(p_hat: &[Vec<f64>], shells: u32) -> Result<Vec<f64>, CliError> {
    (0..=shells)
        .map(|s| Ok(estimate_q_from(&refs(p_hat), s)?.mean))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResult {
    pub all_pass: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalResult {
    pub table: SurvivalTable,
    pub rows: Vec<TableRow>,
}

/// A proportion at one shell with its 95% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellProportion {
    pub shell: u32,
    pub count: u64,
    pub of: u64,
    pub estimate: f64,
    pub ci: Interval,
}

impl ShellProportion {
    fn new(shell: u32, count: u64, of: u64) -> Self {
        Self {
            shell,
            count,
            of,
            estimate: if of == 0 { 0.0 } else { count as f64 / of as f64 },
            ci: wilson(count, of, 1.96),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathspaceRow {
    pub initial: InitialKind,
    pub counts: DirectSurvival,
    /// Direct `q̂_n`.
    pub q: Vec<ShellProportion>,
    /// `P̂(SEP | alive)` at each shell.
    pub sep_given_alive: Vec<ShellProportion>,
}

impl PathspaceRow {
    fn new(initial: InitialKind, counts: DirectSurvival) -> Self {
        let q = counts
            .alive
            .iter()
            .enumerate()
            .map(|(j, &a)| ShellProportion::new(j as u32 + 1, a, counts.trials))
            .collect();
        let sep_given_alive = counts
            .sep
            .iter()
            .zip(&counts.alive)
            .enumerate()
            .map(|(j, (&s, &a))| ShellProportion::new(j as u32 + 1, s, a))
            .collect();
        Self {
            initial,
            counts,
            q,
            sep_given_alive,
        }
    }
}

/// `q̂_n` at one shell with its replicate interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRow {
    pub shell: u32,
    pub q: f64,
    pub std_err: f64,
    pub ci: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingRow {
    pub initial: InitialKind,
    pub q: Vec<QRow>,
    pub xi: XiEstimate,
    pub q_sequence: QSequence,
    pub rho1: Vec<SepRow>,
    /// Smallest survivor count over replicates, per shell.
    pub ess_min: Vec<usize>,
    /// Smallest number of distinct resampled parents, per shell.
    pub distinct_parents_min: Vec<usize>,
    /// Per-replicate survival fractions.
    pub p_hat: Vec<Vec<f64>>,
}

impl SplittingRow {
    fn new(cfg: &ExperimentConfig, initial: InitialKind, recs: &[SplitRecord]) -> Result<Self, CliError> {
        let shells = cfg.paths.shells;
        let p_hat: Vec<Vec<f64>> = recs.iter().map(|r| r.p_hat.clone()).collect();
        let pr = refs(&p_hat);
        let q = (0..=shells)
            .map(|s| {
                let e = estimate_q_from(&pr, s)?;
                Ok(QRow {
                    shell: s,
                    q: e.mean,
                    std_err: e.std_err,
                    ci: e.ci,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let [n0, n1] = cfg.paths.window;
        let per_shell_min = |f: fn(&SplitRecord) -> &Vec<usize>| -> Vec<usize> {
            (0..shells as usize)
                .map(|j| recs.iter().map(|r| f(r)[j]).min().unwrap_or(0))
                .collect()
        };
        let sep: Vec<Vec<f64>> = recs.iter().map(|r| r.sep.clone()).collect();
        Ok(Self {
            initial,
            q,
            xi: estimate_xi_from(&pr, n0, n1)?,
            q_sequence: q_ratio_convergence_from(&pr, 0, shells, cfg.paths.xi_ref)?,
            rho1: rho1_from_fractions(&sep)?,
            ess_min: per_shell_min(|r| &r.ess),
            distinct_parents_min: per_shell_min(|r| &r.distinct_parents),
            p_hat,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathspaceResult {
    pub configs: Vec<PathspaceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingResult {
    pub configs: Vec<SplittingRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingResult {
    pub initial: Vec<InitialKind>,
    pub shells: Vec<u32>,
    pub diagnostics: Vec<MixingDiagnostic>,
    /// Mean `q̂_n` of each side, `n = 0..=shells`.
    pub q_a: Vec<f64>,
    pub q_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeResult {
    pub estimates: Vec<ConeEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentResult {
    Validate(ValidateResult),
    Survival(SurvivalResult),
    Tuple(SurvivalResult),
    Pathspace(PathspaceResult),
    Splitting(SplittingResult),
    Mixing(MixingResult),
    Cone(ConeResult),
}
