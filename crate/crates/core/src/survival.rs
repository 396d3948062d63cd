//! Non-intersection of independent simple random walks started at the origin.
//!
//! Convention: two walks intersect by time `n` iff `S¹(0,n] ∩ S²(0,n] ≠ ∅`.
//! The time-0 visit of the origin is excluded; a return to the origin at a
//! positive time is an ordinary visit. Simultaneous arrival at one site
//! counts, and a site visited by one walk at time `s` and by the other at
//! time `t > s` counts at time `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::lattice::{Site, SiteSet};
use crate::rng::{derive_stream, RandomStream, StreamId};
use crate::stats::{wilson, Interval};
use crate::walks::LatticeWalk;

/// Default lag `m` of the `h(n)` estimator.
pub const DEFAULT_H_LAG: u64 = 10_000;

const TAG_SURVIVAL: u64 = 0x5355_5256; // "SURV"

/// Source of lattice step directions in `0..6`.
pub trait StepSource {
    fn next_dir(&mut self) -> u8;
}

impl StepSource for RandomStream {
    #[inline]
    fn next_dir(&mut self) -> u8 {
        self.uniform_step6()
    }
}

/// Replays a fixed direction sequence; panics when exhausted.
#[derive(Debug, Clone)]
pub struct ScriptedSteps {
    dirs: Vec<u8>,
    pos: usize,
}

impl ScriptedSteps {
    pub fn new(dirs: impl Into<Vec<u8>>) -> Self {
        Self {
            dirs: dirs.into(),
            pos: 0,
        }
    }
}

impl StepSource for ScriptedSteps {
    fn next_dir(&mut self) -> u8 {
        let d = self.dirs[self.pos];
        self.pos += 1;
        d
    }
}

/// Two walks from the origin with their visited sites.
#[derive(Debug, Clone, Default)]
pub struct PairTracker {
    pub walk_a: LatticeWalk,
    pub walk_b: LatticeWalk,
    pub visited_a: SiteSet,
    pub visited_b: SiteSet,
    pub first_intersection_step: Option<u64>,
}

impl Default for LatticeWalk {
    fn default() -> Self {
        LatticeWalk::origin()
    }
}

impl PairTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> u64 {
        self.walk_a.steps_taken
    }

    pub fn is_alive(&self) -> bool {
        self.first_intersection_step.is_none()
    }

    /// Steps both walks to `target_step`, stopping at the first intersection.
    pub fn advance_pair<A: StepSource, B: StepSource>(
        &mut self,
        source_a: &mut A,
        source_b: &mut B,
        target_step: u64,
    ) -> Result<()> {
        if target_step <= self.steps() {
            return Err(Error::InvalidParameter(format!(
                "target step {target_step} not beyond current step {}",
                self.steps()
            )));
        }
        while self.first_intersection_step.is_none() && self.steps() < target_step {
            let a = self.walk_a.apply(source_a.next_dir());
            let b = self.walk_b.apply(source_b.next_dir());
            let hit = a == b || self.visited_b.contains(a) || self.visited_a.contains(b);
            self.visited_a.insert(a)?;
            self.visited_b.insert(b)?;
            if hit {
                self.first_intersection_step = Some(self.walk_a.steps_taken);
            }
        }
        Ok(())
    }
}

/// Exact survival through `n` steps: the number of the `6^{2n}` equally
/// likely step sequences of a pair that avoid intersection, and that total.
pub fn exact_survival(n: u32) -> Result<(u64, u64)> {
    if n == 0 || n > 6 {
        return Err(Error::InvalidParameter(format!(
            "exact enumeration supports 1..=6 steps, got {n}"
        )));
    }
    fn grow(t: &PairTracker, left: u32) -> Result<u64> {
        if left == 0 {
            return Ok(1);
        }
        let mut alive = 0;
        for da in 0..6u8 {
            for db in 0..6u8 {
                let mut next = t.clone();
                let target = next.steps() + 1;
                next.advance_pair(&mut ScriptedSteps::new([da]), &mut ScriptedSteps::new([db]), target)?;
                if next.is_alive() {
                    alive += grow(&next, left - 1)?;
                }
            }
        }
        Ok(alive)
    }
    Ok((grow(&PairTracker::new(), n)?, 36u64.pow(n)))
}

/// `m + n` walks from the origin split into two groups; only intersections
/// between the group unions count.
#[derive(Debug, Clone)]
pub struct TupleTracker {
    pub walks: Vec<LatticeWalk>,
    pub split: (u32, u32),
    pub visited: [SiteSet; 2],
    pub first_intersection_step: Option<u64>,
    scratch: [Vec<Site>; 2],
}

impl TupleTracker {
    pub fn new(m: u32, n: u32) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "group sizes must be positive, got ({m},{n})"
            )));
        }
        Ok(Self {
            walks: vec![LatticeWalk::origin(); (m + n) as usize],
            split: (m, n),
            visited: [SiteSet::new(), SiteSet::new()],
            first_intersection_step: None,
            scratch: [Vec::new(), Vec::new()],
        })
    }

    pub fn steps(&self) -> u64 {
        self.walks[0].steps_taken
    }

    fn group_of(&self, walk: usize) -> usize {
        usize::from(walk >= self.split.0 as usize)
    }

    /// `sources[i]` drives walk `i`.
    pub fn advance<S: StepSource>(&mut self, sources: &mut [S], target_step: u64) -> Result<()> {
        if sources.len() != self.walks.len() {
            return Err(Error::InvalidParameter(format!(
                "{} step sources for {} walks",
                sources.len(),
                self.walks.len()
            )));
        }
        if target_step <= self.steps() {
            return Err(Error::InvalidParameter(format!(
                "target step {target_step} not beyond current step {}",
                self.steps()
            )));
        }
        while self.first_intersection_step.is_none() && self.steps() < target_step {
            self.scratch[0].clear();
            self.scratch[1].clear();
            for i in 0..self.walks.len() {
                let g = self.group_of(i);
                let s = self.walks[i].apply(sources[i].next_dir());
                self.scratch[g].push(s);
            }
            let [new1, new2] = &self.scratch;
            let hit = new1.iter().any(|s| new2.contains(s) || self.visited[1].contains(*s))
                || new2.iter().any(|s| self.visited[0].contains(*s));
            for (g, sites) in self.scratch.iter().enumerate() {
                for &s in sites {
                    self.visited[g].insert(s)?;
                }
            }
            if hit {
                self.first_intersection_step = Some(self.steps());
            }
        }
        Ok(())
    }
}

/// Parameters of a survival experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalParams {
    pub pairs: u64,
    pub max_steps: u64,
    pub checkpoints: Vec<u64>,
    /// `(1, 1)` is the pair experiment.
    pub groups: (u32, u32),
}

impl SurvivalParams {
    pub fn pair(pairs: u64, max_steps: u64, checkpoints: Vec<u64>) -> Self {
        Self {
            pairs,
            max_steps,
            checkpoints,
            groups: (1, 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::InvalidParameter("number of pairs must be positive".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::InvalidParameter("checkpoint list is empty".into()));
        }
        if self.groups.0 == 0 || self.groups.1 == 0 {
            return Err(Error::InvalidParameter("group sizes must be positive".into()));
        }
        let sorted = self.checkpoints.windows(2).all(|w| w[0] < w[1]);
        let first = self.checkpoints[0];
        let last = *self.checkpoints.last().unwrap();
        if !sorted || first < 1 || last > self.max_steps {
            return Err(Error::InvalidParameter(format!(
                "checkpoints must be strictly increasing within [1, {}]",
                self.max_steps
            )));
        }
        Ok(())
    }
}

fn walk_stream(master_seed: u64, index: u64, walk: u64) -> RandomStream {
    derive_stream(StreamId::tag(TAG_SURVIVAL).with(index).with(walk).seed(master_seed))
}

/// First intersection step of tuple `index`, or `None` if it survives
/// `max_steps`. Walk `i` of the tuple consumes stream `(index, i)`.
pub fn first_intersection(
    groups: (u32, u32),
    master_seed: u64,
    index: u64,
    max_steps: u64,
) -> Result<Option<u64>> {
    if groups == (1, 1) {
        let mut a = walk_stream(master_seed, index, 0);
        let mut b = walk_stream(master_seed, index, 1);
        let mut t = PairTracker::new();
        t.advance_pair(&mut a, &mut b, max_steps)?;
        Ok(t.first_intersection_step)
    } else {
        let mut sources: Vec<RandomStream> = (0..u64::from(groups.0 + groups.1))
            .map(|w| walk_stream(master_seed, index, w))
            .collect();
        let mut t = TupleTracker::new(groups.0, groups.1)?;
        t.advance(&mut sources, max_steps)?;
        Ok(t.first_intersection_step)
    }
}

/// Adds one to `counts[i]` for every checkpoint `checkpoints[i] < T`.
fn tally(checkpoints: &[u64], first: Option<u64>, counts: &mut [u64]) {
    let alive_through = match first {
        None => checkpoints.len(),
        Some(t) => checkpoints.partition_point(|&n| n < t),
    };
    counts[..alive_through].iter_mut().for_each(|c| *c += 1);
}

/// Running counts over a prefix of the tuple indices; the unit of
/// checkpoint/resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalAccumulator {
    pub params: SurvivalParams,
    pub master_seed: u64,
    pub cursor: u64,
    pub counts: Vec<u64>,
}

impl SurvivalAccumulator {
    pub fn new(params: SurvivalParams, master_seed: u64) -> Result<Self> {
        params.validate()?;
        let counts = vec![0; params.checkpoints.len()];
        Ok(Self {
            params,
            master_seed,
            cursor: 0,
            counts,
        })
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= self.params.pairs
    }

    /// Simulates the next `chunk` tuples.
    pub fn advance(&mut self, chunk: u64, mode: Mode) -> Result<()> {
        let end = (self.cursor + chunk).min(self.params.pairs);
        let p = &self.params;
        let seed = self.master_seed;
        // overflow errors are reported through a side slot
        let failure = std::sync::Mutex::new(None);
        let add = exec::sum_counts(mode, self.cursor..end, p.checkpoints.len(), |i, acc| {
            match first_intersection(p.groups, seed, i, p.max_steps) {
                Ok(first) => tally(&p.checkpoints, first, acc),
                Err(e) => {
                    failure.lock().unwrap().get_or_insert((i, e));
                }
            }
        });
        if let Some((_, e)) = failure.into_inner().unwrap() {
            return Err(e);
        }
        self.counts.iter_mut().zip(add).for_each(|(c, a)| *c += a);
        self.cursor = end;
        Ok(())
    }

    pub fn table(&self, h_lag: u64) -> SurvivalTable {
        SurvivalTable {
            pairs: self.cursor,
            checkpoints: self.params.checkpoints.clone(),
            counts: self.counts.clone(),
            h_lag,
            groups: self.params.groups,
        }
    }
}

pub fn run_survival_experiment(params: &SurvivalParams, master_seed: u64, mode: Mode) -> Result<SurvivalTable> {
    let mut acc = SurvivalAccumulator::new(params.clone(), master_seed)?;
    acc.advance(params.pairs, mode)?;
    Ok(acc.table(DEFAULT_H_LAG))
}

/// Pair experiment from its scalar parameters.
pub fn run_pair_experiment(
    pairs: u64,
    max_steps: u64,
    checkpoints: Vec<u64>,
    master_seed: u64,
) -> Result<SurvivalTable> {
    run_survival_experiment(&SurvivalParams::pair(pairs, max_steps, checkpoints), master_seed, Mode::Parallel)
}

/// Group-union experiment; `(1, 1)` reproduces the pair experiment exactly.
pub fn run_tuple_experiment(
    m: u32,
    n: u32,
    pairs: u64,
    max_steps: u64,
    checkpoints: Vec<u64>,
    master_seed: u64,
) -> Result<SurvivalTable> {
    let params = SurvivalParams {
        pairs,
        max_steps,
        checkpoints,
        groups: (m, n),
    };
    run_survival_experiment(&params, master_seed, Mode::Parallel)
}

/// A point estimate with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// `k(n) = (log M − log M(n)) / log n`.
pub fn k_from_counts(total: u64, survivors: u64, n: u64) -> Result<Estimate> {
    if survivors == 0 {
        return Err(Error::UndefinedEstimator(format!("M({n}) = 0")));
    }
    if n < 2 {
        return Err(Error::UndefinedEstimator(format!("k(n) needs n >= 2, got {n}")));
    }
    let ln_n = (n as f64).ln();
    let p = survivors as f64 / total as f64;
    Ok(Estimate {
        value: ((total as f64).ln() - (survivors as f64).ln()) / ln_n,
        // Var log p̂ ≈ (1 − p) / (M p)
        std_err: ((1.0 - p) / survivors as f64).sqrt() / ln_n,
    })
}

/// `h(n) = (log M(n) − log M(n+m)) / (log(n+m) − log n)`.
pub fn h_from_counts(at_n: u64, at_n_plus_m: u64, n: u64, m: u64) -> Result<Estimate> {
    if at_n == 0 || at_n_plus_m == 0 {
        return Err(Error::UndefinedEstimator(format!("zero count at n={n} or n+m={}", n + m)));
    }
    if n == 0 || m == 0 {
        return Err(Error::UndefinedEstimator("h(n) needs n, m >= 1".into()));
    }
    let denom = ((n + m) as f64).ln() - (n as f64).ln();
    let r = at_n_plus_m as f64 / at_n as f64;
    Ok(Estimate {
        value: ((at_n as f64).ln() - (at_n_plus_m as f64).ln()) / denom,
        // M(n+m) | M(n) is binomial with ratio r
        std_err: ((1.0 - r) / at_n_plus_m as f64).sqrt() / denom,
    })
}

/// Survivor counts `M(n)` at the checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivalTable {
    pub pairs: u64,
    pub checkpoints: Vec<u64>,
    pub counts: Vec<u64>,
    pub h_lag: u64,
    pub groups: (u32, u32),
}

/// One row of the survival table: `n`, `M(n)`, `k(n)`, `h(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n: u64,
    pub survivors: u64,
    pub fraction: f64,
    pub fraction_ci: Interval,
    pub k: Option<Estimate>,
    pub h: Option<Estimate>,
}

impl SurvivalTable {
    /// `M(n)` for `n = 0` or a checkpoint.
    pub fn count_at(&self, n: u64) -> Option<u64> {
        if n == 0 {
            return Some(self.pairs);
        }
        self.checkpoints
            .iter()
            .position(|&c| c == n)
            .map(|i| self.counts[i])
    }

    fn require(&self, n: u64) -> Result<u64> {
        self.count_at(n)
            .ok_or_else(|| Error::InvalidParameter(format!("{n} is not a checkpoint")))
    }

    pub fn fraction(&self, n: u64) -> Result<f64> {
        Ok(self.require(n)? as f64 / self.pairs as f64)
    }

    pub fn k(&self, n: u64) -> Result<Estimate> {
        k_from_counts(self.pairs, self.require(n)?, n)
    }

    pub fn h(&self, n: u64, m_lag: u64) -> Result<Estimate> {
        h_from_counts(self.require(n)?, self.require(n + m_lag)?, n, m_lag)
    }

    pub fn is_monotone(&self) -> bool {
        self.counts.first().is_none_or(|&c| c <= self.pairs)
            && self.counts.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn rows(&self) -> Vec<TableRow> {
        self.checkpoints
            .iter()
            .zip(&self.counts)
            .map(|(&n, &c)| TableRow {
                n,
                survivors: c,
                fraction: c as f64 / self.pairs as f64,
                fraction_ci: wilson(c, self.pairs, 1.96),
                k: self.k(n).ok(),
                h: self.h(n, self.h_lag).ok(),
            })
            .collect()
    }
}

pub fn k_estimator(table: &SurvivalTable, n: u64) -> Result<Estimate> {
    table.k(n)
}

pub fn h_estimator(table: &SurvivalTable, n: u64, m_lag: u64) -> Result<Estimate> {
    table.h(n, m_lag)
}
