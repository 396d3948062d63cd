//! Extend-kill-resample populations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::rng::{derive_stream, StreamId};

/// A particle type that can be pushed through one level at a time.
pub trait SplittingModel: Sync {
    type Particle: Clone + Send + Sync;
    type Observation: Clone + Send + Sync;

    /// Advances the particle by one level using streams derived from `key`;
    /// returns whether it survived.
    fn advance(&self, particle: &mut Self::Particle, key: StreamId, master_seed: u64) -> Result<bool>;

    /// Summary of a survivor at `shell`, recorded before resampling.
    fn observe(&self, particle: &Self::Particle, shell: u32) -> Self::Observation;

    /// Domain tag mixed into every stream id of the model.
    fn stream_tag(&self) -> u64;
}

/// Population of live particles at a common shell.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble<P> {
    pub particles: Vec<P>,
    pub target_size: usize,
    pub shell: u32,
    /// Survival fraction at each completed level.
    pub p_hat: Vec<f64>,
    /// Survivor count at each level; with equal weights this is the
    /// effective sample size before resampling.
    pub ess: Vec<usize>,
    /// Distinct parents drawn by each resampling step.
    pub distinct_parents: Vec<usize>,
}

impl<P: Clone> ParticleEnsemble<P> {
    pub fn new(initial: &P, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("ensemble size must be positive".into()));
        }
        Ok(Self {
            particles: vec![initial.clone(); size],
            target_size: size,
            shell: 0,
            p_hat: Vec::new(),
            ess: Vec::new(),
            distinct_parents: Vec::new(),
        })
    }

    /// Running estimate of the survival probability to the current shell.
    pub fn q_hat(&self) -> f64 {
        self.p_hat.iter().product()
    }
}

/// One level: extend every particle, drop the dead, record `p̂`, and
/// resample multinomially back to the target size. Returns the observations
/// of the survivors.
///
/// Particle `i` at shell `s` of replicate `r` uses streams derived from
/// `(tag, r, s, i)`; resampling indices come from `(tag, r, s, RESAMPLE)`.
/// Survivors are kept in slot order, so the outcome does not depend on
/// scheduling.
pub fn evolve_ensemble<M: SplittingModel>(
    ens: &mut ParticleEnsemble<M::Particle>,
    model: &M,
    master_seed: u64,
    replicate: u64,
    mode: Mode,
) -> Result<Vec<M::Observation>> {
    if ens.particles.is_empty() {
        return Err(Error::InvalidState("empty ensemble".into()));
    }
    let level_key = StreamId::tag(model.stream_tag()).with(replicate).with(u64::from(ens.shell));
    let mut particles = std::mem::take(&mut ens.particles);
    let mut status: Vec<Result<bool>> = vec![Ok(false); particles.len()];
    {
        let mut slots: Vec<(&mut M::Particle, &mut Result<bool>)> =
            particles.iter_mut().zip(status.iter_mut()).collect();
        exec::for_each_indexed(mode, &mut slots, |i, (p, st)| {
            **st = model.advance(p, level_key.with(i as u64), master_seed);
        });
    }
    let before = particles.len();
    let mut survivors = Vec::with_capacity(before);
    for (p, st) in particles.into_iter().zip(status) {
        if st? {
            survivors.push(p);
        }
    }
    let next_shell = ens.shell + 1;
    if survivors.is_empty() {
        return Err(Error::Extinction { shell: next_shell });
    }
    ens.p_hat.push(survivors.len() as f64 / before as f64);
    ens.ess.push(survivors.len());

    let observations = exec::map_range(mode, 0..survivors.len() as u64, |i| {
        model.observe(&survivors[i as usize], next_shell)
    });

    let mut rs = derive_stream(level_key.with(RESAMPLE_SLOT).seed(master_seed));
    let mut copies = vec![0usize; survivors.len()];
    for _ in 0..ens.target_size {
        copies[rs.uniform_index(survivors.len())] += 1;
    }
    ens.distinct_parents.push(copies.iter().filter(|&&c| c > 0).count());
    let mut next = Vec::with_capacity(ens.target_size);
    for (p, c) in survivors.into_iter().zip(copies) {
        if c == 0 {
            continue;
        }
        for _ in 1..c {
            next.push(p.clone());
        }
        next.push(p);
    }
    ens.particles = next;
    ens.shell = next_shell;
    Ok(observations)
}

const RESAMPLE_SLOT: u64 = u64::MAX;

/// Outcome of one independent ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRun<O> {
    pub replicate: u64,
    pub size: usize,
    pub p_hat: Vec<f64>,
    pub ess: Vec<usize>,
    pub distinct_parents: Vec<usize>,
    /// `observations[j]` holds the survivors of shell `j + 1`.
    pub observations: Vec<Vec<O>>,
}

impl<O> ReplicateRun<O> {
    pub fn observations_at(&self, shell: u32) -> Option<&[O]> {
        shell
            .checked_sub(1)
            .and_then(|j| self.observations.get(j as usize))
            .map(Vec::as_slice)
    }
}

/// Evolves a fresh ensemble of `size` copies of `initial` through `shells`
/// levels.
pub fn run_replicate<M: SplittingModel>(
    model: &M,
    initial: &M::Particle,
    size: usize,
    shells: u32,
    master_seed: u64,
    replicate: u64,
    mode: Mode,
) -> Result<ReplicateRun<M::Observation>> {
    let mut ens = ParticleEnsemble::new(initial, size)?;
    let mut observations = Vec::with_capacity(shells as usize);
    for _ in 0..shells {
        observations.push(evolve_ensemble(&mut ens, model, master_seed, replicate, mode)?);
    }
    Ok(ReplicateRun {
        replicate,
        size,
        p_hat: ens.p_hat,
        ess: ens.ess,
        distinct_parents: ens.distinct_parents,
        observations,
    })
}

/// `replicates` independent ensembles, run one after another.
pub fn run_replicates<M: SplittingModel>(
    model: &M,
    initial: &M::Particle,
    size: usize,
    shells: u32,
    replicates: u64,
    master_seed: u64,
    mode: Mode,
) -> Result<Vec<ReplicateRun<M::Observation>>> {
    (0..replicates)
        .map(|r| run_replicate(model, initial, size, shells, master_seed, r, mode))
        .collect()
}
