//! Curve pairs as splitting particles, and the direct (rejection) estimate
//! used to cross-check them.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::{self, Mode};
use crate::pathspace::{sep_test, CurvePair, PairTail};
use crate::rng::{derive_stream, StreamId};

use super::ensemble::SplittingModel;

const TAG_PAIRS: u64 = 0x5350_4c54; // "SPLT"
const TAG_DIRECT: u64 = 0x4452_4354; // "DRCT"

/// Per-survivor record at a shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairObservation {
    pub sep: bool,
    pub endpoint_angle: f64,
    pub halfspace_fraction: f64,
}

/// Truncation depth used for tail functionals at shell `n`: `⌊n/2⌋`, capped
/// at the deepest resolvable level.
pub fn tail_depth(pair: &CurvePair, shell: u32) -> u32 {
    (shell / 2).min(pair.max_resolvable_depth())
}

pub fn observe_pair(pair: &CurvePair, shell: u32) -> PairObservation {
    let tail: PairTail = pair
        .pi_k(tail_depth(pair, shell))
        .expect("depth capped at the resolvable maximum");
    PairObservation {
        sep: sep_test(pair).unwrap_or(false),
        endpoint_angle: tail.endpoint_angle(),
        halfspace_fraction: tail.halfspace_fraction(),
    }
}

fn extend_with(pair: &mut CurvePair, key: StreamId, master_seed: u64) -> Result<bool> {
    let mut sa = derive_stream(key.with(0).seed(master_seed));
    let mut sb = derive_stream(key.with(1).seed(master_seed));
    pair.extend_one_shell(&mut sa, &mut sb)?;
    Ok(pair.alive)
}

/// Splitting over pairs of curves: one level is one shell.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairModel;

impl SplittingModel for PairModel {
    type Particle = CurvePair;
    type Observation = PairObservation;

    fn advance(&self, particle: &mut CurvePair, key: StreamId, master_seed: u64) -> Result<bool> {
        extend_with(particle, key, master_seed)
    }

    fn observe(&self, particle: &CurvePair, shell: u32) -> PairObservation {
        observe_pair(particle, shell)
    }

    fn stream_tag(&self) -> u64 {
        TAG_PAIRS
    }
}

/// Counts from independent extensions of one starting pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectSurvival {
    pub trials: u64,
    /// `alive[j]`: trials alive after shell `j + 1`.
    pub alive: Vec<u64>,
    /// `sep[j]`: trials alive and separated at shell `j + 1`.
    pub sep: Vec<u64>,
}

impl DirectSurvival {
    pub fn q_hat(&self, shell: u32) -> f64 {
        if shell == 0 {
            1.0
        } else {
            self.alive[shell as usize - 1] as f64 / self.trials as f64
        }
    }
}

/// Direct Monte Carlo: extend `trials` independent copies of `initial`
/// through `shells` shells, counting survivors per shell. Trials `[from,
/// to)` are simulated so that runs can be split and summed.
pub fn direct_survival_range(
    initial: &CurvePair,
    shells: u32,
    from: u64,
    to: u64,
    master_seed: u64,
    mode: Mode,
) -> Result<DirectSurvival> {
    let len = 2 * shells as usize;
    let failure = std::sync::Mutex::new(None);
    let counts = exec::sum_counts(mode, from..to, len, |t, acc| {
        let mut pair = initial.clone();
        for s in 0..shells {
            let key = StreamId::tag(TAG_DIRECT).with(t).with(u64::from(s));
            match extend_with(&mut pair, key, master_seed) {
                Ok(true) => {
                    acc[s as usize] += 1;
                    if sep_test(&pair).unwrap_or(false) {
                        acc[shells as usize + s as usize] += 1;
                    }
                }
                Ok(false) => break,
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    break;
                }
            }
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(DirectSurvival {
        trials: to - from,
        alive: counts[..shells as usize].to_vec(),
        sep: counts[shells as usize..].to_vec(),
    })
}

pub fn direct_survival(
    initial: &CurvePair,
    shells: u32,
    trials: u64,
    master_seed: u64,
    mode: Mode,
) -> Result<DirectSurvival> {
    direct_survival_range(initial, shells, 0, trials, master_seed, mode)
}

impl DirectSurvival {
    /// Sums counts of two disjoint trial ranges.
    pub fn merge(&mut self, other: &DirectSurvival) {
        self.trials += other.trials;
        self.alive.iter_mut().zip(&other.alive).for_each(|(a, b)| *a += b);
        self.sep.iter_mut().zip(&other.sep).for_each(|(a, b)| *a += b);
    }
}
