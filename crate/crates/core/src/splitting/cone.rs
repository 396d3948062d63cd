//! Cone survival exponents by splitting.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::Mode;
use crate::rng::{derive_stream, StreamId};
use crate::stats::{linear_fit, replicate_summary, ReplicateSummary};
use crate::walks::{cone_walk, ConeSpec};

use super::ensemble::{run_replicates, SplittingModel};
use super::estimators::CI_LEVEL;

const TAG_CONE: u64 = 0x434f_4e45; // "CONE"

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeParticle {
    pub position: [f64; 3],
    pub shell: u32,
}

/// Brownian particle killed on leaving the cone; level `n` is radius `e^n`.
#[derive(Debug, Clone, Copy)]
pub struct ConeModel {
    pub cone: ConeSpec,
}

impl ConeModel {
    /// On the axis at radius 1.
    pub fn start(&self) -> ConeParticle {
        ConeParticle {
            position: self.cone.axis,
            shell: 0,
        }
    }
}

impl SplittingModel for ConeModel {
    type Particle = ConeParticle;
    type Observation = ();

    fn advance(&self, p: &mut ConeParticle, key: StreamId, master_seed: u64) -> Result<bool> {
        let mut stream = derive_stream(key.seed(master_seed));
        p.shell += 1;
        Ok(cone_walk(&self.cone, &mut p.position, f64::from(p.shell).exp(), &mut stream))
    }

    fn observe(&self, _p: &ConeParticle, _shell: u32) {}

    fn stream_tag(&self) -> u64 {
        TAG_CONE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeEstimate {
    pub half_angle: f64,
    pub shells: u32,
    pub alpha: f64,
    pub summary: ReplicateSummary,
    /// `α̂` of each replicate: minus the fitted slope of `ln q̂_n` over
    /// `n = 0..=shells`.
    pub per_replicate: Vec<f64>,
    /// Mean per-shell survival fractions.
    pub p_hat_mean: Vec<f64>,
}

pub fn estimate_cone_exponent(
    cone: &ConeSpec,
    shells: u32,
    particles: usize,
    replicates: u64,
    master_seed: u64,
    mode: Mode,
) -> Result<ConeEstimate> {
    let model = ConeModel { cone: *cone };
    let runs = run_replicates(&model, &model.start(), particles, shells, replicates, master_seed, mode)?;
    let p_hat: Vec<Vec<f64>> = runs.into_iter().map(|r| r.p_hat).collect();
    Ok(cone_estimate_from(cone.half_angle, shells, &p_hat))
}

/// Exponent from per-replicate survival fractions over `shells` levels.
pub fn cone_estimate_from(half_angle: f64, shells: u32, p_hat: &[Vec<f64>]) -> ConeEstimate {
    let xs: Vec<f64> = (0..=shells).map(f64::from).collect();
    let per_replicate: Vec<f64> = p_hat
        .iter()
        .map(|p| {
            let mut log_q = vec![0.0];
            for x in p {
                log_q.push(log_q.last().unwrap() + x.ln());
            }
            linear_fit(&xs, &log_q).map_or(0.0, |f| -f.slope)
        })
        .collect();
    let summary = replicate_summary(&per_replicate, CI_LEVEL);
    let p_hat_mean = (0..shells as usize)
        .map(|j| p_hat.iter().map(|p| p[j]).sum::<f64>() / p_hat.len() as f64)
        .collect();
    ConeEstimate {
        half_angle,
        shells,
        alpha: summary.mean,
        summary,
        per_replicate,
        p_hat_mean,
    }
}
