//! Replicate-level estimators built on per-shell survival fractions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, replicate_summary, spearman, Interval, RankCorrelation, ReplicateSummary};

use super::ensemble::ReplicateRun;
use super::pairs::PairObservation;

/// Confidence level used for replicate intervals.
pub const CI_LEVEL: f64 = 0.95;
/// Reference exponent used only to display `Q̂_n = e^{n ξ_ref} q̂_n`.
pub const DEFAULT_XI_REF: f64 = 0.57;
/// Shells discarded before exponent windows.
pub const BURN_IN: u32 = 2;

fn q_of(p_hat: &[f64], shell: u32) -> Result<f64> {
    if shell as usize > p_hat.len() {
        return Err(Error::InvalidParameter(format!(
            "shell {shell} beyond the {} simulated",
            p_hat.len()
        )));
    }
    Ok(p_hat[..shell as usize].iter().product())
}

fn p_hats<O>(runs: &[ReplicateRun<O>]) -> Vec<&[f64]> {
    runs.iter().map(|r| r.p_hat.as_slice()).collect()
}

/// `q̂_n`: mean of the per-replicate products with a t interval.
pub fn estimate_q<O>(runs: &[ReplicateRun<O>], shell: u32) -> Result<ReplicateSummary> {
    estimate_q_from(&p_hats(runs), shell)
}

pub fn estimate_q_from(p_hat: &[&[f64]], shell: u32) -> Result<ReplicateSummary> {
    if p_hat.is_empty() {
        return Err(Error::InvalidParameter("no replicates".into()));
    }
    let qs = p_hat.iter().map(|p| q_of(p, shell)).collect::<Result<Vec<_>>>()?;
    Ok(replicate_summary(&qs, CI_LEVEL))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiEstimate {
    pub n0: u32,
    pub n1: u32,
    pub xi: f64,
    pub summary: ReplicateSummary,
    pub per_replicate: Vec<f64>,
}

/// `ξ̂` as the mean over the window `n0..n1` of `−ln(q̂_{j+1}/q̂_j)`, per
/// replicate; the interval comes from the replicate spread.
pub fn estimate_xi<O>(runs: &[ReplicateRun<O>], n0: u32, n1: u32) -> Result<XiEstimate> {
    estimate_xi_from(&p_hats(runs), n0, n1)
}

pub fn estimate_xi_from(p_hat: &[&[f64]], n0: u32, n1: u32) -> Result<XiEstimate> {
    if n1 < n0 + 3 {
        return Err(Error::InvalidParameter(format!(
            "exponent window {n0}..{n1} spans fewer than 3 shells"
        )));
    }
    if n0 < BURN_IN {
        return Err(Error::InvalidParameter(format!(
            "exponent window must start at shell {BURN_IN} or later"
        )));
    }
    if p_hat.is_empty() {
        return Err(Error::InvalidParameter("no replicates".into()));
    }
    let per_replicate = p_hat
        .iter()
        .map(|p| {
            if (n1 as usize) > p.len() {
                return Err(Error::InvalidParameter(format!("shell {n1} not simulated")));
            }
            let w = &p[n0 as usize..n1 as usize];
            Ok(w.iter().map(|x| -x.ln()).sum::<f64>() / w.len() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = replicate_summary(&per_replicate, CI_LEVEL);
    Ok(XiEstimate {
        n0,
        n1,
        xi: summary.mean,
        summary,
        per_replicate,
    })
}

/// Successive ratios of `q̂` and their Cauchy increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSequence {
    pub xi_ref: f64,
    pub n: Vec<u32>,
    pub q_hat: Vec<f64>,
    /// `Q̂_n = e^{n ξ_ref} q̂_n`.
    pub big_q: Vec<f64>,
    /// `r̂_n = q̂_{n+1} / q̂_n` for `n` in `n` except the last.
    pub ratios: Vec<f64>,
    /// Replicate interval of the per-replicate ratio at each `n`.
    pub ratio_ci: Vec<Interval>,
    /// Mean over replicates of `|r̂_{n+1} − r̂_n|`.
    pub increments: Vec<f64>,
    /// Rank correlation of per-replicate increments against `n`.
    pub trend: Option<RankCorrelation>,
}

impl QSequence {
    /// Passes when the increments trend downward at significance `alpha`,
    /// or are identically zero.
    pub fn trend_passes(&self, alpha: f64) -> bool {
        match self.trend {
            Some(t) => t.rho < 0.0 && t.p_negative < alpha,
            None => self.increments.iter().all(|&d| d == 0.0),
        }
    }
}

/// Builds the ratio sequence over shells `first..=last`.
pub fn q_ratio_convergence<O>(runs: &[ReplicateRun<O>], first: u32, last: u32, xi_ref: f64) -> Result<QSequence> {
    q_ratio_convergence_from(&p_hats(runs), first, last, xi_ref)
}

pub fn q_ratio_convergence_from(p_hat: &[&[f64]], first: u32, last: u32, xi_ref: f64) -> Result<QSequence> {
    if last < first + 2 {
        return Err(Error::InvalidParameter(
            "ratio convergence needs at least three shells".into(),
        ));
    }
    let n: Vec<u32> = (first..=last).collect();
    let q_hat = n
        .iter()
        .map(|&s| estimate_q_from(p_hat, s).map(|s| s.mean))
        .collect::<Result<Vec<_>>>()?;
    let big_q = n
        .iter()
        .zip(&q_hat)
        .map(|(&s, q)| (f64::from(s) * xi_ref).exp() * q)
        .collect();
    let ratios: Vec<f64> = q_hat.windows(2).map(|w| w[1] / w[0]).collect();

    // per-replicate ratio at shell s is p̂ of level s
    let ratio_at = |p: &[f64], s: u32| p[s as usize];
    let ratio_ci = n[..n.len() - 1]
        .iter()
        .map(|&s| {
            let xs: Vec<f64> = p_hat.iter().map(|p| ratio_at(p, s)).collect();
            replicate_summary(&xs, CI_LEVEL).ci
        })
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut increments = Vec::new();
    for &s in &n[..n.len() - 2] {
        let inc: Vec<f64> = p_hat
            .iter()
            .map(|p| (ratio_at(p, s + 1) - ratio_at(p, s)).abs())
            .collect();
        increments.push(mean(&inc));
        for d in inc {
            xs.push(f64::from(s));
            ys.push(d);
        }
    }
    Ok(QSequence {
        xi_ref,
        n,
        q_hat,
        big_q,
        ratios,
        ratio_ci,
        increments,
        trend: spearman(&xs, &ys),
    })
}

/// Conditional separation frequency among survivors at one shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepRow {
    pub shell: u32,
    pub frequency: f64,
    pub ci: Interval,
    pub std_err: f64,
}

/// Fraction of survivors in SEP at shells `1..=last` of one replicate.
pub fn sep_fractions(run: &ReplicateRun<PairObservation>, last: u32) -> Result<Vec<f64>> {
    (1..=last)
        .map(|shell| {
            let obs = run
                .observations_at(shell)
                .ok_or_else(|| Error::InvalidParameter(format!("shell {shell} not simulated")))?;
            Ok(obs.iter().filter(|o| o.sep).count() as f64 / obs.len() as f64)
        })
        .collect()
}

/// Per-shell `P̂(SEP | alive)` from per-replicate fractions, averaging over
/// replicates; row `j` is shell `j + 1`.
pub fn rho1_from_fractions(per_replicate: &[Vec<f64>]) -> Result<Vec<SepRow>> {
    let shells = per_replicate.first().map_or(0, Vec::len);
    if shells == 0 || per_replicate.iter().any(|f| f.len() != shells) {
        return Err(Error::InvalidParameter("no separation data".into()));
    }
    Ok((0..shells)
        .map(|j| {
            let xs: Vec<f64> = per_replicate.iter().map(|f| f[j]).collect();
            let s = replicate_summary(&xs, CI_LEVEL);
            SepRow {
                shell: j as u32 + 1,
                frequency: s.mean,
                ci: s.ci,
                std_err: s.std_err,
            }
        })
        .collect())
}

/// Per-shell `P̂(SEP | alive)` over shells `1..=last`.
pub fn estimate_rho1(runs: &[ReplicateRun<PairObservation>], last: u32) -> Result<Vec<SepRow>> {
    let per = runs
        .iter()
        .map(|r| sep_fractions(r, last))
        .collect::<Result<Vec<_>>>()?;
    rho1_from_fractions(&per)
}
