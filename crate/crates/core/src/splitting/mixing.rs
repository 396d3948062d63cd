//! Two-ensemble distance diagnostics for forgetting the initial pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{ks_critical, ks_two_sample, linear_fit, mean, LinearFit};

use super::ensemble::ReplicateRun;
use super::pairs::PairObservation;

/// Significance of the KS critical value.
pub const KS_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    EndpointAngle,
    SepIndicator,
    HalfspaceFraction,
}

impl Functional {
    pub const ALL: [Functional; 3] = [
        Functional::EndpointAngle,
        Functional::SepIndicator,
        Functional::HalfspaceFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::EndpointAngle => "endpoint-angle",
            Functional::SepIndicator => "sep-indicator",
            Functional::HalfspaceFraction => "halfspace-fraction",
        }
    }

    pub fn eval(self, o: &PairObservation) -> f64 {
        match self {
            Functional::EndpointAngle => o.endpoint_angle,
            Functional::SepIndicator => f64::from(u8::from(o.sep)),
            Functional::HalfspaceFraction => o.halfspace_fraction,
        }
    }
}

impl std::str::FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Functional::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown functional {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingDiagnostic {
    pub functional: Functional,
    pub shells: Vec<u32>,
    /// Mean over replicate pairs of the KS statistic at each shell.
    pub d: Vec<f64>,
    /// 1% critical value at the mean survivor counts of each shell.
    pub critical: Vec<f64>,
    /// Fit of `ln D_n` against `n`; absent when saturated.
    pub fit: Option<LinearFit>,
    /// `−slope` of the fit.
    pub beta_hat: Option<f64>,
    /// Every `D_n` already at or below its critical value.
    pub saturated: bool,
    pub pass: bool,
}

impl MixingDiagnostic {
    pub fn last_below_critical(&self) -> bool {
        matches!((self.d.last(), self.critical.last()), (Some(d), Some(c)) if d < c)
    }
}

/// KS statistics and critical values of one replicate pair, per shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateDistance {
    pub d: Vec<f64>,
    pub critical: Vec<f64>,
}

pub fn replicate_distance(
    a: &ReplicateRun<PairObservation>,
    b: &ReplicateRun<PairObservation>,
    shells: &[u32],
    functional: Functional,
    alpha: f64,
) -> Result<ReplicateDistance> {
    let sample = |r: &ReplicateRun<PairObservation>, shell: u32| -> Result<Vec<f64>> {
        Ok(r.observations_at(shell)
            .ok_or_else(|| Error::InvalidParameter(format!("shell {shell} not simulated")))?
            .iter()
            .map(|o| functional.eval(o))
            .collect())
    };
    let mut out = ReplicateDistance {
        d: Vec::with_capacity(shells.len()),
        critical: Vec::with_capacity(shells.len()),
    };
    for &shell in shells {
        let (xa, xb) = (sample(a, shell)?, sample(b, shell)?);
        out.d.push(ks_two_sample(&xa, &xb));
        out.critical.push(ks_critical(alpha, xa.len(), xb.len()));
    }
    Ok(out)
}

/// Averages per-replicate distances and applies [`diagnose`].
pub fn diagnose_replicates(functional: Functional, shells: &[u32], per: &[ReplicateDistance]) -> Result<MixingDiagnostic> {
    if per.is_empty() || shells.is_empty() {
        return Err(Error::InvalidParameter("mixing needs replicates and shells".into()));
    }
    let avg = |f: fn(&ReplicateDistance) -> &Vec<f64>| -> Vec<f64> {
        (0..shells.len())
            .map(|j| mean(&per.iter().map(|r| f(r)[j]).collect::<Vec<_>>()))
            .collect()
    };
    Ok(diagnose(functional, shells.to_vec(), avg(|r| &r.d), avg(|r| &r.critical)))
}

/// `D_n` between two families of replicates, pairing replicate `r` of one
/// with replicate `r` of the other.
pub fn mixing_from_runs(
    a: &[ReplicateRun<PairObservation>],
    b: &[ReplicateRun<PairObservation>],
    shells: &[u32],
    functional: Functional,
    alpha: f64,
) -> Result<MixingDiagnostic> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::InvalidParameter(
            "mixing needs equally many replicates on both sides".into(),
        ));
    }
    let per = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| replicate_distance(ra, rb, shells, functional, alpha))
        .collect::<Result<Vec<_>>>()?;
    diagnose_replicates(functional, shells, &per)
}

/// Fits the decay of `D_n` and applies the pass rule: negative slope with
/// one-sided p < 0.05 and the last `D_n` below its critical value, or all
/// `D_n` already at the noise floor.
pub fn diagnose(functional: Functional, shells: Vec<u32>, d: Vec<f64>, critical: Vec<f64>) -> MixingDiagnostic {
    let saturated = d.iter().zip(&critical).all(|(d, c)| d <= c);
    let fit = if d.iter().all(|&x| x > 0.0) {
        let xs: Vec<f64> = shells.iter().map(|&s| f64::from(s)).collect();
        let ys: Vec<f64> = d.iter().map(|x| x.ln()).collect();
        linear_fit(&xs, &ys)
    } else {
        None
    };
    let beta_hat = fit.as_ref().map(|f| -f.slope);
    let mut diag = MixingDiagnostic {
        functional,
        shells,
        d,
        critical,
        fit,
        beta_hat,
        saturated,
        pass: false,
    };
    let decays = diag.fit.as_ref().is_some_and(|f| f.slope < 0.0 && f.p_negative < 0.05);
    diag.pass = saturated || (decays && diag.last_below_critical());
    diag
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(values: &[Vec<f64>]) -> ReplicateRun<PairObservation> {
        ReplicateRun {
            replicate: 0,
            size: 0,
            p_hat: vec![1.0; values.len()],
            ess: vec![],
            distinct_parents: vec![],
            observations: values
                .iter()
                .map(|v| {
                    v.iter()
                        .map(|&x| PairObservation {
                            sep: x > 0.5,
                            endpoint_angle: x,
                            halfspace_fraction: x,
                        })
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn identical_ensembles_have_zero_distance() {
        let vals: Vec<Vec<f64>> = (0..4).map(|s| (0..50).map(|i| (i * (s + 1)) as f64).collect()).collect();
        let a = vec![run(&vals)];
        let m = mixing_from_runs(&a, &a, &[1, 2, 3, 4], Functional::EndpointAngle, KS_ALPHA).unwrap();
        assert!(m.d.iter().all(|&d| d == 0.0));
        assert!(m.saturated && m.pass && m.fit.is_none());
    }

    #[test]
    fn shrinking_shift_decays() {
        let shells = [1u32, 2, 3, 4, 5, 6];
        let base: Vec<f64> = (0..400).map(|i| i as f64 / 400.0).collect();
        let a = vec![run(&vec![base.clone(); 6])];
        let shifted: Vec<Vec<f64>> = (0..6)
            .map(|s| base.iter().map(|x| x + 0.8 * (-(s as f64)).exp()).collect())
            .collect();
        let b = vec![run(&shifted)];
        let m = mixing_from_runs(&a, &b, &shells, Functional::EndpointAngle, KS_ALPHA).unwrap();
        assert!(m.d.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.fit.as_ref().unwrap().slope < 0.0);
        assert!(m.beta_hat.unwrap() > 0.0);
        assert!(m.pass);
        assert!(m.d.iter().all(|d| (0.0..=1.0).contains(d)));
    }

    #[test]
    fn functional_names_roundtrip() {
        for f in Functional::ALL {
            assert_eq!(f.name().parse::<Functional>().unwrap(), f);
        }
        assert!("angle".parse::<Functional>().is_err());
    }
}
