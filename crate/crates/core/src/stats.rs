//! Small statistics toolkit used by the estimators and diagnostics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval {
        lo: (centre - half).max(0.0),
        hi: (centre + half).min(1.0),
    }
}

/// Binomial standard deviation of the sample proportion.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation; zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Two-sided Student-t quantile, e.g. `level = 0.95`.
pub fn t_quantile(level: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("valid t distribution")
        .inverse_cdf(0.5 + level / 2.0)
}

/// Mean with a two-sided t interval from replicate spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub mean: f64,
    pub std_err: f64,
    pub ci: Interval,
    pub replicates: usize,
}

pub fn replicate_summary(xs: &[f64], level: f64) -> ReplicateSummary {
    let m = mean(xs);
    let se = std_dev(xs) / (xs.len() as f64).sqrt();
    let half = if xs.len() > 1 {
        t_quantile(level, (xs.len() - 1) as f64) * se
    } else {
        0.0
    };
    ReplicateSummary {
        mean: m,
        std_err: se,
        ci: Interval {
            lo: m - half,
            hi: m + half,
        },
        replicates: xs.len(),
    }
}

/// Ordinary least squares line with slope inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    /// One-sided p-value for H1: slope < 0.
    pub p_negative: f64,
    pub residuals: Vec<f64>,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| b - (intercept + slope * a))
        .collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let dof = (n - 2) as f64;
    let slope_se = (sse / dof / sxx).sqrt();
    let p_negative = if slope_se > 0.0 {
        StudentsT::new(0.0, 1.0, dof).unwrap().cdf(slope / slope_se)
    } else if slope < 0.0 {
        0.0
    } else {
        1.0
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_se,
        r_squared,
        p_negative,
        residuals,
    })
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub rho: f64,
    /// One-sided p-value for H1: rho < 0 (t approximation).
    pub p_negative: f64,
}

/// Spearman rank correlation. `None` when either variable is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<RankCorrelation> {
    if x.len() != y.len() || x.len() < 3 {
        return None;
    }
    let rho = pearson(&ranks(x), &ranks(y))?;
    let n = x.len() as f64;
    let p_negative = if rho <= -1.0 {
        0.0
    } else if rho >= 1.0 {
        1.0
    } else {
        let t = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
        StudentsT::new(0.0, 1.0, n - 2.0).unwrap().cdf(t)
    };
    Some(RankCorrelation { rho, p_negative })
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F1 − F2|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at significance `alpha`.
pub fn ks_critical(alpha: f64, n1: usize, n2: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (n1, n2) = (n1 as f64, n2 as f64);
    c * ((n1 + n2) / (n1 * n2)).sqrt()
}

/// Two-sided p-value of a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    2.0 * (1.0 - Normal::standard().cdf(z.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_proportion() {
        let ci = wilson(30, 100, 1.96);
        assert!(ci.contains(0.3));
        assert!(ci.lo > 0.2 && ci.hi < 0.4);
        let ci = wilson(0, 100, 1.96);
        assert_eq!(ci.lo, 0.0);
        assert!(ci.hi > 0.0);
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, -1.0, -3.0, -5.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert_eq!(f.p_negative, 0.0);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties_and_monotone() {
        let s = spearman(&[1.0, 2.0, 3.0, 4.0], &[8.0, 4.0, 2.0, 1.0]).unwrap();
        assert!((s.rho + 1.0).abs() < 1e-12);
        assert_eq!(s.p_negative, 0.0);
        assert!(spearman(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).is_none());
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn ks_statistic() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        let d = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.5, 3.5, 4.5, 5.5]);
        assert!((d - 0.5).abs() < 1e-12);
        // 1% critical value for equal sizes 10^4: 1.6276 * sqrt(2e-4)
        assert!((ks_critical(0.01, 10_000, 10_000) - 0.023_018).abs() < 1e-5);
    }

    #[test]
    fn t_interval() {
        let s = replicate_summary(&[1.0, 2.0, 3.0], 0.95);
        assert!((s.mean - 2.0).abs() < 1e-12);
        // t_{0.975, 2} = 4.3027
        assert!((s.ci.hi - 2.0 - 4.302_653 / 3f64.sqrt()).abs() < 1e-4);
    }
}
