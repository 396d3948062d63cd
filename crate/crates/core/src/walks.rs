//! Walkers on Z³ and in R³, first-hitting of spheres, and the exact-law
//! checks used to validate the RNG and the steppers.
//!
//! The lattice walker is the workhorse of every intersection experiment.
//! The Gaussian walker exists to check continuum laws. For those checks the
//! step scale may depend on the position (`sigma = eps * distance to the
//! nearest absorbing set`, floored near the target): a state-dependent
//! Gaussian step is a time change of Brownian motion, so hitting
//! distributions are unaffected while the number of steps stays bounded.
//! Discrete-time detection without sub-step interpolation leaves an
//! overshoot bias of order `floor / radius`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::rng::RandomStream;

/// Relative step scale of adaptive Gaussian walkers.
pub const ADAPTIVE_EPS: f64 = 0.1;
/// Step floor of adaptive Gaussian walkers, relative to the target scale.
pub const ADAPTIVE_FLOOR: f64 = 1e-2;

pub trait Walker {
    fn radius(&self) -> f64;
    fn steps_taken(&self) -> u64;
    fn step(&mut self, stream: &mut RandomStream);
}

/// Simple random walk on Z³.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeWalk {
    pub position: Site,
    pub steps_taken: u64,
}

impl LatticeWalk {
    pub fn at(position: Site) -> Self {
        Self {
            position,
            steps_taken: 0,
        }
    }

    pub fn origin() -> Self {
        Self::at(Site::ORIGIN)
    }

    #[inline]
    pub fn apply(&mut self, dir: u8) -> Site {
        self.position = self.position.step(dir);
        self.steps_taken += 1;
        self.position
    }
}

impl Walker for LatticeWalk {
    fn radius(&self) -> f64 {
        self.position.norm()
    }

    fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    #[inline]
    fn step(&mut self, stream: &mut RandomStream) {
        let d = stream.uniform_step6();
        self.apply(d);
    }
}

/// Walker with i.i.d. N(0, sigma² I) increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianWalk {
    pub position: [f64; 3],
    pub steps_taken: u64,
    pub sigma: f64,
}

impl GaussianWalk {
    pub fn new(position: [f64; 3], sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            position,
            steps_taken: 0,
            sigma,
        })
    }
}

impl Walker for GaussianWalk {
    fn radius(&self) -> f64 {
        norm(self.position)
    }

    fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    fn step(&mut self, stream: &mut RandomStream) {
        let g = stream.gaussian3_unchecked(self.sigma);
        for i in 0..3 {
            self.position[i] += g[i];
        }
        self.steps_taken += 1;
    }
}

#[inline]
pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Radii `R₀·eⁿ` of the nested shells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellConfig {
    pub base_radius: f64,
    pub min_base_radius: f64,
    /// Largest outer radius (lattice units) a curve pair may reach before it
    /// is rescaled by 1/e. `None` keeps the unscaled lattice throughout.
    pub resolution_cap: Option<f64>,
}

pub const DEFAULT_MIN_BASE_RADIUS: f64 = 32.0;

impl ShellConfig {
    pub fn new(base_radius: f64) -> Result<Self> {
        Self::with_minimum(base_radius, DEFAULT_MIN_BASE_RADIUS)
    }

    pub fn with_minimum(base_radius: f64, min_base_radius: f64) -> Result<Self> {
        if !(base_radius.is_finite() && min_base_radius > 0.0 && base_radius >= min_base_radius) {
            return Err(Error::InvalidParameter(format!(
                "base radius {base_radius} below configured minimum {min_base_radius}"
            )));
        }
        Ok(Self {
            base_radius,
            min_base_radius,
            resolution_cap: Some(base_radius),
        })
    }

    pub fn unscaled(mut self) -> Self {
        self.resolution_cap = None;
        self
    }

    pub fn radius(&self, shell: i32) -> f64 {
        self.base_radius * (shell as f64).exp()
    }
}

/// Advances until `|position| >= radius` or `step_cap` steps were taken.
/// The returned state is the first at-or-beyond the radius when `hit`.
pub fn run_until_radius<W: Walker>(
    mut state: W,
    stream: &mut RandomStream,
    radius: f64,
    step_cap: u64,
) -> Result<(W, bool)> {
    if !(radius.is_finite() && radius > state.radius()) {
        return Err(Error::InvalidParameter(format!(
            "target radius {radius} must exceed current radius {}",
            state.radius()
        )));
    }
    if step_cap == 0 {
        return Err(Error::InvalidParameter("step cap must be positive".into()));
    }
    let r2 = radius * radius;
    for _ in 0..step_cap {
        state.step(stream);
        let r = state.radius();
        if r * r >= r2 {
            return Ok((state, true));
        }
    }
    Ok((state, false))
}

/// Lattice walk from `(start_x, 0, 0)` absorbed at the planes `x = 0` and
/// `x = n`; true iff `x = n` is reached first. The x-coordinate is a
/// martingale, so the success probability is `start_x / n`.
pub fn gamblers_ruin_trial(start_x: i32, n: i32, stream: &mut RandomStream) -> Result<bool> {
    if start_x < 1 || n <= start_x {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= start_x < n, got start_x={start_x} n={n}"
        )));
    }
    let mut walk = LatticeWalk::at(Site::new(start_x, 0, 0));
    loop {
        walk.step(stream);
        let x = walk.position.x();
        if x == 0 {
            return Ok(false);
        }
        if x == n {
            return Ok(true);
        }
    }
}

fn uniform_on_sphere(stream: &mut RandomStream) -> [f64; 3] {
    loop {
        let g = stream.gaussian3_unchecked(1.0);
        let r = norm(g);
        if r > 1e-12 {
            return g.map(|c| c / r);
        }
    }
}

/// Starts uniformly on the unit sphere; true iff the walker enters the ball
/// of radius `e^{-k}` before leaving the ball of radius `escape_radius`.
pub fn ball_hitting_trial(k: f64, stream: &mut RandomStream, escape_radius: f64) -> Result<bool> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("k must be >= 0, got {k}")));
    }
    if !(escape_radius >= 5f64.exp()) {
        return Err(Error::InvalidParameter(format!(
            "escape radius {escape_radius} below e^5"
        )));
    }
    let inner = (-k).exp();
    let floor = ADAPTIVE_FLOOR * inner;
    let mut x = uniform_on_sphere(stream);
    loop {
        let r = norm(x);
        if r <= inner * (1.0 + 1e-12) {
            return Ok(true);
        }
        if r >= escape_radius {
            return Ok(false);
        }
        let sigma = (ADAPTIVE_EPS * (r - inner)).max(floor);
        let g = stream.gaussian3_unchecked(sigma);
        for i in 0..3 {
            x[i] += g[i];
        }
    }
}

/// Circular cone with apex at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub axis: [f64; 3],
    pub half_angle: f64,
}

impl ConeSpec {
    /// `half_angle` in (0, π]; π is the whole space.
    pub fn new(axis: [f64; 3], half_angle: f64) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle <= PI) {
            return Err(Error::InvalidParameter(format!(
                "cone half-angle must lie in (0, pi], got {half_angle}"
            )));
        }
        let n = norm(axis);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter("cone axis must be nonzero".into()));
        }
        Ok(Self {
            axis: axis.map(|c| c / n),
            half_angle,
        })
    }

    pub fn around_x(half_angle: f64) -> Result<Self> {
        Self::new([1.0, 0.0, 0.0], half_angle)
    }

    pub fn is_full(&self) -> bool {
        self.half_angle >= PI
    }

    fn angle_of(&self, x: [f64; 3], r: f64) -> f64 {
        (dot(x, self.axis) / r).clamp(-1.0, 1.0).acos()
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        if self.is_full() {
            return true;
        }
        let r = norm(x);
        r == 0.0 || self.angle_of(x, r) < self.half_angle
    }

    /// Euclidean distance from an interior point to the cone's boundary.
    pub fn boundary_distance(&self, x: [f64; 3]) -> f64 {
        let r = norm(x);
        if self.is_full() {
            return r;
        }
        let gap = self.half_angle - self.angle_of(x, r);
        if gap <= 0.0 {
            0.0
        } else {
            r * gap.min(PI / 2.0).sin()
        }
    }
}

/// Adaptive Gaussian walker confined to a cone: advances from `x` until
/// `|x| >= radius` (true) or the cone is left (false).
pub(crate) fn cone_walk(cone: &ConeSpec, x: &mut [f64; 3], radius: f64, stream: &mut RandomStream) -> bool {
    loop {
        let r = norm(*x);
        if r >= radius {
            return true;
        }
        if !cone.contains(*x) {
            return false;
        }
        let sigma = ADAPTIVE_EPS * cone.boundary_distance(*x).max(ADAPTIVE_FLOOR * r);
        let g = stream.gaussian3_unchecked(sigma);
        for i in 0..3 {
            x[i] += g[i];
        }
    }
}

/// Starts on the axis at radius 1; true iff the walker stays in the cone
/// until first reaching radius `e^n`.
pub fn cone_survival_trial(cone: &ConeSpec, n: u32, stream: &mut RandomStream) -> Result<bool> {
    if n == 0 {
        return Ok(true);
    }
    let mut x = cone.axis;
    Ok(cone_walk(cone, &mut x, (n as f64).exp(), stream))
}

/// Shell ratio between consecutive radii.
pub const SHELL_RATIO: f64 = E;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, SeedSpec};
    use crate::stats::{binomial_sigma, linear_fit};

    fn stream(id: u64) -> RandomStream {
        derive_stream(SeedSpec::new(2024, id))
    }

    #[test]
    fn radius_one_takes_one_step() {
        let mut s = stream(0);
        let (w, hit) = run_until_radius(LatticeWalk::origin(), &mut s, 1.0, 10).unwrap();
        assert!(hit);
        assert_eq!(w.steps_taken, 1);
        assert_eq!(w.position.norm2(), 1);
    }

    #[test]
    fn radius_ten_always_reached() {
        for t in 0..10_000 {
            let mut s = stream(t);
            let (w, hit) = run_until_radius(LatticeWalk::origin(), &mut s, 10.0, 1_000_000).unwrap();
            assert!(hit);
            assert!(w.position.norm2() >= 100);
        }
    }

    #[test]
    fn cap_exhaustion_is_not_an_error() {
        let mut s = stream(1);
        let (w, hit) = run_until_radius(LatticeWalk::origin(), &mut s, 1000.0, 5).unwrap();
        assert!(!hit);
        assert_eq!(w.steps_taken, 5);
    }

    #[test]
    fn invalid_radius() {
        let mut s = stream(1);
        let w = LatticeWalk::at(Site::new(5, 0, 0));
        assert!(run_until_radius(w, &mut s, 3.0, 10).is_err());
        assert!(run_until_radius(w, &mut s, 10.0, 0).is_err());
    }

    // E|B_T|² = 3 sigma² E[T] by optional stopping; |B_T| ≈ 1 at sigma = 0.01.
    #[test]
    fn gaussian_mean_hitting_step() {
        let sigma = 0.01;
        let trials = 10_000;
        let mut total = 0u64;
        for t in 0..trials {
            let mut s = stream(10_000 + t);
            let w = GaussianWalk::new([0.0; 3], sigma).unwrap();
            let (w, hit) = run_until_radius(w, &mut s, 1.0, u64::MAX).unwrap();
            assert!(hit && w.radius() >= 1.0);
            total += w.steps_taken;
        }
        let mean = total as f64 / trials as f64;
        let expected = 1.0 / (3.0 * sigma * sigma);
        assert!((mean / expected - 1.0).abs() < 0.05, "mean {mean} vs {expected}");
    }

    #[test]
    fn lattice_coordinates_are_martingales() {
        let n_walks = 20_000;
        let steps = 100;
        let mut sum = [0i64; 3];
        for t in 0..n_walks {
            let mut s = stream(50_000 + t);
            let mut w = LatticeWalk::origin();
            for _ in 0..steps {
                w.step(&mut s);
            }
            for i in 0..3 {
                sum[i] += i64::from(w.position.0[i]);
            }
        }
        // per-coordinate variance after N steps is N/3
        let sd_mean = ((steps as f64 / 3.0) / n_walks as f64).sqrt();
        for c in sum {
            let m = c as f64 / n_walks as f64;
            assert!(m.abs() < 3.0 * sd_mean, "{sum:?}");
        }
    }

    #[test]
    fn gamblers_ruin_small() {
        for n in [2, 4, 10] {
            let trials = 200_000u64;
            let wins = (0..trials)
                .filter(|&t| gamblers_ruin_trial(1, n, &mut stream(1_000_000 * n as u64 + t)).unwrap())
                .count();
            let p = 1.0 / n as f64;
            let phat = wins as f64 / trials as f64;
            assert!((phat - p).abs() < 3.0 * binomial_sigma(p, trials), "n={n}: {phat}");
        }
        assert!(gamblers_ruin_trial(0, 3, &mut stream(0)).is_err());
        assert!(gamblers_ruin_trial(3, 3, &mut stream(0)).is_err());
    }

    #[test]
    fn ball_hitting_boundary_case() {
        for t in 0..100 {
            assert!(ball_hitting_trial(0.0, &mut stream(t), 5f64.exp()).unwrap());
        }
        assert!(ball_hitting_trial(-1.0, &mut stream(0), 200.0).is_err());
        assert!(ball_hitting_trial(1.0, &mut stream(0), 10.0).is_err());
    }

    #[test]
    fn ball_hitting_k1_small_sample() {
        let trials = 20_000u64;
        let hits = (0..trials)
            .filter(|&t| ball_hitting_trial(1.0, &mut stream(7_000_000 + t), 5f64.exp()).unwrap())
            .count();
        let p = hits as f64 / trials as f64;
        assert!((p - (-1f64).exp()).abs() < 0.015, "{p}");
    }

    #[test]
    fn cone_validation() {
        assert!(ConeSpec::around_x(0.0).is_err());
        assert!(ConeSpec::around_x(4.0).is_err());
        assert!(ConeSpec::new([0.0; 3], 1.0).is_err());
        assert!(ConeSpec::around_x(PI).unwrap().is_full());
        let c = ConeSpec::new([2.0, 0.0, 0.0], PI / 4.0).unwrap();
        assert_eq!(c.axis, [1.0, 0.0, 0.0]);
        assert!(c.contains([1.0, 0.5, 0.0]));
        assert!(!c.contains([1.0, 1.5, 0.0]));
        let d = ConeSpec::around_x(PI / 2.0).unwrap().boundary_distance([0.3, 5.0, 0.0]);
        assert!((d - 0.3).abs() < 1e-12);
    }

    #[test]
    fn full_cone_always_survives() {
        let cone = ConeSpec::around_x(PI).unwrap();
        for t in 0..200 {
            assert!(cone_survival_trial(&cone, 1, &mut stream(t)).unwrap());
        }
    }

    fn cone_alpha(half: f64, trials: u64, salt: u64) -> (f64, f64) {
        let cone = ConeSpec::around_x(half).unwrap();
        let ns = [1.0, 2.0, 3.0];
        let logs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let ok = (0..trials)
                    .filter(|&t| cone_survival_trial(&cone, n as u32, &mut stream(salt + 1_000_000 * n as u64 + t)).unwrap())
                    .count();
                (ok as f64 / trials as f64).ln()
            })
            .collect();
        let fit = linear_fit(&ns, &logs).unwrap();
        (-fit.slope, fit.r_squared)
    }

    #[test]
    fn cone_survival_is_exponential_and_monotone() {
        let (a_half, r2) = cone_alpha(PI / 2.0, 20_000, 90_000_000);
        assert!(r2 >= 0.95, "r2 {r2}");
        // the half-space exponent is 1 (x is harmonic of degree one)
        assert!((a_half - 1.0).abs() < 0.15, "alpha {a_half}");
        let (a_narrow, _) = cone_alpha(PI / 4.0, 20_000, 190_000_000);
        assert!(a_narrow > a_half, "{a_narrow} vs {a_half}");
    }

    #[test]
    fn shell_radii_increase() {
        let c = ShellConfig::new(32.0).unwrap();
        assert!(c.radius(1) > c.radius(0));
        assert!((c.radius(1) / c.radius(0) - SHELL_RATIO).abs() < 1e-12);
        assert!(ShellConfig::new(16.0).is_err());
        assert!(ShellConfig::with_minimum(16.0, 8.0).is_ok());
    }
}
