//! Pairs of lattice curves from the origin, grown one shell at a time.
//!
//! A [`CurvePair`] stores unscaled lattice coordinates together with the
//! current outer radius, which serves as the unit for every geometric
//! predicate (separation, truncation). Extending a pair attaches an
//! independent lattice walk to each endpoint until the walk first reaches
//! `e` times the outer radius.
//!
//! With a resolution cap set in the [`ShellConfig`], a pair whose outer
//! radius would exceed the cap is coarsened by `1/e` after the extension
//! (coordinates rounded, consecutive duplicates dropped). This keeps the
//! cost of every shell constant at the price of fixing the lattice
//! resolution at `cap` units per unit radius. Coarsened curves are
//! L∞-connected rather than nearest-neighbour paths, and distinct fine
//! sites deep inside may merge; non-intersection is always decided at the
//! resolution at which a segment was drawn.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Site, SiteSet};
use crate::rng::RandomStream;
use crate::walks::ShellConfig;

/// Ordered lattice sites from the origin to the current outer shell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<Site>,
    /// First index at or beyond each resolvable shell radius.
    pub crossing_log: Vec<Crossing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossing {
    pub shell: i32,
    pub index: usize,
}

impl Curve {
    pub fn endpoint(&self) -> Site {
        *self.points.last().expect("curve is never empty")
    }

    pub fn max_radius(&self) -> f64 {
        self.points.iter().map(|p| p.norm2()).max().map_or(0.0, |r2| (r2 as f64).sqrt())
    }

    /// First index with `|p| >= radius`, or the last index if none.
    pub fn first_index_beyond(&self, radius: f64) -> usize {
        let r2 = radius * radius;
        self.points
            .iter()
            .position(|p| p.norm2() as f64 >= r2)
            .unwrap_or(self.points.len() - 1)
    }

    fn sites_excluding_origin(&self) -> SiteSet {
        let mut set = SiteSet::with_capacity(self.points.len());
        for &p in &self.points {
            if !p.is_origin() {
                // coordinates of stored curves are always in range
                set.insert(p).expect("stored site in range");
            }
        }
        set
    }

    fn validate(&self, outer_radius: f64, strict_interior: bool) -> Result<()> {
        let pts = &self.points;
        if pts.first() != Some(&Site::ORIGIN) {
            return Err(Error::InvalidState("curve must start at the origin".into()));
        }
        for w in pts.windows(2) {
            let d = w[0].delta(w[1]);
            let linf = d.iter().map(|c| c.abs()).max().unwrap();
            if linf != 1 {
                return Err(Error::InvalidState(format!(
                    "curve is not lattice-connected between {:?} and {:?}",
                    w[0], w[1]
                )));
            }
        }
        for p in pts {
            p.key()?;
        }
        let end = self.endpoint();
        if (end.norm2() as f64) < outer_radius * outer_radius {
            return Err(Error::InvalidState(format!(
                "curve endpoint {end:?} does not reach radius {outer_radius}"
            )));
        }
        if strict_interior {
            let r2 = outer_radius * outer_radius;
            if pts[..pts.len() - 1].iter().any(|p| p.norm2() as f64 >= r2) {
                return Err(Error::InvalidState(
                    "curve leaves the outer ball before its endpoint".into(),
                ));
            }
        }
        Ok(())
    }
}

/// How to build the starting pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitialKind {
    /// Axis paths from the origin to `(±R₀, 0, 0)`.
    DiametricLines,
    /// Lattice geodesics to two sites on or beyond the base sphere, truncated
    /// at their first crossing of it.
    GivenEndpoints { a: Site, b: Site },
    /// Endpoints at angular distance `gap` (radians) about the +x axis. The
    /// curves leave the origin through `(0, ±1, 0)` so they stay disjoint;
    /// the lateral offset is at least one lattice unit, so gaps below
    /// `≈ 2/R₀` are realised at the lattice minimum.
    AngularGap { gap: f64 },
    Explicit { a: Vec<Site>, b: Vec<Site> },
}

/// Monotone nearest-neighbour path from `from` to `to`, staying close to the
/// straight segment.
fn lattice_geodesic(from: Site, to: Site) -> Vec<Site> {
    let d = from.delta(to);
    let len: i64 = d.iter().map(|c| i64::from(c.abs())).sum();
    let mut pts = Vec::with_capacity(len as usize + 1);
    let mut cur = from;
    let mut done = [0i64; 3];
    pts.push(cur);
    for s in 1..=len {
        // axis with the largest lag behind the ideal fraction s/len
        let axis = (0..3)
            .filter(|&i| done[i] < i64::from(d[i].abs()))
            .max_by(|&i, &j| {
                let lag = |k: usize| i64::from(d[k].abs()) * s - done[k] * len;
                lag(i).cmp(&lag(j)).then(j.cmp(&i))
            })
            .expect("remaining length is positive");
        done[axis] += 1;
        cur.0[axis] += d[axis].signum();
        pts.push(cur);
    }
    pts
}

fn truncate_at(points: &mut Vec<Site>, radius: f64) {
    let r2 = radius * radius;
    if let Some(i) = points.iter().position(|p| p.norm2() as f64 >= r2) {
        points.truncate(i + 1);
    }
}

/// Two curves from the origin, disjoint away from it while alive.
#[derive(Debug, Clone)]
pub struct CurvePair {
    pub a: Curve,
    pub b: Curve,
    pub shell: u32,
    pub config: ShellConfig,
    /// Current unit radius in lattice units.
    pub outer_radius: f64,
    pub alive: bool,
}

impl PartialEq for CurvePair {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a
            && self.b == other.b
            && self.shell == other.shell
            && self.config == other.config
            && self.outer_radius.to_bits() == other.outer_radius.to_bits()
            && self.alive == other.alive
    }
}

/// Builds the starting configuration on the base sphere.
pub fn initial_pair(kind: &InitialKind, config: ShellConfig) -> Result<CurvePair> {
    let r0 = config.base_radius;
    let reach = r0.ceil() as i32;
    let (a, b) = match kind {
        InitialKind::DiametricLines => (
            (0..=reach).map(|x| Site::new(x, 0, 0)).collect(),
            (0..=reach).map(|x| Site::new(-x, 0, 0)).collect(),
        ),
        InitialKind::GivenEndpoints { a, b } => {
            for w in [a, b] {
                if (w.norm2() as f64) < r0 * r0 {
                    return Err(Error::InvalidParameter(format!(
                        "endpoint {w:?} lies inside the base sphere"
                    )));
                }
            }
            let mut pa = lattice_geodesic(Site::ORIGIN, *a);
            let mut pb = lattice_geodesic(Site::ORIGIN, *b);
            truncate_at(&mut pa, r0);
            truncate_at(&mut pb, r0);
            (pa, pb)
        }
        InitialKind::AngularGap { gap } => {
            if !(*gap > 0.0 && *gap <= std::f64::consts::PI) {
                return Err(Error::InvalidParameter(format!(
                    "angular gap must lie in (0, pi], got {gap}"
                )));
            }
            let half = gap / 2.0;
            // overshoot the sphere slightly so truncation picks the first crossing
            let scale = r0 + 2.0;
            let x = (scale * half.cos()).round() as i32;
            let y = ((scale * half.sin()).round() as i32).max(1);
            let mut pa = vec![Site::ORIGIN];
            pa.extend(lattice_geodesic(Site::new(0, 1, 0), Site::new(x, y, 0)));
            let mut pb = vec![Site::ORIGIN];
            pb.extend(lattice_geodesic(Site::new(0, -1, 0), Site::new(x, -y, 0)));
            truncate_at(&mut pa, r0);
            truncate_at(&mut pb, r0);
            (pa, pb)
        }
        InitialKind::Explicit { a, b } => (a.clone(), b.clone()),
    };
    CurvePair::from_curves(a, b, config)
}

impl CurvePair {
    /// Validates two curves ending on the base sphere and checks that they
    /// only share the origin.
    pub fn from_curves(a: Vec<Site>, b: Vec<Site>, config: ShellConfig) -> Result<Self> {
        let mk = |points: Vec<Site>| {
            let last = points.len().saturating_sub(1);
            Curve {
                points,
                crossing_log: vec![Crossing { shell: 0, index: last }],
            }
        };
        let pair = CurvePair {
            a: mk(a),
            b: mk(b),
            shell: 0,
            config,
            outer_radius: config.base_radius,
            alive: true,
        };
        pair.a.validate(pair.outer_radius, true)?;
        pair.b.validate(pair.outer_radius, true)?;
        if !pair.sites_disjoint() {
            return Err(Error::InvalidState(
                "curves share a site other than the origin".into(),
            ));
        }
        Ok(pair)
    }

    /// Exact check that the curves share no site except the origin.
    pub fn sites_disjoint(&self) -> bool {
        self.a.sites_excluding_origin().is_disjoint(&self.b.sites_excluding_origin())
    }

    /// Radius of shell `j` in the current lattice frame.
    pub fn shell_radius(&self, j: i32) -> f64 {
        self.outer_radius * f64::from(j - self.shell as i32).exp()
    }

    /// Attaches an independent walk to each endpoint until it first reaches
    /// `e` times the outer radius; the pair dies if a new segment touches
    /// the other curve (including the other's new segment).
    pub fn extend_one_shell(&mut self, stream_a: &mut RandomStream, stream_b: &mut RandomStream) -> Result<()> {
        if !self.alive {
            return Err(Error::InvalidState("cannot extend a dead pair".into()));
        }
        let target = self.outer_radius * E;
        let target2 = target * target;
        let next_shell = self.shell as i32 + 1;

        let blocked = self.b.sites_excluding_origin();
        if !attach_walk(&mut self.a, &blocked, target2, stream_a)? {
            self.alive = false;
            return Ok(());
        }
        let blocked = self.a.sites_excluding_origin();
        if !attach_walk(&mut self.b, &blocked, target2, stream_b)? {
            self.alive = false;
            return Ok(());
        }
        for c in [&mut self.a, &mut self.b] {
            let index = c.points.len() - 1;
            c.crossing_log.push(Crossing { shell: next_shell, index });
        }
        self.shell += 1;
        match self.config.resolution_cap {
            Some(cap) if target > cap * (1.0 + 1e-9) => {
                coarsen(&mut self.a, E, self.outer_radius, next_shell);
                coarsen(&mut self.b, E, self.outer_radius, next_shell);
            }
            _ => self.outer_radius = target,
        }
        Ok(())
    }

    /// Suffixes of both curves from their first visit to rescaled radius
    /// `e^{-k}`.
    pub fn pi_k(&self, k: u32) -> Result<PairTail> {
        PairTail {
            a: self.a.points.clone(),
            b: self.b.points.clone(),
            outer_radius: self.outer_radius,
        }
        .pi_k(k)
    }

    /// Largest `k` with rescaled radius `e^{-k}` at least two lattice units.
    pub fn max_resolvable_depth(&self) -> u32 {
        max_depth(self.outer_radius)
    }

    pub fn to_record(&self) -> CurvePairRecord {
        CurvePairRecord {
            format_version: PAIR_FORMAT_VERSION,
            a: self.a.clone(),
            b: self.b.clone(),
            shell: self.shell,
            config: self.config,
            outer_radius: self.outer_radius,
            alive: self.alive,
        }
    }

    pub fn from_record(rec: CurvePairRecord) -> Result<Self> {
        if rec.format_version != PAIR_FORMAT_VERSION {
            return Err(Error::Decode(format!(
                "unsupported curve-pair format version {}",
                rec.format_version
            )));
        }
        let pair = CurvePair {
            a: rec.a,
            b: rec.b,
            shell: rec.shell,
            config: rec.config,
            outer_radius: rec.outer_radius,
            alive: rec.alive,
        };
        for c in [&pair.a, &pair.b] {
            if c.points.is_empty() {
                return Err(Error::Decode("empty curve".into()));
            }
            if c.crossing_log.iter().any(|x| x.index >= c.points.len())
                || c.crossing_log.windows(2).any(|w| w[0].index >= w[1].index || w[0].shell >= w[1].shell)
            {
                return Err(Error::Decode("inconsistent crossing log".into()));
            }
        }
        Ok(pair)
    }
}

fn max_depth(outer_radius: f64) -> u32 {
    if outer_radius < 2.0 {
        0
    } else {
        (outer_radius / 2.0).ln().floor() as u32
    }
}

/// Walks from the curve's endpoint to radius² `target2`, appending sites.
/// Returns false at the first site found in `blocked`.
fn attach_walk(curve: &mut Curve, blocked: &SiteSet, target2: f64, stream: &mut RandomStream) -> Result<bool> {
    let mut p = curve.endpoint();
    loop {
        p = p.step(stream.uniform_step6());
        p.key()?;
        curve.points.push(p);
        if !p.is_origin() && blocked.contains(p) {
            return Ok(false);
        }
        if p.norm2() as f64 >= target2 {
            return Ok(true);
        }
    }
}

/// Rescales a curve by `1/factor` onto the lattice.
fn coarsen(curve: &mut Curve, factor: f64, outer_radius: f64, current_shell: i32) {
    let mut map = Vec::with_capacity(curve.points.len());
    let mut out: Vec<Site> = Vec::with_capacity(curve.points.len() / 4 + 2);
    for p in &curve.points {
        let q = Site(p.0.map(|c| (f64::from(c) / factor).round() as i32));
        if out.last() != Some(&q) {
            out.push(q);
        }
        map.push(out.len() - 1);
    }
    let mut log = Vec::with_capacity(curve.crossing_log.len());
    for c in &curve.crossing_log {
        // radius of this shell after rescaling
        let r = outer_radius * f64::from(c.shell - current_shell).exp();
        let idx = map[c.index];
        let increasing = log.last().is_none_or(|l: &Crossing| l.index < idx);
        if r >= 1.0 && increasing {
            log.push(Crossing { shell: c.shell, index: idx });
        }
    }
    curve.points = out;
    curve.crossing_log = log;
}

/// Suffixes of a pair's curves.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTail {
    pub a: Vec<Site>,
    pub b: Vec<Site>,
    pub outer_radius: f64,
}

impl PairTail {
    pub fn pi_k(&self, k: u32) -> Result<PairTail> {
        let radius = self.outer_radius * (-f64::from(k)).exp();
        if radius < 2.0 {
            return Err(Error::Resolution { k, radius });
        }
        let cut = |pts: &[Site]| {
            let r2 = radius * radius;
            let i = pts
                .iter()
                .position(|p| p.norm2() as f64 >= r2)
                .unwrap_or(pts.len() - 1);
            pts[i..].to_vec()
        };
        Ok(PairTail {
            a: cut(&self.a),
            b: cut(&self.b),
            outer_radius: self.outer_radius,
        })
    }

    /// Angle between the two endpoints as seen from the origin.
    pub fn endpoint_angle(&self) -> f64 {
        angle_between(*self.a.last().unwrap(), *self.b.last().unwrap())
    }

    /// Fraction of tail sites on their own side: `x > 0` for curve a,
    /// `x < 0` for curve b.
    pub fn halfspace_fraction(&self) -> f64 {
        let own = self.a.iter().filter(|p| p.x() > 0).count() + self.b.iter().filter(|p| p.x() < 0).count();
        own as f64 / (self.a.len() + self.b.len()) as f64
    }
}

fn angle_between(u: Site, v: Site) -> f64 {
    let dot: i64 = (0..3).map(|i| i64::from(u.0[i]) * i64::from(v.0[i])).sum();
    let denom = u.norm() * v.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (dot as f64 / denom).clamp(-1.0, 1.0).acos()
}

pub fn pi_k(pair: &CurvePair, k: u32) -> Result<PairTail> {
    pair.pi_k(k)
}

/// True iff the depth-`k` tails are identical site sequences.
pub fn eq_k(p: &CurvePair, q: &CurvePair, k: u32) -> Result<bool> {
    let (tp, tq) = (p.pi_k(k)?, q.pi_k(k)?);
    Ok(tp.a == tq.a && tp.b == tq.b)
}

const SEP_INNER: f64 = -0.5;
const SEP_MARGIN_PATH: f64 = -1.0 / 8.0;
const SEP_MARGIN_ENTRY: f64 = -1.0 / 16.0;

/// Checks one curve against the separation conditions in direction `sign`.
fn separated(points: &[Site], unit: f64, sign: f64) -> bool {
    let inner = SEP_INNER.exp();
    let path_margin = SEP_MARGIN_PATH.exp();
    let entry_margin = SEP_MARGIN_ENTRY.exp();
    let mut running_max = 0.0f64;
    for p in points {
        let r = p.norm() / unit;
        let record = r > running_max;
        running_max = running_max.max(r);
        if running_max < inner {
            continue;
        }
        let x = sign * f64::from(p.x()) / unit;
        let rho = running_max.min(1.0);
        if x < path_margin * rho {
            return false;
        }
        if record && r <= 1.0 && x < entry_margin * r {
            return false;
        }
    }
    true
}

/// Separation event: over the annulus `[e^{-1/2}, 1]` (in units of the outer
/// radius), curve a stays in `{x ≥ e^{-1/8} ρ}` and enters each radius `r`
/// inside `{x ≥ e^{-1/16} r}`; curve b likewise with `x ↦ −x`. `ρ` is the
/// running maximum radius clamped to the annulus.
pub fn sep_test(pair: &CurvePair) -> Result<bool> {
    let unit = pair.outer_radius;
    for c in [&pair.a, &pair.b] {
        let start = c.points[0].norm() / unit;
        // coarsening may pull the endpoint inside by up to half a diagonal
        let reach = c.max_radius() + 1.0;
        if start > SEP_INNER.exp() || reach < unit {
            return Err(Error::InvalidState(
                "pair does not span the separation annulus".into(),
            ));
        }
    }
    Ok(separated(&pair.a.points, unit, 1.0) && separated(&pair.b.points, unit, -1.0))
}

pub const PAIR_FORMAT_VERSION: u32 = 1;
const PAIR_MAGIC: &[u8; 5] = b"XPAIR";

/// JSON-friendly form of a [`CurvePair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvePairRecord {
    pub format_version: u32,
    pub a: Curve,
    pub b: Curve,
    pub shell: u32,
    pub config: ShellConfig,
    pub outer_radius: f64,
    pub alive: bool,
}

fn delta_code(d: [i32; 3]) -> Option<u8> {
    if d.iter().any(|c| c.abs() > 1) || d == [0, 0, 0] {
        return None;
    }
    Some(((d[0] + 1) * 9 + (d[1] + 1) * 3 + (d[2] + 1)) as u8)
}

fn code_delta(code: u8) -> Option<[i32; 3]> {
    if code >= 27 || code == 13 {
        return None;
    }
    let c = i32::from(code);
    Some([c / 9 - 1, (c / 3) % 3 - 1, c % 3 - 1])
}

/// Compact binary record: magic, version, header, then per curve a
/// length-prefixed run of one-byte step codes and the crossing log.
/// Integers are little-endian.
pub fn encode_pair(pair: &CurvePair) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(PAIR_MAGIC);
    out.extend_from_slice(&PAIR_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&pair.shell.to_le_bytes());
    out.extend_from_slice(&pair.outer_radius.to_le_bytes());
    out.extend_from_slice(&pair.config.base_radius.to_le_bytes());
    out.extend_from_slice(&pair.config.min_base_radius.to_le_bytes());
    out.extend_from_slice(&pair.config.resolution_cap.unwrap_or(f64::NAN).to_le_bytes());
    out.push(u8::from(pair.alive));
    for c in [&pair.a, &pair.b] {
        let steps = c.points.len() as u32 - 1;
        out.extend_from_slice(&steps.to_le_bytes());
        for w in c.points.windows(2) {
            out.push(delta_code(w[0].delta(w[1])).expect("validated curve steps"));
        }
        out.extend_from_slice(&(c.crossing_log.len() as u32).to_le_bytes());
        for x in &c.crossing_log {
            out.extend_from_slice(&x.shell.to_le_bytes());
            out.extend_from_slice(&(x.index as u32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Decode(format!("truncated record at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_pair(bytes: &[u8]) -> Result<CurvePair> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(PAIR_MAGIC.len())? != PAIR_MAGIC {
        return Err(Error::Decode("bad magic".into()));
    }
    let format_version = r.u32()?;
    let shell = r.u32()?;
    let outer_radius = r.f64()?;
    let base_radius = r.f64()?;
    let min_base_radius = r.f64()?;
    let cap = r.f64()?;
    let alive = match r.take(1)?[0] {
        0 => false,
        1 => true,
        b => return Err(Error::Decode(format!("bad alive flag {b}"))),
    };
    let mut curves = Vec::with_capacity(2);
    for _ in 0..2 {
        let steps = r.u32()? as usize;
        let mut points = Vec::with_capacity(steps + 1);
        let mut cur = Site::ORIGIN;
        points.push(cur);
        for &code in r.take(steps)? {
            let d = code_delta(code).ok_or_else(|| Error::Decode(format!("bad step code {code}")))?;
            cur = Site([cur.0[0] + d[0], cur.0[1] + d[1], cur.0[2] + d[2]]);
            points.push(cur);
        }
        let n_log = r.u32()? as usize;
        let mut crossing_log = Vec::with_capacity(n_log.min(1024));
        for _ in 0..n_log {
            let shell = r.i32()?;
            let index = r.u32()? as usize;
            crossing_log.push(Crossing { shell, index });
        }
        curves.push(Curve { points, crossing_log });
    }
    if r.pos != bytes.len() {
        return Err(Error::Decode("trailing bytes after record".into()));
    }
    let b = curves.pop().unwrap();
    let a = curves.pop().unwrap();
    CurvePair::from_record(CurvePairRecord {
        format_version,
        a,
        b,
        shell,
        config: ShellConfig {
            base_radius,
            min_base_radius,
            resolution_cap: if cap.is_nan() { None } else { Some(cap) },
        },
        outer_radius,
        alive,
    })
}
