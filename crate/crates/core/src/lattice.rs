//! Integer lattice sites and the visited-site index.

use std::collections::HashSet;
use std::hash::{BuildHasherDefault, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates must satisfy |c| < 2^20 to be packed into a key.
pub const COORD_LIMIT: i32 = 1 << 20;

/// The six unit steps of Z³, indexed by the output of `uniform_step6`.
pub const DIRECTIONS: [[i32; 3]; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub [i32; 3]);

impl Site {
    pub const ORIGIN: Site = Site([0, 0, 0]);

    pub fn new(x: i32, y: i32, z: i32) -> Self {
        Site([x, y, z])
    }

    #[inline]
    pub fn x(self) -> i32 {
        self.0[0]
    }

    #[inline]
    pub fn step(self, dir: u8) -> Site {
        let d = DIRECTIONS[dir as usize];
        Site([self.0[0] + d[0], self.0[1] + d[1], self.0[2] + d[2]])
    }

    #[inline]
    pub fn norm2(self) -> i64 {
        self.0.iter().map(|&c| i64::from(c) * i64::from(c)).sum()
    }

    #[inline]
    pub fn norm(self) -> f64 {
        (self.norm2() as f64).sqrt()
    }

    pub fn l1(self) -> i64 {
        self.0.iter().map(|&c| i64::from(c).abs()).sum()
    }

    pub fn is_origin(self) -> bool {
        self == Site::ORIGIN
    }

    pub fn delta(self, other: Site) -> [i32; 3] {
        [
            other.0[0] - self.0[0],
            other.0[1] - self.0[1],
            other.0[2] - self.0[2],
        ]
    }

    /// Packs into 63 bits, 21 per coordinate, offset by 2^20.
    #[inline]
    pub fn key(self) -> Result<u64> {
        let [x, y, z] = self.0;
        if x.abs() >= COORD_LIMIT || y.abs() >= COORD_LIMIT || z.abs() >= COORD_LIMIT {
            return Err(Error::CoordinateOverflow(self.0));
        }
        Ok(Self::key_unchecked(self))
    }

    #[inline]
    fn key_unchecked(self) -> u64 {
        let off = |c: i32| (c + COORD_LIMIT) as u64;
        (off(self.0[0]) << 42) | (off(self.0[1]) << 21) | off(self.0[2])
    }

    pub fn from_key(key: u64) -> Site {
        let mask = (1u64 << 21) - 1;
        let un = |v: u64| (v & mask) as i32 - COORD_LIMIT;
        Site([un(key >> 42), un(key >> 21), un(key)])
    }
}

impl From<[i32; 3]> for Site {
    fn from(c: [i32; 3]) -> Self {
        Site(c)
    }
}

/// Hasher for packed site keys: one multiply-xorshift round.
#[derive(Default, Clone, Copy)]
pub struct SiteHasher(u64);

impl Hasher for SiteHasher {
    #[inline]
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(8) ^ u64::from(b)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
    }

    #[inline]
    fn write_u64(&mut self, k: u64) {
        let mut h = k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        h ^= h >> 29;
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        self.0 = h ^ (h >> 32);
    }
}

/// Open-addressing set of visited lattice sites.
#[derive(Debug, Clone, Default)]
pub struct SiteSet {
    inner: HashSet<u64, BuildHasherDefault<SiteHasher>>,
}

impl SiteSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            inner: HashSet::with_capacity_and_hasher(n, Default::default()),
        }
    }

    /// Returns whether the site was newly inserted.
    #[inline]
    pub fn insert(&mut self, site: Site) -> Result<bool> {
        Ok(self.inner.insert(site.key()?))
    }

    #[inline]
    pub fn contains(&self, site: Site) -> bool {
        match site.key() {
            Ok(k) => self.inner.contains(&k),
            Err(_) => false,
        }
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn clear(&mut self) {
        self.inner.clear();
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.inner.iter().map(|&k| Site::from_key(k))
    }

    pub fn is_disjoint(&self, other: &SiteSet) -> bool {
        self.inner.is_disjoint(&other.inner)
    }
}
