//! Counter-based random streams.
//!
//! Every stream is Philox4x32-10 keyed by the master seed, with the stream id
//! occupying the upper half of the 128-bit counter. A stream is therefore a
//! pure function of `(master_seed, stream_id)`: no jump-ahead, no shared state,
//! and any number of streams can be consumed concurrently in any order.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32 block with 10 rounds.
#[inline]
pub fn philox4x32_10(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Identity of one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }
}

/// Builds stream ids from structured coordinates (experiment tag, replicate,
/// shell, particle slot, ...). Folding uses the splitmix64 finalizer, so ids
/// for distinct coordinate tuples collide with probability ~2⁻⁶⁴.
#[derive(Debug, Clone, Copy)]
pub struct StreamId(u64);

impl StreamId {
    pub const fn tag(tag: u64) -> Self {
        StreamId(tag)
    }

    pub fn with(self, coord: u64) -> Self {
        StreamId(splitmix64(self.0 ^ splitmix64(coord.wrapping_add(0x632B_E59B_D9B4_E019))))
    }

    pub fn id(self) -> u64 {
        self.0
    }

    pub fn seed(self, master_seed: u64) -> SeedSpec {
        SeedSpec::new(master_seed, self.0)
    }
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic stream of uniform 64-bit words.
#[derive(Debug, Clone)]
pub struct RandomStream {
    key: [u32; 2],
    stream: u64,
    block: u64,
    buf: [u64; 2],
    buf_pos: usize,
    // reservoir for 3-bit direction draws
    bits: u64,
    nbits: u32,
}

/// Returns the stream for `seed`. Equal seeds give identical sequences.
pub fn derive_stream(seed: SeedSpec) -> RandomStream {
    RandomStream {
        key: [seed.master_seed as u32, (seed.master_seed >> 32) as u32],
        stream: seed.stream_id,
        block: 0,
        buf: [0; 2],
        buf_pos: 2,
        bits: 0,
        nbits: 0,
    }
}

impl RandomStream {
    #[inline]
    fn refill(&mut self) {
        let ctr = [
            self.block as u32,
            (self.block >> 32) as u32,
            self.stream as u32,
            (self.stream >> 32) as u32,
        ];
        let out = philox4x32_10(ctr, self.key);
        self.buf = [
            u64::from(out[0]) | (u64::from(out[1]) << 32),
            u64::from(out[2]) | (u64::from(out[3]) << 32),
        ];
        self.buf_pos = 0;
        self.block = self.block.wrapping_add(1);
    }

    #[inline]
    pub fn next_word(&mut self) -> u64 {
        if self.buf_pos == 2 {
            self.refill();
        }
        let w = self.buf[self.buf_pos];
        self.buf_pos += 1;
        w
    }

    /// Uniform integer in `0..6`: 3-bit chunks with rejection of 6 and 7.
    /// Each word yields 21 chunks; on average 4/3 chunks per draw.
    #[inline]
    pub fn uniform_step6(&mut self) -> u8 {
        loop {
            if self.nbits < 3 {
                self.bits = self.next_word();
                self.nbits = 63;
            }
            let v = (self.bits & 7) as u8;
            self.bits >>= 3;
            self.nbits -= 3;
            if v < 6 {
                return v;
            }
        }
    }

    /// Uniform real in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn uniform_f64(&mut self) -> f64 {
        (self.next_word() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` (Lemire's widening multiply with rejection).
    pub fn uniform_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "uniform_index on an empty range");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_word()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    #[inline]
    pub(crate) fn normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    /// Three independent N(0, sigma²) components.
    pub fn gaussian3(&mut self, sigma: f64) -> Result<[f64; 3]> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(self.gaussian3_unchecked(sigma))
    }

    #[inline]
    pub(crate) fn gaussian3_unchecked(&mut self, sigma: f64) -> [f64; 3] {
        [
            sigma * self.normal(),
            sigma * self.normal(),
            sigma * self.normal(),
        ]
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.next_word() as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let w = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}

/// Free-function form of [`RandomStream::uniform_step6`].
pub fn uniform_step6(stream: &mut RandomStream) -> u8 {
    stream.uniform_step6()
}

/// Free-function form of [`RandomStream::gaussian3`].
pub fn gaussian3(stream: &mut RandomStream, sigma: f64) -> Result<[f64; 3]> {
    stream.gaussian3(sigma)
}
