//! Counter-based random numbers.
//!
//! Every variate is a pure function of `(seed, replica, stream, counter)`, so
//! replicas can be generated in any order, on any worker, and a Brownian path
//! can be refined at arbitrary dyadic times without consuming state.

use std::f64::consts::TAU;

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with ten rounds.
#[inline]
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent randomness families drawn for one replica.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    /// Brownian driving increments and bridge midpoints.
    Driving = 0,
    /// Brownian walkers for capacity and harmonic measure.
    Walkers = 1,
    /// Anything else a caller needs (shuffles, resampling).
    Aux = 2,
}

/// Philox key derived from `(seed, replica, stream)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    key: [u32; 2],
}

impl StreamKey {
    pub fn new(seed: u64, replica: u64, stream: Stream) -> Self {
        let h = splitmix64(splitmix64(splitmix64(seed) ^ replica) ^ (stream as u64));
        Self {
            key: [h as u32, (h >> 32) as u32],
        }
    }

    #[inline]
    pub fn block(&self, a: u64, b: u64) -> [u32; 4] {
        philox4x32([a as u32, (a >> 32) as u32, b as u32, (b >> 32) as u32], self.key)
    }

    /// Standard normal variate addressed by a 128-bit counter.
    #[inline]
    pub fn normal(&self, a: u64, b: u64) -> f64 {
        let x = self.block(a, b);
        let (u1, u2) = unit_pair(x);
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    /// Uniform variate in `[0, 1)` addressed by a 128-bit counter.
    #[inline]
    pub fn uniform(&self, a: u64, b: u64) -> f64 {
        let x = self.block(a, b);
        let w = ((x[1] as u64) << 32) | x[0] as u64;
        (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// A sequential generator over counters `(lane, 0), (lane, 1), ...`.
    pub fn sequence(&self, lane: u64) -> Philox {
        Philox {
            key: *self,
            lane,
            index: 0,
        }
    }
}

/// `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)`.
#[inline]
fn unit_pair(x: [u32; 4]) -> (f64, f64) {
    let w1 = ((x[1] as u64) << 32) | x[0] as u64;
    let w2 = ((x[3] as u64) << 32) | x[2] as u64;
    let scale = 1.0 / (1u64 << 53) as f64;
    (((w1 >> 11) + 1) as f64 * scale, (w2 >> 11) as f64 * scale)
}

/// Sequential view of one counter lane.
#[derive(Clone, Debug)]
pub struct Philox {
    key: StreamKey,
    lane: u64,
    index: u64,
}

impl Philox {
    pub fn uniform(&mut self) -> f64 {
        let u = self.key.uniform(self.lane, self.index);
        self.index += 1;
        u
    }

    // One block per variate: pairing sin and cos lets the optimizer pick
    // `sincos` at some call sites only, which breaks bit-reproducibility.
    pub fn normal(&mut self) -> f64 {
        let z = self.key.normal(self.lane, self.index);
        self.index += 1;
        z
    }

    /// Two independent normals from one block. Only use from a single call
    /// site per stream if bit-reproducibility matters.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let (u1, u2) = unit_pair(self.key.block(self.lane, self.index));
        self.index += 1;
        let r = (-2.0 * u1.ln()).sqrt();
        let th = TAU * u2;
        (r * th.cos(), r * th.sin())
    }
}
