//! Deterministic random streams.
//!
//! Every seeded quantity in this crate is drawn from a SplitMix64 stream so
//! that corpora and embeddings can be regenerated bit-for-bit by any
//! implementation that follows the recipe below.
//!
//! * Id hashing: 64-bit FNV-1a over the UTF-8 bytes of the id
//!   (offset basis `0xcbf29ce484222325`, prime `0x100000001b3`).
//! * Stream key for `(seed, id)`: `mix(seed ^ mix(fnv1a(id)))`, where `mix` is
//!   the SplitMix64 finalizer.
//! * SplitMix64 step: `state += 0x9e3779b97f4a7c15`, output `mix(state)`;
//!   `mix(z)`: `z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
//!   z = (z ^ (z >> 27)) * 0x94d049bb133111eb; z ^ (z >> 31)` (wrapping).
//! * Uniform `[0, 1)`: `(next_u64() >> 11) * 2^-53`.
//! * Standard normal: Box-Muller on two uniforms `u1, u2`,
//!   `sqrt(-2 ln(1 - u1)) * cos(2π u2)`; one normal per pair of draws.

use rand::RngCore;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream keyed by a seed and a string id.
    pub fn keyed(seed: u64, id: &str) -> Self {
        Self::new(mix(seed ^ mix(fnv1a(id.as_bytes()))))
    }

    #[inline]
    pub fn next(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

impl RngCore for SplitMix64 {
    fn next_u32(&mut self) -> u32 {
        (self.next() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        rand_core_fill(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        rand_core_fill(self, dest);
        Ok(())
    }
}

fn rand_core_fill(rng: &mut SplitMix64, dest: &mut [u8]) {
    for chunk in dest.chunks_mut(8) {
        let bytes = rng.next().to_le_bytes();
        chunk.copy_from_slice(&bytes[..chunk.len()]);
    }
}
