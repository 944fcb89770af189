//! Counter-based random streams.
//!
//! Every random vector in the crate is drawn from a stream keyed by
//! `(master seed, domain, sample index, vector index)`, so results do not
//! depend on how tasks are scheduled across workers.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;

/// Independent purposes a stream can be drawn for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Probe = 0x7072_6f62_6500_0001,
    Theta = 0x7468_6574_6100_0002,
    Iterate = 0x6974_6572_6100_0003,
    Noise = 0x6e6f_6973_6500_0004,
    Test = 0x7465_7374_0000_0005,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic stream for one `(seed, domain, j, i)` key.
pub struct Stream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64, domain: Domain, j: u64, i: u64) -> Self {
        let mut state = seed ^ (domain as u64);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        // j occupies the high half, i the low half of the 64-bit stream id.
        rng.set_stream((j << 32) | (i & 0xffff_ffff));
        Self { rng, spare: None }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the Box–Muller transform.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = math::sqrt(-2.0 * math::ln(u1));
        let angle = 2.0 * PI * u2;
        self.spare = Some(r * math::sin(angle));
        r * math::cos(angle)
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}

/// Convenience: a standard normal vector for key `(seed, domain, j, i)`.
pub fn normal_vector(seed: u64, domain: Domain, j: u64, i: u64, n: usize) -> Vec<f64> {
    Stream::new(seed, domain, j, i).normal_vec(n)
}
