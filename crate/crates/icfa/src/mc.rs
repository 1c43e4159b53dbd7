//! Deterministic Monte-Carlo streams.
//!
//! Noise draws are keyed by `(seed, user, sample)`, so a given configuration
//! always sees the same randomness regardless of evaluation order or worker
//! count. Draws are standard circularly-symmetric complex Gaussians scaled by
//! sigma at the point of use; with a fixed seed, raising the noise variance
//! therefore literally rescales the same draws, which is what makes the
//! common-random-numbers degradation comparisons meaningful.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{c64, CVector};

/// Monte-Carlo sampling configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    /// Number of noise draws per expectation.
    pub samples: usize,
    /// Base seed; all per-(user, sample) streams derive from it.
    pub seed: u64,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        assert!(samples >= 1, "samples must be >= 1");
        McConfig { samples, seed }
    }
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 1000,
            seed: 0,
        }
    }
}

/// splitmix64 finalizer; good avalanche for key derivation.
#[inline]
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed; used for multistart and per-sweep refreshes.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(seed ^ mix(tag))
}

fn stream_rng(seed: u64, user: usize, sample: usize) -> ChaCha8Rng {
    let a = mix(seed);
    let b = mix(a ^ (user as u64).wrapping_mul(0xd1b5_4a32_d192_ed03));
    let c = mix(b ^ (sample as u64).wrapping_mul(0x8cb9_2ba7_2f3d_8dd7));
    let d = mix(c);
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&b.to_le_bytes());
    key[8..16].copy_from_slice(&c.to_le_bytes());
    key[16..24].copy_from_slice(&d.to_le_bytes());
    key[24..32].copy_from_slice(&mix(d).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[inline]
fn unit_open(r: &mut impl RngCore) -> f64 {
    // (0, 1]: avoids ln(0) in the polar transform below.
    1.0 - (r.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One standard complex normal CN(0, 1) via the polar transform.
#[inline]
fn standard_complex(r: &mut impl RngCore) -> num_complex::Complex64 {
    let u1 = unit_open(r);
    let u2 = (r.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let radius = (-u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    c64(radius * theta.cos(), radius * theta.sin())
}

/// The standard CN(0, I) draw for `(seed, user, sample)`, of length `dim`.
pub fn standard_noise(seed: u64, user: usize, sample: usize, dim: usize) -> CVector {
    let mut rng = stream_rng(seed, user, sample);
    CVector::from_iterator(dim, (0..dim).map(|_| standard_complex(&mut rng)))
}

/// Standard complex Gaussian draws from an arbitrary tagged stream; used for
/// precoder initialization and surrogate-interference sampling.
pub fn tagged_gaussians(seed: u64, tag: u64, count: usize) -> Vec<num_complex::Complex64> {
    let mut rng = stream_rng(derive_seed(seed, tag), usize::MAX, 0);
    (0..count).map(|_| standard_complex(&mut rng)).collect()
}
