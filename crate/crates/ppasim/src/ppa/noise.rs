//! Analogue noise model of the emulated array.
//!
//! Arithmetic on analogue registers is not exact on the physical device; the
//! emulator models this as additive i.i.d. Gaussian noise with two knobs:
//! `sigma_read` applied once when an image is loaded, and `sigma_op` applied
//! on every analogue arithmetic operation. Both default values were
//! calibrated so that binary conv-activation agreement between the noisy and
//! exact paths lands around 0.95.
//!
//! The generator is a seeded ChaCha stream with a hand-rolled Box–Muller
//! transform, so a fixed seed plus a fixed operation sequence reproduces the
//! exact same noise realization on any platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default std-dev of the per-load read noise.
pub const DEFAULT_SIGMA_READ: f64 = 1.0;
/// Default std-dev of the per-operation arithmetic noise.
pub const DEFAULT_SIGMA_OP: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct NoiseModel {
    sigma_read: f64,
    sigma_op: f64,
    seed: u64,
    rng: ChaCha8Rng,
}

impl NoiseModel {
    /// Seeded noise model. Negative sigmas are invalid and clamped to zero.
    pub fn new(sigma_read: f64, sigma_op: f64, seed: u64) -> Self {
        Self {
            sigma_read: sigma_read.max(0.0),
            sigma_op: sigma_op.max(0.0),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Exact-arithmetic model: both sigmas zero. Draws nothing from the
    /// stream, so noisy and noise-free call sequences stay comparable.
    pub fn noiseless() -> Self {
        Self::new(0.0, 0.0, 0)
    }

    pub fn with_defaults(seed: u64) -> Self {
        Self::new(DEFAULT_SIGMA_READ, DEFAULT_SIGMA_OP, seed)
    }

    pub fn sigma_read(&self) -> f64 {
        self.sigma_read
    }

    pub fn sigma_op(&self) -> f64 {
        self.sigma_op
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Rewind the generator to its initial state.
    pub fn reset(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
    }

    /// One read-noise sample. Zero (and no stream advance) when sigma_read is 0.
    #[inline]
    pub(crate) fn read_sample(&mut self) -> f32 {
        if self.sigma_read == 0.0 {
            0.0
        } else {
            (gaussian(&mut self.rng) * self.sigma_read) as f32
        }
    }

    /// One op-noise sample. Zero (and no stream advance) when sigma_op is 0.
    #[inline]
    pub(crate) fn op_sample(&mut self) -> f32 {
        if self.sigma_op == 0.0 {
            0.0
        } else {
            (gaussian(&mut self.rng) * self.sigma_op) as f32
        }
    }
}

/// Standard normal via Box–Muller on two 53-bit uniforms.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = uniform_open01(rng);
    let u2 = uniform_open01(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform draw in the open interval (0, 1); never returns 0 so ln() is safe.
#[inline]
fn uniform_open01(rng: &mut ChaCha8Rng) -> f64 {
    (((rng.next_u64() >> 11) + 1) as f64) / ((1u64 << 53) as f64 + 1.0)
}
