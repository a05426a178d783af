//! Client-side differential privacy for parameter deltas.
//!
//! A delta is first scaled so its L2 norm is at most the clip bound `C`, then
//! i.i.d. Gaussian noise with the classic Gaussian-mechanism scale
//!
//! ```text
//! sigma = C * sqrt(2 * ln(1.25 / delta)) / epsilon
//! ```
//!
//! is added to every coordinate, intercept included. Each call uses one
//! `(epsilon, delta)` budget; there is no accounting across rounds.
//!
//! # Sampler
//!
//! Normal draws come from [`GaussianSampler`]: the basic (trigonometric) Box-Muller
//! transform over a ChaCha20 stream (`rand_chacha::ChaCha20Rng::seed_from_u64`).
//! Each pair of 53-bit uniforms `(u1, u2)`, with `u1` in `(0, 1]` and `u2` in
//! `[0, 1)`, yields `r cos(2 pi u2)` then `r sin(2 pi u2)` where
//! `r = sqrt(-2 ln u1)`. The sequence is bit-reproducible for a given seed.

use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::model::DeltaVector;

/// Denominator stabilizer in the clipping factor `C / (norm + 1e-6)`.
pub const CLIP_STABILIZER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacySpec {
    pub epsilon: f64,
    pub delta: f64,
    pub clip_bound: f64,
    pub enabled: bool,
}

impl Default for PrivacySpec {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            delta: 1e-5,
            clip_bound: 1.0,
            enabled: true,
        }
    }
}

impl PrivacySpec {
    pub fn disabled(clip_bound: f64) -> Self {
        Self {
            enabled: false,
            clip_bound,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_bound.is_finite() && self.clip_bound > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "clip bound {} must be positive",
                self.clip_bound
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta {} must lie in (0, 1)",
                self.delta
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon {} must be finite and non-negative",
                self.epsilon
            )));
        }
        // Noise is never silently skipped: a zero budget with DP on is an error.
        if self.enabled && self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig(
                "epsilon must be positive when privacy is enabled".into(),
            ));
        }
        Ok(())
    }
}

/// What [`privatize`] actually did to one delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseReport {
    pub sigma: f64,
    pub pre_clip_norm: f64,
    pub clipped: bool,
}

/// Scales `d` by `min(1, C / (||d|| + 1e-6))`.
pub fn clip_delta(d: &DeltaVector, clip_bound: f64) -> Result<DeltaVector> {
    Ok(clip_with_norm(d, clip_bound)?.0)
}

fn clip_with_norm(d: &DeltaVector, clip_bound: f64) -> Result<(DeltaVector, f64, bool)> {
    if !(clip_bound.is_finite() && clip_bound > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "clip bound {clip_bound} must be positive"
        )));
    }
    let norm = if d.is_empty() { 0.0 } else { d.l2_norm()? };
    let factor = (clip_bound / (norm + CLIP_STABILIZER)).min(1.0);
    if factor < 1.0 {
        Ok((d.scaled(factor)?, norm, true))
    } else {
        Ok((d.clone(), norm, false))
    }
}

/// Gaussian-mechanism standard deviation; zero when privacy is disabled.
pub fn noise_sigma(spec: &PrivacySpec) -> Result<f64> {
    spec.validate()?;
    if !spec.enabled {
        return Ok(0.0);
    }
    Ok(spec.clip_bound * (2.0 * (1.25 / spec.delta).ln()).sqrt() / spec.epsilon)
}

/// Clips `d` and adds `N(0, sigma^2)` noise drawn from a sampler seeded with `rng_seed`.
pub fn privatize(
    d: &DeltaVector,
    spec: &PrivacySpec,
    rng_seed: u64,
) -> Result<(DeltaVector, NoiseReport)> {
    let sigma = noise_sigma(spec)?;
    let (clipped, pre_clip_norm, was_clipped) = clip_with_norm(d, spec.clip_bound)?;
    let report = NoiseReport {
        sigma,
        pre_clip_norm,
        clipped: was_clipped,
    };
    if !spec.enabled {
        return Ok((clipped, report));
    }
    let mut sampler = GaussianSampler::new(rng_seed);
    let noisy = clipped
        .values()
        .iter()
        .map(|v| v + sigma * sampler.sample())
        .collect();
    Ok((DeltaVector::new(noisy)?, report))
}

/// Deterministic standard-normal sampler (Box-Muller over ChaCha20).
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn unit_open_low(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn unit_closed_low(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.unit_open_low();
        let u2 = self.unit_closed_low();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}
