//! Moment-based corruption screening of model parameters.
//!
//! The name says "entropy", but the mechanism compares three distribution
//! moments of the flattened parameter vector against a baseline taken from
//! the first round of client models:
//!
//! * variance `m2 = sum (x - mean)^2 / n` (population)
//! * skewness `m3 / m2^1.5`
//! * kurtosis `m4 / m2^2` (Pearson, not excess; a normal sample gives 3)
//!
//! When `m2 < 1e-24` the vector is treated as constant: skewness 0 and
//! kurtosis 3.
//!
//! A moment alerts when `|m - baseline| > tolerance * (|baseline| + 1e-6)`.

use crate::error::{Error, Result};
use crate::model::ParamVector;

pub const DEFAULT_TOLERANCE: f64 = 5.0;
const DEGENERATE_VARIANCE: f64 = 1e-24;
const BAND_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStats {
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl MomentStats {
    fn as_array(&self) -> [f64; 3] {
        [self.variance, self.skewness, self.kurtosis]
    }
}

pub fn moments_of(values: &[f64]) -> Result<MomentStats> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "moments need at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let c = v - mean;
        let c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 < DEGENERATE_VARIANCE {
        return Ok(MomentStats {
            variance: m2,
            skewness: 0.0,
            kurtosis: 3.0,
        });
    }
    Ok(MomentStats {
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    })
}

/// Moments over the flat parameter layout (coefficients then intercept).
pub fn compute_moments(params: &ParamVector) -> Result<MomentStats> {
    moments_of(&params.to_flat())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbcdBaseline {
    pub baseline: MomentStats,
    pub tolerance_factor: f64,
    pub established: bool,
}

impl EbcdBaseline {
    /// A baseline that has not seen any client models yet.
    pub fn pending(tolerance_factor: f64) -> Self {
        Self {
            baseline: MomentStats {
                variance: 0.0,
                skewness: 0.0,
                kurtosis: 3.0,
            },
            tolerance_factor,
            established: false,
        }
    }
}

/// Mean of each moment over the given (first-round) client models.
pub fn establish_baseline(
    client_models: &[ParamVector],
    tolerance_factor: f64,
) -> Result<EbcdBaseline> {
    if client_models.is_empty() {
        return Err(Error::InvalidInput(
            "baseline needs at least one client model".into(),
        ));
    }
    if tolerance_factor.is_nan() || tolerance_factor <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "tolerance factor {tolerance_factor} must be positive"
        )));
    }
    let mut sums = [0.0; 3];
    for m in client_models {
        let stats = compute_moments(m)?.as_array();
        for (s, v) in sums.iter_mut().zip(stats) {
            *s += v;
        }
    }
    let k = client_models.len() as f64;
    Ok(EbcdBaseline {
        baseline: MomentStats {
            variance: sums[0] / k,
            skewness: sums[1] / k,
            kurtosis: sums[2] / k,
        },
        tolerance_factor,
        established: true,
    })
}

/// Screens `params` against the baseline. Stats are returned even without an alert.
pub fn check(params: &ParamVector, b: &EbcdBaseline) -> Result<(bool, MomentStats)> {
    if !b.established {
        return Err(Error::BaselineNotEstablished);
    }
    let stats = compute_moments(params)?;
    let alert = stats
        .as_array()
        .iter()
        .zip(b.baseline.as_array())
        .any(|(m, base)| (m - base).abs() > b.tolerance_factor * (base.abs() + BAND_FLOOR));
    Ok((alert, stats))
}
