//! Parameter and delta vectors shared by every protocol module.
//!
//! A linear model of dimension `d` is flattened to `d + 1` values: the
//! coefficients in order followed by the intercept. Clipping, noise, hashing
//! and checkpointing all operate on that flat layout, so the intercept is
//! privatized together with the weights.

use crate::error::{Error, Result};

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!(
            "non-finite value {} at index {i}",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Model coefficients plus intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    coefficients: Vec<f64>,
    intercept: f64,
}

impl ParamVector {
    pub fn new(coefficients: Vec<f64>, intercept: f64) -> Result<Self> {
        check_finite(&coefficients)?;
        check_finite(&[intercept])?;
        Ok(Self {
            coefficients,
            intercept,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coefficients: vec![0.0; dim],
            intercept: 0.0,
        }
    }

    /// Rebuilds from the flat `coefficients ++ [intercept]` layout.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        let (intercept, coefficients) = flat
            .split_last()
            .ok_or_else(|| Error::InvalidInput("flat parameter vector is empty".into()))?;
        Self::new(coefficients.to_vec(), *intercept)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Number of feature coefficients (excludes the intercept).
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Length of the flat layout, `dim() + 1`.
    pub fn len(&self) -> usize {
        self.coefficients.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.len());
        flat.extend_from_slice(&self.coefficients);
        flat.push(self.intercept);
        flat
    }

    pub(crate) fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub(crate) fn intercept_mut(&mut self) -> &mut f64 {
        &mut self.intercept
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.intercept.to_bits() == other.intercept.to_bits()
            && self.coefficients.len() == other.coefficients.len()
            && self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// A flat parameter difference, laid out like [`ParamVector::to_flat`].
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVector {
    values: Vec<f64>,
}

impl DeltaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn l2_norm(&self) -> Result<f64> {
        l2_norm(&self.values)
    }

    /// Multiplies every entry by `factor`. Used by fault injection and clipping.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }

    pub fn canonical_bytes(&self) -> CanonicalBytes {
        canonical_serialize(self)
    }

    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Euclidean norm `sqrt(sum v_i^2)`.
pub fn l2_norm(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("l2 norm of an empty vector".into()));
    }
    check_finite(values)?;
    Ok(values.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Canonical wire encoding of a delta.
///
/// Layout: `u32` big-endian entry count, then each entry as a big-endian
/// IEEE-754 binary64. This is the commitment preimage and must never change.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalBytes(Vec<u8>);

impl CanonicalBytes {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

impl AsRef<[u8]> for CanonicalBytes {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

pub fn canonical_serialize(v: &DeltaVector) -> CanonicalBytes {
    CanonicalBytes(encode_f64s(&v.values))
}

pub(crate) fn encode_f64s(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 8 * values.len());
    out.extend_from_slice(&(values.len() as u32).to_be_bytes());
    for v in values {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Inverse of [`canonical_serialize`].
pub fn canonical_deserialize(bytes: &[u8]) -> Result<DeltaVector> {
    let (values, rest) = decode_f64s(bytes)?;
    if !rest.is_empty() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after encoded vector",
            rest.len()
        )));
    }
    DeltaVector::new(values)
}

pub(crate) fn decode_f64s(bytes: &[u8]) -> Result<(Vec<f64>, &[u8])> {
    if bytes.len() < 4 {
        return Err(Error::Malformed("missing length prefix".into()));
    }
    let (len, body) = bytes.split_at(4);
    let count = u32::from_be_bytes(len.try_into().expect("4 bytes")) as usize;
    let needed = count
        .checked_mul(8)
        .ok_or_else(|| Error::Malformed("length prefix overflows".into()))?;
    if body.len() < needed {
        return Err(Error::Malformed(format!(
            "expected {needed} payload bytes, found {}",
            body.len()
        )));
    }
    let (payload, rest) = body.split_at(needed);
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_be_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((values, rest))
}
