//! Delta synchronization: clients ship `local - base` instead of full models,
//! and the coordinator folds a sample-weighted average of deltas into the
//! global parameters.

use crate::error::{Error, Result};
use crate::model::{DeltaVector, ParamVector};

fn same_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Element-wise `local - base` in the flat layout.
pub fn compute_delta(local: &ParamVector, base: &ParamVector) -> Result<DeltaVector> {
    same_len(base.len(), local.len())?;
    let values = local
        .to_flat()
        .iter()
        .zip(base.to_flat())
        .map(|(l, b)| l - b)
        .collect();
    DeltaVector::new(values)
}

/// Element-wise `base + d`.
pub fn apply_delta(base: &ParamVector, d: &DeltaVector) -> Result<ParamVector> {
    same_len(base.len(), d.len())?;
    let flat: Vec<f64> = base
        .to_flat()
        .iter()
        .zip(d.values())
        .map(|(b, v)| b + v)
        .collect();
    ParamVector::from_flat(&flat)
}

/// One client's contribution to a round.
#[derive(Debug, Clone)]
pub struct WeightedDelta {
    pub client_id: u32,
    pub delta: DeltaVector,
    pub sample_count: u64,
}

/// `sum_k (n_k / N) * delta_k`, accumulated in ascending client-id order so
/// the result does not depend on arrival order.
pub fn aggregate(updates: &[WeightedDelta]) -> Result<DeltaVector> {
    let first = updates.first().ok_or(Error::NoUpdates)?;
    let len = first.delta.len();
    let mut ordered: Vec<&WeightedDelta> = updates.iter().collect();
    ordered.sort_by_key(|u| u.client_id);
    let mut total: u64 = 0;
    for u in &ordered {
        same_len(len, u.delta.len())?;
        if u.sample_count == 0 {
            return Err(Error::InvalidInput(format!(
                "client {} reported zero samples",
                u.client_id
            )));
        }
        total += u.sample_count;
    }
    let total = total as f64;
    let mut acc = vec![0.0; len];
    for u in ordered {
        let w = u.sample_count as f64 / total;
        for (a, v) in acc.iter_mut().zip(u.delta.values()) {
            *a += w * v;
        }
    }
    DeltaVector::new(acc)
}
