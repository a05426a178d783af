//! Binary logistic regression trained by mini-batch SGD.
//!
//! The objective is the mean log loss plus `l2_reg / 2 * ||w||^2` over the
//! coefficients (the intercept is not regularized). The learning rate is
//! constant. Batch order for epoch `e` is a Fisher-Yates shuffle driven by a
//! ChaCha8 stream seeded with [`epoch_shuffle_seed`]`(cfg.seed, e)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ParamVector;
use crate::seed::mix64;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the log loss.
pub const PROB_CLAMP: f64 = 1e-12;

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, dim: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        Self::with_rows(features, labels, dim)
    }

    /// Like [`Dataset::new`] but allows zero rows (validation splits may be empty).
    pub fn with_rows(features: Vec<f64>, labels: Vec<u8>, dim: usize) -> Result<Self> {
        if features.len() != labels.len() * dim {
            return Err(Error::InvalidInput(format!(
                "{} feature values for {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("feature matrix contains NaN".into()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidInput(format!("label {bad} is not 0 or 1")));
        }
        Ok(Self {
            features,
            labels,
            dim,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("ragged feature rows".into()));
        }
        Self::new(rows.concat(), labels, dim)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            features,
            labels,
            dim: self.dim,
        }
    }

    /// Concatenates datasets of equal dimension.
    pub fn concat(parts: &[&Dataset]) -> Result<Self> {
        let dim = parts.first().map_or(0, |d| d.dim);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim,
                });
            }
            features.extend_from_slice(&p.features);
            labels.extend_from_slice(&p.labels);
        }
        Self::with_rows(features, labels, dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2_reg: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            learning_rate: 0.05,
            batch_size: 32,
            l2_reg: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.l2_reg.is_finite() && self.l2_reg >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "l2 regularization {} must be finite and non-negative",
                self.l2_reg
            )));
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_dims(params: &ParamVector, dim: usize) -> Result<()> {
    if params.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: params.dim(),
        });
    }
    Ok(())
}

fn margin(params: &ParamVector, x: &[f64]) -> f64 {
    params
        .coefficients()
        .iter()
        .zip(x)
        .map(|(w, v)| w * v)
        .sum::<f64>()
        + params.intercept()
}

/// `sigmoid(w . x + b)`.
pub fn predict_proba(params: &ParamVector, features: &[f64]) -> Result<f64> {
    check_dims(params, features.len())?;
    Ok(sigmoid(margin(params, features)))
}

/// Probabilities for every row of `data`.
pub fn predict_all(params: &ParamVector, data: &Dataset) -> Result<Vec<f64>> {
    check_dims(params, data.dim())?;
    Ok((0..data.len())
        .map(|i| sigmoid(margin(params, data.row(i))))
        .collect())
}

/// Mean binary cross-entropy with clamped probabilities.
pub fn log_loss(params: &ParamVector, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("log loss of an empty dataset".into()));
    }
    let probs = predict_all(params, data)?;
    let total: f64 = probs
        .iter()
        .zip(data.labels())
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / data.len() as f64)
}

/// Regularized training objective.
pub fn objective(params: &ParamVector, data: &Dataset, l2_reg: f64) -> Result<f64> {
    let penalty: f64 = params.coefficients().iter().map(|w| w * w).sum();
    Ok(log_loss(params, data)? + 0.5 * l2_reg * penalty)
}

/// Analytic gradient of [`objective`] in the flat layout (intercept last).
pub fn gradient(params: &ParamVector, data: &Dataset, l2_reg: f64) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidInput("gradient of an empty dataset".into()));
    }
    check_dims(params, data.dim())?;
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut grad = batch_gradient(params, data, &indices);
    for (g, w) in grad.iter_mut().zip(params.coefficients()) {
        *g += l2_reg * w;
    }
    Ok(grad)
}

// Unregularized mean log-loss gradient over `batch`, flat layout.
fn batch_gradient(params: &ParamVector, data: &Dataset, batch: &[usize]) -> Vec<f64> {
    let d = data.dim();
    let mut grad = vec![0.0; d + 1];
    for &i in batch {
        let x = data.row(i);
        let err = sigmoid(margin(params, x)) - f64::from(data.label(i));
        for (g, v) in grad[..d].iter_mut().zip(x) {
            *g += err * v;
        }
        grad[d] += err;
    }
    let scale = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    grad
}

/// Seed for the batch-order shuffle of epoch `epoch`.
pub fn epoch_shuffle_seed(seed: u64, epoch: u32) -> u64 {
    mix64(seed ^ mix64(u64::from(epoch)))
}

/// Fisher-Yates permutation of `0..n` for the given epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: u32) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_shuffle_seed(seed, epoch));
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// One full pass of mini-batch SGD. `epoch` selects the shuffle.
pub fn train_epoch(
    params: &ParamVector,
    data: &Dataset,
    cfg: &TrainConfig,
    epoch: u32,
) -> Result<ParamVector> {
    check_dims(params, data.dim())?;
    cfg.validate()?;
    let mut current = params.clone();
    let d = data.dim();
    let order = epoch_order(data.len(), cfg.seed, epoch);
    for batch in order.chunks(cfg.batch_size) {
        let grad = batch_gradient(&current, data, batch);
        let lr = cfg.learning_rate;
        let l2 = cfg.l2_reg;
        for (w, g) in current.coefficients_mut().iter_mut().zip(&grad[..d]) {
            *w -= lr * (g + l2 * *w);
        }
        *current.intercept_mut() -= lr * grad[d];
    }
    Ok(current)
}

/// `cfg.epochs` passes of [`train_epoch`] starting from `start`.
pub fn train(start: &ParamVector, data: &Dataset, cfg: &TrainConfig) -> Result<ParamVector> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot train on an empty dataset".into()));
    }
    let mut params = start.clone();
    for epoch in 0..cfg.epochs {
        params = train_epoch(&params, data, cfg, epoch)?;
    }
    Ok(params)
}
