//! Deterministic federated learning simulator with client-side differential
//! privacy, coordinator failover, a hash-chained checkpoint log, hash-commitment
//! update integrity checks and moment-based corruption detection.
//!
//! Every run is a pure function of its [`sim::SimConfig`]: all randomness is
//! derived from the master seed, and logical time replaces the wall clock.
//!
//! | module | role |
//! |--------|------|
//! | [`model`] | parameter / delta vectors and their canonical byte encoding |
//! | [`trainer`] | logistic regression trained by mini-batch SGD |
//! | [`ldp`] | L2 clipping and Gaussian noise on client deltas |
//! | [`dss`] | delta computation, application and size-weighted aggregation |
//! | [`zkip`] | SHA-256 commitments over noisy deltas |
//! | [`tcm`] | append-only hash-chained checkpoint log with rollback |
//! | [`arrp`] | coordinator failure detection and election |
//! | [`ebcd`] | variance / skewness / kurtosis anomaly screening |
//! | [`earlystop`] | patience-based early stopping |
//! | [`data`] | synthetic data, CSV preprocessing, Dirichlet partitioning |
//! | [`metrics`] | accuracy, F1 and AUC-ROC |
//! | [`sim`] | the round loop with scripted fault injection |
//! | [`config`] | scenario file parsing |

pub mod arrp;
pub mod config;
pub mod data;
pub mod dss;
pub mod earlystop;
pub mod ebcd;
pub mod error;
pub mod ldp;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod sim;
pub mod tcm;
pub mod trainer;
pub mod zkip;

pub use error::{Error, Result};
pub use model::{DeltaVector, ParamVector};
