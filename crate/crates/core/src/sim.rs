//! The deterministic federated round loop with scripted faults.
//!
//! Each round:
//!
//! 1. Scripted faults for the round are applied. A recovered server takes the
//!    coordinator role back; if the current coordinator is down, the
//!    lowest-id active client is elected and restores the global model from
//!    the checkpoint log (`rollback_depth` rounds back).
//! 2. Active clients train locally from the global model, stopping early on
//!    validation loss and keeping their best epoch.
//! 3. Each client computes its delta, clips and noises it, and commits to it.
//!    `CorruptSigned` scales the noisy delta before the commitment (a
//!    malicious client); `CorruptTampered` scales it after (in-transit
//!    tampering).
//! 4. The coordinator drops updates whose commitments fail and aggregates the
//!    rest, weighted by local sample counts.
//! 5. The new global model is screened by moment-based corruption detection
//!    and checkpointed.
//! 6. Test metrics are computed and the server-side early stopper observes
//!    validation accuracy.
//!
//! The whole run is a pure function of [`SimConfig`]. Per-client, per-round
//! seeds come from [`derive_seed`], so a dropout never shifts another
//! client's random stream.

use std::collections::BTreeSet;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::arrp::{Coordinator, RoleState};
use crate::data::{self, ClientSplit, PartitionSpec, PreprocessPlan};
use crate::dss::{self, WeightedDelta};
use crate::earlystop::{EarlyStopper, Mode, DEFAULT_MIN_DELTA};
use crate::ebcd::{self, EbcdBaseline, MomentStats, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::ldp::{self, PrivacySpec};
use crate::metrics;
use crate::model::ParamVector;
use crate::seed::{derive_seed, purpose};
use crate::tcm::{ContributorSummary, CoordinatorAction, Manifold, NewEntry};
use crate::trainer::{self, Dataset, TrainConfig};
use crate::zkip::{self, SharedSecret};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultTarget {
    Server,
    Client(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultKind {
    /// Down from this round until a matching `Recover`.
    Crash,
    Recover,
    /// Down for this round only.
    Dropout,
    /// Client scales its own noisy delta and signs the result.
    CorruptSigned { scale: f64 },
    /// The noisy delta is scaled after it was signed.
    CorruptTampered { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEvent {
    pub round: u32,
    pub target: FaultTarget,
    pub kind: FaultKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultScript {
    pub events: Vec<FaultEvent>,
}

impl FaultScript {
    pub fn new(events: Vec<FaultEvent>) -> Self {
        Self { events }
    }

    pub fn validate(&self, num_clients: usize) -> Result<()> {
        for pair in self.events.windows(2) {
            if pair[1].round < pair[0].round {
                return Err(Error::InvalidConfig(format!(
                    "fault events out of order: round {} after round {}",
                    pair[1].round, pair[0].round
                )));
            }
        }
        for e in &self.events {
            match (e.target, e.kind) {
                (FaultTarget::Server, FaultKind::CorruptSigned { .. })
                | (FaultTarget::Server, FaultKind::CorruptTampered { .. }) => {
                    return Err(Error::InvalidConfig(
                        "corruption events must target a client".into(),
                    ))
                }
                (FaultTarget::Client(id), _) if id as usize >= num_clients => {
                    return Err(Error::InvalidConfig(format!(
                        "fault targets client {id} but only {num_clients} exist"
                    )))
                }
                _ => {}
            }
            if let FaultKind::CorruptSigned { scale } | FaultKind::CorruptTampered { scale } =
                e.kind
            {
                if !scale.is_finite() {
                    return Err(Error::InvalidConfig("corruption scale must be finite".into()));
                }
            }
        }
        Ok(())
    }

    fn at(&self, round: u32) -> impl Iterator<Item = &FaultEvent> {
        self.events.iter().filter(move |e| e.round == round)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic {
        n: usize,
        d: usize,
        class_balance: f64,
        separation: f64,
    },
    Csv {
        application: PathBuf,
        credit: PathBuf,
        plan: PreprocessPlan,
    },
}

/// Privacy parameters that apply from `round` onward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyOverride {
    pub round: u32,
    pub privacy: PrivacySpec,
}

/// Default L2 clip bound for client deltas in a run.
///
/// Local updates on the synthetic task have norms well above this, so every
/// delta is clipped and the noise-to-signal ratio does not depend on `C`.
/// What `C` does set is the absolute noise level, and this value keeps the
/// accumulated noise at epsilon 1 inside the default moment-screening band.
pub const DEFAULT_CLIP_BOUND: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub num_clients: usize,
    pub num_rounds: u32,
    pub client_epochs: u32,
    pub privacy: PrivacySpec,
    pub privacy_overrides: Vec<PrivacyOverride>,
    /// Local SGD settings. `epochs` and `seed` are replaced by
    /// `client_epochs` and the derived per-client seed.
    pub train: TrainConfig,
    /// Client split. `num_clients` and `seed` are replaced by the run's
    /// client count and a seed derived from `master_seed`.
    pub partition: PartitionSpec,
    pub data: DataSource,
    pub test_fraction: f64,
    /// Share of the training pool kept by the server for validation.
    pub server_val_fraction: f64,
    pub ebcd_tolerance: f64,
    /// Restore the previous global model when the screen alerts.
    pub ebcd_rollback: bool,
    /// Also screen each reconstructed client model and drop alerting ones.
    pub ebcd_screen_clients: bool,
    pub client_patience: u32,
    pub server_patience: u32,
    pub min_delta: f64,
    /// How many rounds back a newly elected coordinator restores from.
    pub rollback_depth: u32,
    /// Weight deltas by train+validation size (true) or train size only.
    pub weight_by_full_local_size: bool,
    pub shared_secret: Option<Vec<u8>>,
    pub master_seed: u64,
    pub fault_script: FaultScript,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_clients: 5,
            num_rounds: 10,
            client_epochs: 3,
            privacy: PrivacySpec {
                clip_bound: DEFAULT_CLIP_BOUND,
                ..PrivacySpec::default()
            },
            privacy_overrides: Vec::new(),
            train: TrainConfig::default(),
            partition: PartitionSpec::default(),
            data: DataSource::Synthetic {
                n: 2000,
                d: 20,
                class_balance: 0.5,
                separation: 2.0,
            },
            test_fraction: 0.2,
            server_val_fraction: 0.1,
            ebcd_tolerance: DEFAULT_TOLERANCE,
            ebcd_rollback: false,
            ebcd_screen_clients: false,
            client_patience: 2,
            server_patience: 10,
            min_delta: DEFAULT_MIN_DELTA,
            rollback_depth: 1,
            weight_by_full_local_size: true,
            shared_secret: None,
            master_seed: 0,
            fault_script: FaultScript::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::InvalidConfig("need at least one client".into()));
        }
        if self.client_epochs == 0 {
            return Err(Error::InvalidConfig("client_epochs must be at least 1".into()));
        }
        self.privacy.validate()?;
        for pair in self.privacy_overrides.windows(2) {
            if pair[1].round <= pair[0].round {
                return Err(Error::InvalidConfig(
                    "privacy overrides must have strictly increasing rounds".into(),
                ));
            }
        }
        for o in &self.privacy_overrides {
            o.privacy.validate()?;
        }
        self.local_train_config(0, 0).validate()?;
        self.partition_spec().validate()?;
        if !(0.0..1.0).contains(&self.test_fraction) || self.test_fraction == 0.0 {
            return Err(Error::InvalidConfig(format!(
                "test fraction {} must lie in (0, 1)",
                self.test_fraction
            )));
        }
        if !(self.server_val_fraction > 0.0 && self.server_val_fraction <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "server validation fraction {} must lie in (0, 0.5]",
                self.server_val_fraction
            )));
        }
        if self.ebcd_tolerance.is_nan() || self.ebcd_tolerance <= 0.0 {
            return Err(Error::InvalidConfig("EBCD tolerance must be positive".into()));
        }
        if self.client_patience == 0 || self.server_patience == 0 {
            return Err(Error::InvalidConfig("patience must be positive".into()));
        }
        if !(self.min_delta.is_finite() && self.min_delta >= 0.0) {
            return Err(Error::InvalidConfig("min_delta must be non-negative".into()));
        }
        if let Some(s) = &self.shared_secret {
            SharedSecret::new(s.clone())?;
        }
        if let DataSource::Synthetic { n, d, class_balance, separation } = &self.data {
            if *n < 10 || *d == 0 || !(*class_balance > 0.0 && *class_balance < 1.0) {
                return Err(Error::InvalidConfig("invalid synthetic data shape".into()));
            }
            if !(separation.is_finite() && *separation >= 0.0) {
                return Err(Error::InvalidConfig("separation must be non-negative".into()));
            }
        }
        self.fault_script.validate(self.num_clients)
    }

    /// Privacy parameters in force during `round`.
    pub fn privacy_at(&self, round: u32) -> PrivacySpec {
        self.privacy_overrides
            .iter()
            .rev()
            .find(|o| o.round <= round)
            .map_or(self.privacy, |o| o.privacy)
    }

    fn local_train_config(&self, client: u32, round: u32) -> TrainConfig {
        TrainConfig {
            epochs: self.client_epochs,
            seed: derive_seed(purpose::TRAIN, self.master_seed, client.into(), round.into()),
            ..self.train.clone()
        }
    }

    fn partition_spec(&self) -> PartitionSpec {
        PartitionSpec {
            num_clients: self.num_clients,
            seed: derive_seed(purpose::PARTITION, self.master_seed, 0, 0),
            ..self.partition.clone()
        }
    }

    fn secret(&self) -> Result<SharedSecret> {
        match &self.shared_secret {
            Some(bytes) => SharedSecret::new(bytes.clone()),
            None => {
                let mut h = Sha256::new();
                h.update(purpose::SECRET.as_bytes());
                h.update(self.master_seed.to_be_bytes());
                SharedSecret::new(h.finalize().to_vec())
            }
        }
    }
}

/// One row of every per-round series the simulator reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: u32,
    pub accuracy: f64,
    pub f1: f64,
    /// `None` when the test set holds a single class.
    pub auc: Option<f64>,
    pub mean_noise_sigma: f64,
    pub aggregated_delta_l2: f64,
    pub zkip_failures: u32,
    pub ebcd: MomentStats,
    pub ebcd_alert: bool,
    pub server_alive: bool,
    pub coordinator_id: i64,
    pub tcm_entry_count: usize,
    pub server_best_val_acc: f64,
    pub active_client_count: usize,
}

impl RoundMetrics {
    /// Every numeric field as raw bits, for bitwise comparisons.
    pub fn fingerprint(&self) -> Vec<u64> {
        vec![
            self.round.into(),
            self.accuracy.to_bits(),
            self.f1.to_bits(),
            self.auc.map_or(u64::MAX, f64::to_bits),
            self.mean_noise_sigma.to_bits(),
            self.aggregated_delta_l2.to_bits(),
            self.zkip_failures.into(),
            self.ebcd.variance.to_bits(),
            self.ebcd.skewness.to_bits(),
            self.ebcd.kurtosis.to_bits(),
            self.ebcd_alert.into(),
            self.server_alive.into(),
            self.coordinator_id as u64,
            self.tcm_entry_count as u64,
            self.server_best_val_acc.to_bits(),
            self.active_client_count as u64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// Server validation accuracy stopped improving; the best model was restored.
    EarlyStopped { round: u32, best_round: u32 },
    /// Nobody was left to coordinate `round`.
    Halted { round: u32 },
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub final_model: ParamVector,
    pub history: Vec<RoundMetrics>,
    pub manifold: Manifold,
    pub termination: Termination,
    /// Global model held at the end of each executed round.
    pub round_models: Vec<ParamVector>,
}

/// Data after the global split, before client partitioning.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub clients: Vec<ClientSplit>,
    pub server_val: Dataset,
    pub test: Dataset,
}

pub fn prepare_data(cfg: &SimConfig) -> Result<PreparedData> {
    let seed = |tag: &str, k: u64| derive_seed(tag, cfg.master_seed, k, 0);
    let (pool, test) = match &cfg.data {
        DataSource::Synthetic { n, d, class_balance, separation } => {
            let all = data::generate_synthetic(*n, *d, *class_balance, *separation, seed(purpose::DATA, 0))?;
            data::holdout_split(&all, cfg.test_fraction, seed(purpose::SPLIT, 0))?
        }
        DataSource::Csv { application, credit, plan } => {
            let plan = PreprocessPlan {
                test_fraction: cfg.test_fraction,
                ..plan.clone()
            };
            let ing = data::ingest_csv(application, credit, &plan, seed(purpose::SPLIT, 0))?;
            (ing.train, ing.test)
        }
    };
    if test.is_empty() {
        return Err(Error::InvalidConfig("test split is empty".into()));
    }
    let (client_pool, server_val) =
        data::holdout_split(&pool, cfg.server_val_fraction, seed(purpose::SPLIT, 1))?;
    if server_val.is_empty() {
        return Err(Error::InvalidConfig("server validation split is empty".into()));
    }
    let clients = data::partition(&client_pool, &cfg.partition_spec())?;
    Ok(PreparedData {
        clients,
        server_val,
        test,
    })
}

struct Evaluation {
    accuracy: f64,
    f1: f64,
    auc: Option<f64>,
}

fn evaluate(model: &ParamVector, data: &Dataset) -> Result<Evaluation> {
    let probs = trainer::predict_all(model, data)?;
    let preds = metrics::threshold(&probs);
    let auc = match metrics::auc_roc(&probs, data.labels()) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Evaluation {
        accuracy: metrics::accuracy(&preds, data.labels())?,
        f1: metrics::f1(&preds, data.labels())?,
        auc,
    })
}

/// Local training with validation-loss early stopping; returns the best epoch's model.
fn train_client(
    global: &ParamVector,
    split: &ClientSplit,
    cfg: &TrainConfig,
    patience: u32,
    min_delta: f64,
) -> Result<ParamVector> {
    if split.val.is_empty() {
        return trainer::train(global, &split.train, cfg);
    }
    let mut stopper = EarlyStopper::new(Mode::Minimize, patience, min_delta)?;
    let mut params = global.clone();
    for epoch in 0..cfg.epochs {
        params = trainer::train_epoch(&params, &split.train, cfg, epoch)?;
        let loss = trainer::log_loss(&params, &split.val)?;
        if stopper.observe(loss, &params)? {
            break;
        }
    }
    Ok(stopper.best()?.1.clone())
}

struct FaultState {
    server_up: bool,
    crashed: BTreeSet<u32>,
}

struct ClientUpdate {
    client_id: u32,
    delta: crate::model::DeltaVector,
    proof: zkip::IntegrityProof,
    sample_count: u64,
    sigma: f64,
}

/// Runs the full simulation.
pub fn run(cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let prepared = prepare_data(cfg)?;
    run_prepared(cfg, &prepared)
}

/// Runs the round loop on already-prepared data.
pub fn run_prepared(cfg: &SimConfig, prepared: &PreparedData) -> Result<SimOutcome> {
    cfg.validate()?;
    let secret = cfg.secret()?;
    let dim = prepared.test.dim();
    let mut global = ParamVector::zeros(dim);
    let mut manifold = Manifold::new();
    let all_clients: Vec<u32> = (0..cfg.num_clients as u32).collect();
    let mut role = RoleState::new(all_clients.iter().copied());
    let mut faults = FaultState {
        server_up: true,
        crashed: BTreeSet::new(),
    };
    let mut baseline = EbcdBaseline::pending(cfg.ebcd_tolerance);
    let mut server_stopper = EarlyStopper::new(Mode::Maximize, cfg.server_patience, cfg.min_delta)?;
    let mut history = Vec::new();
    let mut round_models = Vec::new();
    let mut termination = Termination::Completed;

    manifold.append(NewEntry {
        round: 0,
        global_params: global.clone(),
        contributors: Vec::new(),
        coordinator_id: role.coordinator.id(),
        action: CoordinatorAction::Genesis,
    })?;

    for round in 0..cfg.num_rounds {
        let r64 = u64::from(round);

        // 1. faults and coordinator resolution
        let mut dropped = BTreeSet::new();
        let mut signed_corruption = Vec::new();
        let mut tampered_corruption = Vec::new();
        let mut server_dropout = false;
        for e in cfg.fault_script.at(round) {
            match (e.target, e.kind) {
                (FaultTarget::Server, FaultKind::Crash) => faults.server_up = false,
                (FaultTarget::Server, FaultKind::Recover) => faults.server_up = true,
                (FaultTarget::Server, FaultKind::Dropout) => server_dropout = true,
                (FaultTarget::Client(c), FaultKind::Crash) => {
                    faults.crashed.insert(c);
                }
                (FaultTarget::Client(c), FaultKind::Recover) => {
                    faults.crashed.remove(&c);
                }
                (FaultTarget::Client(c), FaultKind::Dropout) => {
                    dropped.insert(c);
                }
                (FaultTarget::Client(c), FaultKind::CorruptSigned { scale }) => {
                    signed_corruption.push((c, scale))
                }
                (FaultTarget::Client(c), FaultKind::CorruptTampered { scale }) => {
                    tampered_corruption.push((c, scale))
                }
                (FaultTarget::Server, _) => unreachable!("validated"),
            }
        }
        let server_alive = faults.server_up && !server_dropout;
        role.active_clients = all_clients
            .iter()
            .copied()
            .filter(|c| !faults.crashed.contains(c) && !dropped.contains(c))
            .collect();

        if server_alive && !role.server_alive && role.on_server_recovery() {
            manifold.append(NewEntry {
                round: r64,
                global_params: global.clone(),
                contributors: Vec::new(),
                coordinator_id: role.coordinator.id(),
                action: CoordinatorAction::Handback,
            })?;
        }
        role.server_alive = server_alive;

        if role.detect_failure(role.coordinator_heartbeat()) {
            match role.elect(r64) {
                Ok(_) => {
                    let target = i64::from(round) - i64::from(cfg.rollback_depth);
                    global = manifold.rollback(target.max(0))?;
                    manifold.append(NewEntry {
                        round: r64,
                        global_params: global.clone(),
                        contributors: Vec::new(),
                        coordinator_id: role.coordinator.id(),
                        action: CoordinatorAction::Election,
                    })?;
                }
                Err(Error::NoActiveClients(_)) => {
                    termination = Termination::Halted { round };
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        assert!(role.is_consistent(), "coordinator must be alive in round {round}");
        let coordinator: Coordinator = role.coordinator;

        // 2-3. local training, privatization, commitments
        let privacy = cfg.privacy_at(round);
        let mut updates = Vec::new();
        let mut round_client_models = Vec::new();
        for &c in &role.active_clients {
            let split = &prepared.clients[c as usize];
            let tcfg = cfg.local_train_config(c, round);
            let local = train_client(&global, split, &tcfg, cfg.client_patience, cfg.min_delta)?;
            let delta = dss::compute_delta(&local, &global)?;
            round_client_models.push(local);
            let noise_seed = derive_seed(purpose::NOISE, cfg.master_seed, c.into(), r64);
            let (mut noisy, report) = ldp::privatize(&delta, &privacy, noise_seed)?;
            if let Some(&(_, scale)) = signed_corruption.iter().find(|(id, _)| *id == c) {
                noisy = noisy.scaled(scale)?;
            }
            let proof = zkip::generate_proof(&noisy, &secret, c.into(), r64);
            if let Some(&(_, scale)) = tampered_corruption.iter().find(|(id, _)| *id == c) {
                noisy = noisy.scaled(scale)?;
            }
            let sample_count = if cfg.weight_by_full_local_size {
                split.total_samples()
            } else {
                split.train.len()
            } as u64;
            updates.push(ClientUpdate {
                client_id: c,
                delta: noisy,
                proof,
                sample_count,
                sigma: report.sigma,
            });
        }

        if !baseline.established && !round_client_models.is_empty() {
            baseline = ebcd::establish_baseline(&round_client_models, cfg.ebcd_tolerance)?;
        }

        // 4. verification and aggregation
        let mut zkip_failures = 0u32;
        let mut contributors = Vec::new();
        let mut accepted = Vec::new();
        for u in &updates {
            let passed = zkip::verify_proof(&u.delta, &u.proof, &secret);
            if !passed {
                zkip_failures += 1;
            }
            contributors.push(ContributorSummary {
                client_id: u.client_id.into(),
                sample_count: u.sample_count,
                noise_sigma: u.sigma,
                zkip_passed: passed,
            });
            if !passed {
                continue;
            }
            if cfg.ebcd_screen_clients && baseline.established {
                let candidate = dss::apply_delta(&global, &u.delta)?;
                if ebcd::check(&candidate, &baseline)?.0 {
                    continue;
                }
            }
            accepted.push(WeightedDelta {
                client_id: u.client_id,
                delta: u.delta.clone(),
                sample_count: u.sample_count,
            });
        }
        let mean_noise_sigma = if updates.is_empty() {
            0.0
        } else {
            updates.iter().map(|u| u.sigma).sum::<f64>() / updates.len() as f64
        };

        // 5. screening and checkpointing
        let (aggregated_delta_l2, action) = match dss::aggregate(&accepted) {
            Ok(agg) => {
                global = dss::apply_delta(&global, &agg)?;
                (agg.l2_norm()?, CoordinatorAction::Aggregate)
            }
            Err(Error::NoUpdates) => (0.0, CoordinatorAction::SkippedRound),
            Err(e) => return Err(e),
        };
        let (ebcd_alert, ebcd_stats) = if baseline.established {
            ebcd::check(&global, &baseline)?
        } else {
            (false, ebcd::compute_moments(&global)?)
        };
        manifold.append(NewEntry {
            round: r64,
            global_params: global.clone(),
            contributors,
            coordinator_id: coordinator.id(),
            action,
        })?;
        if ebcd_alert && cfg.ebcd_rollback {
            let entries = manifold.entries();
            global = entries[entries.len() - 2].global_params.clone();
            manifold.append(NewEntry {
                round: r64,
                global_params: global.clone(),
                contributors: Vec::new(),
                coordinator_id: coordinator.id(),
                action: CoordinatorAction::RecoveryRollback,
            })?;
        }

        // 6. metrics and server early stopping
        let eval = evaluate(&global, &prepared.test)?;
        let val = evaluate(&global, &prepared.server_val)?;
        let stop = server_stopper.observe(val.accuracy, &global)?;
        if stop {
            let (_, best) = server_stopper.best()?;
            global = best.clone();
            manifold.append(NewEntry {
                round: r64,
                global_params: global.clone(),
                contributors: Vec::new(),
                coordinator_id: coordinator.id(),
                action: CoordinatorAction::RecoveryRollback,
            })?;
        }
        history.push(RoundMetrics {
            round,
            accuracy: eval.accuracy,
            f1: eval.f1,
            auc: eval.auc,
            mean_noise_sigma,
            aggregated_delta_l2,
            zkip_failures,
            ebcd: ebcd_stats,
            ebcd_alert,
            server_alive,
            coordinator_id: coordinator.id(),
            tcm_entry_count: manifold.len(),
            server_best_val_acc: server_stopper.best_value().unwrap_or(val.accuracy),
            active_client_count: role.active_clients.len(),
        });
        round_models.push(global.clone());
        if stop {
            let best_round = server_stopper.best_index().unwrap_or(0) as u32;
            termination = Termination::EarlyStopped { round, best_round };
            break;
        }
    }

    Ok(SimOutcome {
        final_model: global,
        history,
        manifold,
        termination,
        round_models,
    })
}

/// Runs `cfg` twice and reports whether both runs agree bit for bit.
pub fn replay_check(cfg: &SimConfig) -> bool {
    match (run(cfg), run(cfg)) {
        (Ok(a), Ok(b)) => {
            a.final_model.bitwise_eq(&b.final_model)
                && a.history.len() == b.history.len()
                && a.history
                    .iter()
                    .zip(&b.history)
                    .all(|(x, y)| x.fingerprint() == y.fingerprint())
                && a.manifold == b.manifold
                && a.termination == b.termination
        }
        (Err(a), Err(b)) => a.to_string() == b.to_string(),
        _ => false,
    }
}

/// Test accuracy of one model trained on the pooled client data for
/// `num_rounds * client_epochs` epochs, the centralized reference for a run.
pub fn centralized_accuracy(cfg: &SimConfig) -> Result<f64> {
    cfg.validate()?;
    let prepared = prepare_data(cfg)?;
    let pieces: Vec<&Dataset> = prepared
        .clients
        .iter()
        .flat_map(|c| [&c.train, &c.val])
        .collect();
    let pooled = Dataset::concat(&pieces)?;
    let tcfg = TrainConfig {
        epochs: cfg.num_rounds.max(1) * cfg.client_epochs,
        seed: derive_seed(purpose::TRAIN, cfg.master_seed, u64::MAX, 0),
        ..cfg.train.clone()
    };
    let model = trainer::train(&ParamVector::zeros(pooled.dim()), &pooled, &tcfg)?;
    Ok(evaluate(&model, &prepared.test)?.accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            num_rounds: 4,
            data: DataSource::Synthetic {
                n: 400,
                d: 5,
                class_balance: 0.5,
                separation: 2.0,
            },
            master_seed: 17,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_rounds_leaves_only_genesis() {
        let cfg = SimConfig {
            num_rounds: 0,
            ..small()
        };
        let out = run(&cfg).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.manifold.len(), 1);
        assert_eq!(out.manifold.entries()[0].action, CoordinatorAction::Genesis);
        assert!(out.manifold.verify_chain());
    }

    #[test]
    fn one_row_per_round() {
        let out = run(&small()).unwrap();
        assert_eq!(out.history.len(), 4);
        assert_eq!(out.termination, Termination::Completed);
        assert!(out.manifold.verify_chain());
        for (i, row) in out.history.iter().enumerate() {
            assert_eq!(row.round, i as u32);
            assert!(row.tcm_entry_count > i);
            assert_eq!(row.coordinator_id, -1);
        }
    }

    #[test]
    fn all_clients_dropped_skips_the_round() {
        let mut cfg = small();
        cfg.fault_script = FaultScript::new(
            (0..5)
                .map(|c| FaultEvent {
                    round: 1,
                    target: FaultTarget::Client(c),
                    kind: FaultKind::Dropout,
                })
                .collect(),
        );
        let out = run(&cfg).unwrap();
        assert_eq!(out.history.len(), 4);
        let skipped = &out.history[1];
        assert_eq!(skipped.active_client_count, 0);
        assert_eq!(skipped.aggregated_delta_l2, 0.0);
        assert!(out.round_models[1].bitwise_eq(&out.round_models[0]));
        assert!(out
            .manifold
            .entries()
            .iter()
            .any(|e| e.action == CoordinatorAction::SkippedRound));
    }

    #[test]
    fn total_failure_halts_with_valid_log() {
        let mut cfg = small();
        let mut events = vec![FaultEvent {
            round: 2,
            target: FaultTarget::Server,
            kind: FaultKind::Crash,
        }];
        events.extend((0..5).map(|c| FaultEvent {
            round: 2,
            target: FaultTarget::Client(c),
            kind: FaultKind::Crash,
        }));
        cfg.fault_script = FaultScript::new(events);
        let out = run(&cfg).unwrap();
        assert_eq!(out.termination, Termination::Halted { round: 2 });
        assert_eq!(out.history.len(), 2);
        assert!(out.manifold.verify_chain());
    }

    #[test]
    fn invalid_fault_scripts_rejected() {
        let mut cfg = small();
        cfg.fault_script = FaultScript::new(vec![FaultEvent {
            round: 1,
            target: FaultTarget::Server,
            kind: FaultKind::CorruptSigned { scale: 2.0 },
        }]);
        assert!(matches!(run(&cfg), Err(Error::InvalidConfig(_))));
        cfg.fault_script = FaultScript::new(vec![
            FaultEvent { round: 3, target: FaultTarget::Client(0), kind: FaultKind::Dropout },
            FaultEvent { round: 1, target: FaultTarget::Client(0), kind: FaultKind::Dropout },
        ]);
        assert!(run(&cfg).is_err());
        cfg.fault_script = FaultScript::new(vec![FaultEvent {
            round: 1,
            target: FaultTarget::Client(9),
            kind: FaultKind::Dropout,
        }]);
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn privacy_overrides_apply_from_their_round() {
        let mut cfg = small();
        cfg.privacy_overrides = vec![PrivacyOverride {
            round: 2,
            privacy: PrivacySpec {
                epsilon: 2.0,
                ..cfg.privacy
            },
        }];
        let out = run(&cfg).unwrap();
        let s0 = out.history[0].mean_noise_sigma;
        let s3 = out.history[3].mean_noise_sigma;
        assert!((s3 - s0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn seeds_change_histories() {
        let a = run(&small()).unwrap();
        let b = run(&SimConfig {
            master_seed: 18,
            ..small()
        })
        .unwrap();
        assert_ne!(a.history[0].fingerprint(), b.history[0].fingerprint());
    }
}
