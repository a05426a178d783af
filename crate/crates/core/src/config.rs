//! Scenario files: TOML that maps onto [`SimConfig`].
//!
//! Every key is optional and falls back to the [`SimConfig`] default.
//! Unknown keys are rejected. Relative CSV paths resolve against the
//! directory holding the scenario file.
//!
//! ```toml
//! master_seed = 42
//! num_clients = 5
//! num_rounds = 10
//! client_epochs = 3
//!
//! [data]
//! source = "synthetic"      # or "csv"
//! n = 2000
//! d = 20
//!
//! [privacy]
//! epsilon = 1.0
//!
//! [[fault]]
//! round = 4
//! target = "server"
//! kind = "crash"
//!
//! [[fault]]
//! round = 6
//! target = "client"
//! client = 2
//! kind = "corrupt_signed"
//! scale = 100.0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::data::PreprocessPlan;
use crate::error::{Error, Result};
use crate::ldp::PrivacySpec;
use crate::sim::{
    DataSource, FaultEvent, FaultKind, FaultScript, FaultTarget, PrivacyOverride, SimConfig,
};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    master_seed: Option<u64>,
    num_clients: Option<usize>,
    num_rounds: Option<u32>,
    client_epochs: Option<u32>,
    #[serde(default)]
    data: RawData,
    #[serde(default)]
    privacy: RawPrivacy,
    #[serde(default)]
    privacy_override: Vec<RawPrivacyOverride>,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    partition: RawPartition,
    #[serde(default)]
    ebcd: RawEbcd,
    #[serde(default)]
    earlystop: RawEarlyStop,
    #[serde(default)]
    recovery: RawRecovery,
    #[serde(default)]
    zkip: RawZkip,
    #[serde(default)]
    fault: Vec<RawFault>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    source: Option<String>,
    n: Option<usize>,
    d: Option<usize>,
    class_balance: Option<f64>,
    separation: Option<f64>,
    test_fraction: Option<f64>,
    server_val_fraction: Option<f64>,
    application_csv: Option<PathBuf>,
    credit_csv: Option<PathBuf>,
    numeric_columns: Option<Vec<String>>,
    categorical_columns: Option<Vec<String>>,
    bad_statuses: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrivacy {
    enabled: Option<bool>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    clip_bound: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrivacyOverride {
    round: u32,
    enabled: Option<bool>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    clip_bound: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    l2_reg: Option<f64>,
    weight_by_full_local_size: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    dirichlet_alpha: Option<f64>,
    val_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEbcd {
    tolerance_factor: Option<f64>,
    rollback_on_alert: Option<bool>,
    screen_clients: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEarlyStop {
    client_patience: Option<u32>,
    server_patience: Option<u32>,
    min_delta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecovery {
    rollback_depth: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawZkip {
    shared_secret_hex: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFault {
    round: u32,
    target: String,
    client: Option<u32>,
    kind: String,
    scale: Option<f64>,
}

fn apply_privacy(
    base: PrivacySpec,
    enabled: Option<bool>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    clip_bound: Option<f64>,
) -> PrivacySpec {
    PrivacySpec {
        enabled: enabled.unwrap_or(base.enabled),
        epsilon: epsilon.unwrap_or(base.epsilon),
        delta: delta.unwrap_or(base.delta),
        clip_bound: clip_bound.unwrap_or(base.clip_bound),
    }
}

fn fault_event(f: RawFault) -> Result<FaultEvent> {
    let target = match (f.target.as_str(), f.client) {
        ("server", None) => FaultTarget::Server,
        ("server", Some(_)) => {
            return Err(Error::InvalidConfig("server faults take no client id".into()))
        }
        ("client", Some(id)) => FaultTarget::Client(id),
        ("client", None) => {
            return Err(Error::InvalidConfig("client faults need a client id".into()))
        }
        (other, _) => {
            return Err(Error::InvalidConfig(format!("unknown fault target {other:?}")))
        }
    };
    let need_scale = || {
        f.scale
            .ok_or_else(|| Error::InvalidConfig(format!("{} needs a scale", f.kind)))
    };
    let kind = match f.kind.as_str() {
        "crash" => FaultKind::Crash,
        "recover" => FaultKind::Recover,
        "dropout" => FaultKind::Dropout,
        "corrupt_signed" => FaultKind::CorruptSigned { scale: need_scale()? },
        "corrupt_tampered" => FaultKind::CorruptTampered { scale: need_scale()? },
        other => return Err(Error::InvalidConfig(format!("unknown fault kind {other:?}"))),
    };
    if f.scale.is_some()
        && !matches!(kind, FaultKind::CorruptSigned { .. } | FaultKind::CorruptTampered { .. })
    {
        return Err(Error::InvalidConfig(format!("{} takes no scale", f.kind)));
    }
    Ok(FaultEvent {
        round: f.round,
        target,
        kind,
    })
}

/// Parses scenario text. `base_dir` anchors relative CSV paths.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<SimConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
    let mut cfg = SimConfig::default();
    let d = SimConfig::default();

    cfg.master_seed = raw.master_seed.unwrap_or(d.master_seed);
    cfg.num_clients = raw.num_clients.unwrap_or(d.num_clients);
    cfg.num_rounds = raw.num_rounds.unwrap_or(d.num_rounds);
    cfg.client_epochs = raw.client_epochs.unwrap_or(d.client_epochs);

    let rd = raw.data;
    cfg.test_fraction = rd.test_fraction.unwrap_or(d.test_fraction);
    cfg.server_val_fraction = rd.server_val_fraction.unwrap_or(d.server_val_fraction);
    cfg.data = match rd.source.as_deref().unwrap_or("synthetic") {
        "synthetic" => {
            let DataSource::Synthetic { n, d: dim, class_balance, separation } = d.data else {
                unreachable!("default data source is synthetic")
            };
            DataSource::Synthetic {
                n: rd.n.unwrap_or(n),
                d: rd.d.unwrap_or(dim),
                class_balance: rd.class_balance.unwrap_or(class_balance),
                separation: rd.separation.unwrap_or(separation),
            }
        }
        "csv" => {
            let (Some(app), Some(credit)) = (rd.application_csv, rd.credit_csv) else {
                return Err(Error::InvalidConfig(
                    "csv source needs application_csv and credit_csv".into(),
                ));
            };
            let mut plan = PreprocessPlan::default();
            if let Some(v) = rd.numeric_columns {
                plan.numeric_columns = v;
            }
            if let Some(v) = rd.categorical_columns {
                plan.categorical_columns = v;
            }
            if let Some(v) = rd.bad_statuses {
                plan.bad_statuses = v;
            }
            DataSource::Csv {
                application: base_dir.join(app),
                credit: base_dir.join(credit),
                plan,
            }
        }
        other => return Err(Error::InvalidConfig(format!("unknown data source {other:?}"))),
    };

    let p = raw.privacy;
    cfg.privacy = apply_privacy(d.privacy, p.enabled, p.epsilon, p.delta, p.clip_bound);
    let mut current = cfg.privacy;
    for o in raw.privacy_override {
        current = apply_privacy(current, o.enabled, o.epsilon, o.delta, o.clip_bound);
        cfg.privacy_overrides.push(PrivacyOverride {
            round: o.round,
            privacy: current,
        });
    }

    let t = raw.train;
    cfg.train.learning_rate = t.learning_rate.unwrap_or(d.train.learning_rate);
    cfg.train.batch_size = t.batch_size.unwrap_or(d.train.batch_size);
    cfg.train.l2_reg = t.l2_reg.unwrap_or(d.train.l2_reg);
    cfg.weight_by_full_local_size = t
        .weight_by_full_local_size
        .unwrap_or(d.weight_by_full_local_size);

    cfg.partition.dirichlet_alpha = raw
        .partition
        .dirichlet_alpha
        .unwrap_or(d.partition.dirichlet_alpha);
    cfg.partition.val_fraction = raw.partition.val_fraction.unwrap_or(d.partition.val_fraction);

    cfg.ebcd_tolerance = raw.ebcd.tolerance_factor.unwrap_or(d.ebcd_tolerance);
    cfg.ebcd_rollback = raw.ebcd.rollback_on_alert.unwrap_or(d.ebcd_rollback);
    cfg.ebcd_screen_clients = raw.ebcd.screen_clients.unwrap_or(d.ebcd_screen_clients);

    cfg.client_patience = raw.earlystop.client_patience.unwrap_or(d.client_patience);
    cfg.server_patience = raw.earlystop.server_patience.unwrap_or(d.server_patience);
    cfg.min_delta = raw.earlystop.min_delta.unwrap_or(d.min_delta);

    cfg.rollback_depth = raw.recovery.rollback_depth.unwrap_or(d.rollback_depth);

    if let Some(h) = raw.zkip.shared_secret_hex {
        cfg.shared_secret = Some(
            hex::decode(h.trim())
                .map_err(|e| Error::InvalidConfig(format!("shared secret: {e}")))?,
        );
    }

    cfg.fault_script = FaultScript::new(
        raw.fault
            .into_iter()
            .map(fault_event)
            .collect::<Result<Vec<_>>>()?,
    );
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SimConfig> {
        parse_config(text, Path::new("/scenarios"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("").unwrap(), SimConfig::default());
    }

    #[test]
    fn full_example() {
        let cfg = parse(
            r#"
            master_seed = 7
            num_rounds = 12
            [privacy]
            epsilon = 0.5
            clip_bound = 0.1
            [[privacy_override]]
            round = 3
            epsilon = 2.0
            [ebcd]
            rollback_on_alert = true
            [[fault]]
            round = 4
            target = "server"
            kind = "crash"
            [[fault]]
            round = 6
            target = "client"
            client = 2
            kind = "corrupt_tampered"
            scale = 100.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.num_rounds, 12);
        assert_eq!(cfg.privacy.epsilon, 0.5);
        assert_eq!(cfg.privacy_at(2).epsilon, 0.5);
        assert_eq!(cfg.privacy_at(3).epsilon, 2.0);
        assert_eq!(cfg.privacy_at(3).clip_bound, 0.1);
        assert!(cfg.ebcd_rollback);
        assert_eq!(cfg.fault_script.events.len(), 2);
        assert_eq!(
            cfg.fault_script.events[1].kind,
            FaultKind::CorruptTampered { scale: 100.0 }
        );
    }

    #[test]
    fn csv_paths_are_relative_to_the_file() {
        let cfg = parse(
            r#"
            [data]
            source = "csv"
            application_csv = "a.csv"
            credit_csv = "/abs/c.csv"
            "#,
        )
        .unwrap();
        let DataSource::Csv { application, credit, .. } = cfg.data else {
            panic!("expected csv source")
        };
        assert_eq!(application, Path::new("/scenarios/a.csv"));
        assert_eq!(credit, Path::new("/abs/c.csv"));
    }

    #[test]
    fn malformed_files_rejected() {
        for bad in [
            "num_clients = \"five\"",
            "unknown_key = 1",
            "[privacy]\nepsilon = -1.0",
            "[privacy]\ndelta = 1.5",
            "[[fault]]\nround = 1\ntarget = \"server\"\nkind = \"explode\"",
            "[[fault]]\nround = 1\ntarget = \"client\"\nkind = \"crash\"",
            "[[fault]]\nround = 1\ntarget = \"client\"\nclient = 0\nkind = \"corrupt_signed\"",
            "[data]\nsource = \"csv\"",
            "num_clients = 0",
            "[zkip]\nshared_secret_hex = \"abcd\"",
        ] {
            assert!(
                matches!(parse(bad), Err(Error::InvalidConfig(_))),
                "accepted: {bad}"
            );
        }
    }
}
