//! Per-round CSV series, the audit log, and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use fedtrail::sim::{RoundMetrics, SimOutcome, Termination};

/// The nine per-round series, in the order they are written.
pub const SERIES_FILES: [&str; 9] = [
    "global_metrics.csv",
    "dp_noise_scale.csv",
    "server_status.csv",
    "tcm_state_count.csv",
    "delta_norm.csv",
    "zkip_failures.csv",
    "ebcd_stats.csv",
    "ebcd_alerts.csv",
    "earlystop_server_best_val_acc.csv",
];
pub const AUDIT_LOG: &str = "audit_manifold.log";
pub const MANIFEST: &str = "run_manifest.txt";

/// 17 significant digits, enough to read back the exact `f64`.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn series(header: &str, rows: &[RoundMetrics], cells: impl Fn(&RoundMetrics) -> String) -> String {
    let mut out = format!("round,{header}\n");
    for r in rows {
        let _ = writeln!(out, "{},{}", r.round, cells(r));
    }
    out
}

fn render(name: &str, rows: &[RoundMetrics]) -> String {
    match name {
        "global_metrics.csv" => series("accuracy,f1,auc", rows, |r| {
            let auc = r.auc.map_or_else(|| "null".to_string(), float);
            format!("{},{},{}", float(r.accuracy), float(r.f1), auc)
        }),
        "dp_noise_scale.csv" => series("mean_noise_sigma", rows, |r| float(r.mean_noise_sigma)),
        "server_status.csv" => series("server_alive,coordinator_id,active_client_count", rows, |r| {
            format!(
                "{},{},{}",
                u8::from(r.server_alive),
                r.coordinator_id,
                r.active_client_count
            )
        }),
        "tcm_state_count.csv" => series("tcm_entry_count", rows, |r| r.tcm_entry_count.to_string()),
        "delta_norm.csv" => series("aggregated_delta_l2", rows, |r| float(r.aggregated_delta_l2)),
        "zkip_failures.csv" => series("zkip_failures", rows, |r| r.zkip_failures.to_string()),
        "ebcd_stats.csv" => series("variance,skewness,kurtosis", rows, |r| {
            format!(
                "{},{},{}",
                float(r.ebcd.variance),
                float(r.ebcd.skewness),
                float(r.ebcd.kurtosis)
            )
        }),
        "ebcd_alerts.csv" => series("alert", rows, |r| u8::from(r.ebcd_alert).to_string()),
        "earlystop_server_best_val_acc.csv" => {
            series("server_best_val_acc", rows, |r| float(r.server_best_val_acc))
        }
        other => unreachable!("unknown series {other}"),
    }
}

pub fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Completed => "completed".into(),
        Termination::EarlyStopped { round, best_round } => {
            format!("early_stopped round={round} best_round={best_round}")
        }
        Termination::Halted { round } => format!("halted round={round}"),
    }
}

/// Writes the CSV series and the audit log.
pub fn write_outcome(dir: &Path, outcome: &SimOutcome) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for name in SERIES_FILES {
        fs::write(dir.join(name), render(name, &outcome.history))?;
    }
    fs::write(dir.join(AUDIT_LOG), outcome.manifold.to_audit_log())
}

pub fn write_manifest(dir: &Path, lines: &[(&str, String)]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = String::new();
    for (k, v) in lines {
        let _ = writeln!(text, "{k} = {v}");
    }
    fs::write(dir.join(MANIFEST), text)
}
