//! `fedtrail` command-line runner.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 runtime
//! failure (outputs so far are still written), 3 audit chain break.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedtrail::config::parse_config;
use fedtrail::sim::{self, SimConfig, Termination};
use fedtrail::tcm::verify_audit_log;
use sha2::{Digest, Sha256};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_AUDIT: u8 = 3;

#[derive(Parser)]
#[command(name = "fedtrail", version, about = "Deterministic federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its per-round CSVs.
    Simulate(RunArgs),
    /// Re-verify the hash chain of an exported audit log.
    VerifyAudit {
        /// Path to an `audit_manifold.log`.
        path: PathBuf,
    },
    /// Run a scenario once per epsilon and summarise the trade-off.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated privacy budgets.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        epsilons: Vec<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `master_seed` from the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Restore the previous global model when corruption screening alerts.
    #[arg(long)]
    ebcd_rollback: bool,
    /// Rounds a newly elected coordinator rolls back.
    #[arg(long)]
    rollback_depth: Option<u32>,
}

struct Loaded {
    cfg: SimConfig,
    config_sha256: String,
}

fn load(args: &RunArgs) -> Result<Loaded, String> {
    let bytes = fs::read(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| "config is not UTF-8".to_string())?;
    let base = args.config.parent().unwrap_or_else(|| Path::new("."));
    let mut cfg = parse_config(&text, base).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if args.ebcd_rollback {
        cfg.ebcd_rollback = true;
    }
    if let Some(depth) = args.rollback_depth {
        cfg.rollback_depth = depth;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(Loaded {
        cfg,
        config_sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Result of one run as far as the exit code is concerned.
enum RunStatus {
    Done(sim::SimOutcome),
    BadInput(String),
    Failed(String),
}

fn execute(cfg: &SimConfig, out: &Path, manifest: &[(&str, String)]) -> RunStatus {
    let prepared = match sim::prepare_data(cfg) {
        Ok(p) => p,
        Err(e) => return RunStatus::BadInput(e.to_string()),
    };
    let mut lines = manifest.to_vec();
    let status = match sim::run_prepared(cfg, &prepared) {
        Ok(outcome) => {
            if let Err(e) = output::write_outcome(out, &outcome) {
                return RunStatus::Failed(format!("writing outputs: {e}"));
            }
            lines.push(("rounds_executed", outcome.history.len().to_string()));
            lines.push(("termination", output::termination_label(&outcome.termination)));
            if let Termination::Halted { round } = outcome.termination {
                let msg = format!("no coordinator available at round {round}");
                RunStatus::Failed(msg)
            } else {
                RunStatus::Done(outcome)
            }
        }
        Err(e) => {
            lines.push(("termination", format!("error: {e}")));
            RunStatus::Failed(e.to_string())
        }
    };
    if let Err(e) = output::write_manifest(out, &lines) {
        return RunStatus::Failed(format!("writing manifest: {e}"));
    }
    status
}

fn manifest_lines(loaded: &Loaded, config: &Path) -> Vec<(&'static str, String)> {
    vec![
        ("fedtrail_version", env!("CARGO_PKG_VERSION").to_string()),
        ("config_path", config.display().to_string()),
        ("config_sha256", loaded.config_sha256.clone()),
        ("master_seed", loaded.cfg.master_seed.to_string()),
        ("ebcd_rollback", loaded.cfg.ebcd_rollback.to_string()),
        ("rollback_depth", loaded.cfg.rollback_depth.to_string()),
    ]
}

fn cmd_simulate(args: &RunArgs) -> ExitCode {
    let loaded = match load(args) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: invalid config: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let manifest = manifest_lines(&loaded, &args.config);
    match execute(&loaded.cfg, &args.out, &manifest) {
        RunStatus::Done(outcome) => {
            println!(
                "{} rounds, {}; outputs in {}",
                outcome.history.len(),
                output::termination_label(&outcome.termination),
                args.out.display()
            );
            ExitCode::SUCCESS
        }
        RunStatus::BadInput(e) => {
            eprintln!("error: invalid input: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        RunStatus::Failed(e) => {
            eprintln!("error: run failed: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn cmd_verify_audit(path: &Path) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if text.trim().is_empty() {
        eprintln!("warning: {} is empty; an empty chain is valid", path.display());
        return ExitCode::SUCCESS;
    }
    let report = verify_audit_log(&text);
    match report.first_bad {
        None => {
            println!("ok: {} entries verified", report.entries);
            ExitCode::SUCCESS
        }
        Some(i) => {
            println!("chain break at entry {i}");
            ExitCode::from(EXIT_AUDIT)
        }
    }
}

fn epsilon_dir(eps: f64) -> String {
    format!("eps_{eps}")
}

fn cmd_sweep(args: &RunArgs, epsilons: &[f64]) -> ExitCode {
    let loaded = match load(args) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: invalid config: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(bad) = epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        eprintln!("error: epsilon {bad} must be positive");
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Err(e) = fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    let mut summary =
        String::from("epsilon,status,final_accuracy,final_f1,final_auc,mean_sigma\n");
    let mut any_failed = false;
    for &eps in epsilons {
        let mut cfg = loaded.cfg.clone();
        cfg.privacy.enabled = true;
        cfg.privacy.epsilon = eps;
        let dir = args.out.join(epsilon_dir(eps));
        let mut manifest = manifest_lines(&loaded, &args.config);
        manifest.push(("epsilon", output::float(eps)));
        let row = match execute(&cfg, &dir, &manifest) {
            RunStatus::Done(outcome) => match outcome.history.last() {
                Some(last) => {
                    let n = outcome.history.len() as f64;
                    let mean_sigma =
                        outcome.history.iter().map(|r| r.mean_noise_sigma).sum::<f64>() / n;
                    format!(
                        "{},ok,{},{},{},{}",
                        output::float(eps),
                        output::float(last.accuracy),
                        output::float(last.f1),
                        last.auc.map_or_else(|| "null".to_string(), output::float),
                        output::float(mean_sigma)
                    )
                }
                None => format!("{},ok,null,null,null,null", output::float(eps)),
            },
            RunStatus::BadInput(e) | RunStatus::Failed(e) => {
                eprintln!("warning: epsilon {eps} failed: {e}");
                any_failed = true;
                format!("{},failed,null,null,null,null", output::float(eps))
            }
        };
        summary.push_str(&row);
        summary.push('\n');
        println!("epsilon {eps}: {}", dir.display());
    }
    if let Err(e) = fs::write(args.out.join("sweep_summary.csv"), summary) {
        eprintln!("error: writing summary: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    if any_failed {
        ExitCode::from(EXIT_RUNTIME)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::VerifyAudit { path } => cmd_verify_audit(path),
        Command::Sweep { run, epsilons } => cmd_sweep(run, epsilons),
    }
}
