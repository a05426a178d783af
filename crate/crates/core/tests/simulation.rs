use fedtrail::config::load_config;
use fedtrail::sim::{
    prepare_data, replay_check, run, DataSource, FaultEvent, FaultKind, FaultScript, FaultTarget,
    SimConfig, Termination,
};
use fedtrail::tcm::CoordinatorAction;
use std::path::Path;

fn small(seed: u64) -> SimConfig {
    SimConfig {
        num_rounds: 6,
        data: DataSource::Synthetic {
            n: 600,
            d: 8,
            class_balance: 0.5,
            separation: 2.0,
        },
        master_seed: seed,
        ..SimConfig::default()
    }
}

fn scenario(name: &str) -> SimConfig {
    load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)).unwrap()
}

#[test]
fn bundled_scenarios_parse() {
    for name in [
        "scenario_clean.cfg",
        "scenario_server_crash.cfg",
        "scenario_coordinator_crash.cfg",
        "scenario_corrupt_signed.cfg",
        "scenario_corrupt_tampered.cfg",
    ] {
        let cfg = scenario(name);
        assert_eq!(cfg.num_rounds, 10, "{name}");
        assert_eq!(cfg.master_seed, 42, "{name}");
    }
}

#[test]
fn tcm_count_is_monotone_and_bounded_below() {
    let mut cfg = small(3);
    cfg.fault_script = FaultScript::new(vec![
        FaultEvent { round: 2, target: FaultTarget::Server, kind: FaultKind::Crash },
        FaultEvent { round: 4, target: FaultTarget::Server, kind: FaultKind::Recover },
    ]);
    let out = run(&cfg).unwrap();
    let mut prev = 0;
    for (r, row) in out.history.iter().enumerate() {
        assert!(row.tcm_entry_count >= prev);
        assert!(row.tcm_entry_count > r);
        prev = row.tcm_entry_count;
    }
    assert_eq!(out.manifold.len(), prev);
    let actions: Vec<CoordinatorAction> = out.manifold.entries().iter().map(|e| e.action).collect();
    assert!(actions.contains(&CoordinatorAction::Election));
    assert!(actions.contains(&CoordinatorAction::Handback));
}

#[test]
fn dropout_does_not_shift_other_clients() {
    let base = run(&small(5)).unwrap();
    let mut cfg = small(5);
    cfg.fault_script = FaultScript::new(vec![FaultEvent {
        round: 4,
        target: FaultTarget::Client(3),
        kind: FaultKind::Dropout,
    }]);
    let dropped = run(&cfg).unwrap();
    for r in 0..4 {
        assert_eq!(base.history[r].fingerprint(), dropped.history[r].fingerprint());
    }
    assert_eq!(dropped.history[4].active_client_count, 4);
    assert_eq!(dropped.history[5].active_client_count, 5);

    // Round-4 contributors other than client 3 report the same noise draw.
    let contributors = |m: &fedtrail::tcm::Manifold| {
        m.entries()
            .iter()
            .find(|e| e.round == 4 && e.action == CoordinatorAction::Aggregate)
            .unwrap()
            .contributors
            .clone()
    };
    let a = contributors(&base.manifold);
    let b = contributors(&dropped.manifold);
    assert_eq!(a.len(), 5);
    assert_eq!(b.len(), 4);
    assert!(b.iter().all(|c| c.client_id != 3));
}

#[test]
fn exactly_one_coordinator_under_cascading_failures() {
    let mut cfg = small(9);
    cfg.fault_script = FaultScript::new(vec![
        FaultEvent { round: 1, target: FaultTarget::Server, kind: FaultKind::Crash },
        FaultEvent { round: 2, target: FaultTarget::Client(0), kind: FaultKind::Crash },
        FaultEvent { round: 3, target: FaultTarget::Client(1), kind: FaultKind::Dropout },
        FaultEvent { round: 5, target: FaultTarget::Server, kind: FaultKind::Recover },
    ]);
    let out = run(&cfg).unwrap();
    let coords: Vec<i64> = out.history.iter().map(|r| r.coordinator_id).collect();
    assert_eq!(coords, [-1, 0, 1, 2, 2, -1]);
    assert!(out.manifold.verify_chain());
    assert!(replay_check(&cfg));
}

#[test]
fn failover_restores_from_log() {
    let mut cfg = small(4);
    cfg.rollback_depth = 2;
    cfg.fault_script = FaultScript::new(vec![FaultEvent {
        round: 3,
        target: FaultTarget::Server,
        kind: FaultKind::Crash,
    }]);
    let out = run(&cfg).unwrap();
    let election = out
        .manifold
        .entries()
        .iter()
        .find(|e| e.action == CoordinatorAction::Election)
        .unwrap();
    assert_eq!(election.round, 3);
    assert!(election.global_params.bitwise_eq(&out.round_models[1]));
}

#[test]
fn aggregate_weights_follow_local_sizes() {
    let cfg = small(2);
    let prepared = prepare_data(&cfg).unwrap();
    let out = run(&cfg).unwrap();
    let entry = out
        .manifold
        .entries()
        .iter()
        .find(|e| e.action == CoordinatorAction::Aggregate)
        .unwrap();
    for c in &entry.contributors {
        let split = &prepared.clients[c.client_id as usize];
        assert_eq!(c.sample_count, (split.train.len() + split.val.len()) as u64);
        assert!(c.zkip_passed);
    }
    let total: u64 = entry.contributors.iter().map(|c| c.sample_count).sum();
    let pool: usize = prepared.clients.iter().map(|c| c.total_samples()).sum();
    assert_eq!(total as usize, pool);
    assert_eq!(pool + prepared.server_val.len() + prepared.test.len(), 600);
}

#[test]
fn server_early_stop_restores_best_model() {
    let mut cfg = small(11);
    cfg.num_rounds = 30;
    cfg.server_patience = 1;
    cfg.privacy.epsilon = 0.1;
    let out = run(&cfg).unwrap();
    let Termination::EarlyStopped { round, best_round } = out.termination else {
        panic!("expected early stop, got {:?}", out.termination);
    };
    assert_eq!(out.history.len(), round as usize + 1);
    assert!(best_round < round);
    let last = out.manifold.last().unwrap();
    assert_eq!(last.action, CoordinatorAction::RecoveryRollback);
    assert!(out.final_model.bitwise_eq(&last.global_params));
    let best_acc = out.history[best_round as usize].server_best_val_acc;
    assert_eq!(out.history.last().unwrap().server_best_val_acc, best_acc);
}
