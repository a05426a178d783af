//! Temporal checkpoint log: an append-only, hash-chained record of every
//! global model state and the coordinator action that produced it.
//!
//! Entry hash = SHA-256 over the canonical entry encoding (all fields except
//! `entry_hash`, with `prev_hash` last). Encoding, in order:
//!
//! ```text
//! round            u64 BE
//! timestamp        u64 BE   (logical clock, +1 per entry)
//! global_params    canonical_serialize(flat params)
//! contributors     u32 BE count, then per contributor:
//!                  client_id u64 BE, sample_count u64 BE,
//!                  noise_sigma f64 BE, zkip_passed u8
//! coordinator_id   i64 BE   (-1 = server)
//! action           u8
//! prev_hash        32 bytes (all zero for the first entry)
//! ```
//!
//! A hash chain alone cannot detect removal of a suffix of entries; a
//! truncated log still verifies.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{decode_f64s, encode_f64s, ParamVector};

/// Coordinator id recorded when the central server coordinates.
pub const SERVER_COORDINATOR_ID: i64 = -1;

pub const GENESIS_PREV_HASH: [u8; 32] = [0u8; 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoordinatorAction {
    /// Initial global model, before round 0 trains.
    Genesis,
    Aggregate,
    RecoveryRollback,
    Election,
    /// A recovered server took the coordinator role back from a client.
    Handback,
    SkippedRound,
}

impl CoordinatorAction {
    pub fn code(self) -> u8 {
        match self {
            Self::Genesis => 0,
            Self::Aggregate => 1,
            Self::RecoveryRollback => 2,
            Self::Election => 3,
            Self::Handback => 4,
            Self::SkippedRound => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Genesis => "GENESIS",
            Self::Aggregate => "AGGREGATE",
            Self::RecoveryRollback => "RECOVERY_ROLLBACK",
            Self::Election => "ELECTION",
            Self::Handback => "HANDBACK",
            Self::SkippedRound => "SKIPPED_ROUND",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            Self::Genesis,
            Self::Aggregate,
            Self::RecoveryRollback,
            Self::Election,
            Self::Handback,
            Self::SkippedRound,
        ]
        .into_iter()
        .find(|a| a.name() == name)
    }
}

/// Per-client record of one accepted or rejected update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContributorSummary {
    pub client_id: u64,
    pub sample_count: u64,
    pub noise_sigma: f64,
    pub zkip_passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub round: u64,
    pub timestamp: u64,
    pub global_params: ParamVector,
    pub contributors: Vec<ContributorSummary>,
    pub coordinator_id: i64,
    pub action: CoordinatorAction,
    pub prev_hash: [u8; 32],
    pub entry_hash: [u8; 32],
}

impl CheckpointEntry {
    /// Canonical encoding of every field except `entry_hash`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let flat = self.global_params.to_flat();
        let mut out = Vec::with_capacity(64 + 8 * flat.len() + 25 * self.contributors.len());
        out.extend_from_slice(&self.round.to_be_bytes());
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out.extend_from_slice(&encode_f64s(&flat));
        out.extend_from_slice(&(self.contributors.len() as u32).to_be_bytes());
        for c in &self.contributors {
            out.extend_from_slice(&c.client_id.to_be_bytes());
            out.extend_from_slice(&c.sample_count.to_be_bytes());
            out.extend_from_slice(&c.noise_sigma.to_be_bytes());
            out.push(u8::from(c.zkip_passed));
        }
        out.extend_from_slice(&self.coordinator_id.to_be_bytes());
        out.push(self.action.code());
        out.extend_from_slice(&self.prev_hash);
        out
    }

    pub fn compute_hash(&self) -> [u8; 32] {
        Sha256::digest(self.canonical_bytes()).into()
    }
}

/// Fields supplied by the coordinator when logging a state.
#[derive(Debug, Clone)]
pub struct NewEntry {
    pub round: u64,
    pub global_params: ParamVector,
    pub contributors: Vec<ContributorSummary>,
    pub coordinator_id: i64,
    pub action: CoordinatorAction,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifold {
    entries: Vec<CheckpointEntry>,
}

impl Manifold {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps existing entries without checking them; see [`Manifold::verify_chain`].
    pub fn from_entries(entries: Vec<CheckpointEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[CheckpointEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&CheckpointEntry> {
        self.entries.last()
    }

    /// Seals and appends an entry.
    pub fn append(&mut self, new: NewEntry) -> Result<&CheckpointEntry> {
        let (prev_hash, timestamp) = match self.entries.last() {
            Some(last) => {
                if new.round < last.round {
                    return Err(Error::RoundRegression {
                        last: last.round,
                        got: new.round,
                    });
                }
                (last.entry_hash, last.timestamp + 1)
            }
            None => (GENESIS_PREV_HASH, 0),
        };
        let mut entry = CheckpointEntry {
            round: new.round,
            timestamp,
            global_params: new.global_params,
            contributors: new.contributors,
            coordinator_id: new.coordinator_id,
            action: new.action,
            prev_hash,
            entry_hash: [0; 32],
        };
        entry.entry_hash = entry.compute_hash();
        self.entries.push(entry);
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Index of the first entry whose hash, link, or ordering is broken.
    pub fn first_invalid(&self) -> Option<usize> {
        let mut prev = GENESIS_PREV_HASH;
        let mut prev_round = 0u64;
        for (i, e) in self.entries.iter().enumerate() {
            if e.prev_hash != prev || e.compute_hash() != e.entry_hash || e.round < prev_round {
                return Some(i);
            }
            prev = e.entry_hash;
            prev_round = e.round;
        }
        None
    }

    pub fn verify_chain(&self) -> bool {
        self.first_invalid().is_none()
    }

    /// Parameters of the latest entry whose round is `<= target_round`.
    pub fn rollback(&self, target_round: i64) -> Result<ParamVector> {
        self.entries
            .iter()
            .rev()
            .find(|e| i128::from(e.round) <= i128::from(target_round))
            .map(|e| e.global_params.clone())
            .ok_or(Error::CheckpointNotFound(target_round))
    }

    /// One JSON object per line; hashes, params and sigmas hex-encoded.
    pub fn to_audit_log(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            let record = AuditRecord::from_entry(i, e);
            out.push_str(&serde_json::to_string(&record).expect("audit record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct AuditContributor {
    client_id: u64,
    sample_count: u64,
    noise_sigma: String,
    zkip_passed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct AuditRecord {
    index: usize,
    round: u64,
    timestamp: u64,
    coordinator_id: i64,
    action: String,
    params: String,
    contributors: Vec<AuditContributor>,
    prev_hash: String,
    entry_hash: String,
}

impl AuditRecord {
    fn from_entry(index: usize, e: &CheckpointEntry) -> Self {
        Self {
            index,
            round: e.round,
            timestamp: e.timestamp,
            coordinator_id: e.coordinator_id,
            action: e.action.name().to_string(),
            params: hex::encode(encode_f64s(&e.global_params.to_flat())),
            contributors: e
                .contributors
                .iter()
                .map(|c| AuditContributor {
                    client_id: c.client_id,
                    sample_count: c.sample_count,
                    noise_sigma: hex::encode(c.noise_sigma.to_be_bytes()),
                    zkip_passed: c.zkip_passed,
                })
                .collect(),
            prev_hash: hex::encode(e.prev_hash),
            entry_hash: hex::encode(e.entry_hash),
        }
    }

    fn into_entry(self) -> Result<CheckpointEntry> {
        let bad = |what: &str| Error::Malformed(format!("bad {what}"));
        let hash32 = |s: &str, what: &str| -> Result<[u8; 32]> {
            hex::decode(s)
                .map_err(|_| bad(what))?
                .try_into()
                .map_err(|_| bad(what))
        };
        let param_bytes = hex::decode(&self.params).map_err(|_| bad("params"))?;
        let (flat, rest) = decode_f64s(&param_bytes)?;
        if !rest.is_empty() {
            return Err(bad("params"));
        }
        let contributors = self
            .contributors
            .iter()
            .map(|c| {
                let bytes: [u8; 8] = hex::decode(&c.noise_sigma)
                    .map_err(|_| bad("noise_sigma"))?
                    .try_into()
                    .map_err(|_| bad("noise_sigma"))?;
                Ok(ContributorSummary {
                    client_id: c.client_id,
                    sample_count: c.sample_count,
                    noise_sigma: f64::from_be_bytes(bytes),
                    zkip_passed: c.zkip_passed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CheckpointEntry {
            round: self.round,
            timestamp: self.timestamp,
            global_params: ParamVector::from_flat(&flat)?,
            contributors,
            coordinator_id: self.coordinator_id,
            action: CoordinatorAction::from_name(&self.action).ok_or_else(|| bad("action"))?,
            prev_hash: hash32(&self.prev_hash, "prev_hash")?,
            entry_hash: hash32(&self.entry_hash, "entry_hash")?,
        })
    }
}

/// Result of checking an exported audit log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub entries: usize,
    /// First line index that fails to parse, hash, or link.
    pub first_bad: Option<usize>,
}

/// Parses and verifies an exported audit log. Blank lines are ignored.
pub fn verify_audit_log(text: &str) -> AuditReport {
    let mut entries = Vec::new();
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let parsed = serde_json::from_str::<AuditRecord>(line)
            .map_err(|e| Error::Malformed(e.to_string()))
            .and_then(|r| {
                if r.index != i {
                    return Err(Error::Malformed(format!("index {} at line {i}", r.index)));
                }
                r.into_entry()
            });
        match parsed {
            Ok(e) => entries.push(e),
            Err(_) => {
                return AuditReport {
                    entries: i + 1,
                    first_bad: Some(i),
                }
            }
        }
    }
    let manifold = Manifold::from_entries(entries);
    AuditReport {
        entries: manifold.len(),
        first_bad: manifold.first_invalid(),
    }
}

/// Parses an exported audit log back into a manifold without verifying it.
pub fn parse_audit_log(text: &str) -> Result<Manifold> {
    let entries = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            serde_json::from_str::<AuditRecord>(line)
                .map_err(|e| Error::Malformed(e.to_string()))?
                .into_entry()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Manifold::from_entries(entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: f64) -> ParamVector {
        ParamVector::new(vec![seed, -seed * 0.5, seed * 2.0], seed / 3.0).unwrap()
    }

    fn entry(round: u64, action: CoordinatorAction) -> NewEntry {
        NewEntry {
            round,
            global_params: params(round as f64 + 0.25),
            contributors: vec![ContributorSummary {
                client_id: round,
                sample_count: 40 + round,
                noise_sigma: 0.5,
                zkip_passed: true,
            }],
            coordinator_id: SERVER_COORDINATOR_ID,
            action,
        }
    }

    fn ten() -> Manifold {
        let mut m = Manifold::new();
        for r in 0..10 {
            m.append(entry(r, CoordinatorAction::Aggregate)).unwrap();
        }
        m
    }

    #[test]
    fn genesis_and_chain_rules() {
        let mut m = Manifold::new();
        let first = m.append(entry(0, CoordinatorAction::Genesis)).unwrap().clone();
        assert_eq!(first.prev_hash, [0u8; 32]);
        assert_eq!(first.timestamp, 0);
        let second = m.append(entry(0, CoordinatorAction::Aggregate)).unwrap().clone();
        assert_eq!(second.prev_hash, first.entry_hash);
        assert_eq!(second.timestamp, 1);
        assert!(m.verify_chain());
    }

    #[test]
    fn independent_hash_recomputation() {
        let m = ten();
        let mut prev = [0u8; 32];
        for e in m.entries() {
            let mut pre = Vec::new();
            pre.extend_from_slice(&e.round.to_be_bytes());
            pre.extend_from_slice(&e.timestamp.to_be_bytes());
            let flat = e.global_params.to_flat();
            pre.extend_from_slice(&(flat.len() as u32).to_be_bytes());
            for v in &flat {
                pre.extend_from_slice(&v.to_bits().to_be_bytes());
            }
            pre.extend_from_slice(&(e.contributors.len() as u32).to_be_bytes());
            for c in &e.contributors {
                pre.extend_from_slice(&c.client_id.to_be_bytes());
                pre.extend_from_slice(&c.sample_count.to_be_bytes());
                pre.extend_from_slice(&c.noise_sigma.to_bits().to_be_bytes());
                pre.push(c.zkip_passed as u8);
            }
            pre.extend_from_slice(&e.coordinator_id.to_be_bytes());
            pre.push(1);
            pre.extend_from_slice(&prev);
            let h: [u8; 32] = Sha256::digest(&pre).into();
            assert_eq!(h, e.entry_hash);
            prev = h;
        }
    }

    #[test]
    fn round_regression_rejected() {
        let mut m = ten();
        assert!(matches!(
            m.append(entry(3, CoordinatorAction::Aggregate)),
            Err(Error::RoundRegression { last: 9, got: 3 })
        ));
    }

    #[test]
    fn empty_manifold_verifies() {
        assert!(Manifold::new().verify_chain());
    }

    #[test]
    fn param_flip_detected() {
        let m = ten();
        let mut entries = m.entries().to_vec();
        let mut flat = entries[3].global_params.to_flat();
        flat[1] = f64::from_bits(flat[1].to_bits() ^ 0x0100);
        entries[3].global_params = ParamVector::from_flat(&flat).unwrap();
        let tampered = Manifold::from_entries(entries);
        assert!(!tampered.verify_chain());
        assert_eq!(tampered.first_invalid(), Some(3));
    }

    #[test]
    fn suffix_truncation_is_undetectable() {
        let m = ten();
        let truncated = Manifold::from_entries(m.entries()[..9].to_vec());
        assert!(truncated.verify_chain());
    }

    #[test]
    fn rollback_semantics() {
        let m = ten();
        assert!(m.rollback(9).unwrap().bitwise_eq(&params(9.25)));
        assert!(m.rollback(4).unwrap().bitwise_eq(&params(4.25)));
        assert!(m.rollback(100).unwrap().bitwise_eq(&params(9.25)));
        assert!(matches!(m.rollback(-1), Err(Error::CheckpointNotFound(-1))));
        assert!(Manifold::new().rollback(0).is_err());
    }

    #[test]
    fn rollback_prefers_latest_entry_of_a_round() {
        let mut m = ten();
        let mut recovery = entry(9, CoordinatorAction::RecoveryRollback);
        recovery.global_params = params(-1.0);
        m.append(recovery).unwrap();
        assert!(m.rollback(9).unwrap().bitwise_eq(&params(-1.0)));
    }

    #[test]
    fn audit_log_round_trip() {
        let m = ten();
        let text = m.to_audit_log();
        assert_eq!(text.lines().count(), 10);
        let back = parse_audit_log(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            verify_audit_log(&text),
            AuditReport {
                entries: 10,
                first_bad: None
            }
        );
    }

    #[test]
    fn audit_log_hex_flip_reports_index() {
        let text = ten().to_audit_log();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let pos = lines[4].find("\"params\":\"").unwrap() + 20;
        let mut bytes = lines[4].clone().into_bytes();
        bytes[pos] = if bytes[pos] == b'0' { b'1' } else { b'0' };
        lines[4] = String::from_utf8(bytes).unwrap();
        let report = verify_audit_log(&lines.join("\n"));
        assert_eq!(report.first_bad, Some(4));
    }

    #[test]
    fn empty_audit_log_is_valid() {
        assert_eq!(
            verify_audit_log(""),
            AuditReport {
                entries: 0,
                first_bad: None
            }
        );
    }
}
