//! Coordinator role reassignment.
//!
//! The server coordinates while it is alive. When the current coordinator
//! misses its heartbeat, the lowest-id active client is elected. A recovered
//! server takes the role back at the next round boundary. Only one
//! coordinator exists at any time because the role is a single enum value on
//! a single logical timeline.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::tcm::SERVER_COORDINATOR_ID;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coordinator {
    Server,
    Client(u32),
}

impl Coordinator {
    /// Numeric id as written to checkpoints and CSVs (`-1` for the server).
    pub fn id(self) -> i64 {
        match self {
            Self::Server => SERVER_COORDINATOR_ID,
            Self::Client(id) => i64::from(id),
        }
    }
}

impl fmt::Display for Coordinator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Server => f.write_str("server"),
            Self::Client(id) => write!(f, "client {id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleState {
    pub coordinator: Coordinator,
    pub server_alive: bool,
    /// Clients that are up and participating this round.
    pub active_clients: BTreeSet<u32>,
    pub election_count: u32,
}

impl RoleState {
    pub fn new(active_clients: impl IntoIterator<Item = u32>) -> Self {
        Self {
            coordinator: Coordinator::Server,
            server_alive: true,
            active_clients: active_clients.into_iter().collect(),
            election_count: 0,
        }
    }

    /// Whether the current coordinator would answer a heartbeat given the
    /// present liveness view.
    pub fn coordinator_heartbeat(&self) -> bool {
        match self.coordinator {
            Coordinator::Server => self.server_alive,
            Coordinator::Client(id) => self.active_clients.contains(&id),
        }
    }

    /// True iff the current coordinator missed its heartbeat.
    pub fn detect_failure(&self, heartbeat_ok: bool) -> bool {
        !heartbeat_ok
    }

    /// Elects the lowest-id active client as coordinator.
    pub fn elect(&mut self, round: u64) -> Result<u32> {
        let id = *self
            .active_clients
            .iter()
            .next()
            .ok_or(Error::NoActiveClients(round))?;
        self.coordinator = Coordinator::Client(id);
        self.election_count += 1;
        Ok(id)
    }

    /// Marks the server alive again and hands the role back if a client holds
    /// it. Returns whether a handback happened.
    pub fn on_server_recovery(&mut self) -> bool {
        self.server_alive = true;
        match self.coordinator {
            Coordinator::Server => false,
            Coordinator::Client(_) => {
                self.coordinator = Coordinator::Server;
                true
            }
        }
    }

    /// Role invariants: the server only coordinates while alive, a client only
    /// while active.
    pub fn is_consistent(&self) -> bool {
        self.coordinator_heartbeat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn healthy_heartbeat_is_not_a_failure() {
        let s = RoleState::new([0, 1, 2]);
        assert!(!s.detect_failure(s.coordinator_heartbeat()));
    }

    #[test]
    fn crashed_server_is_detected() {
        let mut s = RoleState::new([0, 1, 2]);
        s.server_alive = false;
        assert!(s.detect_failure(s.coordinator_heartbeat()));
    }

    #[test]
    fn elected_client_failure_is_detected() {
        let mut s = RoleState::new([0, 1, 2]);
        s.server_alive = false;
        assert_eq!(s.elect(4).unwrap(), 0);
        assert!(!s.detect_failure(s.coordinator_heartbeat()));
        s.active_clients.remove(&0);
        assert!(s.detect_failure(s.coordinator_heartbeat()));
    }

    #[test]
    fn election_picks_lowest_active_id() {
        let mut s = RoleState::new([2, 4, 0]);
        assert_eq!(s.elect(0).unwrap(), 0);
        assert_eq!(s.coordinator, Coordinator::Client(0));
        let mut single = RoleState::new([3]);
        assert_eq!(single.elect(0).unwrap(), 3);
    }

    #[test]
    fn repeated_elections() {
        let mut s = RoleState::new([0, 1, 2]);
        s.server_alive = false;
        assert_eq!(s.elect(4).unwrap(), 0);
        s.active_clients.remove(&0);
        assert_eq!(s.elect(5).unwrap(), 1);
        assert_eq!(s.election_count, 2);
    }

    #[test]
    fn no_active_clients_halts() {
        let mut s = RoleState::new([]);
        s.server_alive = false;
        assert!(matches!(s.elect(7), Err(Error::NoActiveClients(7))));
    }

    #[test]
    fn server_recovery_handback() {
        let mut s = RoleState::new([1, 2]);
        s.server_alive = false;
        s.elect(3).unwrap();
        assert!(s.on_server_recovery());
        assert_eq!(s.coordinator, Coordinator::Server);
        assert!(s.is_consistent());

        let mut never_failed = RoleState::new([1, 2]);
        let before = never_failed.clone();
        assert!(!never_failed.on_server_recovery());
        assert_eq!(never_failed, before);
    }

    #[test]
    fn coordinator_ids() {
        assert_eq!(Coordinator::Server.id(), -1);
        assert_eq!(Coordinator::Client(3).id(), 3);
    }
}
