use serde::{Deserialize, Serialize};

use super::SimError;
use crate::quantum::BellDiagonalState;

/// One half of an entangled pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoredQubit {
    /// Index of the holding station along the chain.
    pub node: usize,
    /// Dephasing time of the holding memory; `None` for a qubit that is
    /// measured on arrival and never stored.
    pub dephasing_time: Option<f64>,
    /// Time up to which storage noise has been applied.
    pub last_update: f64,
    /// When the elementary link this qubit belongs to was confirmed.
    pub confirmed_at: f64,
}

impl StoredQubit {
    pub fn in_memory(&self) -> bool {
        self.dephasing_time.is_some()
    }
}

/// An entangled pair whose storage noise is applied only when it is needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedPair {
    pub state: BellDiagonalState,
    pub qubits: [StoredQubit; 2],
}

impl TimedPair {
    pub fn new(state: BellDiagonalState, qubits: [StoredQubit; 2]) -> Self {
        debug_assert_ne!(qubits[0].node, qubits[1].node);
        Self { state, qubits }
    }

    /// Brings the stored state up to `now`, dephasing every qubit held in a
    /// memory for the time since its last update.
    pub fn lazy_update(&mut self, now: f64) -> Result<(), SimError> {
        for q in &mut self.qubits {
            if now < q.last_update {
                return Err(SimError::TimeRegression { now: q.last_update, time: now });
            }
            if let Some(tdp) = q.dephasing_time {
                self.state = self.state.dephase(now - q.last_update, tdp);
            }
            q.last_update = now;
        }
        Ok(())
    }

    pub fn updated(mut self, now: f64) -> Result<Self, SimError> {
        self.lazy_update(now)?;
        Ok(self)
    }
}
