use serde::{Deserialize, Serialize};

use crate::sim::TimedPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutoffDecision {
    Keep,
    Discard,
}

/// Whether a qubit confirmed at `confirmed_at` may still be used at `now`.
/// Exactly `t_cut` after confirmation is still allowed.
pub fn within_cutoff(confirmed_at: f64, now: f64, t_cut: Option<f64>) -> bool {
    match t_cut {
        None => true,
        Some(t) => now - confirmed_at <= t,
    }
}

/// Cutoff rule for a whole pair: it is discarded as soon as any of its
/// stored qubits has waited longer than `t_cut` since confirmation.
pub fn apply_cutoff(pair: &TimedPair, now: f64, t_cut: Option<f64>) -> CutoffDecision {
    let keep = pair
        .qubits
        .iter()
        .filter(|q| q.in_memory())
        .all(|q| within_cutoff(q.confirmed_at, now, t_cut));
    if keep {
        CutoffDecision::Keep
    } else {
        CutoffDecision::Discard
    }
}
