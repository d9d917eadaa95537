//! Discrete-event machinery: the event queue, seeded random streams,
//! geometric trial sampling and lazily dephased stored pairs.

mod pair;
mod queue;
mod rng;

pub use pair::{StoredQubit, TimedPair};
pub use queue::{EventQueue, SimEvent};
pub use rng::{mix_seed, sample_geometric, stream};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("event queue is empty")]
    EmptyQueue,
    #[error("cannot schedule or update at t = {time} s before the current time {now} s")]
    TimeRegression { now: f64, time: f64 },
    #[error("trial success probability {0} is outside (0, 1]")]
    InvalidProbability(f64),
    #[error("simulation stalled at t = {time} s with {collected} of {wanted} samples")]
    NoProgress { time: f64, collected: usize, wanted: usize },
    #[error("event limit of {limit} reached with {collected} of {wanted} samples")]
    EventLimit { limit: u64, collected: usize, wanted: usize },
}
