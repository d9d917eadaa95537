//! Discrete-event Monte Carlo simulation of memory-assisted satellite QKD
//! repeater chains.
//!
//! The crate is layered bottom-up: [`geometry`] and [`optics`] turn a
//! constellation layout into link efficiencies, [`quantum`] holds the
//! Bell-diagonal state algebra, [`sim`] the event machinery, [`protocols`]
//! the repeater state machines, [`analysis`] the key-rate estimators and
//! [`config`], [`sweep`] and [`output`] the batch tooling around them.

// negated comparisons are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod geometry;
pub mod optics;
pub mod output;
pub mod protocols;
pub mod quadrature;
pub mod quantum;
pub mod sim;
pub mod sweep;

pub use analysis::{binary_entropy, effective_rate, key_rate, orbit_sweep, OrbitSweepResult, PhasePoint, RateResult};
pub use config::{parse_config, RunConfig};
pub use geometry::{GeometryConfig, GroundTrackLayout, NodeId};
pub use optics::{BackgroundParams, LinkBudget, OpticalParams};
pub use protocols::{
    run_point, simulate, ChainSetup, Cutoff, PointParams, ProtocolConfig, RunOptions, SampleRecord, Scenario,
};
pub use quantum::BellDiagonalState;
pub use sim::{SimEvent, TimedPair};
pub use sweep::{ResultRow, RowStatus};
