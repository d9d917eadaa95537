//! Fixtures shared by the criterion benchmarks.

use satrep_core::geometry::GroundTrackLayout;
use satrep_core::protocols::{Cutoff, PointParams, ProtocolConfig, Scenario};

/// A mid-range point with small memories, cheap enough to simulate in a
/// benchmark iteration.
pub fn point(scenario: Scenario, distance_km: f64) -> PointParams {
    PointParams {
        layout: GroundTrackLayout::symmetric(distance_km, 400.0, 0.0),
        protocol: ProtocolConfig {
            scenario,
            memory_modes: 100,
            cutoff_s: Cutoff(Some(0.01)),
            ..ProtocolConfig::default()
        },
        ..PointParams::default()
    }
}
