//! Protocol state machines: derivation of a concrete repeater chain from the
//! physical layout, plus the single-satellite memoryless reference.

mod chain;
mod cutoff;
mod timing;

pub use chain::{
    simulate, ChainError, ChainNode, ChainSetup, LinkProcess, LinkStats, RunOptions, RunStats, SampleRecord, Side,
    SimOutput,
};
pub use cutoff::{apply_cutoff, within_cutoff, CutoffDecision};
pub use timing::{t_mem, t_trial, TimingError};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{self, Constellation, GeometryConfig, GeometryError, GroundTrackLayout, Node, NodeId};
use crate::optics::{
    self, background_rate, combine_noise, BackgroundParams, LinkBudget, LinkEnds, OpticalParams, OpticsError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Pair sources on `S_A` and `S_B`, absorptive memories on `S_C`.
    Scenario1,
    /// Emissive memories on `S_A` and `S_B`, absorptive memories on `S_C`.
    Scenario2,
    /// A single satellite (at `S_C`'s slot) with emissive memories.
    OneSatMemory,
    /// A single satellite source without memory.
    OneSatBaseline,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::Scenario1, Scenario::Scenario2, Scenario::OneSatMemory, Scenario::OneSatBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Scenario1 => "scenario1",
            Scenario::Scenario2 => "scenario2",
            Scenario::OneSatMemory => "one_sat_memory",
            Scenario::OneSatBaseline => "one_sat_baseline",
        }
    }

    /// Default number of delivered pairs per simulated point.
    pub fn default_samples(self) -> usize {
        match self {
            Scenario::Scenario1 => 100_000,
            _ => 10_000,
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Storage cutoff: a number of seconds, or `"none"` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cutoff(pub Option<f64>);

impl Serialize for Cutoff {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(t) => s.serialize_f64(t),
            None => s.serialize_str("none"),
        }
    }
}

impl<'de> Deserialize<'de> for Cutoff {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Seconds(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Seconds(t) => Ok(Cutoff(Some(t))),
            Raw::Word(w) if w.eq_ignore_ascii_case("none") => Ok(Cutoff(None)),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("expected seconds or \"none\", got {w:?}"))),
        }
    }
}

impl std::fmt::Display for Cutoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(t) => write!(f, "{t:e}"),
            None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub scenario: Scenario,
    pub clock_rate_hz: f64,
    pub cutoff_s: Cutoff,
    pub memory_modes: usize,
    pub dephasing_time_s: f64,
}

impl ProtocolConfig {
    pub const DEFAULT_MEMORY_MODES: usize = 1000;
    pub const DEFAULT_CUTOFF_S: f64 = 0.01;
    pub const DEFAULT_DEPHASING_TIME_S: f64 = 0.1;

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |what: &'static str, value: f64| Err(ProtocolError::Invalid { what, value });
        if !(self.clock_rate_hz > 0.0 && self.clock_rate_hz.is_finite()) {
            return bad("clock_rate_hz", self.clock_rate_hz);
        }
        if let Some(t) = self.cutoff_s.0 {
            if !(t > 0.0) {
                return bad("cutoff_s", t);
            }
        }
        if self.memory_modes == 0 {
            return bad("memory_modes", 0.0);
        }
        if !(self.dephasing_time_s > 0.0) {
            return bad("dephasing_time_s", self.dephasing_time_s);
        }
        Ok(())
    }
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Scenario1,
            clock_rate_hz: 20e6,
            cutoff_s: Cutoff(Some(Self::DEFAULT_CUTOFF_S)),
            memory_modes: Self::DEFAULT_MEMORY_MODES,
            dephasing_time_s: Self::DEFAULT_DEPHASING_TIME_S,
        }
    }
}

/// Every physical input of one simulated point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PointParams {
    pub geometry: GeometryConfig,
    pub layout: GroundTrackLayout,
    pub optics: OpticalParams,
    pub background: BackgroundParams,
    pub protocol: ProtocolConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("{what} = {value} is out of range")]
    Invalid { what: &'static str, value: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("the memoryless baseline has no event simulation")]
    NotSimulated,
}

impl ProtocolError {
    /// True when the failure is only that some required link is hidden by
    /// the Earth, which sweeps treat as a zero rate.
    pub fn is_visibility(&self) -> bool {
        let geo = |g: &GeometryError| matches!(g, GeometryError::BelowHorizon { .. } | GeometryError::Blocked { .. });
        match self {
            ProtocolError::Geometry(g) => geo(g),
            ProtocolError::Optics(OpticsError::Geometry(g)) => geo(g),
            _ => false,
        }
    }
}

impl PointParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        self.geometry.validate()?;
        self.layout.validate(&self.geometry)?;
        self.optics.validate()?;
        self.background.validate()?;
        self.protocol.validate()
    }

    pub fn constellation(&self) -> Constellation {
        geometry::node_positions(&self.layout, &self.geometry)
    }

    /// Noise-click probability per detection window at a ground station.
    pub fn ground_noise(&self) -> f64 {
        let bg = background_rate(
            &self.background,
            self.optics.receiver_radius_m,
            self.optics.wavelength_m,
            self.geometry.speed_of_light_m_s,
        );
        combine_noise(self.optics.dark_count_prob, bg.window_prob)
    }

    fn delay(&self, a: &Node, b: &Node) -> f64 {
        self.geometry.light_delay(geometry::pair_distance(a, b))
    }

    fn notice_delay(&self, c: &Constellation, n: &Node) -> f64 {
        self.delay(n, &c.a).max(self.delay(n, &c.b))
    }

    fn chain_node(&self, c: &Constellation, n: &Node) -> ChainNode {
        ChainNode {
            id: n.id,
            dephasing_time: (!n.id.is_ground()).then_some(self.protocol.dephasing_time_s),
            notice_delay: self.notice_delay(c, n),
        }
    }

    fn relay_link(&self, ground: &Node, source: &Node, memory: &Node, side: Side) -> Result<LinkProcess, ProtocolError> {
        let (to_ground, to_memory) =
            optics::relay_arms(ground, source, memory, true, &self.optics, &self.geometry, self.ground_noise())?;
        let click = to_ground.click()?;
        let d = geometry::pair_distance;
        let f = self.protocol.clock_rate_hz;
        Ok(LinkProcess::Relay {
            slot_period: self.protocol.memory_modes as f64 / f,
            slot_offset: 1.0 / f,
            p_load: to_memory.total,
            p_ground: click.eta_eff,
            alpha: click.alpha,
            confirm_delay: t_mem(
                d(source, ground),
                d(source, memory),
                d(ground, memory),
                self.geometry.speed_of_light_m_s,
            )?,
            ground: side,
        })
    }

    fn ground_trial_link(&self, ground: &Node, satellite: &Node, side: Side) -> Result<LinkProcess, ProtocolError> {
        let budget = optics::link_budget(
            LinkEnds::GroundSatellite { ground, satellite, satellite_memory: true },
            &self.optics,
            &self.geometry,
            self.ground_noise(),
        )?;
        let click = budget.click()?;
        Ok(LinkProcess::Trial {
            trial_time: t_trial(geometry::pair_distance(ground, satellite), self.geometry.speed_of_light_m_s)?,
            p_success: click.eta_eff,
            alpha: click.alpha,
            emitter: side.other(),
        })
    }

    fn space_trial_link(&self, emitter: &Node, receiver: &Node, side: Side) -> Result<LinkProcess, ProtocolError> {
        let budget = optics::link_budget(
            LinkEnds::SatelliteSatellite { emitter, receiver, emitter_memory: true, receiver_memory: true },
            &self.optics,
            &self.geometry,
            0.0,
        )?;
        Ok(LinkProcess::Trial {
            trial_time: t_trial(geometry::pair_distance(emitter, receiver), self.geometry.speed_of_light_m_s)?,
            p_success: budget.total,
            alpha: 1.0,
            emitter: side,
        })
    }

    /// The repeater chain this point describes.
    pub fn build_chain(&self) -> Result<ChainSetup, ProtocolError> {
        self.validate()?;
        let c = self.constellation();
        let (a, b, sa, sc, sb) = (&c.a, &c.b, &c.sat_a, &c.sat_c, &c.sat_b);
        let (nodes, links) = match self.protocol.scenario {
            Scenario::Scenario1 => (
                vec![a, sc, b],
                vec![self.relay_link(a, sa, sc, Side::Left)?, self.relay_link(b, sb, sc, Side::Right)?],
            ),
            Scenario::Scenario2 => (
                vec![a, sa, sc, sb, b],
                vec![
                    self.ground_trial_link(a, sa, Side::Left)?,
                    self.space_trial_link(sa, sc, Side::Left)?,
                    self.space_trial_link(sb, sc, Side::Right)?,
                    self.ground_trial_link(b, sb, Side::Right)?,
                ],
            ),
            Scenario::OneSatMemory => (
                vec![a, sc, b],
                vec![self.ground_trial_link(a, sc, Side::Left)?, self.ground_trial_link(b, sc, Side::Right)?],
            ),
            Scenario::OneSatBaseline => return Err(ProtocolError::NotSimulated),
        };
        Ok(ChainSetup {
            nodes: nodes.into_iter().map(|n| self.chain_node(&c, n)).collect(),
            links,
            modes: self.protocol.memory_modes,
            cutoff: self.protocol.cutoff_s.0,
        })
    }

    /// Pair rate of the memoryless single-satellite protocol: one source at
    /// `S_C`'s position, both photons detected on the ground, no noise.
    pub fn baseline_rate(&self) -> Result<f64, ProtocolError> {
        self.validate()?;
        let c = self.constellation();
        let eta = |ground: &Node| -> Result<f64, ProtocolError> {
            let budget = optics::link_budget(
                LinkEnds::GroundSatellite { ground, satellite: &c.sat_c, satellite_memory: false },
                &self.optics,
                &self.geometry,
                0.0,
            )?;
            Ok(budget.total)
        };
        Ok(self.protocol.clock_rate_hz * eta(&c.a)? * eta(&c.b)?)
    }

    /// Budget of the link that ends at ground station `A`.
    pub fn a_side_budget(&self) -> Result<LinkBudget, ProtocolError> {
        let c = self.constellation();
        let noise = self.ground_noise();
        let ends = match self.protocol.scenario {
            Scenario::Scenario1 => LinkEnds::GroundSatelliteSatellite {
                ground: &c.a,
                source: &c.sat_a,
                satellite: &c.sat_c,
                satellite_memory: true,
            },
            Scenario::Scenario2 => {
                LinkEnds::GroundSatellite { ground: &c.a, satellite: &c.sat_a, satellite_memory: true }
            }
            Scenario::OneSatMemory => {
                LinkEnds::GroundSatellite { ground: &c.a, satellite: &c.sat_c, satellite_memory: true }
            }
            Scenario::OneSatBaseline => {
                LinkEnds::GroundSatellite { ground: &c.a, satellite: &c.sat_c, satellite_memory: false }
            }
        };
        Ok(optics::link_budget(ends, &self.optics, &self.geometry, noise)?)
    }

    /// Whether every link this point needs is above the horizon and clear
    /// of the Earth.
    pub fn links_visible(&self) -> Result<bool, ProtocolError> {
        let c = self.constellation();
        let ground_to = |g: &Node, s: &Node| geometry::require_visible(g, s).map(|_| ());
        let space = |x: &Node, y: &Node| geometry::require_line_of_sight(x, y, &self.geometry);
        let checks = match self.protocol.scenario {
            Scenario::Scenario1 | Scenario::Scenario2 => vec![
                ground_to(&c.a, &c.sat_a),
                ground_to(&c.b, &c.sat_b),
                space(&c.sat_a, &c.sat_c),
                space(&c.sat_b, &c.sat_c),
            ],
            Scenario::OneSatMemory | Scenario::OneSatBaseline => {
                vec![ground_to(&c.a, &c.sat_c), ground_to(&c.b, &c.sat_c)]
            }
        };
        for check in checks {
            match check {
                Ok(()) => {}
                Err(e) => {
                    let e = ProtocolError::from(e);
                    if e.is_visibility() {
                        return Ok(false);
                    }
                    return Err(e);
                }
            }
        }
        Ok(true)
    }

    pub fn node(&self, id: NodeId) -> Node {
        self.constellation().node(id)
    }
}

/// Result of running one point.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolOutcome {
    Simulated(SimOutput),
    /// Closed-form pair rate of the memoryless protocol.
    Baseline { rate: f64 },
}

/// Builds and runs the protocol selected in `params`.
pub fn run_point(params: &PointParams, opts: &RunOptions) -> Result<ProtocolOutcome, ProtocolError> {
    if params.protocol.scenario == Scenario::OneSatBaseline {
        return Ok(ProtocolOutcome::Baseline { rate: params.baseline_rate()? });
    }
    let setup = params.build_chain()?;
    Ok(ProtocolOutcome::Simulated(simulate(&setup, opts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(scenario: Scenario, d: f64, offset: f64) -> PointParams {
        PointParams {
            layout: GroundTrackLayout::symmetric(d, 400.0, offset),
            protocol: ProtocolConfig { scenario, memory_modes: 20, ..ProtocolConfig::default() },
            ..PointParams::default()
        }
    }

    #[test]
    fn cutoff_round_trip() {
        let c: Cutoff = serde_json::from_str("\"none\"").unwrap();
        assert_eq!(c, Cutoff(None));
        let c: Cutoff = serde_json::from_str("0.005").unwrap();
        assert_eq!(c, Cutoff(Some(0.005)));
        assert_eq!(serde_json::to_string(&Cutoff(None)).unwrap(), "\"none\"");
        assert!(serde_json::from_str::<Cutoff>("\"soon\"").is_err());
    }

    #[test]
    fn scenario1_chain_shape() {
        let setup = params(Scenario::Scenario1, 2000.0, 0.0).build_chain().unwrap();
        assert_eq!(setup.nodes.len(), 3);
        assert_eq!(setup.nodes[1].id, NodeId::SatC);
        match setup.links[0] {
            LinkProcess::Relay { slot_period, p_load, ground, .. } => {
                assert_relative_eq!(slot_period, 20.0 / 20e6);
                assert!(p_load > 0.0 && p_load < 0.8);
                assert_eq!(ground, Side::Left);
            }
            _ => panic!("expected a relay link"),
        }
    }

    #[test]
    fn scenario2_chain_shape() {
        let setup = params(Scenario::Scenario2, 2000.0, 0.0).build_chain().unwrap();
        assert_eq!(setup.nodes.len(), 5);
        let emitters: Vec<_> = setup
            .links
            .iter()
            .map(|l| match l {
                LinkProcess::Trial { emitter, .. } => *emitter,
                _ => panic!("expected trial links"),
            })
            .collect();
        assert_eq!(emitters, vec![Side::Right, Side::Left, Side::Right, Side::Left]);
    }

    #[test]
    fn baseline_is_product_form() {
        let p = params(Scenario::OneSatBaseline, 1000.0, 0.0);
        let c = p.constellation();
        let eta = optics::link_budget(
            LinkEnds::GroundSatellite { ground: &c.a, satellite: &c.sat_c, satellite_memory: false },
            &p.optics,
            &p.geometry,
            0.0,
        )
        .unwrap()
        .total;
        assert_relative_eq!(p.baseline_rate().unwrap(), 20e6 * eta * eta, max_relative = 1e-12);
    }

    #[test]
    fn baseline_beyond_horizon_is_a_visibility_error() {
        let err = params(Scenario::OneSatBaseline, 4500.0, 0.0).baseline_rate().unwrap_err();
        assert!(err.is_visibility());
        assert!(!params(Scenario::OneSatBaseline, 4500.0, 0.0).links_visible().unwrap());
        assert!(params(Scenario::Scenario1, 4500.0, 0.0).links_visible().unwrap());
    }

    #[test]
    fn single_point_runs() {
        let p = params(Scenario::OneSatMemory, 1000.0, 0.0);
        match run_point(&p, &RunOptions::new(50, 1)).unwrap() {
            ProtocolOutcome::Simulated(out) => assert_eq!(out.records.len(), 50),
            other => panic!("unexpected {other:?}"),
        }
    }
}
