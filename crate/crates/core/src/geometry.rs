//! Spherical-Earth geometry for ground stations and satellites on a shared
//! circular orbit.
//!
//! All satellites and both ground stations lie in one plane through the
//! Earth's centre (the great circle through `A` and `B`). Positions are
//! expressed in a Cartesian frame centred on the Earth with the midpoint of
//! `A`–`B` on the `+y` axis; angles along the great circle grow towards `B`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Physical constants for the Earth model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// Mean Earth radius in km.
    pub earth_radius_km: f64,
    /// Earth mass in kg.
    pub earth_mass_kg: f64,
    /// Gravitational constant in m^3 kg^-1 s^-2.
    pub grav_const: f64,
    /// Speed of light in m/s.
    pub speed_of_light_m_s: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            earth_radius_km: 6371.0,
            earth_mass_kg: 5.972e24,
            grav_const: 6.67408e-11,
            speed_of_light_m_s: 299_792_458.0,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, v) in [
            ("earth_radius_km", self.earth_radius_km),
            ("earth_mass_kg", self.earth_mass_kg),
            ("grav_const", self.grav_const),
            ("speed_of_light_m_s", self.speed_of_light_m_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(GeometryError::InvalidParameter { name, value: v });
            }
        }
        Ok(())
    }

    /// Light travel time in seconds over `distance_km`.
    pub fn light_delay(&self, distance_km: f64) -> f64 {
        distance_km * 1e3 / self.speed_of_light_m_s
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("ground distance {ground_distance_km} km spans at least half the Earth's circumference")]
    OutOfDomain { ground_distance_km: f64 },
    #[error("invalid geometry parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("{from} cannot see {to} (elevation {elevation_rad:.4} rad)")]
    BelowHorizon {
        from: NodeId,
        to: NodeId,
        elevation_rad: f64,
    },
    #[error("line of sight between {from} and {to} is blocked by the Earth")]
    Blocked { from: NodeId, to: NodeId },
}

/// Placement of the two ground stations and the three satellites.
///
/// Satellite offsets are fractions of the ground distance measured from `A`
/// towards `B`: `0.0` is vertically above `A`, `0.5` above the midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTrackLayout {
    pub ground_distance_km: f64,
    pub orbital_height_km: f64,
    pub sat_a_offset: f64,
    pub sat_c_offset: f64,
    pub sat_b_offset: f64,
    /// Time along the orbit in s; `0` puts the constellation at its nominal
    /// placement.
    pub orbit_phase_s: f64,
}

impl Default for GroundTrackLayout {
    fn default() -> Self {
        Self::symmetric(4400.0, 400.0, 0.0)
    }
}

impl GroundTrackLayout {
    /// Symmetric layout: `S_B` mirrors `S_A` and `S_C` sits above the midpoint.
    pub fn symmetric(ground_distance_km: f64, orbital_height_km: f64, sat_a_offset: f64) -> Self {
        Self {
            ground_distance_km,
            orbital_height_km,
            sat_a_offset,
            sat_c_offset: 0.5,
            sat_b_offset: 1.0 - sat_a_offset,
            orbit_phase_s: 0.0,
        }
    }

    pub fn with_phase(mut self, orbit_phase_s: f64) -> Self {
        self.orbit_phase_s = orbit_phase_s;
        self
    }

    pub fn validate(&self, geo: &GeometryConfig) -> Result<(), GeometryError> {
        if !(self.orbital_height_km.is_finite() && self.orbital_height_km > 0.0) {
            return Err(GeometryError::InvalidParameter {
                name: "orbital_height_km",
                value: self.orbital_height_km,
            });
        }
        if !(self.ground_distance_km.is_finite() && self.ground_distance_km >= 0.0) {
            return Err(GeometryError::InvalidParameter {
                name: "ground_distance_km",
                value: self.ground_distance_km,
            });
        }
        if self.ground_distance_km / geo.earth_radius_km >= 2.0 * PI {
            return Err(GeometryError::OutOfDomain {
                ground_distance_km: self.ground_distance_km,
            });
        }
        for (name, v) in [
            ("sat_a_offset", self.sat_a_offset),
            ("sat_c_offset", self.sat_c_offset),
            ("sat_b_offset", self.sat_b_offset),
            ("orbit_phase_s", self.orbit_phase_s),
        ] {
            if !v.is_finite() {
                return Err(GeometryError::InvalidParameter { name, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeId {
    A,
    B,
    SatA,
    SatC,
    SatB,
}

impl NodeId {
    pub fn is_ground(self) -> bool {
        matches!(self, NodeId::A | NodeId::B)
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NodeId::A => "A",
            NodeId::B => "B",
            NodeId::SatA => "S_A",
            NodeId::SatC => "S_C",
            NodeId::SatB => "S_B",
        })
    }
}

/// A point in the Earth-centred frame, in km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl std::ops::Sub for Point3 {
    type Output = Point3;

    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Point at `radius` on the orbital plane at great-circle angle `angle`.
    pub fn on_circle(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.sin(), radius * angle.cos(), 0.0)
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// A positioned station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub position: Point3,
}

/// Positions of all five stations at one orbit phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constellation {
    pub a: Node,
    pub b: Node,
    pub sat_a: Node,
    pub sat_c: Node,
    pub sat_b: Node,
}

impl Constellation {
    pub fn node(&self, id: NodeId) -> Node {
        match id {
            NodeId::A => self.a,
            NodeId::B => self.b,
            NodeId::SatA => self.sat_a,
            NodeId::SatC => self.sat_c,
            NodeId::SatB => self.sat_b,
        }
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        pair_distance(&self.node(a), &self.node(b))
    }
}

fn central_angle(ground_distance_km: f64, geo: &GeometryConfig) -> Result<f64, GeometryError> {
    if !(ground_distance_km >= 0.0) || ground_distance_km / geo.earth_radius_km >= PI {
        return Err(GeometryError::OutOfDomain { ground_distance_km });
    }
    Ok(ground_distance_km / geo.earth_radius_km)
}

/// Straight-line distance in km from a ground point to a satellite at height
/// `height_km` whose ground track lies `ground_distance_km` away.
pub fn slant_range(
    ground_distance_km: f64,
    height_km: f64,
    geo: &GeometryConfig,
) -> Result<f64, GeometryError> {
    let gamma = central_angle(ground_distance_km, geo)?;
    let re = geo.earth_radius_km;
    let rs = re + height_km;
    let l2 = re * re + rs * rs - 2.0 * re * rs * gamma.cos();
    // cos form loses precision near gamma = 0; the half-angle form does not.
    let l2_stable = height_km * height_km + 4.0 * re * rs * (gamma / 2.0).sin().powi(2);
    debug_assert!((l2 - l2_stable).abs() <= 1e-6 * l2_stable.max(1.0));
    Ok(l2_stable.sqrt())
}

/// Elevation angle in rad of a satellite seen from the ground; negative
/// below the horizon.
pub fn elevation_angle(
    ground_distance_km: f64,
    height_km: f64,
    geo: &GeometryConfig,
) -> Result<f64, GeometryError> {
    let gamma = central_angle(ground_distance_km, geo)?;
    let l = slant_range(ground_distance_km, height_km, geo)?;
    let ratio = (geo.earth_radius_km / l * gamma.sin()).clamp(-1.0, 1.0);
    Ok(FRAC_PI_2 - gamma - ratio.asin())
}

/// Orbital period in s of a circular orbit at `height_km`.
pub fn orbital_period(height_km: f64, geo: &GeometryConfig) -> f64 {
    let r_m = (geo.earth_radius_km + height_km) * 1e3;
    2.0 * PI * (r_m.powi(3) / (geo.earth_mass_kg * geo.grav_const)).sqrt()
}

/// Largest ground distance at which a satellite at `height_km` is at or
/// above the horizon, found by bisection on [`elevation_angle`].
pub fn max_visible_ground_distance(height_km: f64, geo: &GeometryConfig) -> f64 {
    let mut lo = 0.0;
    let mut hi = geo.earth_radius_km * PI * (1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match elevation_angle(mid, height_km, geo) {
            Ok(e) if e >= 0.0 => lo = mid,
            _ => hi = mid,
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Positions of `A`, `B`, `S_A`, `S_C` and `S_B` at the layout's orbit phase.
pub fn node_positions(layout: &GroundTrackLayout, geo: &GeometryConfig) -> Constellation {
    let re = geo.earth_radius_km;
    let rs = re + layout.orbital_height_km;
    let half = 0.5 * layout.ground_distance_km / re;
    let omega = 2.0 * PI / orbital_period(layout.orbital_height_km, geo);
    let shift = omega * layout.orbit_phase_s;
    let sat = |offset: f64| {
        let angle = (offset - 0.5) * layout.ground_distance_km / re + shift;
        Point3::on_circle(rs, angle)
    };
    Constellation {
        a: Node { id: NodeId::A, position: Point3::on_circle(re, -half) },
        b: Node { id: NodeId::B, position: Point3::on_circle(re, half) },
        sat_a: Node { id: NodeId::SatA, position: sat(layout.sat_a_offset) },
        sat_c: Node { id: NodeId::SatC, position: sat(layout.sat_c_offset) },
        sat_b: Node { id: NodeId::SatB, position: sat(layout.sat_b_offset) },
    }
}

/// Chord length in km between two stations.
pub fn pair_distance(n1: &Node, n2: &Node) -> f64 {
    (n1.position - n2.position).norm()
}

/// Elevation in rad of `target` as seen from the ground station `ground`.
pub fn elevation_between(ground: &Node, target: &Node) -> f64 {
    let up = ground.position;
    let los = target.position - ground.position;
    let s = los.dot(up) / (los.norm() * up.norm());
    s.clamp(-1.0, 1.0).asin()
}

/// Whether the straight segment between two points clears a sphere of
/// radius `radius_km` around the origin.
pub fn line_of_sight(p: Point3, q: Point3, radius_km: f64) -> bool {
    let d = q - p;
    let len2 = d.dot(d);
    let t = if len2 == 0.0 { 0.0 } else { (-p.dot(d) / len2).clamp(0.0, 1.0) };
    let closest = Point3::new(p.x + t * d.x, p.y + t * d.y, p.z + t * d.z);
    closest.norm() > radius_km
}

/// Checks that `ground` sees `target` strictly above the horizon and returns
/// the elevation angle.
pub fn require_visible(ground: &Node, target: &Node) -> Result<f64, GeometryError> {
    let e = elevation_between(ground, target);
    if e > 0.0 {
        Ok(e)
    } else {
        Err(GeometryError::BelowHorizon {
            from: ground.id,
            to: target.id,
            elevation_rad: e,
        })
    }
}

/// Checks an inter-satellite link for Earth blockage.
pub fn require_line_of_sight(
    n1: &Node,
    n2: &Node,
    geo: &GeometryConfig,
) -> Result<(), GeometryError> {
    if line_of_sight(n1.position, n2.position, geo.earth_radius_km) {
        Ok(())
    } else {
        Err(GeometryError::Blocked { from: n1.id, to: n2.id })
    }
}
