//! Free-space optical link efficiencies and noise clicks.
//!
//! A link's success probability is the product of a Gaussian-beam
//! diffraction factor (with the pointing error averaged into the beam
//! profile), an elevation-dependent atmospheric factor per traversal of the
//! atmosphere, and device efficiencies. Dark counts and background light at
//! ground detectors are folded into one per-window noise-click probability.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, GeometryConfig, GeometryError, Node};
use crate::quadrature::{self, QuadratureError, Tolerance};

/// Planck constant in J s.
pub const PLANCK: f64 = 6.626_070_15e-34;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpticsError {
    #[error("invalid optical parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("no click is possible: signal and noise probabilities are both zero")]
    NoClicks,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("diffraction integral failed: {0}")]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticalParams {
    pub wavelength_m: f64,
    /// Far-field divergence half-angle of the transmitted beam.
    pub divergence_rad: f64,
    /// Standard deviation of the transmitter pointing error.
    pub pointing_error_rad: f64,
    pub receiver_radius_m: f64,
    /// Atmospheric transmittivity at zenith.
    pub zenith_transmittivity: f64,
    pub detector_efficiency: f64,
    pub memory_efficiency: f64,
    /// Dark-count probability per detection window.
    pub dark_count_prob: f64,
}

impl OpticalParams {
    pub const DEFAULT_POINTING_ERROR_RAD: f64 = 1e-6;
    pub const DEFAULT_RECEIVER_RADIUS_M: f64 = 0.5;
}

impl Default for OpticalParams {
    fn default() -> Self {
        Self {
            wavelength_m: 780e-9,
            divergence_rad: 3e-6,
            pointing_error_rad: Self::DEFAULT_POINTING_ERROR_RAD,
            receiver_radius_m: Self::DEFAULT_RECEIVER_RADIUS_M,
            zenith_transmittivity: 0.8,
            detector_efficiency: 0.7,
            memory_efficiency: 0.8,
            dark_count_prob: 1e-6,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), OpticsError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(OpticsError::InvalidParameter { name, value })
    }
}

fn probability(name: &'static str, value: f64) -> Result<(), OpticsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(OpticsError::InvalidParameter { name, value })
    }
}

impl OpticalParams {
    pub fn validate(&self) -> Result<(), OpticsError> {
        positive("wavelength_m", self.wavelength_m)?;
        positive("divergence_rad", self.divergence_rad)?;
        positive("receiver_radius_m", self.receiver_radius_m)?;
        if !(self.pointing_error_rad.is_finite() && self.pointing_error_rad >= 0.0) {
            return Err(OpticsError::InvalidParameter {
                name: "pointing_error_rad",
                value: self.pointing_error_rad,
            });
        }
        probability("zenith_transmittivity", self.zenith_transmittivity)?;
        probability("detector_efficiency", self.detector_efficiency)?;
        probability("memory_efficiency", self.memory_efficiency)?;
        probability("dark_count_prob", self.dark_count_prob)
    }
}

/// Sky background model for ground receivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackgroundParams {
    /// Sky brightness in W m^-2 sr^-1 um^-1.
    pub sky_brightness: f64,
    pub field_of_view_sr: f64,
    pub filter_bandwidth_nm: f64,
    /// Relative brightness: 1e-2 clear day, 1e-5 full-moon night, 1e-7
    /// moonless night.
    pub weather_factor: f64,
    pub detection_window_s: f64,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        Self {
            sky_brightness: 150.0,
            field_of_view_sr: 3.14e-10,
            filter_bandwidth_nm: 0.02,
            weather_factor: 1e-7,
            detection_window_s: 1e-6,
        }
    }
}

impl BackgroundParams {
    pub fn validate(&self) -> Result<(), OpticsError> {
        positive("sky_brightness", self.sky_brightness)?;
        positive("field_of_view_sr", self.field_of_view_sr)?;
        positive("filter_bandwidth_nm", self.filter_bandwidth_nm)?;
        positive("detection_window_s", self.detection_window_s)?;
        probability("weather_factor", self.weather_factor)
    }
}

/// Diffraction-limited beam waist `w0 = λ / (θ_d π)` in m.
pub fn beam_waist(wavelength_m: f64, divergence_rad: f64) -> f64 {
    wavelength_m / (divergence_rad * PI)
}

/// Beam radius in m after propagating `z_m`.
pub fn beam_width(w0: f64, divergence_rad: f64, z_m: f64) -> f64 {
    let k = divergence_rad / w0 * z_m;
    w0 * (1.0 + k * k).sqrt()
}

/// Fraction of the transmitted power collected by a receiver aperture at
/// distance `z_m`, averaged over the transmitter pointing error.
///
/// Convolving the Gaussian intensity profile (per-axis variance `w²/4`) with
/// the Gaussian pointing kernel of per-axis standard deviation `z σ_p` gives
/// again a Gaussian, of radius `w_eff² = w² + 4 (z σ_p)²`. The collected
/// power is the radial integral of that profile over the aperture disk.
pub fn diffraction_efficiency(z_m: f64, params: &OpticalParams) -> Result<f64, OpticsError> {
    if !(z_m.is_finite() && z_m >= 0.0) {
        return Err(OpticsError::InvalidParameter { name: "distance_m", value: z_m });
    }
    let w0 = beam_waist(params.wavelength_m, params.divergence_rad);
    let w = beam_width(w0, params.divergence_rad, z_m);
    let jitter = z_m * params.pointing_error_rad;
    let w_eff2 = w * w + 4.0 * jitter * jitter;
    let radius = params.receiver_radius_m;
    let profile = |r: f64| 4.0 * r / w_eff2 * (-2.0 * r * r / w_eff2).exp();
    let collected = quadrature::integrate(profile, 0.0, radius, Tolerance::default())?;
    Ok(collected.clamp(0.0, 1.0))
}

/// Atmospheric transmittivity at elevation `elevation_rad`; zero at or
/// below the horizon.
pub fn atmospheric_efficiency(elevation_rad: f64, zenith_transmittivity: f64) -> f64 {
    if elevation_rad <= 0.0 {
        return 0.0;
    }
    zenith_transmittivity.powf(1.0 / elevation_rad.sin())
}

/// Background photon rate and per-window click probability at a ground
/// receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundRate {
    pub photons_per_s: f64,
    pub window_prob: f64,
}

pub fn background_rate(bg: &BackgroundParams, receiver_radius_m: f64, wavelength_m: f64, speed_of_light_m_s: f64) -> BackgroundRate {
    let area = PI * receiver_radius_m * receiver_radius_m;
    let bandwidth_um = bg.filter_bandwidth_nm * 1e-3;
    let photon_energy = PLANCK * speed_of_light_m_s / wavelength_m;
    let photons_per_s =
        bg.weather_factor * bg.sky_brightness * bg.field_of_view_sr * area * bandwidth_um / photon_energy;
    BackgroundRate {
        photons_per_s,
        window_prob: -(-photons_per_s * bg.detection_window_s).exp_m1(),
    }
}

/// Combined per-window noise-click probability from dark counts and
/// background light.
pub fn combine_noise(dark_count_prob: f64, background_prob: f64) -> f64 {
    1.0 - (1.0 - dark_count_prob) * (1.0 - background_prob)
}

/// Click statistics of a detector pair with noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveClick {
    /// Probability that any click occurs.
    pub eta_eff: f64,
    /// Probability that a click stems from the signal photon.
    pub alpha: f64,
}

pub fn effective_click(eta: f64, p_noise: f64) -> Result<EffectiveClick, OpticsError> {
    probability("eta", eta)?;
    probability("p_noise", p_noise)?;
    if p_noise == 0.0 {
        if eta == 0.0 {
            return Err(OpticsError::NoClicks);
        }
        return Ok(EffectiveClick { eta_eff: eta, alpha: 1.0 });
    }
    let quiet = 1.0 - p_noise;
    let eta_eff = 1.0 - (1.0 - eta) * quiet * quiet;
    if eta_eff <= 0.0 {
        return Err(OpticsError::NoClicks);
    }
    Ok(EffectiveClick {
        eta_eff,
        alpha: eta * quiet / eta_eff,
    })
}

/// The three kinds of lossy connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkClass {
    GroundSatellite,
    SatelliteSatellite,
    /// Pair source on a middle satellite feeding a ground station and
    /// another satellite.
    GroundSatelliteSatellite,
}

/// Endpoints of a link and which of them hold a quantum memory.
#[derive(Debug, Clone, Copy)]
pub enum LinkEnds<'a> {
    GroundSatellite {
        ground: &'a Node,
        satellite: &'a Node,
        /// Emissive memory at the satellite.
        satellite_memory: bool,
    },
    SatelliteSatellite {
        emitter: &'a Node,
        receiver: &'a Node,
        emitter_memory: bool,
        receiver_memory: bool,
    },
    GroundSatelliteSatellite {
        ground: &'a Node,
        source: &'a Node,
        satellite: &'a Node,
        /// Absorptive memory at the receiving satellite.
        satellite_memory: bool,
    },
}

impl LinkEnds<'_> {
    pub fn class(&self) -> LinkClass {
        match self {
            LinkEnds::GroundSatellite { .. } => LinkClass::GroundSatellite,
            LinkEnds::SatelliteSatellite { .. } => LinkClass::SatelliteSatellite,
            LinkEnds::GroundSatelliteSatellite { .. } => LinkClass::GroundSatelliteSatellite,
        }
    }
}

/// Efficiency decomposition of one link.
///
/// `total` is the product of `diffraction`, then `atmosphere`, then `device`,
/// multiplied left to right starting from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub class: LinkClass,
    /// One factor per beam segment.
    pub diffraction: Vec<f64>,
    /// One factor per atmospheric traversal.
    pub atmosphere: Vec<f64>,
    pub device: f64,
    pub total: f64,
    /// Noise-click probability per detection window at the ground detector,
    /// zero if the link has none.
    pub noise_click: f64,
}

impl LinkBudget {
    fn new(class: LinkClass, diffraction: Vec<f64>, atmosphere: Vec<f64>, device: f64, noise_click: f64) -> Self {
        let total = diffraction
            .iter()
            .chain(atmosphere.iter())
            .chain(std::iter::once(&device))
            .fold(1.0, |acc, f| acc * f);
        Self {
            class,
            diffraction,
            atmosphere,
            device,
            total,
            noise_click,
        }
    }

    /// Loss in dB.
    pub fn loss_db(&self) -> f64 {
        -10.0 * self.total.log10()
    }

    /// Click statistics at the ground detector of this link.
    pub fn click(&self) -> Result<EffectiveClick, OpticsError> {
        effective_click(self.total, self.noise_click)
    }
}

fn ground_arm(
    ground: &Node,
    satellite: &Node,
    optics: &OpticalParams,
    noise_click: f64,
    memory: bool,
) -> Result<LinkBudget, OpticsError> {
    let elevation = geometry::require_visible(ground, satellite)?;
    let distance_m = geometry::pair_distance(ground, satellite) * 1e3;
    let mut device = optics.detector_efficiency;
    if memory {
        device *= optics.memory_efficiency;
    }
    Ok(LinkBudget::new(
        LinkClass::GroundSatellite,
        vec![diffraction_efficiency(distance_m, optics)?],
        vec![atmospheric_efficiency(elevation, optics.zenith_transmittivity)],
        device,
        noise_click,
    ))
}

fn space_arm(
    emitter: &Node,
    receiver: &Node,
    optics: &OpticalParams,
    geo: &GeometryConfig,
    memories: usize,
) -> Result<LinkBudget, OpticsError> {
    geometry::require_line_of_sight(emitter, receiver, geo)?;
    let distance_m = geometry::pair_distance(emitter, receiver) * 1e3;
    let device = (0..memories).fold(1.0, |acc, _| acc * optics.memory_efficiency);
    Ok(LinkBudget::new(
        LinkClass::SatelliteSatellite,
        vec![diffraction_efficiency(distance_m, optics)?],
        Vec::new(),
        device,
        0.0,
    ))
}

/// The ground-bound and satellite-bound arms of a relay link whose pair
/// source sits on `source`; each arm is an independent single-photon channel.
pub fn relay_arms(
    ground: &Node,
    source: &Node,
    satellite: &Node,
    satellite_memory: bool,
    optics: &OpticalParams,
    geo: &GeometryConfig,
    noise_click: f64,
) -> Result<(LinkBudget, LinkBudget), OpticsError> {
    let to_ground = ground_arm(ground, source, optics, noise_click, false)?;
    let to_satellite = space_arm(source, satellite, optics, geo, usize::from(satellite_memory))?;
    Ok((to_ground, to_satellite))
}

/// Efficiency budget of a link, from node positions.
pub fn link_budget(
    ends: LinkEnds<'_>,
    optics: &OpticalParams,
    geo: &GeometryConfig,
    noise_click: f64,
) -> Result<LinkBudget, OpticsError> {
    match ends {
        LinkEnds::GroundSatellite { ground, satellite, satellite_memory } => {
            ground_arm(ground, satellite, optics, noise_click, satellite_memory)
        }
        LinkEnds::SatelliteSatellite { emitter, receiver, emitter_memory, receiver_memory } => space_arm(
            emitter,
            receiver,
            optics,
            geo,
            usize::from(emitter_memory) + usize::from(receiver_memory),
        ),
        LinkEnds::GroundSatelliteSatellite { ground, source, satellite, satellite_memory } => {
            let (g, s) = relay_arms(ground, source, satellite, satellite_memory, optics, geo, noise_click)?;
            let diffraction = g.diffraction.iter().chain(s.diffraction.iter()).copied().collect();
            Ok(LinkBudget::new(
                LinkClass::GroundSatelliteSatellite,
                diffraction,
                g.atmosphere.clone(),
                g.device * s.device,
                noise_click,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{node_positions, GroundTrackLayout};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params(pointing: f64) -> OpticalParams {
        OpticalParams { pointing_error_rad: pointing, ..OpticalParams::default() }
    }

    #[test]
    fn waist_and_width() {
        let w0 = beam_waist(780e-9, 3e-6);
        assert_relative_eq!(w0, 0.082_760, max_relative = 1e-4);
        assert_relative_eq!(beam_waist(780e-9, 6e-6), w0 / 2.0, max_relative = 1e-15);
        assert_relative_eq!(beam_waist(780e-9, 8e-6), 0.031_035, max_relative = 1e-4);
        assert_eq!(beam_width(w0, 3e-6, 0.0), w0);
        let w = beam_width(w0, 3e-6, 500e3);
        assert_relative_eq!(w, 1.502_28, max_relative = 1e-4);
        assert!((w / 500e3 / 3e-6 - 1.0).abs() < 2e-3);
    }

    #[test]
    fn no_pointing_error_matches_closed_form() {
        let p = params(0.0);
        let eta = diffraction_efficiency(500e3, &p).unwrap();
        let w = beam_width(beam_waist(p.wavelength_m, p.divergence_rad), p.divergence_rad, 500e3);
        let closed = 1.0 - (-2.0 * 0.25 / (w * w)).exp();
        assert_abs_diff_eq!(eta, closed, epsilon = 1e-9);
        assert!((eta - 0.199).abs() < 1e-3, "eta_dif = {eta}");
    }

    #[test]
    fn short_distance_collects_everything() {
        let eta = diffraction_efficiency(1.0, &params(1e-6)).unwrap();
        assert!(eta > 1.0 - 1e-9);
    }

    #[test]
    fn pointing_error_costs_power() {
        for z in [1e5, 5e5, 2e6, 2e7] {
            let clean = diffraction_efficiency(z, &params(0.0)).unwrap();
            let jittered = diffraction_efficiency(z, &params(1e-6)).unwrap();
            assert!(jittered < clean);
        }
    }

    #[test]
    fn atmosphere() {
        assert_relative_eq!(atmospheric_efficiency(std::f64::consts::FRAC_PI_2, 0.8), 0.8);
        assert_relative_eq!(atmospheric_efficiency(std::f64::consts::FRAC_PI_6, 0.8), 0.64, max_relative = 1e-12);
        assert!(atmospheric_efficiency(1e-4, 0.8) < 1e-300);
        assert_eq!(atmospheric_efficiency(0.0, 0.8), 0.0);
        assert_eq!(atmospheric_efficiency(-0.1, 0.8), 0.0);
    }

    #[test]
    fn background_light() {
        let c = 299_792_458.0;
        let bg = BackgroundParams::default();
        let rate = background_rate(&bg, 0.5, 780e-9, c);
        assert!(rate.window_prob > 2.8e-7 && rate.window_prob < 3.0e-7, "{rate:?}");
        let dark = BackgroundParams { weather_factor: 0.0, ..bg };
        assert_eq!(background_rate(&dark, 0.5, 780e-9, c).photons_per_s, 0.0);
        let moon = BackgroundParams { weather_factor: 1e-5, ..bg };
        let r5 = background_rate(&moon, 0.5, 780e-9, c).photons_per_s;
        assert_relative_eq!(r5, 100.0 * rate.photons_per_s, max_relative = 1e-12);
    }

    #[test]
    fn click_statistics() {
        let noise_only = effective_click(0.0, 1e-6).unwrap();
        assert_relative_eq!(noise_only.eta_eff, 2e-6, max_relative = 1e-5);
        assert_eq!(noise_only.alpha, 0.0);

        let half = effective_click(0.5, 1e-6).unwrap();
        assert_relative_eq!(half.eta_eff, 0.500_001, max_relative = 1e-9);
        assert_relative_eq!(half.alpha, 0.999_997_000_007, max_relative = 1e-11);

        let clean = effective_click(0.3, 0.0).unwrap();
        assert_eq!(clean.eta_eff, 0.3);
        assert_eq!(clean.alpha, 1.0);

        assert_eq!(effective_click(0.0, 0.0), Err(OpticsError::NoClicks));
    }

    #[test]
    fn link_classes() {
        let geo = GeometryConfig::default();
        let p = params(0.0);
        let c = node_positions(&GroundTrackLayout::symmetric(4400.0, 400.0, 0.0), &geo);

        let sat = link_budget(
            LinkEnds::SatelliteSatellite { emitter: &c.sat_a, receiver: &c.sat_c, emitter_memory: true, receiver_memory: true },
            &p,
            &geo,
            0.0,
        )
        .unwrap();
        assert!(sat.atmosphere.is_empty());
        assert_eq!(sat.noise_click, 0.0);

        // zenith-aligned ground link with no pointing error
        let ground = link_budget(
            LinkEnds::GroundSatellite { ground: &c.a, satellite: &c.sat_a, satellite_memory: false },
            &p,
            &geo,
            1e-6,
        )
        .unwrap();
        let w = beam_width(beam_waist(p.wavelength_m, p.divergence_rad), p.divergence_rad, 400e3);
        let expected = 0.7 * 0.8 * (1.0 - (-2.0 * 0.25 / (w * w)).exp());
        assert_relative_eq!(ground.total, expected, max_relative = 1e-8);

        let relay = link_budget(
            LinkEnds::GroundSatelliteSatellite { ground: &c.a, source: &c.sat_a, satellite: &c.sat_c, satellite_memory: true },
            &p,
            &geo,
            1e-6,
        )
        .unwrap();
        let product = relay
            .diffraction
            .iter()
            .chain(relay.atmosphere.iter())
            .chain(std::iter::once(&relay.device))
            .fold(1.0, |a, f| a * f);
        assert_eq!(relay.total, product);
        assert_eq!(relay.diffraction.len(), 2);
        assert_eq!(relay.atmosphere.len(), 1);
    }

    #[test]
    fn hidden_satellite_is_an_error() {
        let geo = GeometryConfig::default();
        let c = node_positions(&GroundTrackLayout::symmetric(6000.0, 400.0, 0.5), &geo);
        let r = link_budget(
            LinkEnds::GroundSatellite { ground: &c.a, satellite: &c.sat_a, satellite_memory: false },
            &OpticalParams::default(),
            &geo,
            0.0,
        );
        assert!(matches!(r, Err(OpticsError::Geometry(GeometryError::BelowHorizon { .. }))));
    }
}
