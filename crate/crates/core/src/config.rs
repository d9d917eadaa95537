//! Run configuration: one file, JSON or TOML, every key optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{GeometryConfig, GroundTrackLayout};
use crate::optics::{BackgroundParams, OpticalParams};
use crate::protocols::{Cutoff, PointParams, ProtocolConfig, Scenario};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Json,
    Toml,
}

/// Ground-track placement as written in config files. `sat_b_offset`
/// defaults to the mirror image of `sat_a_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutConfig {
    pub ground_distance_km: f64,
    pub orbital_height_km: f64,
    pub sat_a_offset: f64,
    pub sat_c_offset: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sat_b_offset: Option<f64>,
    pub orbit_phase_s: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        let l = GroundTrackLayout::default();
        Self {
            ground_distance_km: l.ground_distance_km,
            orbital_height_km: l.orbital_height_km,
            sat_a_offset: l.sat_a_offset,
            sat_c_offset: l.sat_c_offset,
            sat_b_offset: None,
            orbit_phase_s: 0.0,
        }
    }
}

impl LayoutConfig {
    pub fn to_layout(&self) -> GroundTrackLayout {
        GroundTrackLayout {
            ground_distance_km: self.ground_distance_km,
            orbital_height_km: self.orbital_height_km,
            sat_a_offset: self.sat_a_offset,
            sat_c_offset: self.sat_c_offset,
            sat_b_offset: self.sat_b_offset.unwrap_or(1.0 - self.sat_a_offset),
            orbit_phase_s: self.orbit_phase_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Delivered pairs per point; the scenario's default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
    /// Write each point's delivered pairs to `records/`.
    pub dump_records: bool,
}

/// Parameter axes; the sweep is their Cartesian product, and an empty axis
/// keeps the base value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepAxes {
    pub scenarios: Vec<Scenario>,
    pub sat_a_offsets: Vec<f64>,
    pub heights_km: Vec<f64>,
    pub divergences_rad: Vec<f64>,
    pub dephasing_times_s: Vec<f64>,
    pub cutoffs_s: Vec<Cutoff>,
    pub weather_factors: Vec<f64>,
    pub distances_km: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitSection {
    /// Phases are sampled on `[-half_width_s, half_width_s]`.
    pub half_width_s: f64,
    pub points: usize,
}

impl Default for OrbitSection {
    fn default() -> Self {
        Self { half_width_s: 360.0, points: 25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), format: OutputFormat::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub layout: LayoutConfig,
    pub optics: OpticalParams,
    pub background: BackgroundParams,
    pub protocol: ProtocolConfig,
    pub run: RunSection,
    pub sweep: SweepAxes,
    pub orbit: OrbitSection,
    pub output: OutputSection,
}

/// Keys whose defaults are placeholders rather than established values.
const WARNED_DEFAULTS: [(&str, &str); 5] = [
    ("optics", "receiver_radius_m"),
    ("optics", "pointing_error_rad"),
    ("protocol", "memory_modes"),
    ("protocol", "cutoff_s"),
    ("protocol", "dephasing_time_s"),
];

impl RunConfig {
    /// Parameters of the base point, before any sweep axis is applied.
    pub fn base_point(&self) -> PointParams {
        PointParams {
            geometry: self.geometry,
            layout: self.layout.to_layout(),
            optics: self.optics,
            background: self.background,
            protocol: self.protocol,
        }
    }

    /// Pairs to collect for `scenario`.
    pub fn samples_for(&self, scenario: Scenario) -> usize {
        self.run.samples.unwrap_or_else(|| scenario.default_samples())
    }

    /// SHA-256 of the canonical JSON form, lower-case hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Syntax(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: String, e: &dyn std::fmt::Display| ConfigError::Invalid { key, message: e.to_string() };
        let base = self.base_point();
        base.geometry.validate().map_err(|e| invalid("geometry".into(), &e))?;
        base.layout.validate(&base.geometry).map_err(|e| invalid("layout".into(), &e))?;
        base.optics.validate().map_err(|e| invalid("optics".into(), &e))?;
        base.background.validate().map_err(|e| invalid("background".into(), &e))?;
        base.protocol.validate().map_err(|e| invalid("protocol".into(), &e))?;
        if self.run.samples == Some(0) {
            return Err(invalid("run.samples".into(), &"must be at least 1"));
        }
        if !(self.orbit.half_width_s > 0.0 && self.orbit.half_width_s.is_finite()) {
            return Err(invalid("orbit.half_width_s".into(), &"must be positive"));
        }
        if self.orbit.points < 2 {
            return Err(invalid("orbit.points".into(), &"need at least two phases"));
        }
        let axes = &self.sweep;
        let check = |name: &str, values: &[f64], apply: &dyn Fn(&mut PointParams, f64)| {
            for (i, &v) in values.iter().enumerate() {
                let mut p = base;
                apply(&mut p, v);
                if let Err(e) = p.validate() {
                    return Err(invalid(format!("sweep.{name}[{i}]"), &e));
                }
            }
            Ok(())
        };
        check("distances_km", &axes.distances_km, &|p, v| p.layout.ground_distance_km = v)?;
        check("heights_km", &axes.heights_km, &|p, v| p.layout.orbital_height_km = v)?;
        check("divergences_rad", &axes.divergences_rad, &|p, v| p.optics.divergence_rad = v)?;
        check("dephasing_times_s", &axes.dephasing_times_s, &|p, v| p.protocol.dephasing_time_s = v)?;
        check("weather_factors", &axes.weather_factors, &|p, v| p.background.weather_factor = v)?;
        check("sat_a_offsets", &axes.sat_a_offsets, &|p, v| p.layout.sat_a_offset = v)?;
        for (i, c) in axes.cutoffs_s.iter().enumerate() {
            if let Some(t) = c.0 {
                if !(t > 0.0) {
                    return Err(invalid(format!("sweep.cutoffs_s[{i}]"), &"must be positive or \"none\""));
                }
            }
        }
        Ok(())
    }
}

/// Parses and validates a config. Returns the config together with one
/// warning per placeholder default that was relied on.
pub fn parse_str(text: &str, format: SourceFormat) -> Result<(RunConfig, Vec<String>), ConfigError> {
    let value: serde_json::Value = if text.trim().is_empty() {
        serde_json::Value::Object(Default::default())
    } else {
        match format {
            SourceFormat::Json => serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?,
            SourceFormat::Toml => {
                let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
                serde_json::to_value(table).map_err(|e| ConfigError::Syntax(e.to_string()))?
            }
        }
    };
    let mut warnings = Vec::new();
    for (section, key) in WARNED_DEFAULTS {
        if value.get(section).and_then(|s| s.get(key)).is_none() {
            warnings.push(format!("`{section}.{key}` not set; using the unconfirmed default"));
        }
    }
    let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((config, warnings))
}

/// Reads a config file; `.json` is JSON, anything else TOML.
pub fn parse_config(path: &Path) -> Result<(RunConfig, Vec<String>), ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => SourceFormat::Json,
        _ => SourceFormat::Toml,
    };
    parse_str(&text, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults_and_warnings() {
        for fmt in [SourceFormat::Json, SourceFormat::Toml] {
            let (c, w) = parse_str("", fmt).unwrap();
            assert_eq!(c, RunConfig::default());
            assert_eq!(w.len(), WARNED_DEFAULTS.len());
        }
        let (_, w) = parse_str("{}", SourceFormat::Json).unwrap();
        assert_eq!(w.len(), 5);
    }

    #[test]
    fn negative_divergence_names_the_key() {
        let err = parse_str("[optics]\ndivergence_rad = -1.0\n", SourceFormat::Toml).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("divergence_rad"), "{msg}");
        assert!(matches!(err, ConfigError::Invalid { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = parse_str(r#"{"optics": {"divergance_rad": 3e-6}}"#, SourceFormat::Json).unwrap_err();
        match err {
            ConfigError::Schema { path, message } => {
                assert_eq!(path, "optics.divergance_rad");
                assert!(message.contains("divergance_rad"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn explicit_keys_silence_warnings() {
        let text = r#"
            [optics]
            receiver_radius_m = 0.5
            pointing_error_rad = 1e-6
            [protocol]
            memory_modes = 100
            cutoff_s = "none"
            dephasing_time_s = 0.1
        "#;
        let (c, w) = parse_str(text, SourceFormat::Toml).unwrap();
        assert!(w.is_empty());
        assert_eq!(c.protocol.cutoff_s, Cutoff(None));
    }

    #[test]
    fn mirrored_satellite_b() {
        let (c, _) = parse_str("[layout]\nsat_a_offset = 0.2\n", SourceFormat::Toml).unwrap();
        assert!((c.base_point().layout.sat_b_offset - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sweep_values_are_checked() {
        let err = parse_str("[sweep]\ndistances_km = [100.0, -5.0]\n", SourceFormat::Toml).unwrap_err();
        assert!(err.to_string().contains("sweep.distances_km[1]"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
