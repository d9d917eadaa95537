//! Result files: the flat CSV/JSON table, orbit summaries, record dumps
//! and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{rate_of, AnalysisError, RateResult};
use crate::config::RunConfig;
use crate::protocols::SampleRecord;
use crate::quantum::BellDiagonalState;
use crate::sweep::{OrbitSummary, ResultRow};

/// Column order of the result table.
pub const RESULT_COLUMNS: [&str; 30] = [
    "index",
    "scenario",
    "status",
    "seed",
    "ground_distance_km",
    "orbital_height_km",
    "sat_a_offset",
    "sat_c_offset",
    "sat_b_offset",
    "orbit_phase_s",
    "divergence_rad",
    "pointing_error_rad",
    "receiver_radius_m",
    "weather_factor",
    "dephasing_time_s",
    "cutoff_s",
    "memory_modes",
    "clock_rate_hz",
    "loss_a_db",
    "samples",
    "raw_rate",
    "raw_rate_se",
    "e_x",
    "e_x_se",
    "e_z",
    "e_z_se",
    "key_rate",
    "key_rate_se",
    "sim_time_s",
    "message",
];

pub const ORBIT_COLUMNS: [&str; 14] = [
    "point",
    "scenario",
    "ground_distance_km",
    "orbital_height_km",
    "sat_a_offset",
    "divergence_rad",
    "tau_s",
    "raw_bits_per_pass",
    "e_x",
    "e_z",
    "key_bits_per_pass",
    "raw_rate",
    "key_rate",
    "period_s",
];

pub const RECORD_COLUMNS: [&str; 5] = ["time", "p1", "p2", "p3", "p4"];

pub const REPORT_COLUMNS: [&str; 10] =
    ["source", "samples", "raw_rate", "raw_rate_se", "e_x", "e_x_se", "e_z", "e_z_se", "key_rate", "key_rate_se"];

fn sci(x: f64) -> String {
    format!("{x:e}")
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn row_fields(r: &ResultRow) -> Vec<String> {
    vec![
        r.index.to_string(),
        r.scenario.name().to_string(),
        r.status.as_str().to_string(),
        r.seed.to_string(),
        sci(r.ground_distance_km),
        sci(r.orbital_height_km),
        sci(r.sat_a_offset),
        sci(r.sat_c_offset),
        sci(r.sat_b_offset),
        sci(r.orbit_phase_s),
        sci(r.divergence_rad),
        sci(r.pointing_error_rad),
        sci(r.receiver_radius_m),
        sci(r.weather_factor),
        sci(r.dephasing_time_s),
        r.cutoff_s.map(sci).unwrap_or_default(),
        r.memory_modes.to_string(),
        sci(r.clock_rate_hz),
        r.loss_a_db.map(sci).unwrap_or_default(),
        r.samples.to_string(),
        sci(r.raw_rate),
        sci(r.raw_rate_se),
        sci(r.e_x),
        sci(r.e_x_se),
        sci(r.e_z),
        sci(r.e_z_se),
        sci(r.key_rate),
        sci(r.key_rate_se),
        sci(r.sim_time_s),
        r.message.clone(),
    ]
}

fn write_table<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()
}

/// Result table as CSV: fixed header, scientific notation, `\n` line ends.
pub fn write_results_csv<W: Write>(out: W, rows: &[ResultRow]) -> io::Result<()> {
    write_table(out, &RESULT_COLUMNS, rows.iter().map(row_fields))
}

pub fn write_results_json<W: Write>(mut out: W, rows: &[ResultRow]) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    out.write_all(b"\n")
}

pub fn read_results_csv<R: io::Read>(input: R) -> io::Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header != RESULT_COLUMNS {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "unexpected result table header"));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn read_results_json<R: io::Read>(input: R) -> io::Result<Vec<ResultRow>> {
    Ok(serde_json::from_reader(input)?)
}

pub fn write_orbit_csv<W: Write>(out: W, summaries: &[OrbitSummary]) -> io::Result<()> {
    write_table(
        out,
        &ORBIT_COLUMNS,
        summaries.iter().map(|s| {
            let r = &s.result;
            vec![
                s.point.to_string(),
                s.scenario.name().to_string(),
                sci(s.ground_distance_km),
                sci(s.orbital_height_km),
                sci(s.sat_a_offset),
                sci(s.divergence_rad),
                sci(r.tau_s),
                sci(r.raw_bits),
                sci(r.e_x),
                sci(r.e_z),
                sci(r.key_bits),
                sci(r.raw_rate),
                sci(r.key_rate),
                sci(r.period_s),
            ]
        }),
    )
}

pub fn write_records_csv<W: Write>(out: W, records: &[SampleRecord]) -> io::Result<()> {
    write_table(
        out,
        &RECORD_COLUMNS,
        records.iter().map(|r| {
            let c = r.state.coeffs();
            vec![sci(r.time), sci(c[0]), sci(c[1]), sci(c[2]), sci(c[3])]
        }),
    )
}

pub fn read_records_csv<R: io::Read>(input: R) -> io::Result<Vec<SampleRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header != RECORD_COLUMNS {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "expected columns time,p1,p2,p3,p4"));
    }
    r.deserialize::<(f64, f64, f64, f64, f64)>()
        .map(|row| {
            let (time, a, b, c, d) = row.map_err(csv_err)?;
            let state = BellDiagonalState::new([a, b, c, d])
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
            Ok(SampleRecord { time, state })
        })
        .collect()
}

/// Key rates recomputed from a record dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub source: String,
    pub rate: RateResult,
}

pub fn report(source: &str, records: &[SampleRecord]) -> Result<ReportRow, AnalysisError> {
    Ok(ReportRow { source: source.to_string(), rate: rate_of(records)? })
}

pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow]) -> io::Result<()> {
    write_table(
        out,
        &REPORT_COLUMNS,
        rows.iter().map(|r| {
            let x = &r.rate;
            vec![
                r.source.clone(),
                x.samples.to_string(),
                sci(x.raw_rate),
                sci(x.raw_rate_se),
                sci(x.e_x),
                sci(x.e_x_se),
                sci(x.e_z),
                sci(x.e_z_se),
                sci(x.key_rate),
                sci(x.key_rate_se),
            ]
        }),
    )
}

/// Provenance of one invocation. Wall-clock timings live here so that the
/// result tables stay byte-identical between runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: RunConfig,
    pub rows: usize,
    pub failed_rows: usize,
    pub wall_time_s: f64,
    pub point_wall_time_s: Vec<f64>,
    pub files: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_sha256: config.hash(),
            config: config.clone(),
            rows: 0,
            failed_rows: 0,
            wall_time_s: 0.0,
            point_wall_time_s: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()
    }
}

/// Creates `path` and hands a buffered writer to `body`.
pub fn with_file(path: &Path, body: impl FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    body(&mut f)?;
    f.flush()
}
