//! Expansion of sweep axes into points and their parallel evaluation.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{effective_rate, rate_of, symmetric_grid, OrbitSweepResult, RateResult};
use crate::config::RunConfig;
use crate::geometry::orbital_period;
use crate::protocols::{run_point, PointParams, ProtocolOutcome, RunOptions, SampleRecord, Scenario};
use crate::sim::mix_seed;

/// One parameter point of a sweep, numbered in expansion order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub params: PointParams,
}

fn axis<T: Copy>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

/// Cartesian product of the sweep axes, distance varying fastest.
pub fn expand(config: &RunConfig) -> Vec<SweepPoint> {
    let base = config.base_point();
    let s = &config.sweep;
    let mirror = config.layout.sat_b_offset.is_none();
    let mut out = Vec::new();
    for scenario in axis(&s.scenarios, base.protocol.scenario) {
        for offset in axis(&s.sat_a_offsets, base.layout.sat_a_offset) {
            for h in axis(&s.heights_km, base.layout.orbital_height_km) {
                for theta in axis(&s.divergences_rad, base.optics.divergence_rad) {
                    for tdp in axis(&s.dephasing_times_s, base.protocol.dephasing_time_s) {
                        for cut in axis(&s.cutoffs_s, base.protocol.cutoff_s) {
                            for k in axis(&s.weather_factors, base.background.weather_factor) {
                                for d in axis(&s.distances_km, base.layout.ground_distance_km) {
                                    let mut p = base;
                                    p.protocol.scenario = scenario;
                                    p.layout.sat_a_offset = offset;
                                    if mirror {
                                        p.layout.sat_b_offset = 1.0 - offset;
                                    }
                                    p.layout.orbital_height_km = h;
                                    p.optics.divergence_rad = theta;
                                    p.protocol.dephasing_time_s = tdp;
                                    p.protocol.cutoff_s = cut;
                                    p.background.weather_factor = k;
                                    p.layout.ground_distance_km = d;
                                    out.push(SweepPoint { index: out.len(), params: p });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    /// A required link is hidden by the Earth; rates are zero.
    Invisible,
    Error,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Invisible => "invisible",
            RowStatus::Error => "error",
        }
    }
}

/// One line of the flat result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub index: usize,
    pub scenario: Scenario,
    pub status: RowStatus,
    pub seed: u64,
    pub ground_distance_km: f64,
    pub orbital_height_km: f64,
    pub sat_a_offset: f64,
    pub sat_c_offset: f64,
    pub sat_b_offset: f64,
    pub orbit_phase_s: f64,
    pub divergence_rad: f64,
    pub pointing_error_rad: f64,
    pub receiver_radius_m: f64,
    pub weather_factor: f64,
    pub dephasing_time_s: f64,
    /// Empty in CSV when there is no cutoff.
    pub cutoff_s: Option<f64>,
    pub memory_modes: usize,
    pub clock_rate_hz: f64,
    /// Loss of the link ending at station `A`; empty when it is hidden.
    pub loss_a_db: Option<f64>,
    pub samples: usize,
    pub raw_rate: f64,
    pub raw_rate_se: f64,
    pub e_x: f64,
    pub e_x_se: f64,
    pub e_z: f64,
    pub e_z_se: f64,
    pub key_rate: f64,
    pub key_rate_se: f64,
    /// Simulated time until the last delivered pair, s.
    pub sim_time_s: f64,
    pub message: String,
}

impl ResultRow {
    fn new(index: usize, seed: u64, p: &PointParams) -> Self {
        Self {
            index,
            scenario: p.protocol.scenario,
            status: RowStatus::Ok,
            seed,
            ground_distance_km: p.layout.ground_distance_km,
            orbital_height_km: p.layout.orbital_height_km,
            sat_a_offset: p.layout.sat_a_offset,
            sat_c_offset: p.layout.sat_c_offset,
            sat_b_offset: p.layout.sat_b_offset,
            orbit_phase_s: p.layout.orbit_phase_s,
            divergence_rad: p.optics.divergence_rad,
            pointing_error_rad: p.optics.pointing_error_rad,
            receiver_radius_m: p.optics.receiver_radius_m,
            weather_factor: p.background.weather_factor,
            dephasing_time_s: p.protocol.dephasing_time_s,
            cutoff_s: p.protocol.cutoff_s.0,
            memory_modes: p.protocol.memory_modes,
            clock_rate_hz: p.protocol.clock_rate_hz,
            loss_a_db: None,
            samples: 0,
            raw_rate: 0.0,
            raw_rate_se: 0.0,
            e_x: 0.0,
            e_x_se: 0.0,
            e_z: 0.0,
            e_z_se: 0.0,
            key_rate: 0.0,
            key_rate_se: 0.0,
            sim_time_s: 0.0,
            message: String::new(),
        }
    }

    fn set_rate(&mut self, r: &RateResult) {
        self.samples = r.samples;
        self.raw_rate = r.raw_rate;
        self.raw_rate_se = r.raw_rate_se;
        self.e_x = r.e_x;
        self.e_x_se = r.e_x_se;
        self.e_z = r.e_z;
        self.e_z_se = r.e_z_se;
        self.key_rate = r.key_rate;
        self.key_rate_se = r.key_rate_se;
    }

    /// The rate fields as a [`RateResult`].
    pub fn rate(&self) -> RateResult {
        RateResult {
            raw_rate: self.raw_rate,
            e_x: self.e_x,
            e_z: self.e_z,
            key_rate: self.key_rate,
            samples: self.samples,
            raw_rate_se: self.raw_rate_se,
            e_x_se: self.e_x_se,
            e_z_se: self.e_z_se,
            key_rate_se: self.key_rate_se,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub samples_override: Option<usize>,
    pub keep_records: bool,
}

/// Evaluated row plus the per-point artifacts that stay out of the table.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub row: ResultRow,
    /// Delivered pairs, when requested.
    pub records: Option<Vec<SampleRecord>>,
    pub wall_time_s: f64,
}

/// Runs a single point and never fails: problems become an `error` row.
pub fn evaluate(index: usize, params: &PointParams, samples: usize, seed: u64, keep_records: bool, max_events: Option<u64>) -> PointResult {
    let started = Instant::now();
    let mut row = ResultRow::new(index, seed, params);
    let mut records = None;
    match params.a_side_budget() {
        Ok(b) => row.loss_a_db = Some(b.loss_db()),
        Err(e) if e.is_visibility() => {}
        Err(e) => {
            row.status = RowStatus::Error;
            row.message = e.to_string();
        }
    }
    if row.status == RowStatus::Ok {
        match params.links_visible() {
            Ok(false) => row.status = RowStatus::Invisible,
            Ok(true) => {
                let mut opts = RunOptions::new(samples, seed);
                if let Some(m) = max_events {
                    opts.max_events = m;
                }
                match run_point(params, &opts) {
                    Ok(ProtocolOutcome::Baseline { rate }) => row.set_rate(&RateResult::exact(rate)),
                    Ok(ProtocolOutcome::Simulated(out)) => match rate_of(&out.records) {
                        Ok(r) => {
                            row.set_rate(&r);
                            row.sim_time_s = out.records.last().map_or(0.0, |r| r.time);
                            if keep_records {
                                records = Some(out.records);
                            }
                        }
                        Err(e) => {
                            row.status = RowStatus::Error;
                            row.message = e.to_string();
                        }
                    },
                    Err(e) if e.is_visibility() => row.status = RowStatus::Invisible,
                    Err(e) => {
                        row.status = RowStatus::Error;
                        row.message = e.to_string();
                    }
                }
            }
            Err(e) => {
                row.status = RowStatus::Error;
                row.message = e.to_string();
            }
        }
    }
    if row.status == RowStatus::Error {
        log::warn!("point {index}: {}", row.message);
    }
    PointResult { row, records, wall_time_s: started.elapsed().as_secs_f64() }
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool starts")
}

fn samples(config: &RunConfig, opts: &SweepOptions, scenario: Scenario) -> usize {
    opts.samples_override.unwrap_or_else(|| config.samples_for(scenario))
}

/// Evaluates every point of the sweep; results come back in point order
/// whatever the completion order.
pub fn run_sweep(config: &RunConfig, opts: &SweepOptions) -> Vec<PointResult> {
    let points = expand(config);
    pool(opts.workers).install(|| {
        points
            .par_iter()
            .map(|pt| {
                let n = samples(config, opts, pt.params.protocol.scenario);
                let seed = mix_seed(config.seed, pt.index as u64);
                evaluate(pt.index, &pt.params, n, seed, opts.keep_records, config.run.max_events)
            })
            .collect()
    })
}

/// Only the base point.
pub fn run_single(config: &RunConfig, opts: &SweepOptions) -> PointResult {
    let p = config.base_point();
    let n = samples(config, opts, p.protocol.scenario);
    evaluate(0, &p, n, mix_seed(config.seed, 0), opts.keep_records, config.run.max_events)
}

/// Per-pass summary of one orbit sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub point: usize,
    pub scenario: Scenario,
    pub ground_distance_km: f64,
    pub orbital_height_km: f64,
    pub sat_a_offset: f64,
    pub divergence_rad: f64,
    pub result: OrbitSweepResult,
}

/// For every sweep point, a static simulation at each phase of the orbit
/// grid, then the per-pass summary. Rows are numbered point-major.
pub fn run_orbit(config: &RunConfig, opts: &SweepOptions) -> (Vec<PointResult>, Vec<OrbitSummary>) {
    let phases = symmetric_grid(config.orbit.half_width_s, config.orbit.points);
    let points = expand(config);
    let jobs: Vec<(usize, usize)> =
        (0..points.len()).flat_map(|p| (0..phases.len()).map(move |k| (p, k))).collect();
    let results: Vec<PointResult> = pool(opts.workers).install(|| {
        jobs.par_iter()
            .map(|&(p, k)| {
                let mut params = points[p].params;
                params.layout.orbit_phase_s = phases[k];
                let n = samples(config, opts, params.protocol.scenario);
                let seed = mix_seed(mix_seed(config.seed, p as u64), k as u64);
                evaluate(p * phases.len() + k, &params, n, seed, opts.keep_records, config.run.max_events)
            })
            .collect()
    });
    let summaries = points
        .iter()
        .map(|pt| {
            let rows = &results[pt.index * phases.len()..(pt.index + 1) * phases.len()];
            let sweep: Vec<_> = rows
                .iter()
                .map(|r| crate::analysis::PhasePoint {
                    phase_s: r.row.orbit_phase_s,
                    visible: r.row.status != RowStatus::Invisible,
                    rate: r.row.rate(),
                })
                .collect();
            let period = orbital_period(pt.params.layout.orbital_height_km, &pt.params.geometry);
            let result = effective_rate(&sweep, period).expect("orbit grid has at least two sorted phases");
            OrbitSummary {
                point: pt.index,
                scenario: pt.params.protocol.scenario,
                ground_distance_km: pt.params.layout.ground_distance_km,
                orbital_height_km: pt.params.layout.orbital_height_km,
                sat_a_offset: pt.params.layout.sat_a_offset,
                divergence_rad: pt.params.optics.divergence_rad,
                result,
            }
        })
        .collect();
    (results, summaries)
}
