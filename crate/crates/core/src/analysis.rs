//! Key rates from delivered pairs, orbit sweeps and per-pass averages.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::orbital_period;
use crate::protocols::{run_point, PointParams, ProtocolError, ProtocolOutcome, RunOptions, SampleRecord};
use crate::sim::mix_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("probability {0} is outside [0, 1]")]
    Domain(f64),
    #[error("no delivered pairs to analyse")]
    Empty,
    #[error("elapsed time must be positive, got {0} s")]
    Duration(f64),
    #[error("an orbit sweep needs at least two phases")]
    ShortSweep,
    #[error("orbit phases must be finite and strictly increasing")]
    UnsortedSweep,
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(p: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalysisError::Domain(p));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Asymptotic BBM92 secret fraction with perfect error correction.
pub fn secret_fraction(e_x: f64, e_z: f64) -> Result<f64, AnalysisError> {
    Ok(1.0 - binary_entropy(e_x)? - binary_entropy(e_z)?)
}

fn key(raw: f64, e_x: f64, e_z: f64) -> Result<f64, AnalysisError> {
    Ok((raw * secret_fraction(e_x, e_z)?).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    /// Delivered pairs per second.
    pub raw_rate: f64,
    pub e_x: f64,
    pub e_z: f64,
    /// Secret key bits per second, never negative.
    pub key_rate: f64,
    pub samples: usize,
    pub raw_rate_se: f64,
    pub e_x_se: f64,
    pub e_z_se: f64,
    pub key_rate_se: f64,
}

impl RateResult {
    /// A rate known exactly, with no errors and no sampling.
    pub fn exact(raw_rate: f64) -> Self {
        Self {
            raw_rate,
            e_x: 0.0,
            e_z: 0.0,
            key_rate: raw_rate,
            samples: 0,
            raw_rate_se: 0.0,
            e_x_se: 0.0,
            e_z_se: 0.0,
            key_rate_se: 0.0,
        }
    }

    pub fn zero() -> Self {
        Self::exact(0.0)
    }
}

/// Number of contiguous blocks used for jackknife errors.
pub const JACKKNIFE_BLOCKS: usize = 20;

/// Key rate from `records` delivered within `elapsed` seconds.
///
/// Standard errors come from a delete-one-block jackknife over contiguous
/// blocks of records; removing a block also removes the time it spans.
pub fn key_rate(records: &[SampleRecord], elapsed: f64) -> Result<RateResult, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if !(elapsed > 0.0 && elapsed.is_finite()) {
        return Err(AnalysisError::Duration(elapsed));
    }
    let n = records.len();
    let errs: Vec<(f64, f64)> = records.iter().map(|r| r.state.error_rates()).collect();
    let sum_x: f64 = errs.iter().map(|e| e.0).sum();
    let sum_z: f64 = errs.iter().map(|e| e.1).sum();
    let raw = n as f64 / elapsed;
    let e_x = (sum_x / n as f64).clamp(0.0, 1.0);
    let e_z = (sum_z / n as f64).clamp(0.0, 1.0);
    let key_rate = key(raw, e_x, e_z)?;

    let blocks = JACKKNIFE_BLOCKS.min(n);
    let mut se = [0.0; 4];
    if blocks >= 2 {
        let mut estimates = Vec::with_capacity(blocks);
        let mut prev_end = 0.0;
        for b in 0..blocks {
            let (lo, hi) = (b * n / blocks, (b + 1) * n / blocks);
            // the final block owns any time after the last record
            let end = if b + 1 == blocks { elapsed } else { records[hi - 1].time };
            let span = end - prev_end;
            prev_end = end;
            let m = (n - (hi - lo)) as f64;
            let bx: f64 = errs[lo..hi].iter().map(|e| e.0).sum();
            let bz: f64 = errs[lo..hi].iter().map(|e| e.1).sum();
            let rest = elapsed - span;
            let r = if rest > 0.0 { m / rest } else { raw };
            let ex = ((sum_x - bx) / m).clamp(0.0, 1.0);
            let ez = ((sum_z - bz) / m).clamp(0.0, 1.0);
            estimates.push([r, ex, ez, key(r, ex, ez)?]);
        }
        let g = blocks as f64;
        for (k, s) in se.iter_mut().enumerate() {
            let mean = estimates.iter().map(|e| e[k]).sum::<f64>() / g;
            let ss: f64 = estimates.iter().map(|e| (e[k] - mean).powi(2)).sum();
            *s = ((g - 1.0) / g * ss).sqrt();
        }
    }
    Ok(RateResult {
        raw_rate: raw,
        e_x,
        e_z,
        key_rate,
        samples: n,
        raw_rate_se: se[0],
        e_x_se: se[1],
        e_z_se: se[2],
        key_rate_se: se[3],
    })
}

/// Key rate of a finished run; time runs until the last delivered pair.
pub fn rate_of(records: &[SampleRecord]) -> Result<RateResult, AnalysisError> {
    let last = records.last().ok_or(AnalysisError::Empty)?;
    key_rate(records, last.time)
}

/// Simulates one point and reduces it to a rate.
pub fn point_rate(params: &PointParams, opts: &RunOptions) -> Result<RateResult, PointError> {
    match run_point(params, opts)? {
        ProtocolOutcome::Baseline { rate } => Ok(RateResult::exact(rate)),
        ProtocolOutcome::Simulated(out) => Ok(rate_of(&out.records)?),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// One point of an orbit sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub phase_s: f64,
    /// False when some required link is hidden by the Earth; the rate is
    /// then zero.
    pub visible: bool,
    pub rate: RateResult,
}

/// `n` phases evenly spaced over `[-half_width, half_width]`.
pub fn symmetric_grid(half_width_s: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| -half_width_s + 2.0 * half_width_s * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Static simulations at each orbit phase. Points where a link is hidden
/// have rate zero. Each phase gets its own seed derived from `opts.seed`.
pub fn orbit_sweep(params: &PointParams, phases: &[f64], opts: &RunOptions) -> Result<Vec<PhasePoint>, PointError> {
    phases
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut p = *params;
            p.layout.orbit_phase_s = t;
            if !p.links_visible()? {
                return Ok(PhasePoint { phase_s: t, visible: false, rate: RateResult::zero() });
            }
            let o = RunOptions { seed: mix_seed(opts.seed, i as u64), ..*opts };
            Ok(PhasePoint { phase_s: t, visible: true, rate: point_rate(&p, &o)? })
        })
        .collect()
}

/// Per-pass totals for the best symmetric window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSweepResult {
    /// Half-width of the chosen window in s.
    pub tau_s: f64,
    /// Raw bits per pass.
    pub raw_bits: f64,
    pub e_x: f64,
    pub e_z: f64,
    pub key_bits: f64,
    /// Key bits per second averaged over a whole orbit.
    pub key_rate: f64,
    pub raw_rate: f64,
    pub period_s: f64,
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// Integrates the sweep over `[-τ, τ]` for every `τ = |t|` on the grid and
/// keeps the window with the most key bits per pass. Ties go to the
/// narrowest window.
pub fn effective_rate(points: &[PhasePoint], period_s: f64) -> Result<OrbitSweepResult, AnalysisError> {
    if points.len() < 2 {
        return Err(AnalysisError::ShortSweep);
    }
    if !points.windows(2).all(|w| w[0].phase_s < w[1].phase_s) || !points.iter().all(|p| p.phase_s.is_finite()) {
        return Err(AnalysisError::UnsortedSweep);
    }
    let mut taus: Vec<f64> = points.iter().map(|p| p.phase_s.abs()).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let mut best = OrbitSweepResult {
        tau_s: 0.0,
        raw_bits: 0.0,
        e_x: 0.0,
        e_z: 0.0,
        key_bits: 0.0,
        key_rate: 0.0,
        raw_rate: 0.0,
        period_s,
    };
    for tau in taus {
        let inside: Vec<&PhasePoint> = points.iter().filter(|p| p.phase_s.abs() <= tau).collect();
        if inside.len() < 2 {
            continue;
        }
        let t: Vec<f64> = inside.iter().map(|p| p.phase_s).collect();
        let r: Vec<f64> = inside.iter().map(|p| p.rate.raw_rate).collect();
        let raw_bits = trapezoid(&t, &r);
        if raw_bits <= 0.0 {
            continue;
        }
        let rx: Vec<f64> = inside.iter().map(|p| p.rate.raw_rate * p.rate.e_x).collect();
        let rz: Vec<f64> = inside.iter().map(|p| p.rate.raw_rate * p.rate.e_z).collect();
        let e_x = (trapezoid(&t, &rx) / raw_bits).clamp(0.0, 1.0);
        let e_z = (trapezoid(&t, &rz) / raw_bits).clamp(0.0, 1.0);
        let key_bits = key(raw_bits, e_x, e_z)?;
        if key_bits > best.key_bits || best.raw_bits == 0.0 && key_bits == best.key_bits {
            best = OrbitSweepResult {
                tau_s: tau,
                raw_bits,
                e_x,
                e_z,
                key_bits,
                key_rate: key_bits / period_s,
                raw_rate: raw_bits / period_s,
                period_s,
            };
        }
    }
    Ok(best)
}

/// Orbit sweep of `params` followed by [`effective_rate`] with the orbital
/// period of its height.
pub fn pass_summary(
    params: &PointParams,
    phases: &[f64],
    opts: &RunOptions,
) -> Result<(Vec<PhasePoint>, OrbitSweepResult), PointError> {
    let points = orbit_sweep(params, phases, opts)?;
    let period = orbital_period(params.layout.orbital_height_km, &params.geometry);
    let summary = effective_rate(&points, period)?;
    Ok((points, summary))
}

/// Interval of orbit phases around 0 during which every link of `params`
/// is geometrically possible, located by bisection to `tol_s`. `None` if
/// the links are not all visible at phase 0.
pub fn visibility_window(params: &PointParams, tol_s: f64) -> Result<Option<(f64, f64)>, ProtocolError> {
    let visible = |t: f64| {
        let mut p = *params;
        p.layout.orbit_phase_s = t;
        p.links_visible()
    };
    if !visible(0.0)? {
        return Ok(None);
    }
    let quarter = 0.25 * orbital_period(params.layout.orbital_height_km, &params.geometry);
    let edge = |dir: f64| -> Result<f64, ProtocolError> {
        let (mut inside, mut outside) = (0.0, dir * quarter);
        if visible(outside)? {
            return Ok(outside);
        }
        while (outside - inside).abs() > tol_s {
            let mid = 0.5 * (inside + outside);
            if visible(mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    };
    Ok(Some((edge(-1.0)?, edge(1.0)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GroundTrackLayout;
    use crate::quantum::BellDiagonalState;
    use approx::assert_abs_diff_eq;

    fn perfect(n: usize, dt: f64) -> Vec<SampleRecord> {
        (1..=n).map(|i| SampleRecord { time: i as f64 * dt, state: BellDiagonalState::phi_plus() }).collect()
    }

    fn point(t: f64, r: f64, e: f64) -> PhasePoint {
        PhasePoint {
            phase_s: t,
            visible: true,
            rate: RateResult { raw_rate: r, e_x: e, e_z: e, ..RateResult::zero() },
        }
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert!(binary_entropy(1.01).is_err());
        assert!(binary_entropy(-1e-9).is_err());
    }

    #[test]
    fn bb84_threshold() {
        // bisection for 1 - 2h(e) = 0 on (0, 0.5)
        let (mut lo, mut hi) = (0.01, 0.4);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if secret_fraction(mid, mid).unwrap() > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(lo, 0.1100, epsilon = 1e-4);
    }

    #[test]
    fn five_percent_multiplier() {
        assert_abs_diff_eq!(secret_fraction(0.05, 0.05).unwrap(), 0.427_206, epsilon = 1e-6);
    }

    #[test]
    fn perfect_pairs() {
        let r = key_rate(&perfect(100, 0.01), 1.0).unwrap();
        assert_eq!(r.raw_rate, 100.0);
        assert_eq!(r.key_rate, 100.0);
        assert_eq!(r.samples, 100);
    }

    #[test]
    fn clamped_at_zero() {
        let state = BellDiagonalState::new([0.5, 0.5, 0.0, 0.0]).unwrap();
        let recs = vec![SampleRecord { time: 1.0, state }; 10];
        let r = key_rate(&recs, 2.0).unwrap();
        assert_eq!(r.e_x, 0.5);
        assert_eq!(r.key_rate, 0.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(key_rate(&[], 1.0), Err(AnalysisError::Empty));
    }

    #[test]
    fn jackknife_of_regular_arrivals_is_tiny() {
        let r = rate_of(&perfect(1000, 0.001)).unwrap();
        assert_abs_diff_eq!(r.raw_rate, 1000.0, epsilon = 1e-9);
        assert!(r.raw_rate_se < 1e-6);
    }

    #[test]
    fn constant_sweep() {
        let (r0, tau) = (250.0, 180.0);
        let pts: Vec<_> = symmetric_grid(tau, 13).into_iter().map(|t| point(t, r0, 0.0)).collect();
        let res = effective_rate(&pts, 5545.0).unwrap();
        assert_eq!(res.tau_s, tau);
        assert_abs_diff_eq!(res.raw_bits, 2.0 * tau * r0, epsilon = 1e-9);
        assert_abs_diff_eq!(res.key_rate, 2.0 * tau * r0 / 5545.0, epsilon = 1e-12);
    }

    #[test]
    fn trapezoid_exact_on_linear() {
        let t = symmetric_grid(3.0, 7);
        let y: Vec<f64> = t.iter().map(|t| 2.0 * t + 5.0).collect();
        assert_abs_diff_eq!(trapezoid(&t, &y), 30.0, epsilon = 1e-12);
    }

    #[test]
    fn tau_trims_noisy_edges() {
        let pts: Vec<_> = symmetric_grid(4.0, 9)
            .into_iter()
            .map(|t| if t.abs() > 2.5 { point(t, 100.0, 0.3) } else { point(t, 100.0, 0.0) })
            .collect();
        let res = effective_rate(&pts, 100.0).unwrap();
        assert!(res.tau_s <= 3.0);
        assert!(res.e_x < 0.1);
    }

    #[test]
    fn all_zero_sweep_is_zero() {
        let pts: Vec<_> = symmetric_grid(10.0, 5).into_iter().map(|t| point(t, 0.0, 0.0)).collect();
        let res = effective_rate(&pts, 100.0).unwrap();
        assert_eq!(res.raw_bits, 0.0);
        assert_eq!(res.key_rate, 0.0);
    }

    #[test]
    fn averaged_error_lies_between_extremes() {
        let pts: Vec<_> = symmetric_grid(5.0, 11)
            .into_iter()
            .map(|t| point(t, 50.0 + 3.0 * t, 0.01 + 0.002 * t * t))
            .collect();
        let res = effective_rate(&pts, 100.0).unwrap();
        let inside = pts.iter().filter(|p| p.phase_s.abs() <= res.tau_s);
        let (lo, hi) = inside.fold((1.0f64, 0.0f64), |(lo, hi), p| (lo.min(p.rate.e_x), hi.max(p.rate.e_x)));
        assert!(res.e_x >= lo && res.e_x <= hi);
    }

    #[test]
    fn window_of_single_satellite_shrinks_with_distance() {
        let mk = |d| PointParams {
            layout: GroundTrackLayout::symmetric(d, 400.0, 0.5),
            protocol: crate::protocols::ProtocolConfig {
                scenario: crate::protocols::Scenario::OneSatBaseline,
                ..Default::default()
            },
            ..PointParams::default()
        };
        let (a0, a1) = visibility_window(&mk(1000.0), 0.1).unwrap().unwrap();
        let (b0, b1) = visibility_window(&mk(3000.0), 0.1).unwrap().unwrap();
        assert_abs_diff_eq!(a0, -a1, epsilon = 0.2);
        assert!(b1 - b0 < a1 - a0);
        assert!(visibility_window(&mk(4500.0), 0.1).unwrap().is_none());
    }
}
