use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimingError {
    #[error("{what} must be finite and non-negative, got {value}")]
    Invalid { what: &'static str, value: f64 },
    #[error("memory waiting time is negative ({0} s); the distances violate the triangle inequality")]
    NegativeWait(f64),
}

fn check(what: &'static str, value: f64) -> Result<f64, TimingError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(TimingError::Invalid { what, value })
    }
}

/// Time an absorptive memory at `S_C` must hold a freshly loaded qubit before
/// it can hear whether the partner photon from the source on `S_A` clicked at
/// ground station `A`. Distances in km, `c` in m/s.
pub fn t_mem(d_sa_a: f64, d_sa_sc: f64, d_a_sc: f64, c: f64) -> Result<f64, TimingError> {
    let excess = check("d(S_A, A)", d_sa_a)? - check("d(S_A, S_C)", d_sa_sc)? + check("d(A, S_C)", d_a_sc)?;
    let t = excess * 1e3 / c;
    // chords obey the triangle inequality; only rounding can push this below 0
    if t < 0.0 {
        if t > -1e-12 {
            return Ok(0.0);
        }
        return Err(TimingError::NegativeWait(t));
    }
    Ok(t)
}

/// Round-trip duration of one emit-and-confirm trial over `distance_km`.
pub fn t_trial(distance_km: f64, c: f64) -> Result<f64, TimingError> {
    Ok(2.0 * check("distance", distance_km)? * 1e3 / c)
}
