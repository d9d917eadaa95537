//! Bell-diagonal two-qubit states and the Pauli channels acting on them.
//!
//! Coefficients are ordered `(Φ+, Φ−, Ψ+, Ψ−)`. Indexing a coefficient by
//! `2·x + z` labels it with a bit-flip bit `x` and a phase-flip bit `z`
//! relative to the target state `Φ+`; Pauli noise on either qubit and
//! entanglement swapping then act as XOR shifts and convolutions on those
//! labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("coefficients {0:?} are not a probability vector")]
    InvalidCoefficients([f64; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalState {
    coeffs: [f64; 4],
}

pub const PHI_PLUS: usize = 0;
pub const PHI_MINUS: usize = 1;
pub const PSI_PLUS: usize = 2;
pub const PSI_MINUS: usize = 3;

impl Default for BellDiagonalState {
    fn default() -> Self {
        Self::phi_plus()
    }
}

impl BellDiagonalState {
    pub fn phi_plus() -> Self {
        Self { coeffs: [1.0, 0.0, 0.0, 0.0] }
    }

    pub fn fully_mixed() -> Self {
        Self { coeffs: [0.25; 4] }
    }

    /// Builds a state from `(Φ+, Φ−, Ψ+, Ψ−)` weights, renormalizing if the sum
    /// is off by at most 1e-9.
    pub fn new(coeffs: [f64; 4]) -> Result<Self, QuantumError> {
        let sum: f64 = coeffs.iter().sum();
        if coeffs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(QuantumError::InvalidCoefficients(coeffs));
        }
        Ok(Self::normalized(coeffs))
    }

    fn normalized(mut coeffs: [f64; 4]) -> Self {
        let sum: f64 = coeffs.iter().sum();
        for c in &mut coeffs {
            *c /= sum;
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> [f64; 4] {
        self.coeffs
    }

    pub fn fidelity(&self) -> f64 {
        self.coeffs[PHI_PLUS]
    }

    /// Applies `ρ → (1−p) ρ + p Z ρ Z` on one qubit.
    pub fn phase_flip(&self, p: f64) -> Self {
        let c = self.coeffs;
        let q = 1.0 - p;
        Self::normalized([
            q * c[0] + p * c[1],
            q * c[1] + p * c[0],
            q * c[2] + p * c[3],
            q * c[3] + p * c[2],
        ])
    }

    /// Memory dephasing of one qubit stored for `elapsed_s` with dephasing
    /// time `dephasing_time_s`. Either qubit gives the same Bell-diagonal
    /// result.
    pub fn dephase(&self, elapsed_s: f64, dephasing_time_s: f64) -> Self {
        if elapsed_s <= 0.0 {
            return *self;
        }
        self.phase_flip(dephasing_probability(elapsed_s, dephasing_time_s))
    }

    /// Local white noise on one qubit: the state survives with weight
    /// `alpha` and is replaced by the fully mixed state otherwise.
    pub fn white_noise(&self, alpha: f64) -> Self {
        let mix = (1.0 - alpha) * 0.25;
        let c = self.coeffs;
        Self::normalized([
            alpha * c[0] + mix,
            alpha * c[1] + mix,
            alpha * c[2] + mix,
            alpha * c[3] + mix,
        ])
    }

    /// Error rates `(e_X, e_Z)` of measurements in the `X` and `Z` bases
    /// relative to `Φ+`.
    pub fn error_rates(&self) -> (f64, f64) {
        let c = self.coeffs;
        (c[PHI_MINUS] + c[PSI_MINUS], c[PSI_PLUS] + c[PSI_MINUS])
    }
}

/// `λ(t) = (1 − e^{−t/T_dp}) / 2`.
pub fn dephasing_probability(elapsed_s: f64, dephasing_time_s: f64) -> f64 {
    -0.5 * (-elapsed_s / dephasing_time_s).exp_m1()
}

/// Entanglement swapping of pairs `X–Y` and `Y–Z` into `X–Z`, after the Pauli
/// correction for the announced Bell-measurement outcome.
pub fn swap(left: &BellDiagonalState, right: &BellDiagonalState) -> BellDiagonalState {
    let mut out = [0.0; 4];
    for (i, a) in left.coeffs.iter().enumerate() {
        for (j, b) in right.coeffs.iter().enumerate() {
            out[i ^ j] += a * b;
        }
    }
    BellDiagonalState::normalized(out)
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_coeffs(s: &BellDiagonalState, expected: [f64; 4], eps: f64) {
        for (a, b) in s.coeffs().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = eps);
        }
    }

    #[test]
    fn dephasing_examples() {
        let phi = BellDiagonalState::phi_plus();
        assert_eq!(phi.dephase(0.0, 0.1), phi);
        assert_coeffs(&phi.dephase(1e6, 0.1), [0.5, 0.5, 0.0, 0.0], 1e-15);
        let t = 0.1 * std::f64::consts::LN_2;
        assert_abs_diff_eq!(dephasing_probability(t, 0.1), 0.25, epsilon = 1e-15);
        assert_coeffs(&phi.dephase(t, 0.1), [0.75, 0.25, 0.0, 0.0], 1e-15);
    }

    #[test]
    fn white_noise_examples() {
        let phi = BellDiagonalState::phi_plus();
        assert_eq!(phi.white_noise(1.0), phi);
        let s = BellDiagonalState::new([0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_coeffs(&s.white_noise(0.0), [0.25; 4], 1e-15);
        assert_coeffs(&phi.white_noise(0.9), [0.925, 0.025, 0.025, 0.025], 1e-15);
    }

    #[test]
    fn swap_examples() {
        let phi = BellDiagonalState::phi_plus();
        assert_eq!(swap(&phi, &phi), phi);
        let s = BellDiagonalState::new([0.9, 0.1, 0.0, 0.0]).unwrap();
        assert_coeffs(&swap(&s, &s), [0.82, 0.18, 0.0, 0.0], 1e-15);
        let any = BellDiagonalState::new([0.7, 0.1, 0.15, 0.05]).unwrap();
        assert_coeffs(&swap(&BellDiagonalState::fully_mixed(), &any), [0.25; 4], 1e-15);
    }

    #[test]
    fn swap_oracle_fixed_case() {
        let outcomes = dense::swap([0.9, 0.1, 0.0, 0.0], [0.9, 0.1, 0.0, 0.0]);
        for (prob, coeffs) in outcomes {
            assert_abs_diff_eq!(prob, 0.25, epsilon = 1e-12);
            for (a, b) in coeffs.iter().zip([0.82, 0.18, 0.0, 0.0]) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn error_rate_examples() {
        assert_eq!(BellDiagonalState::phi_plus().error_rates(), (0.0, 0.0));
        assert_eq!(BellDiagonalState::fully_mixed().error_rates(), (0.5, 0.5));
        let s = BellDiagonalState::new([0.82, 0.18, 0.0, 0.0]).unwrap();
        let (ex, ez) = s.error_rates();
        assert_abs_diff_eq!(ex, 0.18, epsilon = 1e-15);
        assert_eq!(ez, 0.0);
    }

    #[test]
    fn error_rates_match_measurement_statistics() {
        // P(outcomes disagree) = <(I - P⊗P)/2> for P ∈ {X, Z}
        let coeffs = [0.6, 0.2, 0.15, 0.05];
        let rho = dense::density(coeffs);
        let disagree = |p: char| {
            let op = dense::kron(&dense::pauli(p), &dense::pauli(p));
            (1.0 - (&op * &rho).trace()) / 2.0
        };
        let (ex, ez) = BellDiagonalState::new(coeffs).unwrap().error_rates();
        assert_abs_diff_eq!(ex, disagree('X'), epsilon = 1e-12);
        assert_abs_diff_eq!(ez, disagree('Z'), epsilon = 1e-12);
    }

    #[test]
    fn rejects_invalid() {
        assert!(BellDiagonalState::new([0.5, 0.5, 0.5, 0.0]).is_err());
        assert!(BellDiagonalState::new([1.1, -0.1, 0.0, 0.0]).is_err());
    }

    fn state() -> impl Strategy<Value = BellDiagonalState> {
        prop::array::uniform4(0.0f64..1.0).prop_filter_map("nonzero", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| BellDiagonalState::normalized(w))
        })
    }

    fn close(a: [f64; 4], b: [f64; 4], eps: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= eps)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn channels_match_dense_oracle(s in state(), qubit in 0usize..2, lambda in 0.0f64..0.5, alpha in 0.0f64..1.0) {
            let rho = dense::density(s.coeffs());
            let deph = dense::bell_diagonal(&dense::dephase(&rho, qubit, lambda));
            prop_assert!(close(s.phase_flip(lambda).coeffs(), deph, 1e-10));
            let wn = dense::bell_diagonal(&dense::white_noise(&rho, qubit, alpha));
            prop_assert!(close(s.white_noise(alpha).coeffs(), wn, 1e-10));
        }

        #[test]
        fn swap_matches_dense_oracle(l in state(), r in state()) {
            let fast = swap(&l, &r).coeffs();
            for (prob, coeffs) in dense::swap(l.coeffs(), r.coeffs()) {
                prop_assert!((prob - 0.25).abs() < 1e-10);
                prop_assert!(close(fast, coeffs, 1e-10));
            }
        }

        #[test]
        fn channels_preserve_normalization(s in state(), t in 0.0f64..10.0, alpha in 0.0f64..1.0) {
            for out in [s.dephase(t, 0.1), s.white_noise(alpha), swap(&s, &s)] {
                let c = out.coeffs();
                prop_assert!(c.iter().all(|x| *x >= 0.0));
                prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn dephasing_semigroup(s in state(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, tdp in 1e-3f64..1.0) {
            let two = s.dephase(t1, tdp).dephase(t2, tdp);
            let one = s.dephase(t1 + t2, tdp);
            prop_assert!(close(two.coeffs(), one.coeffs(), 1e-12));
        }

        #[test]
        fn swap_associative_and_commutes_with_dephasing(a in state(), b in state(), c in state(), t in 0.0f64..1.0) {
            let left = swap(&swap(&a, &b), &c);
            let right = swap(&a, &swap(&b, &c));
            prop_assert!(close(left.coeffs(), right.coeffs(), 1e-12));
            let before = swap(&a.dephase(t, 0.1), &b);
            let after = swap(&a, &b).dephase(t, 0.1);
            prop_assert!(close(before.coeffs(), after.coeffs(), 1e-12));
        }
    }
}
