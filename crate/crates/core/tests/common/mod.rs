//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use satrep_core::{BellDiagonalState, PointParams, Scenario};

pub type C = Complex<f64>;

fn c(re: f64, im: f64) -> C {
    Complex::new(re, im)
}

/// Complex dense two-qubit reference model. Qubits are ordered left to
/// right in the tensor product; basis |00>, |01>, |10>, |11>.
pub mod dense {
    use super::*;

    pub fn pauli(which: char) -> DMatrix<C> {
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        let entries = match which {
            'I' => [one, z, z, one],
            'X' => [z, one, one, z],
            'Y' => [z, -i, i, z],
            'Z' => [one, z, z, -one],
            _ => unreachable!(),
        };
        DMatrix::from_row_slice(2, 2, &entries)
    }

    /// Operator `op` acting on qubit `k` of an `n`-qubit register.
    pub fn embed(op: &DMatrix<C>, k: usize, n: usize) -> DMatrix<C> {
        let mut out = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for q in 0..n {
            let f = if q == k { op.clone() } else { pauli('I') };
            out = out.kronecker(&f);
        }
        out
    }

    /// `(Φ+, Φ−, Ψ+, Ψ−)`.
    pub fn bell() -> [DVector<C>; 4] {
        let s = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = c(0.0, 0.0);
        [
            DVector::from_vec(vec![s, z, z, s]),
            DVector::from_vec(vec![s, z, z, -s]),
            DVector::from_vec(vec![z, s, s, z]),
            DVector::from_vec(vec![z, s, -s, z]),
        ]
    }

    pub fn density(p: [f64; 4]) -> DMatrix<C> {
        bell().iter().zip(p).fold(DMatrix::zeros(4, 4), |acc, (v, w)| acc + v * v.adjoint() * c(w, 0.0))
    }

    /// Bell-basis populations and the largest off-diagonal magnitude in the
    /// Bell basis.
    pub fn populations(rho: &DMatrix<C>) -> ([f64; 4], f64) {
        let b = bell();
        let mut pops = [0.0; 4];
        let mut off = 0.0f64;
        for (i, u) in b.iter().enumerate() {
            for (j, v) in b.iter().enumerate() {
                let e = (u.adjoint() * rho * v)[(0, 0)];
                if i == j {
                    pops[i] = e.re;
                    off = off.max(e.im.abs());
                } else {
                    off = off.max(e.norm());
                }
            }
        }
        (pops, off)
    }

    pub fn channel(rho: &DMatrix<C>, kraus: &[DMatrix<C>]) -> DMatrix<C> {
        kraus.iter().fold(DMatrix::zeros(rho.nrows(), rho.ncols()), |acc, k| acc + k * rho * k.adjoint())
    }

    /// Phase flip with probability `lambda` on qubit `k`.
    pub fn dephase(rho: &DMatrix<C>, k: usize, lambda: f64) -> DMatrix<C> {
        let kraus = [
            embed(&pauli('I'), k, 2) * c((1.0 - lambda).sqrt(), 0.0),
            embed(&pauli('Z'), k, 2) * c(lambda.sqrt(), 0.0),
        ];
        channel(rho, &kraus)
    }

    /// Depolarizing channel `αρ + (1−α)/4 Σ_P PρP` on qubit `k`.
    pub fn white_noise(rho: &DMatrix<C>, k: usize, alpha: f64) -> DMatrix<C> {
        let w = ((1.0 - alpha) / 4.0).sqrt();
        let kraus = [
            embed(&pauli('I'), k, 2) * c((alpha + (1.0 - alpha) / 4.0).sqrt(), 0.0),
            embed(&pauli('X'), k, 2) * c(w, 0.0),
            embed(&pauli('Y'), k, 2) * c(w, 0.0),
            embed(&pauli('Z'), k, 2) * c(w, 0.0),
        ];
        channel(rho, &kraus)
    }

    /// Bell measurement on the middle qubits of `ρ_{A B1} ⊗ ρ_{B2 C}`, Pauli
    /// correction on `C`, partial trace. One `(probability, ρ_AC)` per
    /// outcome.
    pub fn swap(left: &DMatrix<C>, right: &DMatrix<C>) -> Vec<(f64, DMatrix<C>)> {
        let rho = left.kronecker(right);
        let fix = [pauli('I'), pauli('Z'), pauli('X'), pauli('X') * pauli('Z')];
        bell()
            .iter()
            .zip(fix)
            .map(|(v, fix)| {
                let proj = pauli('I').kronecker(&(v * v.adjoint())).kronecker(&pauli('I'));
                let post = &proj * &rho * &proj;
                let prob = post.trace().re;
                let mut ac = DMatrix::zeros(4, 4);
                for r in 0..4 {
                    for col in 0..4 {
                        let (a, cc, a2, c2) = (r >> 1, r & 1, col >> 1, col & 1);
                        let mut s = c(0.0, 0.0);
                        for m in 0..4 {
                            s += post[((a << 3) | (m << 1) | cc, (a2 << 3) | (m << 1) | c2)];
                        }
                        ac[(r, col)] = s;
                    }
                }
                let corr = pauli('I').kronecker(&fix);
                (prob, &corr * ac * corr.adjoint() / c(prob, 0.0))
            })
            .collect()
    }
}

pub fn random_state(rng: &mut impl Rng) -> BellDiagonalState {
    let w: [f64; 4] = std::array::from_fn(|_| -rng.random::<f64>().ln());
    let s: f64 = w.iter().sum();
    BellDiagonalState::new(w.map(|x| x / s)).unwrap()
}

pub fn max_diff(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Base parameters with the given scenario and mode count.
pub fn point(scenario: Scenario, distance_km: f64, modes: usize) -> PointParams {
    let mut p = PointParams::default();
    p.protocol.scenario = scenario;
    p.protocol.memory_modes = modes;
    p.layout.ground_distance_km = distance_km;
    p
}

/// Dark counts and background light switched off.
pub fn noise_free(mut p: PointParams) -> PointParams {
    p.optics.dark_count_prob = 0.0;
    p.background.weather_factor = 0.0;
    p
}
