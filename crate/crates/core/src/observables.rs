//! Figures of merit recorded along a simulation.
//!
//! Note that [`fidelity`] is the overlap `Tr(ρ_T ρ_I)`, which is the metric
//! used for the digital-analog benchmarks here. It is *not* the Uhlmann
//! fidelity; for two mixed states it can be well below 1 even when they are
//! equal.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hamiltonians::ModelParams;
use crate::hilbert::{check_spaces, DensityMatrix, StateVector};
use crate::lindblad::{IntegratorConfig, NoiseParams};

/// Number of top Fock levels counted as leakage.
pub const LEAKAGE_LEVELS: usize = 2;

/// One recorded time: simulated time and the plotted axis `g t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub t_sim: f64,
    pub g_t: f64,
}

/// Snapshot of everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub params: ModelParams,
    pub noise: NoiseParams,
    pub integrator: IntegratorConfig,
    pub n_steps: usize,
    pub simulated_time: f64,
    pub variant: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub time_grid: Vec<TimePoint>,
    pub fidelity: Vec<f64>,
    pub photon_number_trotter: Vec<f64>,
    pub photon_number_ideal: Vec<f64>,
    /// Survival probability of the initial state under the ideal evolution.
    pub survival: Vec<f64>,
    /// Top-Fock-level population of the Trotterized state.
    pub leakage: Vec<f64>,
    pub trace_error: Vec<f64>,
    /// `(record index, min eigenvalue of ρ_T)` at the sampled points.
    pub min_eigenvalues: Vec<(usize, f64)>,
    /// Largest `max |ρ - ρ†|` seen at a recorded point.
    pub max_hermitian_deviation: f64,
    pub metadata: RunMetadata,
}

impl SimulationResult {
    pub fn len(&self) -> usize {
        self.time_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_grid.is_empty()
    }

    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity.last().expect("results always contain t = 0")
    }

    pub fn max_trace_error(&self) -> f64 {
        self.trace_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().copied().fold(0.0, f64::max)
    }

    /// Check the per-record invariants: equal lengths, bounded fidelity and
    /// non-negative photon numbers.
    pub fn invariants_hold(&self) -> bool {
        let n = self.time_grid.len();
        let lens = [
            self.fidelity.len(),
            self.photon_number_trotter.len(),
            self.photon_number_ideal.len(),
            self.survival.len(),
            self.leakage.len(),
            self.trace_error.len(),
        ];
        lens.iter().all(|&l| l == n)
            && self
                .fidelity
                .iter()
                .all(|f| (-1e-8..=1.0 + 1e-8).contains(f))
            && self
                .photon_number_trotter
                .iter()
                .chain(&self.photon_number_ideal)
                .all(|n| *n >= -1e-8)
    }
}

/// `Re Tr(ρ_T ρ_I)`.
pub fn fidelity(rho_t: &DensityMatrix, rho_i: &DensityMatrix) -> Result<f64> {
    check_spaces(&rho_t.space(), &rho_i.space())?;
    let (a, b) = (rho_t.matrix(), rho_i.matrix());
    // Tr(AB) = Σ_ij A_ij B_ji
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(acc.re)
}

/// `<ψ| ρ |ψ>`, the overlap with a pure reference.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    check_spaces(&rho.space(), &psi.space())?;
    let v = psi.amplitudes();
    Ok(v.dotc(&(rho.matrix() * v)).re)
}

/// `Tr(a†a ρ)`.
pub fn photon_number(rho: &DensityMatrix) -> f64 {
    let space = rho.space();
    (0..space.dim())
        .map(|k| space.fock_level(k) as f64 * rho.matrix()[(k, k)].re)
        .sum()
}

pub fn photon_number_pure(psi: &StateVector) -> f64 {
    let space = psi.space();
    psi.amplitudes()
        .iter()
        .enumerate()
        .map(|(k, z)| space.fock_level(k) as f64 * z.norm_sqr())
        .sum()
}

/// `Tr(ρ_t ρ_0)`; for a pure `ρ_0 = |ψ0><ψ0|` this is `<ψ0|ρ_t|ψ0>`.
pub fn survival_probability(rho_t: &DensityMatrix, rho_0: &DensityMatrix) -> Result<f64> {
    fidelity(rho_t, rho_0)
}

/// Population in the top [`LEAKAGE_LEVELS`] Fock levels.
pub fn leakage(rho: &DensityMatrix) -> f64 {
    let space = rho.space();
    let first = space.fock_levels().saturating_sub(LEAKAGE_LEVELS);
    (0..space.dim())
        .filter(|&k| space.fock_level(k) >= first)
        .map(|k| rho.matrix()[(k, k)].re)
        .sum()
}

pub fn leakage_pure(psi: &StateVector) -> f64 {
    let space = psi.space();
    let first = space.fock_levels().saturating_sub(LEAKAGE_LEVELS);
    psi.amplitudes()
        .iter()
        .enumerate()
        .filter(|(k, _)| space.fock_level(*k) >= first)
        .map(|(_, z)| z.norm_sqr())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{HilbertSpace, Operator};
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn sp() -> HilbertSpace {
        HilbertSpace::new(2, 3).unwrap()
    }

    #[test]
    fn fidelity_cases() {
        let s = sp();
        let a = DensityMatrix::basis(s, 3).unwrap();
        let b = DensityMatrix::basis(s, 5).unwrap();
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        let mixed = DensityMatrix::maximally_mixed(s);
        assert!((fidelity(&mixed, &a).unwrap() - 1.0 / s.dim() as f64).abs() < 1e-15);
        let other = DensityMatrix::basis(HilbertSpace::new(1, 3).unwrap(), 0).unwrap();
        assert!(fidelity(&a, &other).is_err());
    }

    #[test]
    fn photon_number_cases() {
        let s = sp();
        assert_eq!(
            photon_number(&DensityMatrix::basis(s, s.ground_index(0)).unwrap()),
            0.0
        );
        for k in 0..4 {
            assert_eq!(
                photon_number(&DensityMatrix::basis(s, s.ground_index(k)).unwrap()),
                k as f64
            );
        }
    }

    #[test]
    fn survival_cases() {
        let s = sp();
        let psi = StateVector::ground(s);
        let rho0 = psi.to_density();
        assert_eq!(survival_probability(&rho0, &rho0).unwrap(), 1.0);
        let other = DensityMatrix::basis(s, 0).unwrap();
        assert_eq!(survival_probability(&other, &rho0).unwrap(), 0.0);
        // free evolution of an eigenstate keeps it
        let h = crate::hamiltonians::dicke(s, &ModelParams::dicke(2, 0.4, 1.0, 0.0)).unwrap();
        let u = crate::hilbert::evolve_unitary(&h, 2.3).unwrap();
        let evolved = rho0.conjugate_by(&u).unwrap();
        assert!((survival_probability(&evolved, &rho0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leakage_cases() {
        let s = sp();
        assert_eq!(
            leakage(&DensityMatrix::basis(s, s.ground_index(0)).unwrap()),
            0.0
        );
        assert_eq!(
            leakage(&DensityMatrix::basis(s, s.ground_index(3)).unwrap()),
            1.0
        );
        assert_eq!(
            leakage_pure(&StateVector::basis(s, s.ground_index(2)).unwrap()),
            1.0
        );
    }

    fn random_density(s: HilbertSpace, amps: &[f64]) -> DensityMatrix {
        // mixture of two random pure states
        let d = s.dim();
        let v1 = DVector::from_fn(d, |k, _| {
            C64::new(amps[k % amps.len()], amps[(k + 3) % amps.len()] * 0.5)
        });
        let v2 = DVector::from_fn(d, |k, _| {
            C64::new(amps[(k * 5 + 1) % amps.len()], -amps[(k + 1) % amps.len()])
        });
        let p1 = StateVector::new(s, v1)
            .unwrap()
            .normalized()
            .unwrap()
            .to_density();
        let p2 = StateVector::new(s, v2)
            .unwrap()
            .normalized()
            .unwrap()
            .to_density();
        let m = p1.matrix() * C64::new(0.3, 0.0) + p2.matrix() * C64::new(0.7, 0.0);
        DensityMatrix::new(s, m).unwrap()
    }

    proptest! {
        #[test]
        fn fidelity_is_symmetric(
            a in proptest::collection::vec(-1.0f64..1.0, 5..9),
            b in proptest::collection::vec(-1.0f64..1.0, 5..9),
        ) {
            let s = sp();
            let (ra, rb) = (random_density(s, &a), random_density(s, &b));
            prop_assert!((fidelity(&ra, &rb).unwrap() - fidelity(&rb, &ra).unwrap()).abs() <= 1e-12);
            let n = photon_number(&ra);
            prop_assert!(n >= -1e-12 && n <= s.fock_cutoff() as f64 + 1e-12);
            prop_assert!((survival_probability(&ra, &ra).unwrap() - ra.purity()).abs() <= 1e-12);
            let nop = crate::hilbert::boson_op(s, crate::hilbert::BosonOpKind::N);
            prop_assert!((ra.expectation(&nop).unwrap().re - n).abs() <= 1e-12);
            let _ = Operator::identity(s);
        }
    }
}
