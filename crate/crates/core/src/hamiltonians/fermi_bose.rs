//! Tiny fermionic oracle certifying the Fermi-Bose condensate → inhomogeneous
//! Tavis-Cummings mapping.
//!
//! Fermionic modes are ordered `(0↑, 0↓, 1↑, 1↓, ...)` and represented with a
//! Jordan-Wigner string; each mode factor uses the basis `{empty, occupied}`.
//! The boson factor comes last, as in [`crate::hilbert`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpace, Operator};

use super::inhomogeneous_dicke;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Spin-1/2 fermion levels ⊗ truncated boson.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FermionicSpace {
    n_levels: usize,
    fock_cutoff: usize,
}

impl FermionicSpace {
    pub fn new(n_levels: usize, fock_cutoff: usize) -> Result<Self> {
        if !(1..=2).contains(&n_levels) {
            return Err(Error::Unsupported(format!(
                "the fermionic oracle supports 1 or 2 levels, not {n_levels}"
            )));
        }
        Ok(Self {
            n_levels,
            fock_cutoff,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn n_modes(&self) -> usize {
        2 * self.n_levels
    }

    pub fn fock_levels(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        (1 << self.n_modes()) * self.fock_levels()
    }

    /// Annihilation operator of mode `(level, spin)`; `spin` 0 = ↑, 1 = ↓.
    pub fn annihilation(&self, level: usize, spin: usize) -> DMatrix<C64> {
        let mode = 2 * level + spin;
        let parity = DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        let lower = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        let id2 = DMatrix::<C64>::identity(2, 2);
        let mut m = DMatrix::<C64>::identity(1, 1);
        for k in 0..self.n_modes() {
            let f = if k < mode {
                &parity
            } else if k == mode {
                &lower
            } else {
                &id2
            };
            m = m.kronecker(f);
        }
        m.kronecker(&DMatrix::identity(self.fock_levels(), self.fock_levels()))
    }

    pub fn boson_annihilation(&self) -> DMatrix<C64> {
        let f = self.fock_levels();
        let mut a = DMatrix::<C64>::zeros(f, f);
        for k in 1..f {
            a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
        }
        DMatrix::<C64>::identity(1 << self.n_modes(), 1 << self.n_modes()).kronecker(&a)
    }

    fn vacuum(&self) -> DVector<C64> {
        let mut v = DVector::zeros(self.dim());
        v[0] = ONE;
        v
    }

    /// Maximum deviation from `{c_p, c_q†} = δ_pq` and `{c_p, c_q} = 0`.
    pub fn anticommutation_deviation(&self) -> f64 {
        let modes: Vec<DMatrix<C64>> = (0..self.n_levels)
            .flat_map(|l| (0..2).map(move |s| (l, s)))
            .map(|(l, s)| self.annihilation(l, s))
            .collect();
        let id = DMatrix::<C64>::identity(self.dim(), self.dim());
        let mut dev: f64 = 0.0;
        for (p, cp) in modes.iter().enumerate() {
            for (q, cq) in modes.iter().enumerate() {
                let cqd = cq.adjoint();
                let ac = cp * &cqd + &cqd * cp;
                let target = if p == q {
                    id.clone()
                } else {
                    DMatrix::zeros(self.dim(), self.dim())
                };
                dev = dev.max((ac - target).camax());
                let acc = cp * cq + cq * cp;
                dev = dev.max(acc.camax());
            }
        }
        dev
    }
}

/// Measured deviations of the oracle comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    /// Largest elementwise gap between sorted restricted and mapped spectra.
    pub spectrum_deviation: f64,
    /// `max |V† H_f V - H_mapped|` under the explicit basis map `V`.
    pub matrix_element_deviation: f64,
    /// `max |P H_f (I - P)|`.
    pub off_block_coupling: f64,
    /// `max |V V† - P|`.
    pub projector_deviation: f64,
    /// Deviation from the canonical anticommutation relations.
    pub anticommutation_deviation: f64,
}

#[derive(Clone, Debug)]
pub struct FermiBoseOracle {
    pub space: FermionicSpace,
    /// Fermi-Bose condensate Hamiltonian on the fermionic space.
    pub h_fermionic: DMatrix<C64>,
    /// Projector onto configurations where every level is empty or doubly occupied.
    pub projector: DMatrix<C64>,
    /// Isometry from the qubit ⊗ boson space onto the projected subspace.
    pub basis_map: DMatrix<C64>,
    /// Mapped rotating-wave inhomogeneous Dicke model, shifted by `Σ ε_i`.
    pub h_mapped: Operator,
    pub report: OracleReport,
}

/// Build the Fermi-Bose condensate Hamiltonian
/// `Σ ε_i c†_{iσ} c_{iσ} + ω a†a + g Σ_i (a† c_{i↓} c_{i↑} + a c†_{i↑} c†_{i↓})`
/// and compare it with the inhomogeneous Tavis-Cummings model with
/// `ω0^i = 2 ε_i` and `λ = g √N`.
pub fn fermi_bose_oracle(
    level_energies: &[f64],
    mode_freq: f64,
    g: f64,
    fock_cutoff: usize,
) -> Result<FermiBoseOracle> {
    let fs = FermionicSpace::new(level_energies.len(), fock_cutoff)?;
    let dim = fs.dim();
    let a = fs.boson_annihilation();
    let ad = a.adjoint();

    let mut h = (&ad * &a) * C64::new(mode_freq, 0.0);
    let mut pairs = Vec::with_capacity(fs.n_levels());
    let mut projector = DMatrix::<C64>::identity(dim, dim);
    let id = DMatrix::<C64>::identity(dim, dim);
    for (i, &eps) in level_energies.iter().enumerate() {
        let up = fs.annihilation(i, 0);
        let down = fs.annihilation(i, 1);
        let n_up = up.adjoint() * &up;
        let n_down = down.adjoint() * &down;
        h += (&n_up + &n_down) * C64::new(eps, 0.0);
        let lower = &down * &up; // σ-^i ≡ c_{i↓} c_{i↑}
        let raise = lower.adjoint(); // σ+^i ≡ c†_{i↑} c†_{i↓}
        h += (&ad * &lower + &a * &raise) * C64::new(g, 0.0);
        // n↑ n↓ + (1 - n↑)(1 - n↓)
        let both = &n_up * &n_down;
        let neither = (&id - &n_up) * (&id - &n_down);
        projector = &projector * (both + neither);
        pairs.push(raise);
    }

    // Explicit map: qubit digit 0 (|e>) ↔ level doubly occupied, 1 (|g>) ↔ empty.
    let qspace = HilbertSpace::new(fs.n_levels(), fock_cutoff)?;
    let mut basis_map = DMatrix::<C64>::zeros(dim, qspace.dim());
    let vac = fs.vacuum();
    for q in 0..qspace.dim() {
        let label = qspace.decompose(q);
        let mut v = vac.clone();
        for (i, raise) in pairs.iter().enumerate() {
            if qspace.qubit_digit(q, i) == 0 {
                v = raise * v;
            }
        }
        // boson level: vacuum index 0 -> k via (a†)^k / sqrt(k!)
        for k in 0..label.fock {
            v = (&ad * v) / C64::new(((k + 1) as f64).sqrt(), 0.0);
        }
        basis_map.set_column(q, &v);
    }

    let qubit_freqs: Vec<f64> = level_energies.iter().map(|e| 2.0 * e).collect();
    let lambda = g * (fs.n_levels() as f64).sqrt();
    let shift: f64 = level_energies.iter().sum();
    let mapped = inhomogeneous_dicke(qspace, &qubit_freqs, mode_freq, lambda, true)?;
    let h_mapped = &mapped + &(&Operator::identity(qspace) * shift);

    let restricted = basis_map.adjoint() * &h * &basis_map;
    let matrix_element_deviation = (&restricted - h_mapped.matrix()).camax();
    let restricted_op = Operator::new(qspace, restricted)?;
    let spec_r = crate::hilbert::spectrum(&restricted_op)?;
    let spec_m = crate::hilbert::spectrum(&h_mapped)?;
    let spectrum_deviation = spec_r
        .iter()
        .zip(&spec_m)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let off_block_coupling = (&projector * &h * (&id - &projector)).camax();
    let projector_deviation = (&basis_map * basis_map.adjoint() - &projector).camax();

    let report = OracleReport {
        spectrum_deviation,
        matrix_element_deviation,
        off_block_coupling,
        projector_deviation,
        anticommutation_deviation: fs.anticommutation_deviation(),
    };
    Ok(FermiBoseOracle {
        space: fs,
        h_fermionic: h,
        projector,
        basis_map,
        h_mapped,
        report,
    })
}
