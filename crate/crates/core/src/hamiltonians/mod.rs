//! Model parameters and Hamiltonian builders for the Dicke family.
//!
//! All builders work in the fixed qubits-then-boson ordering of
//! [`crate::hilbert`]. Frequencies are angular frequencies in units where the
//! simulated mode frequency is 1 unless a caller chooses otherwise.

pub mod fermi_bose;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    boson_op, collective_qubit_op, qubit_op, BosonOpKind, HilbertSpace, Operator, QubitOpKind,
};

pub use fermi_bose::{fermi_bose_oracle, FermiBoseOracle, FermionicSpace, OracleReport};

/// Tolerance on `α τ = 1` for square-pulse parameters.
pub const PULSE_AREA_TOL: f64 = 1e-12;

/// Square-pulse approximation of a periodically kicked coupling
/// `λ(t) = λ0 + λ1 Σ_k δ(t/T - 2πk)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseParams {
    pub lambda0: f64,
    pub lambda1: f64,
    /// `T`; kicks occur every `2πT`.
    pub period: f64,
    /// Pulse height `α`.
    pub height: f64,
    /// Pulse width `τ`.
    pub width: f64,
}

impl PulseParams {
    /// Pulse parameters whose two coupling plateaus are `g0` and `g1` per
    /// qubit, i.e. `g0 = λ0/√N` and `g1 = (λ0 + λ1 α)/√N`.
    pub fn from_couplings(g0: f64, g1: f64, n_qubits: usize, width: f64, period: f64) -> Self {
        let sqrt_n = (n_qubits as f64).sqrt();
        let height = 1.0 / width;
        Self {
            lambda0: g0 * sqrt_n,
            lambda1: (g1 - g0) * sqrt_n * width,
            period,
            height,
            width,
        }
    }

    /// Kick-to-kick interval `2πT`.
    pub fn kick_interval(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.period
    }

    /// Collective coupling during a pulse, `λ0 + λ1 α`.
    pub fn peak_coupling(&self) -> f64 {
        self.lambda0 + self.lambda1 * self.height
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda0,
            self.lambda1,
            self.period,
            self.height,
            self.width,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "pulse parameters must be finite".into(),
            ));
        }
        if self.period <= 0.0 || self.width <= 0.0 {
            return Err(Error::InvalidParams(
                "pulse period and width must be positive".into(),
            ));
        }
        if (self.height * self.width - 1.0).abs() > PULSE_AREA_TOL {
            return Err(Error::InvalidParams(format!(
                "pulse area alpha*tau = {} must equal 1",
                self.height * self.width
            )));
        }
        if self.width > self.kick_interval() {
            return Err(Error::InvalidParams(format!(
                "pulse width {} exceeds the kick interval {}",
                self.width,
                self.kick_interval()
            )));
        }
        Ok(())
    }
}

/// Interaction-picture parameters of the simulating circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameParams {
    /// `ω0 - δ` per qubit (Tavis-Cummings segments).
    pub qubit_detunings: Vec<f64>,
    /// `ω̃0 - δ` per qubit (segments rotated into anti-Tavis-Cummings).
    pub alt_detunings: Vec<f64>,
    /// `ω - δ`.
    pub mode_detuning: f64,
    /// Transmon-resonator coupling `g`.
    pub coupling: f64,
}

impl FrameParams {
    /// Recover the simulated Dicke frequencies `(ω0^i, ω, λ)`.
    pub fn dicke_targets(&self) -> (Vec<f64>, f64, f64) {
        let n = self.qubit_detunings.len();
        let qubit = self
            .qubit_detunings
            .iter()
            .zip(&self.alt_detunings)
            .map(|(a, b)| a - b)
            .collect();
        (
            qubit,
            2.0 * self.mode_detuning,
            self.coupling * (n as f64).sqrt(),
        )
    }
}

/// Parameters of the Fermi-Bose condensate mapping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FermiBoseParams {
    /// Level energies `ε_i`.
    pub level_energies: Vec<f64>,
}

/// Every parameter of the simulated model and of its simulating frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n_qubits: usize,
    /// Simulated qubit frequencies `ω0^i` (all equal for the homogeneous model).
    pub qubit_freqs: Vec<f64>,
    /// Simulated mode frequency `ω`.
    pub mode_freq: f64,
    /// Collective coupling `λ`; the per-qubit coupling is `λ/√N`.
    pub coupling: f64,
    /// Bias `Δ` of the `Δ Σ σx` term.
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub pulse: Option<PulseParams>,
    #[serde(default)]
    pub frame: Option<FrameParams>,
    #[serde(default)]
    pub fermi_bose: Option<FermiBoseParams>,
}

impl ModelParams {
    /// Homogeneous Dicke model parameters.
    pub fn dicke(n_qubits: usize, qubit_freq: f64, mode_freq: f64, coupling: f64) -> Self {
        Self {
            n_qubits,
            qubit_freqs: vec![qubit_freq; n_qubits],
            mode_freq,
            coupling,
            bias: 0.0,
            pulse: None,
            frame: None,
            fermi_bose: None,
        }
    }

    pub fn with_bias(mut self, bias: f64) -> Self {
        self.bias = bias;
        self
    }

    pub fn with_pulse(mut self, pulse: PulseParams) -> Self {
        self.pulse = Some(pulse);
        self
    }

    /// Per-qubit coupling `λ/√N`.
    pub fn per_qubit_coupling(&self) -> f64 {
        self.coupling / (self.n_qubits as f64).sqrt()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.qubit_freqs.windows(2).all(|w| w[0] == w[1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::InvalidParams(
                "the model needs at least one qubit".into(),
            ));
        }
        if self.qubit_freqs.len() != self.n_qubits {
            return Err(Error::InvalidParams(format!(
                "{} qubit frequencies given for {} qubits",
                self.qubit_freqs.len(),
                self.n_qubits
            )));
        }
        let scalars = [self.mode_freq, self.coupling, self.bias];
        if self
            .qubit_freqs
            .iter()
            .chain(scalars.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParams(
                "all frequencies must be finite".into(),
            ));
        }
        if self.coupling < 0.0 {
            return Err(Error::InvalidParams(
                "the coupling must be non-negative".into(),
            ));
        }
        if let Some(p) = &self.pulse {
            p.validate()?;
        }
        if let Some(f) = &self.frame {
            if f.qubit_detunings.len() != self.n_qubits || f.alt_detunings.len() != self.n_qubits {
                return Err(Error::InvalidParams(
                    "frame detuning lists must have one entry per qubit".into(),
                ));
            }
            let (w0, w, lam) = f.dicke_targets();
            let tol = 1e-12 * (1.0 + self.mode_freq.abs() + self.coupling.abs());
            let consistent = w0
                .iter()
                .zip(&self.qubit_freqs)
                .all(|(a, b)| (a - b).abs() <= tol)
                && (w - self.mode_freq).abs() <= tol
                && (lam - self.coupling).abs() <= tol;
            if !consistent {
                return Err(Error::InvalidParams(
                    "frame parameters do not reproduce the Dicke targets".into(),
                ));
            }
        }
        if let Some(fb) = &self.fermi_bose {
            if fb.level_energies.iter().any(|e| !e.is_finite()) {
                return Err(Error::InvalidParams("level energies must be finite".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn check_space(&self, space: &HilbertSpace) -> Result<()> {
        if space.n_qubits() != self.n_qubits {
            return Err(Error::InvalidParams(format!(
                "parameters describe {} qubits but the space has {}",
                self.n_qubits,
                space.n_qubits()
            )));
        }
        Ok(())
    }
}

/// Fill the frame fields with the symmetric convention
/// `ω0 - δ = +ω0^D/2`, `ω̃0 - δ = -ω0^D/2`, `ω - δ = ω^D/2`, `g = λ^D/√N`.
pub fn frame_map(targets: &ModelParams) -> Result<ModelParams> {
    if targets.n_qubits == 0 {
        return Err(Error::InvalidParams(
            "the model needs at least one qubit".into(),
        ));
    }
    if targets.coupling < 0.0 {
        return Err(Error::InvalidParams(
            "the coupling must be non-negative".into(),
        ));
    }
    let mut out = targets.clone();
    out.frame = None;
    out.validate()?;
    out.frame = Some(FrameParams {
        qubit_detunings: targets.qubit_freqs.iter().map(|w| w / 2.0).collect(),
        alt_detunings: targets.qubit_freqs.iter().map(|w| -w / 2.0).collect(),
        mode_detuning: targets.mode_freq / 2.0,
        coupling: targets.per_qubit_coupling(),
    });
    Ok(out)
}

fn qubit_free(space: HilbertSpace, detunings: &[f64], sign: f64) -> Result<Operator> {
    if detunings.len() != space.n_qubits() {
        return Err(Error::InvalidParams(format!(
            "{} qubit detunings for {} qubits",
            detunings.len(),
            space.n_qubits()
        )));
    }
    let mut acc = Operator::zeros(space);
    for (i, d) in detunings.iter().enumerate() {
        acc = &acc + &(&qubit_op(space, i, QubitOpKind::Z)? * (sign * d / 2.0));
    }
    Ok(acc)
}

/// `Σ_i (σ+^i a + σ-^i a†)`.
pub fn rotating_coupling(space: HilbertSpace) -> Operator {
    ladder_coupling(space, QubitOpKind::Plus, QubitOpKind::Minus)
}

/// `Σ_i (σ-^i a + σ+^i a†)`.
pub fn counter_rotating_coupling(space: HilbertSpace) -> Operator {
    ladder_coupling(space, QubitOpKind::Minus, QubitOpKind::Plus)
}

fn ladder_coupling(space: HilbertSpace, with_a: QubitOpKind, with_adag: QubitOpKind) -> Operator {
    let a = boson_op(space, BosonOpKind::A);
    let ad = boson_op(space, BosonOpKind::Adag);
    let mut acc = Operator::zeros(space);
    for i in 0..space.n_qubits() {
        let s1 = qubit_op(space, i, with_a).expect("index in range");
        let s2 = qubit_op(space, i, with_adag).expect("index in range");
        acc = &acc + &(&(&s1 * &a) + &(&s2 * &ad));
    }
    acc
}

/// `Σ_i σx^i (a + a†)`.
pub fn dipole_coupling(space: HilbertSpace) -> Operator {
    let a = boson_op(space, BosonOpKind::A);
    let quad = &a + &a.dagger();
    &collective_qubit_op(space, QubitOpKind::X) * &quad
}

/// Total excitation number `Σ_i σ+^i σ-^i + a†a`.
pub fn excitation_number(space: HilbertSpace) -> Operator {
    let mut acc = boson_op(space, BosonOpKind::N);
    for i in 0..space.n_qubits() {
        let p = qubit_op(space, i, QubitOpKind::Plus).expect("index in range");
        let m = qubit_op(space, i, QubitOpKind::Minus).expect("index in range");
        acc = &acc + &(&p * &m);
    }
    acc
}

/// Dicke Hamiltonian with an explicit collective coupling `λ`.
pub fn dicke_with_coupling(
    space: HilbertSpace,
    params: &ModelParams,
    coupling: f64,
) -> Result<Operator> {
    params.check_space(&space)?;
    let free = qubit_free(space, &params.qubit_freqs, 1.0)?;
    let mode = &boson_op(space, BosonOpKind::N) * params.mode_freq;
    let g = coupling / (params.n_qubits as f64).sqrt();
    (&(&free + &mode) + &(&dipole_coupling(space) * g)).assert_hermitian()
}

/// `Σ_i (ω0^i/2) σz^i + ω a†a + (λ/√N) Σ_i σx^i (a + a†)`.
pub fn dicke(space: HilbertSpace, params: &ModelParams) -> Result<Operator> {
    params.validate()?;
    dicke_with_coupling(space, params, params.coupling)
}

/// `Σ_i (Δq_i/2) σz^i + Δm a†a + g Σ_i (σ+^i a + σ-^i a†)`.
pub fn tavis_cummings(
    space: HilbertSpace,
    qubit_detunings: &[f64],
    mode_detuning: f64,
    g: f64,
) -> Result<Operator> {
    let free = qubit_free(space, qubit_detunings, 1.0)?;
    let mode = &boson_op(space, BosonOpKind::N) * mode_detuning;
    (&(&free + &mode) + &(&rotating_coupling(space) * g)).assert_hermitian()
}

/// `-Σ_i (Δq_i/2) σz^i + Δm a†a + g Σ_i (σ-^i a + σ+^i a†)`, the image of
/// [`tavis_cummings`] under conjugation by `exp(iπ/2 Σ σx)`.
pub fn anti_tavis_cummings(
    space: HilbertSpace,
    qubit_detunings: &[f64],
    mode_detuning: f64,
    g: f64,
) -> Result<Operator> {
    let free = qubit_free(space, qubit_detunings, -1.0)?;
    let mode = &boson_op(space, BosonOpKind::N) * mode_detuning;
    (&(&free + &mode) + &(&counter_rotating_coupling(space) * g)).assert_hermitian()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn qubit_kind(self) -> QubitOpKind {
        match self {
            Axis::X => QubitOpKind::X,
            Axis::Y => QubitOpKind::Y,
        }
    }
}

/// `exp(-iθ/2 Σ_i σ_axis^i)`, built exactly as a product of single-qubit
/// rotations.
pub fn collective_rotation(space: HilbertSpace, axis: Axis, angle: f64) -> Operator {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let local = match axis {
        // cos I - i sin σx
        Axis::X => [
            C64::new(c, 0.0),
            C64::new(0.0, -s),
            C64::new(0.0, -s),
            C64::new(c, 0.0),
        ],
        // cos I - i sin σy
        Axis::Y => [
            C64::new(c, 0.0),
            C64::new(-s, 0.0),
            C64::new(s, 0.0),
            C64::new(c, 0.0),
        ],
    };
    let local = DMatrix::from_row_slice(2, 2, &local);
    let mut m = DMatrix::<C64>::identity(1, 1);
    for _ in 0..space.n_qubits() {
        m = m.kronecker(&local);
    }
    let f = space.fock_levels();
    let m = m.kronecker(&DMatrix::<C64>::identity(f, f));
    Operator::new(space, m).expect("dimension matches by construction")
}

/// Dicke Hamiltonian plus `Δ Σ_i σx^i`.
pub fn biased_dicke(space: HilbertSpace, params: &ModelParams) -> Result<Operator> {
    let base = dicke(space, params)?;
    let bias = &collective_qubit_op(space, QubitOpKind::X) * params.bias;
    (&base + &bias).assert_hermitian()
}

/// Square-pulse coupling `λ(t)`: `λ0 + λ1 α` while `t` lies within `τ/2` of
/// a kick instant `2πkT`, `λ0` otherwise.
pub fn pulsed_coupling(t: f64, pulse: &PulseParams) -> Result<f64> {
    pulse.validate()?;
    let interval = pulse.kick_interval();
    let phase = t.rem_euclid(interval);
    let distance = phase.min(interval - phase);
    // half-open window [t_k - τ/2, t_k + τ/2)
    let inside = if phase < interval / 2.0 {
        distance < pulse.width / 2.0
    } else {
        distance <= pulse.width / 2.0
    };
    Ok(if inside {
        pulse.peak_coupling()
    } else {
        pulse.lambda0
    })
}

/// Inhomogeneous Dicke model. With `rotating` the coupling keeps only the
/// rotating terms `σ+ a + σ- a†` (the mapped Fermi-Bose condensate);
/// otherwise it is the broadband `σx (a + a†)` form. Both use `λ/√N`.
pub fn inhomogeneous_dicke(
    space: HilbertSpace,
    qubit_freqs: &[f64],
    mode_freq: f64,
    coupling: f64,
    rotating: bool,
) -> Result<Operator> {
    let free = qubit_free(space, qubit_freqs, 1.0)?;
    let mode = &boson_op(space, BosonOpKind::N) * mode_freq;
    let g = coupling / (space.n_qubits() as f64).sqrt();
    let interaction = if rotating {
        rotating_coupling(space)
    } else {
        dipole_coupling(space)
    };
    (&(&free + &mode) + &(&interaction * g)).assert_hermitian()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{commutator, spectrum, HermitianEigen};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sp(n: usize, m: usize) -> HilbertSpace {
        HilbertSpace::new(n, m).unwrap()
    }

    #[test]
    fn frame_map_matches_reference_values() {
        let targets = ModelParams::dicke(2, 0.1, 2.0, 1.5 * 2f64.sqrt());
        let mapped = frame_map(&targets).unwrap();
        let f = mapped.frame.as_ref().unwrap();
        assert!((f.coupling - 1.5).abs() < 1e-14);
        assert!((f.mode_detuning - 1.0).abs() < 1e-15);
        assert!(f.qubit_detunings.iter().all(|d| (d - 0.05).abs() < 1e-15));
        assert!(f.alt_detunings.iter().all(|d| (d + 0.05).abs() < 1e-15));
        mapped.validate().unwrap();
        let (w0, w, lam) = f.dicke_targets();
        assert_eq!(w0, vec![0.1, 0.1]);
        assert_eq!(w, 2.0);
        assert!((lam - targets.coupling).abs() < 1e-14);
    }

    #[test]
    fn frame_map_zero_qubit_freq() {
        let mapped = frame_map(&ModelParams::dicke(3, 0.0, 1.0, 0.4)).unwrap();
        let f = mapped.frame.unwrap();
        assert!(f
            .qubit_detunings
            .iter()
            .chain(&f.alt_detunings)
            .all(|d| *d == 0.0));
    }

    #[test]
    fn frame_map_errors() {
        assert!(frame_map(&ModelParams::dicke(0, 0.1, 1.0, 0.3)).is_err());
        assert!(frame_map(&ModelParams::dicke(2, 0.1, 1.0, -0.3)).is_err());
    }

    #[test]
    fn inconsistent_frame_is_rejected() {
        let mut p = frame_map(&ModelParams::dicke(2, 0.1, 1.0, 0.3)).unwrap();
        p.frame.as_mut().unwrap().mode_detuning = 0.7;
        assert!(p.validate().is_err());
    }

    #[test]
    fn uncoupled_dicke_spectrum() {
        let s = sp(2, 3);
        let p = ModelParams::dicke(2, 0.3, 1.1, 0.0);
        let e = spectrum(&dicke(s, &p).unwrap()).unwrap();
        let mut expect = Vec::new();
        for q in [0.3, 0.0, 0.0, -0.3] {
            for k in 0..4 {
                expect.push(q + 1.1 * k as f64);
            }
        }
        expect.sort_by(f64::total_cmp);
        for (a, b) in e.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_qubit_dicke_is_rabi() {
        let s = sp(1, 6);
        let p = ModelParams::dicke(1, 0.7, 1.0, 0.25);
        let h = dicke(s, &p).unwrap();
        let z = qubit_op(s, 0, QubitOpKind::Z).unwrap();
        let x = qubit_op(s, 0, QubitOpKind::X).unwrap();
        let a = boson_op(s, BosonOpKind::A);
        let rabi =
            &(&(&z * 0.35) + &boson_op(s, BosonOpKind::N)) + &(&(&x * &(&a + &a.dagger())) * 0.25);
        assert!(h.max_abs_diff(&rabi).unwrap() < 1e-14);
    }

    #[test]
    fn dicke_ground_energy_matches_displaced_oscillator() {
        // ω0 = 0: H = ω a†a + (λ/√N) M (a + a†) with M = Σσx conserved, so each
        // M sector is a displaced oscillator with E0(M) = -λ² M² / (N ω).
        let (n, w, lam) = (2usize, 1.0, 0.3);
        let oracle = -lam * lam * (n * n) as f64 / (n as f64 * w);
        let s = sp(n, 25);
        let h = dicke(s, &ModelParams::dicke(n, 0.0, w, lam)).unwrap();
        let e0 = spectrum(&h).unwrap()[0];
        assert!((e0 - oracle).abs() < 1e-10, "{e0} vs {oracle}");
        assert!((oracle + 0.18).abs() < 1e-15);
    }

    #[test]
    fn tc_conserves_excitations() {
        let s = sp(3, 4);
        let h = tavis_cummings(s, &[0.3, -0.2, 0.9], 0.4, 1.3).unwrap();
        assert_eq!(
            commutator(&h, &excitation_number(s)).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn resonant_tc_single_excitation_doublet() {
        let g = 0.37;
        let s = sp(1, 3);
        let h = tavis_cummings(s, &[0.0], 0.0, g).unwrap();
        // 2x2 oracle on {|e,0>, |g,1>}: [[0, g], [g, 0]] -> ±g
        let e_idx = s.compose(crate::hilbert::BasisLabel { qubits: 0, fock: 0 });
        let g_idx = s.ground_index(1);
        let block = [
            [h.matrix()[(e_idx, e_idx)], h.matrix()[(e_idx, g_idx)]],
            [h.matrix()[(g_idx, e_idx)], h.matrix()[(g_idx, g_idx)]],
        ];
        let tr = (block[0][0] + block[1][1]).re;
        let det = (block[0][0] * block[1][1] - block[0][1] * block[1][0]).re;
        let disc = (tr * tr / 4.0 - det).sqrt();
        assert!((tr / 2.0 + disc - g).abs() < 1e-14);
        assert!((tr / 2.0 - disc + g).abs() < 1e-14);
        let spec = spectrum(&h).unwrap();
        assert!(spec.iter().any(|e| (e - g).abs() < 1e-12));
        assert!(spec.iter().any(|e| (e + g).abs() < 1e-12));
    }

    #[test]
    fn bright_state_splitting_scales_with_sqrt_n() {
        let g = 0.21;
        for n in 1..=3usize {
            let s = sp(n, 2);
            let h = tavis_cummings(s, &vec![0.0; n], 0.0, g).unwrap();
            let ex = excitation_number(s);
            let one: Vec<usize> = (0..s.dim())
                .filter(|&k| (ex.matrix()[(k, k)].re - 1.0).abs() < 1e-12)
                .collect();
            assert_eq!(one.len(), n + 1);
            let block = DMatrix::from_fn(n + 1, n + 1, |r, c| h.matrix()[(one[r], one[c])]);
            let eig = nalgebra::SymmetricEigen::new(block).eigenvalues;
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            let bright = (n as f64).sqrt() * g;
            assert!((max - bright).abs() < 1e-12 && (min + bright).abs() < 1e-12);
        }
    }

    fn conjugation_identity_error(n: usize, nmax: usize, det: &[f64], mode: f64, g: f64) -> f64 {
        let s = sp(n, nmax);
        let tc = tavis_cummings(s, det, mode, g).unwrap();
        let atc = anti_tavis_cummings(s, det, mode, g).unwrap();
        // R = exp(iπ/2 Σσx) = collective_rotation(x, -π)
        let r = collective_rotation(s, Axis::X, -PI);
        tc.conjugate_by(&r).unwrap().max_abs_diff(&atc).unwrap()
    }

    #[test]
    fn anti_tc_is_rotated_tc() {
        assert!(conjugation_identity_error(2, 4, &[0.3, -0.1], 0.5, 1.5) <= 1e-10);
    }

    #[test]
    fn anti_tc_without_coupling() {
        let s = sp(2, 2);
        let atc = anti_tavis_cummings(s, &[0.4, 0.2], 0.0, 0.0).unwrap();
        let expect = &(&qubit_op(s, 0, QubitOpKind::Z).unwrap() * -0.2)
            + &(&qubit_op(s, 1, QubitOpKind::Z).unwrap() * -0.1);
        assert!(atc.max_abs_diff(&expect).unwrap() < 1e-15);
    }

    #[test]
    fn tc_plus_anti_tc_is_dicke() {
        for n in 1..=3 {
            let s = sp(n, 4);
            let p = frame_map(&ModelParams::dicke(n, 0.05, 1.0, 1.5 * (n as f64).sqrt())).unwrap();
            let f = p.frame.as_ref().unwrap();
            let tc = tavis_cummings(s, &f.qubit_detunings, f.mode_detuning, f.coupling).unwrap();
            let atc =
                anti_tavis_cummings(s, &f.alt_detunings, f.mode_detuning, f.coupling).unwrap();
            let d = dicke(s, &p).unwrap();
            assert!((&tc + &atc).max_abs_diff(&d).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn rotations() {
        let s = sp(2, 1);
        assert!(
            collective_rotation(s, Axis::Y, 0.0)
                .max_abs_diff(&Operator::identity(s))
                .unwrap()
                < 1e-15
        );
        // exp(-iπ/4 Σσy) Σσz exp(iπ/4 Σσy) = Σσx
        let r = collective_rotation(s, Axis::Y, PI / 2.0);
        let z = collective_qubit_op(s, QubitOpKind::Z);
        let x = collective_qubit_op(s, QubitOpKind::X);
        assert!(z.conjugate_by(&r).unwrap().max_abs_diff(&x).unwrap() < 1e-14);
        // U(π)U(π) = exp(-iπ Σσx) = (-1)^N I
        for n in 1..=3 {
            let s = sp(n, 1);
            let u = collective_rotation(s, Axis::X, PI);
            let u2 = &u * &u;
            let direct =
                crate::hilbert::evolve_unitary(&collective_qubit_op(s, QubitOpKind::X), PI)
                    .unwrap();
            assert!(u2.max_abs_diff(&direct).unwrap() < 1e-12);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!(u2.max_abs_diff(&(&Operator::identity(s) * sign)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rotation_matches_generator_exponential() {
        let s = sp(2, 1);
        for axis in [Axis::X, Axis::Y] {
            let gen = &collective_qubit_op(s, axis.qubit_kind()) * 0.5;
            let direct = crate::hilbert::evolve_unitary(&gen, 0.77).unwrap();
            assert!(
                collective_rotation(s, axis, 0.77)
                    .max_abs_diff(&direct)
                    .unwrap()
                    < 1e-12
            );
        }
    }

    #[test]
    fn biased_dicke_cases() {
        let s = sp(2, 3);
        let p = ModelParams::dicke(2, 0.2, 1.0, 0.4);
        assert_eq!(biased_dicke(s, &p).unwrap(), dicke(s, &p).unwrap());
        // λ = ω0 = 0: boson ladder plus qubit levels {-2Δ, 0, 0, 2Δ}
        let delta = 0.3;
        let p = ModelParams::dicke(2, 0.0, 1.0, 0.0).with_bias(delta);
        let e = spectrum(&biased_dicke(s, &p).unwrap()).unwrap();
        let mut expect = Vec::new();
        for q in [-2.0 * delta, 0.0, 0.0, 2.0 * delta] {
            for k in 0..4 {
                expect.push(q + k as f64);
            }
        }
        expect.sort_by(f64::total_cmp);
        for (a, b) in e.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn biased_dicke_ground_energy_converges() {
        // dense eigensolve oracle, checked for cutoff convergence
        let p = ModelParams::dicke(2, 0.05, 1.0, 0.5).with_bias(0.2);
        let e20 = spectrum(&biased_dicke(sp(2, 20), &p).unwrap()).unwrap()[0];
        let e30 = spectrum(&biased_dicke(sp(2, 30), &p).unwrap()).unwrap()[0];
        assert!((e20 - e30).abs() < 1e-10);
        // the bias only lowers the unbiased ground energy at fixed λ
        let e_unbiased =
            spectrum(&dicke(sp(2, 30), &ModelParams::dicke(2, 0.05, 1.0, 0.5)).unwrap()).unwrap()
                [0];
        assert!(e30 < e_unbiased);
    }

    #[test]
    fn pulsed_coupling_windows() {
        let p = PulseParams {
            lambda0: 0.5,
            lambda1: 0.2,
            period: 1.0,
            height: 4.0,
            width: 0.25,
        };
        let interval = p.kick_interval();
        assert_eq!(pulsed_coupling(interval * 0.5, &p).unwrap(), 0.5);
        assert_eq!(
            pulsed_coupling(interval * 3.0 + 0.05, &p).unwrap(),
            0.5 + 0.8
        );
        assert_eq!(
            pulsed_coupling(interval * 2.0 - 0.05, &p).unwrap(),
            0.5 + 0.8
        );
        // ∫ (λ(t) - λ0) dt over one interval = λ1 α τ = λ1
        let steps = 200_000;
        let h = interval / steps as f64;
        let area: f64 = (0..steps)
            .map(|k| (pulsed_coupling((k as f64 + 0.5) * h, &p).unwrap() - 0.5) * h)
            .sum();
        assert!((area - 0.2).abs() < 1e-4, "{area}");
        let bad = PulseParams {
            width: 7.0,
            height: 1.0 / 7.0,
            ..p.clone()
        };
        assert!(pulsed_coupling(0.0, &bad).is_err());
        let bad_area = PulseParams { height: 3.0, ..p };
        assert!(bad_area.validate().is_err());
    }

    #[test]
    fn pulse_from_couplings_round_trip() {
        let p = PulseParams::from_couplings(1.5, 3.0, 2, 0.1, 0.2);
        p.validate().unwrap();
        let sqrt2 = 2f64.sqrt();
        assert!((p.lambda0 / sqrt2 - 1.5).abs() < 1e-14);
        assert!((p.peak_coupling() / sqrt2 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inhomogeneous_cases() {
        let s = sp(2, 3);
        let p = ModelParams::dicke(2, 0.4, 1.0, 0.3);
        let h = inhomogeneous_dicke(s, &[0.4, 0.4], 1.0, 0.3, false).unwrap();
        assert!(h.max_abs_diff(&dicke(s, &p).unwrap()).unwrap() < 1e-15);
        let r = inhomogeneous_dicke(s, &[0.9, 1.1], 1.0, 0.3, true).unwrap();
        assert_eq!(
            commutator(&r, &excitation_number(s)).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn inhomogeneous_single_excitation_block() {
        // basis {|e g,0>, |g e,0>, |g g,1>}; diagonal from free energies, coupling λ/√N
        let (w1, w2, w, lam) = (0.9, 1.1, 1.0, 0.1 * 2f64.sqrt());
        let g = lam / 2f64.sqrt();
        let block = DMatrix::from_row_slice(
            3,
            3,
            &[
                (w1 - w2) / 2.0,
                0.0,
                g,
                0.0,
                (w2 - w1) / 2.0,
                g,
                g,
                g,
                -(w1 + w2) / 2.0 + w,
            ],
        );
        let mut oracle: Vec<f64> = nalgebra::SymmetricEigen::new(block)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        oracle.sort_by(f64::total_cmp);
        let s = sp(2, 3);
        let h = inhomogeneous_dicke(s, &[w1, w2], w, lam, true).unwrap();
        let eig = HermitianEigen::new(&h).unwrap();
        let ex = excitation_number(s);
        let spec = eig.sorted_eigenvalues();
        for e in oracle {
            assert!(spec.iter().any(|x| (x - e).abs() < 1e-12), "missing {e}");
        }
        assert!(ex.is_hermitian());
    }

    proptest! {
        #[test]
        fn conjugation_identity_random(
            n in 1usize..=3,
            big in proptest::bool::ANY,
            det in proptest::collection::vec(-2.0f64..2.0, 3),
            mode in -2.0f64..2.0,
            g in 0.0f64..3.0,
        ) {
            let nmax = if big { 4 } else { 2 };
            prop_assert!(conjugation_identity_error(n, nmax, &det[..n], mode, g) <= 1e-10);
        }

        #[test]
        fn tc_excitation_conservation(
            det in proptest::collection::vec(-2.0f64..2.0, 2),
            mode in -2.0f64..2.0,
            g in -3.0f64..3.0,
        ) {
            let s = sp(2, 3);
            let h = tavis_cummings(s, &det, mode, g).unwrap();
            prop_assert_eq!(commutator(&h, &excitation_number(s)).unwrap().max_abs(), 0.0);
        }
    }
}
