//! Leading-order digital error, its explicit commutator expansion, the
//! Cauchy-Schwarz bound and the measured Trotter error.
//!
//! Conventions: the Dicke step is split into
//!
//! ```text
//! H1 = Σ (ω01/2) σz + ω̃ a†a + g Σ (σ+ a + σ- a†)
//! H2 = Σ (ω02/2) σz + ω̃ a†a + g Σ (σ- a + σ+ a†)
//! ```
//!
//! with `ω01 = ω0 - δ`, `ω02 = -(ω̃0 - δ)` (the σz sign flips under the
//! π-rotation) and `ω̃ = ω - δ`. The leading error of `n` steps over time `t`
//! is `ε = [H1, H2] t² / 2n`.
//!
//! Norms are "domain restricted": only Fock levels up to the highest one
//! carrying at least [`POPULATION_THRESHOLD`] in the exact reference run are
//! kept, and never the top two truncated levels.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{anti_tavis_cummings, tavis_cummings, ModelParams};
use crate::hilbert::{
    boson_op, collective_qubit_op, commutator, qubit_op, spectral_norm, BosonOpKind, HilbertSpace,
    Operator, QubitOpKind, StateVector,
};
use crate::lindblad::NoiseParams;
use crate::trotter::{execute_target, execute_unitary, TrotterSchedule, Variant};

/// Population below which a Fock level is outside the restricted domain.
pub const POPULATION_THRESHOLD: f64 = 1e-6;
/// Number of top Fock levels always masked out.
pub const BOUNDARY_LEVELS: usize = 2;

/// `[H1, H2] t² / 2n`.
pub fn leading_error_operator(h1: &Operator, h2: &Operator, t: f64, n: usize) -> Result<Operator> {
    leading_error_sum(&[h1.clone(), h2.clone()], t, n)
}

/// `Σ_{i<j} [Hi, Hj] t² / 2n` for any ordered split.
pub fn leading_error_sum(parts: &[Operator], t: f64, n: usize) -> Result<Operator> {
    check_steps(n)?;
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidParams("empty Hamiltonian split".into()))?;
    let mut acc = Operator::zeros(first.space());
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            acc = acc.checked_add(&commutator(&parts[i], &parts[j])?)?;
        }
    }
    Ok(&acc * (t * t / (2.0 * n as f64)))
}

/// Leading error of `n` repetitions of `Π_k exp(-i H_k τ_k)` where each part
/// carries its own per-step duration: `n Σ_{i<j} [Hi, Hj] τi τj / 2`.
pub fn leading_error_weighted(parts: &[(Operator, f64)], n: usize) -> Result<Operator> {
    check_steps(n)?;
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidParams("empty Hamiltonian split".into()))?;
    let mut acc = Operator::zeros(first.0.space());
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            let c = commutator(&parts[i].0, &parts[j].0)?;
            acc = acc.checked_add(&(&c * (parts[i].1 * parts[j].1)))?;
        }
    }
    Ok(&acc * (n as f64 / 2.0))
}

fn check_steps(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParams(
            "at least one Trotter step is required".into(),
        ))
    } else {
        Ok(())
    }
}

/// Effective split frequencies `(ω01^i, ω02^i, ω̃, g)` of a framed model.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitFrequencies {
    pub omega01: Vec<f64>,
    pub omega02: Vec<f64>,
    pub mode: f64,
    pub g: f64,
}

impl SplitFrequencies {
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        let p = match params.frame {
            Some(_) => params.clone(),
            None => crate::hamiltonians::frame_map(params)?,
        };
        let f = p.frame.expect("frame present");
        Ok(Self {
            omega01: f.qubit_detunings.clone(),
            omega02: f.alt_detunings.iter().map(|d| -d).collect(),
            mode: f.mode_detuning,
            g: f.coupling,
        })
    }

    /// `max{g, |ω0k^i|, |ω̃|}`, the frequency that normalizes the bound.
    pub fn max_frequency(&self) -> f64 {
        self.omega01
            .iter()
            .chain(&self.omega02)
            .map(|w| w.abs())
            .fold(self.g.abs().max(self.mode.abs()), f64::max)
    }

    /// `(H1, H2)` as matrices.
    pub fn split(&self, space: HilbertSpace) -> Result<(Operator, Operator)> {
        let h1 = tavis_cummings(space, &self.omega01, self.mode, self.g)?;
        let alt: Vec<f64> = self.omega02.iter().map(|w| -w).collect();
        let h2 = anti_tavis_cummings(space, &alt, self.mode, self.g)?;
        Ok((h1, h2))
    }
}

/// `(H1, H2)` of the Dicke split for a parameter record.
pub fn dicke_split(space: HilbertSpace, params: &ModelParams) -> Result<(Operator, Operator)> {
    SplitFrequencies::from_params(params)?.split(space)
}

/// The five-term expansion of `ε(H1, H2)`, built term by term:
///
/// ```text
/// [ Σ g ω01 t² (σ+ a† - σ- a) + Σ g ω̃ t² (σ+ a† - σ- a)
///   + Σ g ω02 t² (σ- a† - σ+ a) + Σ g ω̃ t² (σ+ a - σ- a†)
///   + (gt)² { Σ σz (a² - a†²) + Σ_ij (σ+^i σ+^j - σ-^j σ-^i) } ] / 2n
/// ```
pub fn closed_form_error(
    params: &ModelParams,
    t: f64,
    n: usize,
    space: HilbertSpace,
) -> Result<Operator> {
    check_steps(n)?;
    params.check_space(&space)?;
    let f = SplitFrequencies::from_params(params)?;
    let a = boson_op(space, BosonOpKind::A);
    let ad = boson_op(space, BosonOpKind::Adag);
    let (g, t2) = (f.g, t * t);
    let mut acc = Operator::zeros(space);
    for i in 0..space.n_qubits() {
        let sp = qubit_op(space, i, QubitOpKind::Plus)?;
        let sm = qubit_op(space, i, QubitOpKind::Minus)?;
        let sz = qubit_op(space, i, QubitOpKind::Z)?;
        let up_down = &(&sp * &ad) - &(&sm * &a); // σ+ a† - σ- a
        let down_up = &(&sm * &ad) - &(&sp * &a); // σ- a† - σ+ a
        acc = &acc + &(&up_down * (g * f.omega01[i] * t2));
        acc = &acc + &(&up_down * (g * f.mode * t2));
        acc = &acc + &(&down_up * (g * f.omega02[i] * t2));
        acc = &acc + &(&(-&down_up) * (g * f.mode * t2));
        let squeeze = &(&a * &a) - &(&ad * &ad);
        acc = &acc + &(&(&sz * &squeeze) * (g * g * t2));
        for j in 0..space.n_qubits() {
            let spj = qubit_op(space, j, QubitOpKind::Plus)?;
            let smj = qubit_op(space, j, QubitOpKind::Minus)?;
            let pair = &(&sp * &spj) - &(&smj * &sm);
            acc = &acc + &(&pair * (g * g * t2));
        }
    }
    Ok(&acc * (1.0 / (2.0 * n as f64)))
}

/// `[4N(‖a‖ + ‖a†‖) + N‖a² - a†²‖ + N²] / 2n` with `‖a†‖ = ‖a‖` on the
/// restricted domain. Valid when `max{g, ω0k, ω̃} t = 1`; see
/// [`scaled_bound`] for other times.
pub fn cauchy_schwarz_bound(
    n_qubits: usize,
    n: usize,
    norm_a: f64,
    norm_a2diff: f64,
) -> Result<f64> {
    check_steps(n)?;
    if !(norm_a >= 0.0 && norm_a2diff >= 0.0) {
        return Err(Error::InvalidParams(
            "operator norms must be non-negative".into(),
        ));
    }
    let nq = n_qubits as f64;
    Ok((4.0 * nq * (2.0 * norm_a) + nq * norm_a2diff + nq * nq) / (2.0 * n as f64))
}

/// Bound rescaled by `(max{g, ω0k, ω̃} t)²` for an arbitrary time.
pub fn scaled_bound(bound: f64, max_frequency: f64, t: f64) -> f64 {
    bound * (max_frequency * t).powi(2)
}

/// Restricted `(‖a‖, ‖a² - a†²‖)` keeping Fock levels `0..=max_level` of a
/// cutoff `fock_cutoff` boson.
pub fn restricted_boson_norms(fock_cutoff: usize, max_level: usize) -> (f64, f64) {
    let f = fock_cutoff + 1;
    let keep = max_level.min(fock_cutoff);
    let mut a = DMatrix::<C64>::zeros(f, f);
    for k in 1..f {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    let diff = &a * &a - (&a * &a).adjoint();
    let mask = |m: DMatrix<C64>| {
        let mut m = m;
        for r in 0..f {
            for c in 0..f {
                if r > keep || c > keep {
                    m[(r, c)] = C64::new(0.0, 0.0);
                }
            }
        }
        m
    };
    let norm = |m: DMatrix<C64>| {
        if m.iter().all(|z| z.norm() == 0.0) {
            0.0
        } else {
            m.singular_values().max()
        }
    };
    (norm(mask(a)), norm(mask(diff)))
}

/// Highest Fock level with population ≥ [`POPULATION_THRESHOLD`] over a set
/// of states, capped below the truncation boundary.
pub fn populated_level<'a>(
    states: impl IntoIterator<Item = &'a StateVector>,
    fock_cutoff: usize,
) -> usize {
    let mut pop = vec![0.0f64; fock_cutoff + 1];
    let mut space = None;
    for s in states {
        let sp = *space.get_or_insert(s.space());
        let mut level = vec![0.0; fock_cutoff + 1];
        for (k, z) in s.amplitudes().iter().enumerate() {
            level[sp.fock_level(k)] += z.norm_sqr();
        }
        for (p, l) in pop.iter_mut().zip(level) {
            *p = p.max(l);
        }
    }
    let top = pop
        .iter()
        .rposition(|p| *p >= POPULATION_THRESHOLD)
        .unwrap_or(0);
    top.min(fock_cutoff.saturating_sub(BOUNDARY_LEVELS))
}

/// `ε(H1, H2) - i Σ Δ t² (ω01 + ω02)/(2n) σy`, the leading error of the
/// split `(H0, H1, H2)` with `H0 = Δ Σ σx`.
pub fn biased_error_operator(
    params: &ModelParams,
    t: f64,
    n: usize,
    space: HilbertSpace,
) -> Result<Operator> {
    let base = closed_form_error(params, t, n, space)?;
    let f = SplitFrequencies::from_params(params)?;
    let mut acc = base;
    for i in 0..space.n_qubits() {
        let sy = qubit_op(space, i, QubitOpKind::Y)?;
        let c = params.bias * t * t * (f.omega01[i] + f.omega02[i]) / (2.0 * n as f64);
        acc = &acc + &(&sy * C64::new(0.0, -c));
    }
    Ok(acc)
}

/// Companion bound: Cauchy-Schwarz bound plus `N/n`.
pub fn biased_bound(n_qubits: usize, n: usize, norm_a: f64, norm_a2diff: f64) -> Result<f64> {
    Ok(cauchy_schwarz_bound(n_qubits, n, norm_a, norm_a2diff)? + n_qubits as f64 / n as f64)
}

/// Noiseless Trotter error of a schedule under three metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredError {
    /// `1 - |<ψ_T|ψ_exact>|²`.
    pub infidelity: f64,
    /// `min_φ ‖ψ_T - e^{iφ} ψ_exact‖ = sqrt(2 (1 - |<ψ_T|ψ_exact>|))`.
    pub state_distance: f64,
    /// `‖U_sched - e^{iφ} U_exact‖₂` with `φ` aligned on `Tr(U_exact† U_sched)`.
    pub operator_distance: f64,
}

/// Name of the metric reported as `measured_error` in [`ErrorReport`].
pub const PRIMARY_METRIC: &str = "state_distance";

impl MeasuredError {
    pub fn primary(&self) -> f64 {
        self.state_distance
    }
}

/// Compare the Trotterized evolution with the exact target evolution.
/// Refuses noisy settings: this metric isolates the digital error.
pub fn measured_error(
    schedule: &TrotterSchedule,
    psi0: &StateVector,
    noise: &NoiseParams,
) -> Result<MeasuredError> {
    if !noise.is_noiseless() {
        return Err(Error::Unsupported(
            "measured_error isolates the digital error and needs zero noise".into(),
        ));
    }
    let got = execute_unitary(schedule, psi0)?;
    let want = execute_target(schedule, psi0)?;
    let overlap = got.final_state().inner(want.final_state())?.norm().min(1.0);
    let u = schedule.schedule_unitary()?;
    let v = schedule.target_unitary()?;
    Ok(MeasuredError {
        infidelity: (1.0 - overlap * overlap).max(0.0),
        state_distance: (2.0 * (1.0 - overlap)).max(0.0).sqrt(),
        operator_distance: phase_aligned_distance(&u, &v)?,
    })
}

/// `‖U - e^{iφ} V‖₂` with `e^{iφ} = Tr(V†U)/|Tr(V†U)|`.
pub fn phase_aligned_distance(u: &Operator, v: &Operator) -> Result<f64> {
    let tr = v.dagger().checked_mul(u)?.trace();
    let phase = if tr.norm() > 0.0 {
        tr / tr.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    Ok(spectral_norm(&u.checked_sub(&(v * phase))?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub variant: Variant,
    pub n_qubits: usize,
    pub fock_cutoff: usize,
    pub n_steps: usize,
    pub t: f64,
    /// Restricted spectral norm of the leading error operator.
    pub leading_term_norm: f64,
    /// Cauchy-Schwarz bound rescaled to time `t`.
    pub cauchy_schwarz_bound: f64,
    pub measured_error: f64,
    pub metric: String,
    pub infidelity: f64,
    pub operator_distance: f64,
    /// Highest Fock level kept in the restricted norms.
    pub restriction_level: usize,
    pub norm_a: f64,
    pub norm_a2diff: f64,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str = "variant,n_qubits,fock_cutoff,n_steps,t,leading_term_norm,cauchy_schwarz_bound,measured_error,metric,infidelity,operator_distance,restriction_level,norm_a,norm_a2diff";

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.variant.name(),
            self.n_qubits,
            self.fock_cutoff,
            self.n_steps,
            self.t,
            self.leading_term_norm,
            self.cauchy_schwarz_bound,
            self.measured_error,
            self.metric,
            self.infidelity,
            self.operator_distance,
            self.restriction_level,
            self.norm_a,
            self.norm_a2diff
        );
        s
    }

    pub fn bound_dominates(&self) -> bool {
        self.cauchy_schwarz_bound >= self.leading_term_norm
    }
}

/// Leading-term norm, bound and measured error for a noiseless schedule.
pub fn error_report(schedule: &TrotterSchedule, psi0: &StateVector) -> Result<ErrorReport> {
    let space = schedule.space;
    let (t, n) = (schedule.simulated_time, schedule.n_steps);
    let reference = execute_target(schedule, psi0)?;
    let level = populated_level(&reference.states, space.fock_cutoff());
    let (norm_a, norm_a2diff) = restricted_boson_norms(space.fock_cutoff(), level);
    let params = &schedule.params;
    let freqs = SplitFrequencies::from_params(params)?;
    let nq = space.n_qubits();
    let (leading, bound) = match schedule.variant {
        Variant::Dicke => {
            let (h1, h2) = freqs.split(space)?;
            let eps = leading_error_operator(&h1, &h2, t, n)?;
            (
                eps,
                scaled_bound(
                    cauchy_schwarz_bound(nq, n, norm_a, norm_a2diff)?,
                    freqs.max_frequency(),
                    t,
                ),
            )
        }
        Variant::Biased => {
            let eps = biased_error_operator(params, t, n, space)?;
            let m = freqs.max_frequency().max(params.bias.abs());
            (
                eps,
                scaled_bound(biased_bound(nq, n, norm_a, norm_a2diff)?, m, t),
            )
        }
        Variant::Pulsed => {
            // four-part split, each Dicke pair over half a step
            let pulse = params
                .pulse
                .as_ref()
                .expect("pulsed schedule carries pulse parameters");
            let sqrt_n = (nq as f64).sqrt();
            let mut parts = Vec::new();
            let mut m: f64 = 0.0;
            for lambda in [pulse.lambda0, pulse.peak_coupling()] {
                let f = SplitFrequencies {
                    g: lambda / sqrt_n,
                    ..freqs.clone()
                };
                let (h1, h2) = f.split(space)?;
                let half = t / (2 * n) as f64;
                parts.push((h1, half));
                parts.push((h2, half));
                m = m.max(f.max_frequency());
            }
            let eps = leading_error_weighted(&parts, n)?;
            let cs = 2.0 * cauchy_schwarz_bound(nq, n, norm_a, norm_a2diff)?;
            (eps, scaled_bound(cs, m, t))
        }
    };
    let measured = measured_error(schedule, psi0, &NoiseParams::default())?;
    Ok(ErrorReport {
        variant: schedule.variant,
        n_qubits: nq,
        fock_cutoff: space.fock_cutoff(),
        n_steps: n,
        t,
        leading_term_norm: spectral_norm(&leading.restrict_fock(level)),
        cauchy_schwarz_bound: bound,
        measured_error: measured.primary(),
        metric: PRIMARY_METRIC.to_string(),
        infidelity: measured.infidelity,
        operator_distance: measured.operator_distance,
        restriction_level: level,
        norm_a,
        norm_a2diff,
    })
}

/// `Σ σz^i [a² - a†²] + Σ_ij (σ+^i σ+^j - σ-^j σ-^i)`, the coupling-coupling
/// commutator of the split.
pub fn coupling_commutator_identity(space: HilbertSpace) -> Result<Operator> {
    let a = boson_op(space, BosonOpKind::A);
    let ad = boson_op(space, BosonOpKind::Adag);
    let squeeze = &(&a * &a) - &(&ad * &ad);
    let mut acc = &collective_qubit_op(space, QubitOpKind::Z) * &squeeze;
    for i in 0..space.n_qubits() {
        for j in 0..space.n_qubits() {
            let p =
                &qubit_op(space, i, QubitOpKind::Plus)? * &qubit_op(space, j, QubitOpKind::Plus)?;
            let m =
                &qubit_op(space, j, QubitOpKind::Minus)? * &qubit_op(space, i, QubitOpKind::Minus)?;
            acc = &acc + &(&p - &m);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{
        counter_rotating_coupling, rotating_coupling, FrameParams, PulseParams,
    };
    use crate::trotter::{biased_schedule, dicke_schedule, pulsed_schedule};

    fn sp(n: usize, m: usize) -> HilbertSpace {
        HilbertSpace::new(n, m).unwrap()
    }

    fn deep_strong(n: usize) -> ModelParams {
        ModelParams::dicke(n, 0.05, 1.0, 1.5 * (n as f64).sqrt())
    }

    fn masked_diff(a: &Operator, b: &Operator) -> f64 {
        let keep = a.space().fock_cutoff() - BOUNDARY_LEVELS;
        a.restrict_fock(keep)
            .max_abs_diff(&b.restrict_fock(keep))
            .unwrap()
    }

    #[test]
    fn commuting_and_zero_time() {
        let s = sp(2, 3);
        let z = collective_qubit_op(s, QubitOpKind::Z);
        let n = boson_op(s, BosonOpKind::N);
        assert_eq!(
            leading_error_operator(&z, &n, 1.0, 4).unwrap().max_abs(),
            0.0
        );
        let (h1, h2) = dicke_split(s, &deep_strong(2)).unwrap();
        assert_eq!(
            leading_error_operator(&h1, &h2, 0.0, 4).unwrap().max_abs(),
            0.0
        );
        assert!(leading_error_operator(&h1, &sp_other(), 1.0, 1).is_err());
    }

    fn sp_other() -> Operator {
        Operator::identity(sp(1, 3))
    }

    #[test]
    fn closed_form_matches_commutator() {
        for (n_q, m) in [(2, 4), (2, 6), (3, 4)] {
            let s = sp(n_q, m);
            let p = deep_strong(n_q);
            let (h1, h2) = dicke_split(s, &p).unwrap();
            let (t, n) = (0.7, 5);
            let brute = leading_error_operator(&h1, &h2, t, n).unwrap();
            let closed = closed_form_error(&p, t, n, s).unwrap();
            assert!(masked_diff(&brute, &closed) <= 1e-10);
        }
    }

    #[test]
    fn closed_form_zero_coupling() {
        let s = sp(2, 3);
        let p = ModelParams::dicke(2, 0.3, 1.0, 0.0);
        assert_eq!(closed_form_error(&p, 1.0, 3, s).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn component_commutators() {
        let s = sp(3, 5);
        let tc = rotating_coupling(s);
        let atc = counter_rotating_coupling(s);
        let lhs = commutator(&tc, &atc).unwrap();
        assert!(masked_diff(&lhs, &coupling_commutator_identity(s).unwrap()) <= 1e-12);
        // [Σ(σ+a + σ-a†), Σσz] = 2 Σ (σ-a† - σ+a)
        let z = collective_qubit_op(s, QubitOpKind::Z);
        let a = boson_op(s, BosonOpKind::A);
        let ad = boson_op(s, BosonOpKind::Adag);
        let sm = collective_qubit_op(s, QubitOpKind::Minus);
        let spl = collective_qubit_op(s, QubitOpKind::Plus);
        let rhs = &(&(&sm * &ad) - &(&spl * &a)) * 2.0;
        assert!(masked_diff(&commutator(&tc, &z).unwrap(), &rhs) <= 1e-12);
        // [Σ(σ+a + σ-a†), a†a] = Σ (σ+a - σ-a†)
        let n = boson_op(s, BosonOpKind::N);
        let rhs = &(&spl * &a) - &(&sm * &ad);
        assert!(masked_diff(&commutator(&tc, &n).unwrap(), &rhs) <= 1e-12);
    }

    #[test]
    fn linear_in_inverse_n_quadratic_in_t() {
        let s = sp(2, 4);
        let p = deep_strong(2);
        let norm = |t: f64, n: usize| spectral_norm(&closed_form_error(&p, t, n, s).unwrap());
        let base = norm(1.0, 1);
        for n in [2, 4, 8] {
            assert!((norm(1.0, n) * n as f64 - base).abs() <= 1e-12 * base);
        }
        for t in [0.5, 2.0, 3.0] {
            assert!((norm(t, 1) / (t * t) - base).abs() <= 1e-12 * base);
        }
    }

    #[test]
    fn bound_formula() {
        let (_, v) = restricted_boson_norms(10, 1);
        let b = cauchy_schwarz_bound(1, 1, 1.0, v).unwrap();
        assert!((b - (8.0 + v + 1.0) / 2.0).abs() < 1e-15);
        assert!(cauchy_schwarz_bound(1, 1, -1.0, 0.0).is_err());
        // dominant N² term for large N
        let big = cauchy_schwarz_bound(1000, 3, 2.0, 4.0).unwrap();
        assert!((big / (1e6 / 6.0) - 1.0).abs() < 0.05);
    }

    #[test]
    fn restricted_norms() {
        let (na, _) = restricted_boson_norms(10, 4);
        assert!((na - 2.0).abs() < 1e-12);
        let (na, nd) = restricted_boson_norms(10, 0);
        assert_eq!((na, nd), (0.0, 0.0));
    }

    #[test]
    fn bound_dominates_restricted_leading_term() {
        for (n_q, lam, m) in [(2, 1.5, 15), (3, 1.5, 12), (2, 0.5, 10)] {
            let s = sp(n_q, m);
            let p = ModelParams::dicke(n_q, 0.05, 1.0, lam * (n_q as f64).sqrt());
            let f = SplitFrequencies::from_params(&p).unwrap();
            let t = 1.0 / f.max_frequency();
            let sch = dicke_schedule(s, &p, t, 11).unwrap();
            let r = error_report(&sch, &StateVector::ground(s)).unwrap();
            assert!(r.bound_dominates(), "{r:?}");
        }
    }

    #[test]
    fn biased_zero_bias_equals_plain() {
        let s = sp(2, 4);
        let p = deep_strong(2);
        let a = biased_error_operator(&p, 0.8, 3, s).unwrap();
        let b = closed_form_error(&p, 0.8, 3, s).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-15);
    }

    fn generic_frame(om01: f64, om02: f64, delta: f64) -> ModelParams {
        let g = 0.4;
        let mut p = ModelParams::dicke(2, om01 + om02, 1.0, g * 2f64.sqrt()).with_bias(delta);
        p.frame = Some(FrameParams {
            qubit_detunings: vec![om01; 2],
            alt_detunings: vec![-om02; 2],
            mode_detuning: 0.5,
            coupling: g,
        });
        p
    }

    #[test]
    fn biased_matches_three_term_split() {
        let s = sp(2, 5);
        let p = generic_frame(0.3, 0.1, 0.2);
        let (h1, h2) = dicke_split(s, &p).unwrap();
        let h0 = &collective_qubit_op(s, QubitOpKind::X) * 0.2;
        let (t, n) = (1.1, 4);
        let brute = leading_error_sum(&[h0, h1, h2], t, n).unwrap();
        let got = biased_error_operator(&p, t, n, s).unwrap();
        assert!(masked_diff(&brute, &got) <= 1e-10);
    }

    #[test]
    fn sigma_y_term_cancels_only_for_opposite_detunings() {
        let s = sp(2, 3);
        let (t, n) = (1.0, 2);
        let opp = generic_frame(0.3, -0.3, 0.2);
        let diff = biased_error_operator(&opp, t, n, s)
            .unwrap()
            .checked_sub(&closed_form_error(&opp, t, n, s).unwrap())
            .unwrap();
        assert_eq!(diff.max_abs(), 0.0);
        // the symmetric frame puts ω01 = ω02 = ω0/2, so the term is Δ ω0 t²/2n per qubit
        let p = ModelParams::dicke(2, 0.4, 1.0, 0.5).with_bias(0.2);
        let diff = biased_error_operator(&p, t, n, s)
            .unwrap()
            .checked_sub(&closed_form_error(&p, t, n, s).unwrap())
            .unwrap();
        assert!((diff.max_abs() - 0.2 * 0.4 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn measured_error_cases() {
        let s = sp(2, 4);
        let p = ModelParams::dicke(2, 0.3, 1.0, 0.0);
        let sch = dicke_schedule(s, &p, 2.0, 3).unwrap();
        let e = measured_error(&sch, &StateVector::ground(s), &NoiseParams::default()).unwrap();
        assert!(e.infidelity <= 1e-10 && e.state_distance <= 1e-5 && e.operator_distance <= 1e-10);
        assert!(measured_error(
            &sch,
            &StateVector::ground(s),
            &NoiseParams::new(0.1, 0.0, 0.0)
        )
        .is_err());
    }

    #[test]
    fn measured_error_first_order() {
        let s = sp(2, 15);
        let p = deep_strong(2);
        let t = 1.0 / 1.5;
        let e = |n| {
            let sch = dicke_schedule(s, &p, t, n).unwrap();
            measured_error(&sch, &StateVector::ground(s), &NoiseParams::default()).unwrap()
        };
        let (a, b) = (e(8), e(32));
        let r = a.state_distance / b.state_distance;
        assert!((3.0..=5.0).contains(&r), "{r}");
        let r = a.operator_distance / b.operator_distance;
        assert!((3.0..=5.0).contains(&r), "{r}");
    }

    #[test]
    fn reports_for_all_variants() {
        let s = sp(2, 8);
        let psi = StateVector::ground(s);
        let p = ModelParams::dicke(2, 0.05, 1.0, 0.5 * 2f64.sqrt());
        let b = biased_schedule(s, &p.clone().with_bias(0.1), 1.0, 6).unwrap();
        let pulse = PulseParams::from_couplings(
            0.5,
            1.0,
            2,
            1.0 / 12.0,
            1.0 / (12.0 * std::f64::consts::PI),
        );
        let q = pulsed_schedule(s, &p.clone().with_pulse(pulse), 1.0, 6).unwrap();
        for sch in [dicke_schedule(s, &p, 1.0, 6).unwrap(), b, q] {
            let r = error_report(&sch, &psi).unwrap();
            assert!(r.leading_term_norm >= 0.0 && r.measured_error >= 0.0);
            assert!(r.bound_dominates(), "{r:?}");
            assert_eq!(
                r.csv_row().split(',').count(),
                ErrorReport::CSV_HEADER.split(',').count()
            );
        }
    }
}
