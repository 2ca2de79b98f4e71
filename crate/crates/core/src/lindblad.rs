//! Master-equation integration along a gate schedule.
//!
//! ```text
//! dρ/dt = -i[H,ρ] + κ/2 (2aρa† - {a†a,ρ})
//!                 + Γs/2 Σ (2σ-ρσ+ - {σ+σ-,ρ})
//!                 + Γd   Σ (σzρσz - ρ)
//! ```
//!
//! The dephasing term is written with the literal `Γd` prefactor, so an
//! equatorial qubit coherence, and with it `⟨σx⟩`, decays as `exp(-2Γd t)`;
//! the collapse operators are `√κ a`, `√Γs σ-` and `√Γd σz`.
//!
//! Integration is fixed-step RK4. Internally the generator is applied as
//! `Kρ + (Kρ)† + Σ J ρ J†` with `K = -iH - ½ Σ J†J` stored in compressed
//! rows, which keeps every stage exactly Hermitian and is much cheaper than
//! dense products at the dimensions used here.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    boson_op, qubit_op, spectral_norm, BosonOpKind, DensityMatrix, HermitianEigen, HilbertSpace,
    Operator, QubitOpKind, StateVector, TRACE_TOL,
};
use crate::observables::{
    fidelity, fidelity_pure, leakage, photon_number, photon_number_pure, RunMetadata,
    SimulationResult, TimePoint,
};
use crate::trotter::{Segment, SegmentKind, TrotterSchedule};

/// Upper bound on `dt · ‖H‖`.
pub const STABILITY_LIMIT: f64 = 0.05;
/// Number of records at which positivity is checked.
pub const POSITIVITY_SAMPLES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub kappa: f64,
    pub gamma_s: f64,
    pub gamma_d: f64,
}

impl NoiseParams {
    pub fn new(kappa: f64, gamma_s: f64, gamma_d: f64) -> Self {
        Self {
            kappa,
            gamma_s,
            gamma_d,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.kappa == 0.0 && self.gamma_s == 0.0 && self.gamma_d == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa", self.kappa),
            ("gamma_s", self.gamma_s),
            ("gamma_d", self.gamma_d),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// Fixed step. `None` picks the largest step meeting `stability_limit`
    /// in each segment.
    pub dt: Option<f64>,
    pub stability_limit: f64,
    /// Step refinement ratio used by [`convergence_check`].
    pub convergence_factor: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: None,
            stability_limit: STABILITY_LIMIT,
            convergence_factor: 2.0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "dt must be positive, got {dt}"
                )));
            }
        }
        if !(self.stability_limit > 0.0 && self.stability_limit <= STABILITY_LIMIT) {
            return Err(Error::InvalidParams(format!(
                "stability_limit must lie in (0, {STABILITY_LIMIT}], got {}",
                self.stability_limit
            )));
        }
        if !(self.convergence_factor.is_finite() && self.convergence_factor > 1.0) {
            return Err(Error::InvalidParams(
                "convergence_factor must exceed 1".into(),
            ));
        }
        Ok(())
    }

    /// The same configuration with every step divided by `convergence_factor`.
    pub fn refined(&self) -> Self {
        Self {
            dt: self.dt.map(|d| d / self.convergence_factor),
            stability_limit: self.stability_limit / self.convergence_factor,
            ..*self
        }
    }

    /// Number of equal steps covering `duration` for a generator of norm `h_norm`.
    fn steps_for(&self, duration: f64, h_norm: f64) -> Result<usize> {
        match self.dt {
            Some(dt) => {
                let product = dt * h_norm;
                if product > self.stability_limit {
                    return Err(Error::StepTooLarge {
                        dt,
                        product,
                        limit: self.stability_limit,
                    });
                }
                Ok(((duration / dt) - 1e-9).ceil().max(1.0) as usize)
            }
            None => Ok(((duration * h_norm / self.stability_limit) - 1e-9)
                .ceil()
                .max(1.0) as usize),
        }
    }
}

/// Collapse operators `√κ a`, `√Γs σ-^i`, `√Γd σz^i`; zero rates are skipped.
pub fn collapse_operators(space: HilbertSpace, noise: &NoiseParams) -> Result<Vec<Operator>> {
    noise.validate()?;
    let mut ops = Vec::new();
    if noise.kappa > 0.0 {
        ops.push(&boson_op(space, BosonOpKind::A) * noise.kappa.sqrt());
    }
    for i in 0..space.n_qubits() {
        if noise.gamma_s > 0.0 {
            ops.push(&qubit_op(space, i, QubitOpKind::Minus)? * noise.gamma_s.sqrt());
        }
    }
    for i in 0..space.n_qubits() {
        if noise.gamma_d > 0.0 {
            ops.push(&qubit_op(space, i, QubitOpKind::Z)? * noise.gamma_d.sqrt());
        }
    }
    Ok(ops)
}

/// Dense right-hand side of the master equation, written term by term.
pub fn rhs(h: &Operator, rho: &DensityMatrix, noise: &NoiseParams) -> Result<DMatrix<C64>> {
    let h = h.clone().assert_hermitian()?;
    rho.check_space(&h.space())?;
    noise.validate()?;
    let space = h.space();
    let r = rho.matrix();
    let i = C64::new(0.0, 1.0);
    let half = C64::new(0.5, 0.0);
    let mut out = (h.matrix() * r - r * h.matrix()) * (-i);
    // rate · (L ρ L† - ½{L†L, ρ})
    let mut channels = Vec::new();
    if noise.kappa > 0.0 {
        channels.push((boson_op(space, BosonOpKind::A), noise.kappa));
    }
    for q in 0..space.n_qubits() {
        if noise.gamma_s > 0.0 {
            channels.push((qubit_op(space, q, QubitOpKind::Minus)?, noise.gamma_s));
        }
    }
    for (op, rate) in &channels {
        let (l, ld) = (op.matrix(), op.matrix().adjoint());
        let ldl = &ld * l;
        out += (l * r * &ld - (&ldl * r + r * &ldl) * half) * C64::new(*rate, 0.0);
    }
    for q in 0..space.n_qubits() {
        if noise.gamma_d > 0.0 {
            // Γd (σz ρ σz - ρ)
            let z = qubit_op(space, q, QubitOpKind::Z)?;
            out += (z.matrix() * r * z.matrix() - r) * C64::new(noise.gamma_d, 0.0);
        }
    }
    Ok(out)
}

/// Compressed sparse rows.
#[derive(Clone, Debug)]
struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// `out = self · x` for a dense column-major `x`.
    fn mul_into(&self, x: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let n = self.n;
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for j in 0..x.ncols() {
            let xc = &xs[j * n..(j + 1) * n];
            let oc = &mut os[j * n..(j + 1) * n];
            for (i, o) in oc.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[p] * xc[self.cols[p]];
                }
                *o = acc;
            }
        }
    }
}

/// Master-equation generator for one Hamiltonian and a fixed set of
/// collapse operators.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    space: HilbertSpace,
    k: Csr,
    jumps: Vec<Csr>,
    h_norm: f64,
}

impl Liouvillian {
    pub fn new(h: &Operator, collapse: &[Operator]) -> Result<Self> {
        let h = h.clone().assert_hermitian()?;
        let space = h.space();
        let mut k = h.matrix() * C64::new(0.0, -1.0);
        for j in collapse {
            space.check_same(&j.space())?;
            k -= (j.matrix().adjoint() * j.matrix()) * C64::new(0.5, 0.0);
        }
        Ok(Self {
            space,
            k: Csr::from_dense(&k),
            jumps: collapse
                .iter()
                .map(|j| Csr::from_dense(j.matrix()))
                .collect(),
            h_norm: spectral_norm(&h),
        })
    }

    pub fn hamiltonian_norm(&self) -> f64 {
        self.h_norm
    }

    /// `out = L(ρ)` for Hermitian `ρ`; `tmp` and `tmp2` are scratch space.
    fn apply(
        &self,
        rho: &DMatrix<C64>,
        out: &mut DMatrix<C64>,
        tmp: &mut DMatrix<C64>,
        tmp2: &mut DMatrix<C64>,
    ) {
        self.k.mul_into(rho, tmp);
        out.copy_from(tmp);
        *out += tmp.adjoint();
        for j in &self.jumps {
            // J ρ J† = J (J ρ)†  for Hermitian ρ
            j.mul_into(rho, tmp);
            let a = tmp.adjoint();
            j.mul_into(&a, tmp2);
            *out += &*tmp2;
        }
    }

    /// RK4 over `steps` equal steps of size `dt`. Returns the largest trace
    /// drift seen before correction.
    fn rk4(&self, rho: &mut DMatrix<C64>, dt: f64, steps: usize) -> f64 {
        let d = self.space.dim();
        let z = || DMatrix::<C64>::zeros(d, d);
        let (mut k1, mut k2, mut k3, mut k4) = (z(), z(), z(), z());
        let (mut stage, mut tmp, mut tmp2) = (z(), z(), z());
        let h = C64::new(dt, 0.0);
        let half = C64::new(dt / 2.0, 0.0);
        let sixth = C64::new(dt / 6.0, 0.0);
        let two = C64::new(2.0, 0.0);
        let mut drift: f64 = 0.0;
        for _ in 0..steps {
            self.apply(rho, &mut k1, &mut tmp, &mut tmp2);
            stage.copy_from(rho);
            axpy(&mut stage, half, &k1);
            self.apply(&stage, &mut k2, &mut tmp, &mut tmp2);
            stage.copy_from(rho);
            axpy(&mut stage, half, &k2);
            self.apply(&stage, &mut k3, &mut tmp, &mut tmp2);
            stage.copy_from(rho);
            axpy(&mut stage, h, &k3);
            self.apply(&stage, &mut k4, &mut tmp, &mut tmp2);
            k2 *= two;
            k3 *= two;
            k1 += &k2;
            k1 += &k3;
            k1 += &k4;
            axpy(rho, sixth, &k1);
            drift = drift.max((rho.trace().re - 1.0).abs());
        }
        drift
    }
}

/// `y += a x`.
fn axpy(y: &mut DMatrix<C64>, a: C64, x: &DMatrix<C64>) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += a * xi;
    }
}

/// Outcome of [`integrate_segment`]: the state and the uncorrected drift.
#[derive(Clone, Debug)]
pub struct SegmentOutcome {
    pub rho: DensityMatrix,
    pub trace_drift: f64,
    pub steps: usize,
}

/// Evolve `ρ0` under `H` and the noise for `duration`.
pub fn integrate_segment(
    h: &Operator,
    rho0: &DensityMatrix,
    duration: f64,
    noise: &NoiseParams,
    config: &IntegratorConfig,
) -> Result<DensityMatrix> {
    let l = Liouvillian::new(h, &collapse_operators(h.space(), noise)?)?;
    Ok(integrate_with(&l, rho0, duration, config)?.rho)
}

/// Like [`integrate_segment`] with a prebuilt generator.
pub fn integrate_with(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    duration: f64,
    config: &IntegratorConfig,
) -> Result<SegmentOutcome> {
    config.validate()?;
    rho0.check_space(&l.space)?;
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "segment duration must be non-negative, got {duration}"
        )));
    }
    if duration == 0.0 {
        return Ok(SegmentOutcome {
            rho: rho0.clone(),
            trace_drift: 0.0,
            steps: 0,
        });
    }
    let steps = config.steps_for(duration, l.h_norm)?;
    let dt = duration / steps as f64;
    let mut m = rho0.matrix().clone();
    let drift = l.rk4(&mut m, dt, steps);
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut rho = DensityMatrix::new_unchecked(l.space, m)?;
    rho.hermitize();
    let final_drift = drift.max(rho.trace_error());
    if final_drift > TRACE_TOL {
        return Err(Error::TraceDrift {
            drift: final_drift,
            limit: TRACE_TOL,
        });
    }
    rho.rescale_trace();
    Ok(SegmentOutcome {
        rho,
        trace_drift: final_drift,
        steps,
    })
}

/// How the reference state is evolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Noiseless exact evolution under the target Hamiltonian.
    #[default]
    IdealExact,
    /// Exact target Hamiltonian with the same noise as the Trotterized run.
    NoisyExact,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub reference: Reference,
    /// Also record after every analog segment inside a step.
    pub intra_step: bool,
}

/// Propagator of every segment of one step, cached for the noiseless path.
enum StepEngine {
    Unitary(Vec<Operator>),
    Noisy(Vec<Option<Liouvillian>>, Vec<Option<Operator>>),
}

fn build_engine(schedule: &TrotterSchedule, noise: &NoiseParams) -> Result<StepEngine> {
    let space = schedule.space;
    if noise.is_noiseless() {
        return Ok(StepEngine::Unitary(schedule.step_unitaries()?));
    }
    let collapse = collapse_operators(space, noise)?;
    let mut gens = Vec::new();
    let mut gates = Vec::new();
    for (i, seg) in schedule.step_segments(0).iter().enumerate() {
        let wrap = |e: Error| e.in_segment(i, &seg.label);
        match &seg.kind {
            // gates are instantaneous and noise-free
            SegmentKind::Gate { .. } => {
                gens.push(None);
                gates.push(Some(seg.unitary(space).map_err(wrap)?));
            }
            SegmentKind::Analog(g) => {
                let h = g.operator(space).map_err(wrap)?;
                gens.push(Some(Liouvillian::new(&h, &collapse).map_err(wrap)?));
                gates.push(None);
            }
        }
    }
    Ok(StepEngine::Noisy(gens, gates))
}

/// Reference evolution; pure when noiseless.
enum ReferenceState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

struct ReferenceEngine {
    pieces: Vec<(f64, Operator, Option<Liouvillian>)>,
    state: ReferenceState,
    /// Position inside the current step: piece index and time spent in it.
    cursor: (usize, f64),
}

impl ReferenceEngine {
    fn new(
        schedule: &TrotterSchedule,
        initial: &StateVector,
        noise: Option<&NoiseParams>,
    ) -> Result<Self> {
        let collapse = match noise {
            Some(n) => Some(collapse_operators(schedule.space, n)?),
            None => None,
        };
        let mut pieces = Vec::new();
        for p in &schedule.target {
            let l = match &collapse {
                Some(c) => Some(Liouvillian::new(&p.hamiltonian, c)?),
                None => None,
            };
            pieces.push((p.duration, p.hamiltonian.clone(), l));
        }
        let state = match noise {
            Some(_) => ReferenceState::Mixed(initial.to_density()),
            None => ReferenceState::Pure(initial.clone()),
        };
        Ok(Self {
            pieces,
            state,
            cursor: (0, 0.0),
        })
    }

    /// Advance by `dt` of simulated time through the periodic pieces.
    fn advance(&mut self, mut dt: f64, config: &IntegratorConfig) -> Result<()> {
        let eps = 1e-12 * self.pieces.iter().map(|p| p.0).sum::<f64>().max(1.0);
        while dt > eps {
            let (idx, used) = self.cursor;
            let (dur, h, l) = &self.pieces[idx];
            let take = (dur - used).min(dt);
            match &mut self.state {
                ReferenceState::Pure(psi) => {
                    *psi = HermitianEigen::new(h)?.propagator(take).apply(psi)?;
                }
                ReferenceState::Mixed(rho) => {
                    *rho = integrate_with(l.as_ref().expect("noisy reference"), rho, take, config)?
                        .rho;
                }
            }
            dt -= take;
            if used + take >= dur - eps {
                self.cursor = ((idx + 1) % self.pieces.len(), 0.0);
            } else {
                self.cursor = (idx, used + take);
            }
        }
        Ok(())
    }
}

struct Recorder<'a> {
    psi0: &'a StateVector,
    axis_coupling: f64,
    positivity_at: Vec<usize>,
    result: SimulationResult,
}

impl Recorder<'_> {
    fn record(
        &mut self,
        t_sim: f64,
        rho: &DensityMatrix,
        reference: &ReferenceState,
        drift: f64,
    ) -> Result<()> {
        let idx = self.result.time_grid.len();
        let r = &mut self.result;
        r.time_grid.push(TimePoint {
            t_sim,
            g_t: self.axis_coupling * t_sim,
        });
        let (f, n_ideal, surv) = match reference {
            ReferenceState::Pure(psi) => {
                let ov = self.psi0.inner(psi)?;
                (
                    fidelity_pure(rho, psi)?,
                    photon_number_pure(psi),
                    ov.norm_sqr(),
                )
            }
            ReferenceState::Mixed(ri) => (
                fidelity(rho, ri)?,
                photon_number(ri),
                fidelity_pure(ri, self.psi0)?,
            ),
        };
        r.fidelity.push(f);
        r.photon_number_trotter.push(photon_number(rho));
        r.photon_number_ideal.push(n_ideal);
        r.survival.push(surv);
        r.leakage.push(leakage(rho));
        r.trace_error.push(drift.max(rho.trace_error()));
        r.max_hermitian_deviation = r.max_hermitian_deviation.max(rho.hermitian_deviation());
        if self.positivity_at.contains(&idx) {
            let m = rho.min_eigenvalue();
            r.min_eigenvalues.push((idx, m));
            rho.validate_positive()?;
        }
        Ok(())
    }
}

fn sample_points(n_records: usize) -> Vec<usize> {
    if n_records <= POSITIVITY_SAMPLES {
        return (0..n_records).collect();
    }
    let last = n_records - 1;
    let mut v: Vec<usize> = (0..POSITIVITY_SAMPLES)
        .map(|k| (k * last + (POSITIVITY_SAMPLES - 1) / 2) / (POSITIVITY_SAMPLES - 1))
        .collect();
    v.dedup();
    v
}

/// Run a schedule from the pure state `psi0` with default options.
pub fn run_schedule(
    schedule: &TrotterSchedule,
    psi0: &StateVector,
    noise: &NoiseParams,
    config: &IntegratorConfig,
) -> Result<SimulationResult> {
    run_schedule_with(schedule, psi0, noise, config, &RunOptions::default())
}

/// Alternate analog integration and gate conjugations, recording the
/// observables after every Trotter step (and after every analog segment
/// when `intra_step` is set).
pub fn run_schedule_with(
    schedule: &TrotterSchedule,
    psi0: &StateVector,
    noise: &NoiseParams,
    config: &IntegratorConfig,
    options: &RunOptions,
) -> Result<SimulationResult> {
    noise.validate()?;
    config.validate()?;
    schedule.space.check_same(&psi0.space())?;
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!(
            "initial state norm {} is not 1",
            psi0.norm()
        )));
    }
    let per = schedule.segments_per_step;
    let analog_per_step: f64 = schedule.step_segments(0).iter().map(|s| s.duration).sum();
    let step_time = schedule.step_time();
    let n_records = if options.intra_step {
        1 + schedule.n_steps * schedule.analog_count_per_step()
    } else {
        1 + schedule.n_steps
    };
    let mut rec = Recorder {
        psi0,
        axis_coupling: schedule.axis_coupling,
        positivity_at: sample_points(n_records),
        result: SimulationResult {
            time_grid: Vec::with_capacity(n_records),
            fidelity: Vec::new(),
            photon_number_trotter: Vec::new(),
            photon_number_ideal: Vec::new(),
            survival: Vec::new(),
            leakage: Vec::new(),
            trace_error: Vec::new(),
            min_eigenvalues: Vec::new(),
            max_hermitian_deviation: 0.0,
            metadata: RunMetadata {
                params: schedule.params.clone(),
                noise: *noise,
                integrator: *config,
                n_steps: schedule.n_steps,
                simulated_time: schedule.simulated_time,
                variant: schedule.variant.name().to_string(),
            },
        },
    };

    let engine = build_engine(schedule, noise)?;
    let ref_noise = match options.reference {
        Reference::NoisyExact if !noise.is_noiseless() => Some(noise),
        _ => None,
    };
    let mut reference = ReferenceEngine::new(schedule, psi0, ref_noise)?;
    let mut rho = psi0.to_density();
    rec.record(0.0, &rho, &reference.state, 0.0)?;

    let mut t_ref = 0.0;
    for k in 0..schedule.n_steps {
        let mut drift: f64 = 0.0;
        let mut analog_done = 0.0;
        for j in 0..per {
            let seg: &Segment = &schedule.segments[k * per + j];
            let wrap = |e: Error| e.in_segment(k * per + j, &seg.label);
            match &engine {
                StepEngine::Unitary(us) => {
                    rho = rho.conjugate_by(&us[j]).map_err(wrap)?;
                }
                StepEngine::Noisy(gens, gates) => {
                    if let Some(u) = &gates[j] {
                        rho = rho.conjugate_by(u).map_err(wrap)?;
                    } else {
                        let l = gens[j].as_ref().expect("analog generator");
                        let out = integrate_with(l, &rho, seg.duration, config).map_err(wrap)?;
                        drift = drift.max(out.trace_drift);
                        rho = out.rho;
                    }
                }
            }
            if options.intra_step && !seg.is_gate() {
                analog_done += seg.duration;
                let t_sim = k as f64 * step_time + step_time * analog_done / analog_per_step;
                let end_of_step =
                    (analog_done - analog_per_step).abs() <= 1e-12 * analog_per_step.max(1.0);
                if !end_of_step {
                    reference.advance(t_sim - t_ref, config).map_err(wrap)?;
                    t_ref = t_sim;
                    rec.record(t_sim, &rho, &reference.state, drift)
                        .map_err(wrap)?;
                }
            }
        }
        // trailing gates belong to the step; record once it is complete
        let t_sim = (k + 1) as f64 * step_time;
        let last = k * per + per - 1;
        let label = &schedule.segments[last].label;
        reference
            .advance(t_sim - t_ref, config)
            .map_err(|e| e.in_segment(last, label))?;
        t_ref = t_sim;
        if noise.is_noiseless() {
            // exact conjugations keep the state pure; guard against roundoff
            rho.hermitize();
        }
        rec.record(t_sim, &rho, &reference.state, drift)
            .map_err(|e| e.in_segment(last, label))?;
    }
    Ok(rec.result)
}

/// Final-fidelity change when every step is divided by the configured factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub coarse_fidelity: f64,
    pub fine_fidelity: f64,
    pub delta: f64,
}

pub fn convergence_check(
    schedule: &TrotterSchedule,
    psi0: &StateVector,
    noise: &NoiseParams,
    config: &IntegratorConfig,
) -> Result<ConvergenceReport> {
    let coarse = run_schedule(schedule, psi0, noise, config)?.final_fidelity();
    let fine = run_schedule(schedule, psi0, noise, &config.refined())?.final_fidelity();
    Ok(ConvergenceReport {
        coarse_fidelity: coarse,
        fine_fidelity: fine,
        delta: (coarse - fine).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{dicke, ModelParams};
    use crate::hilbert::evolve_unitary;
    use crate::trotter::{dicke_schedule, execute_unitary};

    fn sp(n: usize, m: usize) -> HilbertSpace {
        HilbertSpace::new(n, m).unwrap()
    }

    fn random_hermitian_density(s: HilbertSpace, seed: u64) -> DensityMatrix {
        // deterministic pseudo-random mixture of pure states
        let mut x = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut next = || {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let d = s.dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for w in [0.6, 0.4] {
            let v = nalgebra::DVector::from_fn(d, |_, _| C64::new(next(), next()));
            let v = &v / C64::new(v.norm(), 0.0);
            m += (&v * v.adjoint()) * C64::new(w, 0.0);
        }
        DensityMatrix::new(s, m).unwrap()
    }

    #[test]
    fn rhs_vanishes_on_eigenstate() {
        let s = sp(2, 3);
        let h = dicke(s, &ModelParams::dicke(2, 0.3, 1.0, 0.0)).unwrap();
        let rho = DensityMatrix::basis(s, 5).unwrap();
        assert!(rhs(&h, &rho, &NoiseParams::default()).unwrap().camax() < 1e-15);
    }

    #[test]
    fn rhs_photon_loss_rate() {
        let s = sp(1, 3);
        let h = Operator::zeros(s);
        let rho = DensityMatrix::basis(s, s.ground_index(1)).unwrap();
        let d = rhs(&h, &rho, &NoiseParams::new(0.3, 0.0, 0.0)).unwrap();
        let drho = DensityMatrix::new_unchecked(s, d).unwrap();
        assert!((photon_number(&drho) + 0.3).abs() < 1e-14);
    }

    #[test]
    fn rhs_traceless_and_matches_sparse() {
        let s = sp(2, 3);
        let h = dicke(s, &ModelParams::dicke(2, 0.3, 1.0, 0.7)).unwrap();
        let noise = NoiseParams::new(0.1, 0.05, 0.02);
        for seed in 0..4 {
            let rho = random_hermitian_density(s, seed);
            let dense = rhs(&h, &rho, &noise).unwrap();
            assert!(dense.trace().norm() < 1e-12);
            let l = Liouvillian::new(&h, &collapse_operators(s, &noise).unwrap()).unwrap();
            let d = s.dim();
            let (mut out, mut a, mut b) = (
                DMatrix::zeros(d, d),
                DMatrix::zeros(d, d),
                DMatrix::zeros(d, d),
            );
            l.apply(rho.matrix(), &mut out, &mut a, &mut b);
            assert!((out - dense).camax() < 1e-13);
        }
    }

    #[test]
    fn rhs_rejects_non_hermitian() {
        let s = sp(1, 1);
        let a = boson_op(s, BosonOpKind::A);
        assert!(rhs(
            &a,
            &DensityMatrix::basis(s, 0).unwrap(),
            &NoiseParams::default()
        )
        .is_err());
    }

    #[test]
    fn zero_duration_is_identity() {
        let s = sp(1, 2);
        let rho = random_hermitian_density(s, 9);
        let h = dicke(s, &ModelParams::dicke(1, 0.3, 1.0, 0.7)).unwrap();
        let out = integrate_segment(
            &h,
            &rho,
            0.0,
            &NoiseParams::new(0.1, 0.1, 0.1),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn damped_cavity() {
        let s = sp(1, 3);
        let kappa = 0.5;
        let rho0 = DensityMatrix::basis(s, s.ground_index(1)).unwrap();
        let cfg = IntegratorConfig {
            dt: Some(0.01),
            ..Default::default()
        };
        let rho = integrate_segment(
            &Operator::zeros(s),
            &rho0,
            1.0 / kappa,
            &NoiseParams::new(kappa, 0.0, 0.0),
            &cfg,
        )
        .unwrap();
        assert!((photon_number(&rho) - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn dephasing_decay() {
        // d<σx>/dt = -2Γd <σx> for the literal Γd(σzρσz - ρ) dissipator
        let s = sp(1, 0);
        let gd = 0.3;
        let plus = StateVector::new(
            s,
            nalgebra::DVector::from_vec(vec![
                C64::new(1.0 / 2f64.sqrt(), 0.0),
                C64::new(1.0 / 2f64.sqrt(), 0.0),
            ]),
        )
        .unwrap();
        let x = qubit_op(s, 0, QubitOpKind::X).unwrap();
        let cfg = IntegratorConfig {
            dt: Some(0.01),
            ..Default::default()
        };
        let t = 1.5;
        let rho = integrate_segment(
            &Operator::zeros(s),
            &plus.to_density(),
            t,
            &NoiseParams::new(0.0, 0.0, gd),
            &cfg,
        )
        .unwrap();
        assert!((rho.expectation(&x).unwrap().re - (-2.0 * gd * t).exp()).abs() < 1e-6);
    }

    #[test]
    fn noiseless_integration_matches_unitary() {
        let s = sp(2, 4);
        let h = dicke(s, &ModelParams::dicke(2, 0.3, 1.0, 0.7)).unwrap();
        let psi = StateVector::ground(s);
        let cfg = IntegratorConfig {
            stability_limit: 0.01,
            ..Default::default()
        };
        let rho =
            integrate_segment(&h, &psi.to_density(), 1.3, &NoiseParams::default(), &cfg).unwrap();
        let exact = evolve_unitary(&h, 1.3)
            .unwrap()
            .apply(&psi)
            .unwrap()
            .to_density();
        assert!((rho.matrix() - exact.matrix()).camax() < 1e-9);
    }

    #[test]
    fn explicit_step_guard() {
        let s = sp(1, 4);
        let h = dicke(s, &ModelParams::dicke(1, 0.3, 1.0, 0.7)).unwrap();
        let cfg = IntegratorConfig {
            dt: Some(0.5),
            ..Default::default()
        };
        let r = integrate_segment(
            &h,
            &DensityMatrix::basis(s, 0).unwrap(),
            1.0,
            &NoiseParams::default(),
            &cfg,
        );
        assert!(matches!(r, Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn noiseless_run_matches_execute_unitary() {
        let s = sp(2, 10);
        let p = ModelParams::dicke(2, 0.05, 1.0, 1.5 * 2f64.sqrt());
        let sch = dicke_schedule(s, &p, 1.0 / 1.5, 8).unwrap();
        let psi = StateVector::ground(s);
        let res = run_schedule(&sch, &psi, &NoiseParams::default(), &Default::default()).unwrap();
        let tr = execute_unitary(&sch, &psi).unwrap();
        assert_eq!(res.len(), 9);
        assert!(res.invariants_hold());
        assert_eq!(res.fidelity[0], 1.0);
        assert_eq!(res.survival[0], 1.0);
        // Trotterized state agrees with the pure-state projector
        let last = tr.final_state().to_density();
        let mut rho = psi.to_density();
        for u in sch
            .step_unitaries()
            .unwrap()
            .iter()
            .cycle()
            .take(sch.segments.len())
        {
            rho = rho.conjugate_by(u).unwrap();
        }
        assert!((rho.matrix() - last.matrix()).camax() < 1e-7);
        let f_direct = fidelity_pure(
            &last,
            &crate::trotter::execute_target(&sch, &psi)
                .unwrap()
                .final_state()
                .clone(),
        )
        .unwrap();
        assert!((res.final_fidelity() - f_direct).abs() < 1e-10);
    }

    #[test]
    fn self_comparison_is_perfect() {
        // a schedule whose only analog generator is the target itself
        let s = sp(1, 4);
        let p = ModelParams::dicke(1, 0.4, 1.0, 0.0);
        let sch = dicke_schedule(s, &p, 3.0, 6).unwrap();
        let psi = StateVector::ground(s);
        let res = run_schedule(&sch, &psi, &NoiseParams::default(), &Default::default()).unwrap();
        assert!(res.fidelity.iter().all(|f| (f - 1.0).abs() < 1e-8));
    }

    #[test]
    fn segment_index_attached() {
        let s = sp(1, 2);
        let p = ModelParams::dicke(1, 0.3, 1.0, 0.7);
        let sch = dicke_schedule(s, &p, 1.0, 2).unwrap();
        let cfg = IntegratorConfig {
            dt: Some(0.4),
            ..Default::default()
        };
        let err = run_schedule(
            &sch,
            &StateVector::ground(s),
            &NoiseParams::new(0.1, 0.0, 0.0),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Segment { index: 0, .. }), "{err}");
    }

    #[test]
    fn noisy_run_invariants() {
        let s = sp(2, 6);
        let p = ModelParams::dicke(2, 0.05, 1.0, 0.5 * 2f64.sqrt());
        let sch = dicke_schedule(s, &p, 1.0 / 0.5, 7).unwrap();
        let noise = NoiseParams::new(0.01, 0.005, 0.005);
        let psi = StateVector::ground(s);
        let res = run_schedule(&sch, &psi, &noise, &Default::default()).unwrap();
        assert!(res.invariants_hold());
        assert!(res.max_trace_error() <= 1e-8);
        assert!(res.max_hermitian_deviation <= 1e-10);
        assert_eq!(res.min_eigenvalues.len(), 5);
        assert!(res.min_eigenvalues.iter().all(|(_, m)| *m >= -1e-8));
        let noisy_ref = run_schedule_with(
            &sch,
            &psi,
            &noise,
            &Default::default(),
            &RunOptions {
                reference: Reference::NoisyExact,
                intra_step: false,
            },
        )
        .unwrap();
        assert_eq!(noisy_ref.len(), res.len());
        let intra = run_schedule_with(
            &sch,
            &psi,
            &noise,
            &Default::default(),
            &RunOptions {
                intra_step: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(intra.len(), 1 + 2 * 7);
        assert!((intra.final_fidelity() - res.final_fidelity()).abs() < 1e-12);
        assert!(intra.time_grid.windows(2).all(|w| w[1].t_sim > w[0].t_sim));
    }

    #[test]
    fn sample_points_spread() {
        assert_eq!(sample_points(3), vec![0, 1, 2]);
        let v = sample_points(12);
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], 0);
        assert_eq!(*v.last().unwrap(), 11);
    }
}
