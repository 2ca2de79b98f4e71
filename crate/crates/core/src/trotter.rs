//! Digital-analog gate schedules for the Dicke family and their noiseless
//! execution.
//!
//! A Dicke Trotter step is, in time order,
//!
//! ```text
//! TC(detuning set A, t/n) → Rx(π) → TC(detuning set B, t/n) → Rx(π)
//! ```
//!
//! where the Tavis-Cummings block sandwiched between the collective
//! π-rotations acts as an anti-Tavis-Cummings evolution. Each analog segment
//! lasts `t/n` of simulated time, so `n` steps spend `2t` of analog time to
//! simulate the Dicke model for `t`. Both clocks are stored on the schedule.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{
    biased_dicke, collective_rotation, dicke, dicke_with_coupling, frame_map, tavis_cummings, Axis,
    FrameParams, ModelParams,
};
use crate::hilbert::{collective_qubit_op, HermitianEigen, HilbertSpace, Operator, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dicke,
    Biased,
    Pulsed,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Dicke => "dicke",
            Variant::Biased => "biased",
            Variant::Pulsed => "pulsed",
        }
    }
}

/// Hamiltonian of an analog segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Generator {
    /// `Σ (Δq_i/2) σz^i + Δm a†a + g Σ (σ+^i a + σ-^i a†)`.
    TavisCummings {
        qubit_detunings: Vec<f64>,
        mode_detuning: f64,
        coupling: f64,
    },
    /// Coupling switched off, resonator in its own frame: `Σ (Δq_i/2) σz^i`.
    FreeQubits { qubit_detunings: Vec<f64> },
    /// Collective drive `(rate/2) Σ σ_axis^i`, used for finite-duration gates.
    Drive { axis: Axis, rate: f64 },
}

impl Generator {
    pub fn operator(&self, space: HilbertSpace) -> Result<Operator> {
        match self {
            Generator::TavisCummings {
                qubit_detunings,
                mode_detuning,
                coupling,
            } => tavis_cummings(space, qubit_detunings, *mode_detuning, *coupling),
            Generator::FreeQubits { qubit_detunings } => {
                tavis_cummings(space, qubit_detunings, 0.0, 0.0)
            }
            Generator::Drive { axis, rate } => {
                Ok(&collective_qubit_op(space, axis.qubit_kind()) * (rate / 2.0))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SegmentKind {
    Analog(Generator),
    /// Instantaneous collective rotation `exp(-iθ/2 Σ σ_axis)`.
    Gate {
        axis: Axis,
        angle: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Analog (laboratory) duration; zero for instantaneous gates.
    pub duration: f64,
    pub label: String,
}

impl Segment {
    fn analog(generator: Generator, duration: f64, label: String) -> Self {
        Self {
            kind: SegmentKind::Analog(generator),
            duration,
            label,
        }
    }

    fn gate(axis: Axis, angle: f64, label: &str) -> Self {
        Self {
            kind: SegmentKind::Gate { axis, angle },
            duration: 0.0,
            label: label.to_string(),
        }
    }

    pub fn is_gate(&self) -> bool {
        matches!(self.kind, SegmentKind::Gate { .. })
    }

    /// Exact propagator of the segment.
    pub fn unitary(&self, space: HilbertSpace) -> Result<Operator> {
        match &self.kind {
            SegmentKind::Gate { axis, angle } => Ok(collective_rotation(space, *axis, *angle)),
            SegmentKind::Analog(generator) => {
                let h = generator.operator(space)?;
                Ok(HermitianEigen::new(&h)?.propagator(self.duration))
            }
        }
    }
}

/// One piece of the simulated (target) Hamiltonian within a Trotter step.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetPiece {
    pub hamiltonian: Operator,
    /// Simulated duration of the piece.
    pub duration: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ScheduleOptions {
    /// Finite duration for collective rotations; `None` makes them instantaneous.
    pub gate_duration: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrotterSchedule {
    pub space: HilbertSpace,
    pub variant: Variant,
    pub params: ModelParams,
    pub segments: Vec<Segment>,
    pub segments_per_step: usize,
    pub n_steps: usize,
    /// Simulated time `t` covered by the whole schedule.
    pub simulated_time: f64,
    /// Simulated Hamiltonian over one Trotter step, in time order.
    pub target: Vec<TargetPiece>,
    /// Per-qubit coupling used for the `g t` time axis.
    pub axis_coupling: f64,
}

impl TrotterSchedule {
    pub fn step_time(&self) -> f64 {
        self.simulated_time / self.n_steps as f64
    }

    /// Total analog time of all segments.
    pub fn analog_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn step_segments(&self, k: usize) -> &[Segment] {
        &self.segments[k * self.segments_per_step..(k + 1) * self.segments_per_step]
    }

    pub fn gate_count_per_step(&self) -> usize {
        self.step_segments(0).iter().filter(|s| s.is_gate()).count()
    }

    pub fn analog_count_per_step(&self) -> usize {
        self.segments_per_step - self.gate_count_per_step()
    }

    /// Time-averaged target Hamiltonian over one step.
    pub fn target_hamiltonian(&self) -> Operator {
        let step = self.step_time();
        let mut acc = Operator::zeros(self.space);
        for piece in &self.target {
            acc = &acc + &(&piece.hamiltonian * (piece.duration / step));
        }
        acc
    }

    /// Exact propagator of the target over one Trotter step.
    pub fn target_step_unitary(&self) -> Result<Operator> {
        let mut u = Operator::identity(self.space);
        for piece in &self.target {
            u = &HermitianEigen::new(&piece.hamiltonian)?.propagator(piece.duration) * &u;
        }
        Ok(u)
    }

    /// Exact propagator of the target over the whole simulated time.
    pub fn target_unitary(&self) -> Result<Operator> {
        if self.target.len() == 1 {
            let piece = &self.target[0];
            return Ok(HermitianEigen::new(&piece.hamiltonian)?.propagator(self.simulated_time));
        }
        let step = self.target_step_unitary()?;
        Ok(power(&step, self.n_steps))
    }

    /// Propagators of one step's segments.
    pub fn step_unitaries(&self) -> Result<Vec<Operator>> {
        if self.n_steps == 0 {
            return Ok(Vec::new());
        }
        self.step_segments(0)
            .iter()
            .enumerate()
            .map(|(i, s)| s.unitary(self.space).map_err(|e| e.in_segment(i, &s.label)))
            .collect()
    }

    /// Product of all segment propagators.
    pub fn schedule_unitary(&self) -> Result<Operator> {
        let mut step = Operator::identity(self.space);
        for u in self.step_unitaries()? {
            step = &u * &step;
        }
        Ok(power(&step, self.n_steps))
    }

    /// Human-readable listing, one segment per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# variant={} n_qubits={} fock_cutoff={} n_steps={} simulated_time={} analog_time={} segments_per_step={}",
            self.variant.name(),
            self.space.n_qubits(),
            self.space.fock_cutoff(),
            self.n_steps,
            self.simulated_time,
            self.analog_time(),
            self.segments_per_step
        );
        for (i, s) in self.segments.iter().enumerate() {
            let detail = match &s.kind {
                SegmentKind::Gate { axis, angle } => format!("gate axis={axis:?} angle={angle}"),
                SegmentKind::Analog(Generator::TavisCummings {
                    qubit_detunings,
                    mode_detuning,
                    coupling,
                }) => {
                    format!("analog coupling={coupling} qubit_detunings={qubit_detunings:?} mode_detuning={mode_detuning}")
                }
                SegmentKind::Analog(Generator::FreeQubits { qubit_detunings }) => {
                    format!("analog coupling=0 qubit_detunings={qubit_detunings:?} mode_detuning=0")
                }
                SegmentKind::Analog(Generator::Drive { axis, rate }) => {
                    format!("analog drive axis={axis:?} rate={rate}")
                }
            };
            let _ = writeln!(
                out,
                "{i:5} {:<28} duration={} {detail}",
                s.label, s.duration
            );
        }
        out
    }
}

fn power(u: &Operator, n: usize) -> Operator {
    // binary exponentiation
    let mut result = Operator::identity(u.space());
    let mut base = u.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

fn check_time(t: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParams(
            "at least one Trotter step is required".into(),
        ));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "simulated time must be finite and non-negative, got {t}"
        )));
    }
    Ok(())
}

fn framed(params: &ModelParams) -> Result<(ModelParams, FrameParams)> {
    params.validate()?;
    let p = match &params.frame {
        Some(_) => params.clone(),
        None => frame_map(params)?,
    };
    let f = p.frame.clone().expect("frame present");
    Ok((p, f))
}

fn push_rotation(
    segments: &mut Vec<Segment>,
    axis: Axis,
    angle: f64,
    label: &str,
    options: &ScheduleOptions,
) {
    match options.gate_duration {
        Some(d) if d > 0.0 => segments.push(Segment::analog(
            Generator::Drive {
                axis,
                rate: angle / d,
            },
            d,
            label.to_string(),
        )),
        _ => segments.push(Segment::gate(axis, angle, label)),
    }
}

/// TC(A) → Rx(π) → TC(B) → Rx(π) with per-qubit coupling `g` and analog
/// duration `dt` per TC block.
fn push_dicke_pair(
    segments: &mut Vec<Segment>,
    frame: &FrameParams,
    g: f64,
    dt: f64,
    options: &ScheduleOptions,
) {
    segments.push(Segment::analog(
        Generator::TavisCummings {
            qubit_detunings: frame.qubit_detunings.clone(),
            mode_detuning: frame.mode_detuning,
            coupling: g,
        },
        dt,
        format!("TC(g={g}, det-A)"),
    ));
    push_rotation(segments, Axis::X, PI, "Rx(pi)", options);
    segments.push(Segment::analog(
        Generator::TavisCummings {
            qubit_detunings: frame.alt_detunings.clone(),
            mode_detuning: frame.mode_detuning,
            coupling: g,
        },
        dt,
        format!("TC(g={g}, det-B)"),
    ));
    push_rotation(segments, Axis::X, PI, "Rx(pi)", options);
}

fn repeat_step(step: Vec<Segment>, n: usize) -> (Vec<Segment>, usize) {
    let per = step.len();
    let mut all = Vec::with_capacity(per * n);
    for _ in 0..n {
        all.extend(step.iter().cloned());
    }
    (all, per)
}

pub fn dicke_schedule(
    space: HilbertSpace,
    params: &ModelParams,
    t: f64,
    n: usize,
) -> Result<TrotterSchedule> {
    dicke_schedule_with(space, params, t, n, &ScheduleOptions::default())
}

pub fn dicke_schedule_with(
    space: HilbertSpace,
    params: &ModelParams,
    t: f64,
    n: usize,
    options: &ScheduleOptions,
) -> Result<TrotterSchedule> {
    check_time(t, n)?;
    let (p, frame) = framed(params)?;
    if p.pulse.is_some() {
        return Err(Error::InvalidParams(
            "pulse parameters given to the plain Dicke schedule".into(),
        ));
    }
    let target = dicke(space, &p)?;
    let dt = t / n as f64;
    let mut step = Vec::new();
    push_dicke_pair(&mut step, &frame, frame.coupling, dt, options);
    let (segments, per) = repeat_step(step, n);
    Ok(TrotterSchedule {
        space,
        variant: Variant::Dicke,
        axis_coupling: frame.coupling,
        params: p,
        segments,
        segments_per_step: per,
        n_steps: n,
        simulated_time: t,
        target: vec![TargetPiece {
            hamiltonian: target,
            duration: dt,
        }],
    })
}

pub fn biased_schedule(
    space: HilbertSpace,
    params: &ModelParams,
    t: f64,
    n: usize,
) -> Result<TrotterSchedule> {
    biased_schedule_with(space, params, t, n, &ScheduleOptions::default())
}

/// Dicke step followed by `Ry(-π/2) → free qubits at 2Δ → Ry(π/2)`, which
/// realizes `exp(-iΔ Σσx t/n)`.
pub fn biased_schedule_with(
    space: HilbertSpace,
    params: &ModelParams,
    t: f64,
    n: usize,
    options: &ScheduleOptions,
) -> Result<TrotterSchedule> {
    check_time(t, n)?;
    if params.pulse.is_some() {
        return Err(Error::Unsupported(
            "bias and pulsed coupling cannot be combined".into(),
        ));
    }
    let (p, frame) = framed(params)?;
    let target = biased_dicke(space, &p)?;
    let dt = t / n as f64;
    let mut step = Vec::new();
    push_dicke_pair(&mut step, &frame, frame.coupling, dt, options);
    push_rotation(&mut step, Axis::Y, -PI / 2.0, "Ry(-pi/2)", options);
    step.push(Segment::analog(
        Generator::FreeQubits {
            qubit_detunings: vec![2.0 * p.bias; p.n_qubits],
        },
        dt,
        format!("free(det={})", 2.0 * p.bias),
    ));
    push_rotation(&mut step, Axis::Y, PI / 2.0, "Ry(pi/2)", options);
    let (segments, per) = repeat_step(step, n);
    Ok(TrotterSchedule {
        space,
        variant: Variant::Biased,
        axis_coupling: frame.coupling,
        params: p,
        segments,
        segments_per_step: per,
        n_steps: n,
        simulated_time: t,
        target: vec![TargetPiece {
            hamiltonian: target,
            duration: dt,
        }],
    })
}

pub fn pulsed_schedule(
    space: HilbertSpace,
    params: &ModelParams,
    t: f64,
    n: usize,
) -> Result<TrotterSchedule> {
    pulsed_schedule_with(space, params, t, n, &ScheduleOptions::default())
}

/// Dicke pair at `g0 = λ0/√N` followed by a Dicke pair at
/// `g1 = (λ0 + λ1 α)/√N`, each covering half of the step. The target is the
/// piecewise-constant square-pulse Hamiltonian with the same alternation.
pub fn pulsed_schedule_with(
    space: HilbertSpace,
    params: &ModelParams,
    t: f64,
    n: usize,
    options: &ScheduleOptions,
) -> Result<TrotterSchedule> {
    check_time(t, n)?;
    let pulse = params
        .pulse
        .clone()
        .ok_or_else(|| Error::InvalidParams("the pulsed schedule needs pulse parameters".into()))?;
    if params.bias != 0.0 {
        return Err(Error::Unsupported(
            "bias and pulsed coupling cannot be combined".into(),
        ));
    }
    let (p, frame) = framed(params)?;
    let sqrt_n = (p.n_qubits as f64).sqrt();
    let g0 = pulse.lambda0 / sqrt_n;
    let g1 = pulse.peak_coupling() / sqrt_n;
    let half = t / (2 * n) as f64;
    let mut step = Vec::new();
    push_dicke_pair(&mut step, &frame, g0, half, options);
    push_dicke_pair(&mut step, &frame, g1, half, options);
    let (segments, per) = repeat_step(step, n);
    let target = vec![
        TargetPiece {
            hamiltonian: dicke_with_coupling(space, &p, pulse.lambda0)?,
            duration: half,
        },
        TargetPiece {
            hamiltonian: dicke_with_coupling(space, &p, pulse.peak_coupling())?,
            duration: half,
        },
    ];
    Ok(TrotterSchedule {
        space,
        variant: Variant::Pulsed,
        axis_coupling: g0,
        params: p,
        segments,
        segments_per_step: per,
        n_steps: n,
        simulated_time: t,
        target,
    })
}

/// Build the schedule of the given variant.
pub fn build_schedule(
    variant: Variant,
    space: HilbertSpace,
    params: &ModelParams,
    t: f64,
    n: usize,
    options: &ScheduleOptions,
) -> Result<TrotterSchedule> {
    match variant {
        Variant::Dicke => dicke_schedule_with(space, params, t, n, options),
        Variant::Biased => biased_schedule_with(space, params, t, n, options),
        Variant::Pulsed => pulsed_schedule_with(space, params, t, n, options),
    }
}

/// States after every Trotter step of a noiseless run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Simulated time of each record, starting at 0.
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }
}

/// Apply every segment's exact propagator in order, recording the state
/// after each Trotter step.
pub fn execute_unitary(schedule: &TrotterSchedule, initial: &StateVector) -> Result<Trajectory> {
    if initial.space() != schedule.space {
        return Err(Error::DimensionMismatch {
            expected: schedule.space.dim(),
            found: initial.space().dim(),
        });
    }
    if (initial.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!(
            "initial state norm {} is not 1",
            initial.norm()
        )));
    }
    let unitaries = schedule.step_unitaries()?;
    let mut times = vec![0.0];
    let mut states = vec![initial.clone()];
    let mut psi = initial.clone();
    for k in 0..schedule.n_steps {
        for u in &unitaries {
            psi = u.apply(&psi)?;
        }
        times.push((k + 1) as f64 * schedule.step_time());
        states.push(psi.clone());
    }
    Ok(Trajectory { times, states })
}

/// Exact target evolution recorded on the same stroboscopic grid.
pub fn execute_target(schedule: &TrotterSchedule, initial: &StateVector) -> Result<Trajectory> {
    let step = schedule.target_step_unitary()?;
    let mut times = vec![0.0];
    let mut states = vec![initial.clone()];
    let mut psi = initial.clone();
    for k in 0..schedule.n_steps {
        psi = step.apply(&psi)?;
        times.push((k + 1) as f64 * schedule.step_time());
        states.push(psi.clone());
    }
    Ok(Trajectory { times, states })
}
