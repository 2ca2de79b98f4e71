//! Invariant suite behind `daqs verify`.
//!
//! Each check reports its measured value against a threshold. Hamiltonian
//! builders are injectable so that a deliberately broken builder can be
//! shown to trip the suite.

use std::fmt;

use crate::error::Result;
use crate::error_bounds::{
    closed_form_error, dicke_split, error_report, leading_error_operator, leading_error_sum,
    populated_level, restricted_boson_norms, SplitFrequencies, BOUNDARY_LEVELS,
};
use crate::hamiltonians::{
    self, collective_rotation, dicke, excitation_number, fermi_bose::fermi_bose_oracle, frame_map,
    Axis, ModelParams,
};
use crate::hilbert::{
    boson_op, collective_qubit_op, commutator, evolve_unitary, qubit_op, BosonOpKind,
    DensityMatrix, HilbertSpace, Operator, QubitOpKind, StateVector,
};
use crate::lindblad::{integrate_segment, rhs, run_schedule, IntegratorConfig, NoiseParams};
use crate::observables::{fidelity, photon_number, survival_probability};
use crate::trotter::{dicke_schedule, execute_unitary};

pub type SegmentBuilder = fn(HilbertSpace, &[f64], f64, f64) -> Result<Operator>;

/// Builders under test.
#[derive(Clone, Copy)]
pub struct Builders {
    pub tavis_cummings: SegmentBuilder,
    pub anti_tavis_cummings: SegmentBuilder,
}

impl Default for Builders {
    fn default() -> Self {
        Self {
            tavis_cummings: hamiltonians::tavis_cummings,
            anti_tavis_cummings: hamiltonians::anti_tavis_cummings,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub comparison: Comparison,
}

impl Check {
    fn at_most(
        module: &'static str,
        name: impl Into<String>,
        measured: f64,
        threshold: f64,
    ) -> Self {
        Self {
            module,
            name: name.into(),
            measured,
            threshold,
            comparison: Comparison::AtMost,
        }
    }

    fn at_least(
        module: &'static str,
        name: impl Into<String>,
        measured: f64,
        threshold: f64,
    ) -> Self {
        Self {
            module,
            name: name.into(),
            measured,
            threshold,
            comparison: Comparison::AtLeast,
        }
    }

    pub fn passed(&self) -> bool {
        match self.comparison {
            Comparison::AtMost => self.measured <= self.threshold,
            Comparison::AtLeast => self.measured >= self.threshold,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        write!(
            f,
            "[{}] {:<13} {:<55} measured={:.3e} {op} {:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.module,
            self.name,
            self.measured,
            self.threshold
        )
    }
}

pub const MODULES: [&str; 6] = [
    "hilbert",
    "hamiltonians",
    "trotter",
    "lindblad",
    "error_bounds",
    "observables",
];

fn sp(n: usize, m: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(n, m)
}

fn deep_strong(n: usize) -> ModelParams {
    ModelParams::dicke(n, 0.05, 1.0, 1.5 * (n as f64).sqrt())
}

fn masked_diff(a: &Operator, b: &Operator) -> Result<f64> {
    let keep = a.space().fock_cutoff().saturating_sub(BOUNDARY_LEVELS);
    a.restrict_fock(keep).max_abs_diff(&b.restrict_fock(keep))
}

fn hilbert_checks() -> Result<Vec<Check>> {
    let s = sp(2, 4)?;
    let mut worst: f64 = 0.0;
    for kind in [
        QubitOpKind::X,
        QubitOpKind::Y,
        QubitOpKind::Z,
        QubitOpKind::Plus,
    ] {
        for b in [BosonOpKind::A, BosonOpKind::Adag, BosonOpKind::N] {
            let c = commutator(&qubit_op(s, 1, kind)?, &boson_op(s, b))?;
            worst = worst.max(c.max_abs());
        }
    }
    let h = dicke(s, &deep_strong(2))?;
    let lhs = &evolve_unitary(&h, 0.4)? * &evolve_unitary(&h, 0.9)?;
    let group = lhs.max_abs_diff(&evolve_unitary(&h, 1.3)?)?;
    let big = sp(3, 7)?;
    let round_trip = (0..big.dim())
        .filter(|&k| big.compose(big.decompose(k)) != k)
        .count() as f64;
    let herm = h.hermitian_deviation() / h.max_abs();
    Ok(vec![
        Check::at_most("hilbert", "qubit and boson operators commute", worst, 1e-12),
        Check::at_most("hilbert", "propagator group law", group, 1e-10),
        Check::at_most("hilbert", "index round-trip failures", round_trip, 0.0),
        Check::at_most("hilbert", "relative Hermiticity of builders", herm, 1e-12),
    ])
}

fn hamiltonian_checks(b: &Builders) -> Result<Vec<Check>> {
    let mut conj: f64 = 0.0;
    let mut recon: f64 = 0.0;
    let mut conserve: f64 = 0.0;
    for n in 1..=3 {
        for m in [2, 4] {
            let s = sp(n, m)?;
            let det: Vec<f64> = (0..n).map(|i| 0.3 + 0.1 * i as f64).collect();
            let (mode, g) = (0.7, 0.45);
            // exp(iπ/2 Σσx) TC exp(-iπ/2 Σσx) is the anti-Tavis-Cummings block
            let r = collective_rotation(s, Axis::X, -std::f64::consts::PI);
            let rotated = (b.tavis_cummings)(s, &det, mode, g)?.conjugate_by(&r)?;
            conj = conj.max(rotated.max_abs_diff(&(b.anti_tavis_cummings)(s, &det, mode, g)?)?);
            let p = frame_map(&deep_strong(n))?;
            let f = p.frame.clone().expect("framed");
            let sum = (b.tavis_cummings)(s, &f.qubit_detunings, f.mode_detuning, f.coupling)?
                .checked_add(&(b.anti_tavis_cummings)(
                    s,
                    &f.alt_detunings,
                    f.mode_detuning,
                    f.coupling,
                )?)?;
            recon = recon.max(sum.max_abs_diff(&dicke(s, &p)?)?);
            let tc = (b.tavis_cummings)(s, &det, mode, g)?;
            conserve = conserve.max(masked_diff(
                &commutator(&tc, &excitation_number(s))?,
                &Operator::zeros(s),
            )?);
        }
    }
    let mut fb_spec: f64 = 0.0;
    let mut fb_block: f64 = 0.0;
    for levels in [vec![0.45], vec![0.45, 0.55]] {
        let o = fermi_bose_oracle(&levels, 1.0, 0.3, 3)?;
        fb_spec = fb_spec.max(o.report.spectrum_deviation);
        fb_block = fb_block.max(o.report.off_block_coupling);
    }
    Ok(vec![
        Check::at_most(
            "hamiltonians",
            "pi-rotation maps TC onto anti-TC",
            conj,
            1e-10,
        ),
        Check::at_most(
            "hamiltonians",
            "TC + anti-TC reconstructs Dicke",
            recon,
            1e-10,
        ),
        Check::at_most(
            "hamiltonians",
            "TC conserves excitations (masked)",
            conserve,
            1e-12,
        ),
        Check::at_most(
            "hamiltonians",
            "Fermi-Bose restricted spectrum",
            fb_spec,
            1e-10,
        ),
        Check::at_most(
            "hamiltonians",
            "Fermi-Bose single-occupation decoupling",
            fb_block,
            0.0,
        ),
    ])
}

fn trotter_checks() -> Result<Vec<Check>> {
    let s = sp(2, 6)?;
    let sch = dicke_schedule(s, &deep_strong(2), 0.5, 5)?;
    let unitarity = sch.schedule_unitary()?.unitarity_deviation();
    let free = dicke_schedule(s, &ModelParams::dicke(2, 0.3, 1.0, 0.0), 2.0, 3)?;
    let exact = crate::error_bounds::phase_aligned_distance(
        &free.schedule_unitary()?,
        &free.target_unitary()?,
    )?;
    let counts: Vec<usize> = (1..=3)
        .map(|n| {
            dicke_schedule(sp(n, 1)?, &deep_strong(n), 1.0, 2).map(|x| x.gate_count_per_step())
        })
        .collect::<Result<_>>()?;
    let spread = (counts.iter().max().unwrap_or(&0) - counts.iter().min().unwrap_or(&0)) as f64;
    let psi = StateVector::ground(s);
    let norm = execute_unitary(&sch, &psi)?
        .states
        .iter()
        .map(|x| (x.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        Check::at_most("trotter", "schedule unitarity", unitarity, 1e-10),
        Check::at_most("trotter", "uncoupled schedule is exact", exact, 1e-10),
        Check::at_most("trotter", "gates per step independent of N", spread, 0.0),
        Check::at_most("trotter", "norm preserved along execution", norm, 1e-10),
    ])
}

fn lindblad_checks() -> Result<Vec<Check>> {
    let cfg = IntegratorConfig {
        dt: Some(0.01),
        ..Default::default()
    };
    let s1 = sp(1, 3)?;
    let kappa = 0.5;
    let rho = integrate_segment(
        &Operator::zeros(s1),
        &DensityMatrix::basis(s1, s1.ground_index(1))?,
        1.0 / kappa,
        &NoiseParams::new(kappa, 0.0, 0.0),
        &cfg,
    )?;
    let cavity = (photon_number(&rho) - (-1.0f64).exp()).abs();
    let q = sp(1, 0)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::new(q, nalgebra::DVector::from_vec(vec![h.into(), h.into()]))?;
    let gd = 0.3;
    let rho = integrate_segment(
        &Operator::zeros(q),
        &plus.to_density(),
        1.5,
        &NoiseParams::new(0.0, 0.0, gd),
        &cfg,
    )?;
    let x = qubit_op(q, 0, QubitOpKind::X)?;
    let dephase = (rho.expectation(&x)?.re - (-2.0 * gd * 1.5f64).exp()).abs();

    let s = sp(2, 8)?;
    let h = dicke(s, &deep_strong(2))?;
    let noise = NoiseParams::new(0.01, 0.005, 0.005);
    let mixed = StateVector::ground(s).to_density();
    let trace_rhs = rhs(&h, &mixed, &noise)?.trace().norm();

    let sch = dicke_schedule(s, &deep_strong(2), 1.0 / 1.5, 6)?;
    let psi = StateVector::ground(s);
    let clean = run_schedule(&sch, &psi, &NoiseParams::default(), &Default::default())?;
    let pure = execute_unitary(&sch, &psi)?;
    let target = crate::trotter::execute_target(&sch, &psi)?;
    let want = pure.final_state().inner(target.final_state())?.norm_sqr();
    let noiseless = (clean.final_fidelity() - want).abs();
    let noisy = run_schedule(&sch, &psi, &noise, &Default::default())?;
    let min_eig = noisy
        .min_eigenvalues
        .iter()
        .map(|x| x.1)
        .fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::at_most("lindblad", "damped cavity <n>(1/kappa) = 1/e", cavity, 1e-6),
        Check::at_most(
            "lindblad",
            "dephasing <sx>(t) = exp(-2 gd t)",
            dephase,
            1e-6,
        ),
        Check::at_most("lindblad", "trace of rhs", trace_rhs, 1e-12),
        Check::at_most(
            "lindblad",
            "noiseless run equals unitary execution",
            noiseless,
            1e-7,
        ),
        Check::at_most(
            "lindblad",
            "trace drift over a noisy run",
            noisy.max_trace_error(),
            1e-8,
        ),
        Check::at_most(
            "lindblad",
            "Hermiticity over a noisy run",
            noisy.max_hermitian_deviation,
            1e-10,
        ),
        Check::at_least("lindblad", "positivity at sampled points", min_eig, -1e-8),
    ])
}

fn error_bound_checks() -> Result<Vec<Check>> {
    let mut closed: f64 = 0.0;
    for n in [2, 3] {
        let s = sp(n, 5)?;
        let p = deep_strong(n);
        let (h1, h2) = dicke_split(s, &p)?;
        closed = closed.max(masked_diff(
            &leading_error_operator(&h1, &h2, 0.8, 4)?,
            &closed_form_error(&p, 0.8, 4, s)?,
        )?);
    }
    let mut margin = f64::INFINITY;
    for (lam, m) in [(1.5, 15), (0.5, 10)] {
        let s = sp(2, m)?;
        let p = ModelParams::dicke(2, 0.05, 1.0, lam * 2f64.sqrt());
        let t = 1.0 / SplitFrequencies::from_params(&p)?.max_frequency();
        let r = error_report(&dicke_schedule(s, &p, t, 11)?, &StateVector::ground(s))?;
        margin = margin.min(r.cauchy_schwarz_bound - r.leading_term_norm);
    }
    let s = sp(2, 4)?;
    let p = deep_strong(2);
    let norm = |t: f64, n: usize| {
        closed_form_error(&p, t, n, s).map(|e| crate::hilbert::spectral_norm(&e))
    };
    let base = norm(1.0, 1)?;
    let mut scaling: f64 = 0.0;
    for k in [2usize, 3, 4] {
        scaling = scaling.max((norm(1.0, k)? * k as f64 - base).abs() / base);
        scaling = scaling.max((norm(k as f64, 1)? / (k * k) as f64 - base).abs() / base);
    }
    let mut biased = deep_strong(2).with_bias(0.2);
    biased.frame = Some(hamiltonians::FrameParams {
        qubit_detunings: vec![0.3; 2],
        alt_detunings: vec![-0.1; 2],
        mode_detuning: 0.5,
        coupling: 0.4,
    });
    biased.qubit_freqs = vec![0.4; 2];
    biased.coupling = 0.4 * 2f64.sqrt();
    let (h1, h2) = dicke_split(s, &biased)?;
    let h0 = &collective_qubit_op(s, QubitOpKind::X) * 0.2;
    let brute = leading_error_sum(&[h0, h1, h2], 1.0, 3)?;
    let split = masked_diff(
        &brute,
        &crate::error_bounds::biased_error_operator(&biased, 1.0, 3, s)?,
    )?;
    let (na, _) =
        restricted_boson_norms(10, populated_level([&StateVector::ground(sp(1, 10)?)], 10));
    Ok(vec![
        Check::at_most(
            "error_bounds",
            "closed form equals [H1,H2]t^2/2n (masked)",
            closed,
            1e-10,
        ),
        Check::at_least(
            "error_bounds",
            "bound dominance margin (deep-strong and ultrastrong)",
            margin,
            0.0,
        ),
        Check::at_most(
            "error_bounds",
            "linear in 1/n, quadratic in t",
            scaling,
            1e-12,
        ),
        Check::at_most("error_bounds", "biased three-term split", split, 1e-10),
        Check::at_most("error_bounds", "vacuum restricted norm of a", na, 0.0),
    ])
}

fn observable_checks() -> Result<Vec<Check>> {
    let s = sp(2, 3)?;
    let psi = StateVector::ground(s);
    let h = dicke(s, &deep_strong(2))?;
    let a = psi.to_density().conjugate_by(&evolve_unitary(&h, 0.7)?)?;
    let b = DensityMatrix::maximally_mixed(s);
    let mixed = DensityMatrix::new(
        s,
        (a.matrix() + b.matrix()) * num_complex::Complex64::new(0.5, 0.0),
    )?;
    let sym = (fidelity(&a, &mixed)? - fidelity(&mixed, &a)?).abs();
    let n = photon_number(&mixed);
    let range = if (0.0..=s.fock_cutoff() as f64).contains(&n) {
        0.0
    } else {
        1.0
    };
    let purity = (survival_probability(&mixed, &mixed)? - mixed.purity()).abs();
    Ok(vec![
        Check::at_most("observables", "fidelity symmetry", sym, 1e-12),
        Check::at_most(
            "observables",
            "photon number outside [0, n_max]",
            range,
            0.0,
        ),
        Check::at_most("observables", "self-survival equals purity", purity, 1e-12),
    ])
}

/// Run the checks of every module matching `filter` (all when `None`).
pub fn run_checks(filter: Option<&str>, builders: &Builders) -> Result<Vec<Check>> {
    if let Some(f) = filter {
        if !MODULES.contains(&f) {
            return Err(crate::error::Error::Config(format!(
                "unknown module {f:?}; known modules: {}",
                MODULES.join(", ")
            )));
        }
    }
    let wanted = |m: &str| filter.is_none_or(|f| f == m);
    let mut out = Vec::new();
    if wanted("hilbert") {
        out.extend(hilbert_checks()?);
    }
    if wanted("hamiltonians") {
        out.extend(hamiltonian_checks(builders)?);
    }
    if wanted("trotter") {
        out.extend(trotter_checks()?);
    }
    if wanted("lindblad") {
        out.extend(lindblad_checks()?);
    }
    if wanted("error_bounds") {
        out.extend(error_bound_checks()?);
    }
    if wanted("observables") {
        out.extend(observable_checks()?);
    }
    Ok(out)
}
