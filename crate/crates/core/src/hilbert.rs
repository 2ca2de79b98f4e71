//! Truncated qubit ⊗ boson Hilbert spaces and the dense operator algebra used
//! by every other module.
//!
//! Basis ordering is fixed: qubit factors first (qubit 0 is the slowest
//! index), the Fock factor last. Each qubit uses the basis `{|e>, |g>}`, so
//! `σz = diag(+1, -1)`. A basis index therefore decomposes as
//! `index = qubit_word * (n_max + 1) + fock_level`, where bit `N - 1 - i` of
//! `qubit_word` is the digit of qubit `i` (0 = excited, 1 = ground).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default limit on the Hilbert-space dimension of dense simulations.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Relative tolerance used when a builder asserts Hermiticity.
pub const HERMITIAN_RTOL: f64 = 1e-12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    n_qubits: usize,
    fock_cutoff: usize,
    dim: usize,
}

impl fmt::Display for HilbertSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} qubit(s) x Fock[0..={}] (dim {})",
            self.n_qubits, self.fock_cutoff, self.dim
        )
    }
}

/// Decomposed basis label: qubit digits packed into a word plus a Fock level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    pub qubits: usize,
    pub fock: usize,
}

impl HilbertSpace {
    pub fn new(n_qubits: usize, fock_cutoff: usize) -> Result<Self> {
        Self::with_cap(n_qubits, fock_cutoff, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(n_qubits: usize, fock_cutoff: usize, cap: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidSpace("at least one qubit is required".into()));
        }
        if n_qubits >= usize::BITS as usize - 1 {
            return Err(Error::InvalidSpace(format!(
                "{n_qubits} qubits cannot be indexed"
            )));
        }
        let dim = (1usize << n_qubits)
            .checked_mul(fock_cutoff + 1)
            .ok_or_else(|| Error::InvalidSpace("dimension overflows usize".into()))?;
        if dim > cap {
            let bytes = (dim as u128) * (dim as u128) * std::mem::size_of::<C64>() as u128;
            return Err(Error::DimensionCap { dim, cap, bytes });
        }
        Ok(Self {
            n_qubits,
            fock_cutoff,
            dim,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn fock_levels(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn qubit_dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn compose(&self, label: BasisLabel) -> usize {
        debug_assert!(label.qubits < self.qubit_dim() && label.fock <= self.fock_cutoff);
        label.qubits * self.fock_levels() + label.fock
    }

    pub fn decompose(&self, index: usize) -> BasisLabel {
        debug_assert!(index < self.dim);
        BasisLabel {
            qubits: index / self.fock_levels(),
            fock: index % self.fock_levels(),
        }
    }

    /// Digit of qubit `i` in basis state `index` (0 = |e>, 1 = |g>).
    pub fn qubit_digit(&self, index: usize, i: usize) -> usize {
        (self.decompose(index).qubits >> (self.n_qubits - 1 - i)) & 1
    }

    pub fn fock_level(&self, index: usize) -> usize {
        index % self.fock_levels()
    }

    /// Basis index of all qubits in |g> with the boson in Fock level `k`.
    pub fn ground_index(&self, k: usize) -> usize {
        self.compose(BasisLabel {
            qubits: self.qubit_dim() - 1,
            fock: k,
        })
    }

    pub(crate) fn check_same(&self, other: &HilbertSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                left: *self,
                right: *other,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QubitOpKind {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

impl QubitOpKind {
    fn matrix(self) -> DMatrix<C64> {
        let m = match self {
            QubitOpKind::X => [ZERO, ONE, ONE, ZERO],
            QubitOpKind::Y => [ZERO, -I, I, ZERO],
            QubitOpKind::Z => [ONE, ZERO, ZERO, -ONE],
            // σ+ = |e><g|, σ- = |g><e|
            QubitOpKind::Plus => [ZERO, ONE, ZERO, ZERO],
            QubitOpKind::Minus => [ZERO, ZERO, ONE, ZERO],
        };
        DMatrix::from_row_slice(2, 2, &m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BosonOpKind {
    A,
    Adag,
    N,
}

/// A dense operator tagged with the space it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: HilbertSpace) -> Self {
        Self {
            space,
            matrix: DMatrix::zeros(space.dim(), space.dim()),
        }
    }

    pub fn identity(space: HilbertSpace) -> Self {
        Self {
            space,
            matrix: DMatrix::identity(space.dim(), space.dim()),
        }
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, factor: impl Into<C64>) -> Self {
        Self {
            space: self.space,
            matrix: &self.matrix * factor.into(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `max |M - M^dag|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut dev: f64 = 0.0;
        for c in 0..n {
            for r in c..n {
                dev = dev.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation() <= HERMITIAN_RTOL * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Verify the Hermiticity claim of a builder and return the operator unchanged.
    pub fn assert_hermitian(self) -> Result<Self> {
        let deviation = self.hermitian_deviation();
        if deviation <= HERMITIAN_RTOL * self.max_abs().max(f64::MIN_POSITIVE) {
            Ok(self)
        } else {
            Err(Error::NotHermitian { deviation })
        }
    }

    /// `max |U^dag U - I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.matrix.adjoint() * &self.matrix;
        max_abs_diff_identity(&p)
    }

    pub fn checked_add(&self, other: &Operator) -> Result<Operator> {
        self.space.check_same(&other.space)?;
        Ok(Self {
            space: self.space,
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn checked_sub(&self, other: &Operator) -> Result<Operator> {
        self.space.check_same(&other.space)?;
        Ok(Self {
            space: self.space,
            matrix: &self.matrix - &other.matrix,
        })
    }

    pub fn checked_mul(&self, other: &Operator) -> Result<Operator> {
        self.space.check_same(&other.space)?;
        Ok(Self {
            space: self.space,
            matrix: &self.matrix * &other.matrix,
        })
    }

    /// `max |A - B|` over matrix elements.
    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        self.space.check_same(&other.space)?;
        Ok(self
            .matrix
            .iter()
            .zip(other.matrix.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }

    /// Conjugation `U · self · U^dag`.
    pub fn conjugate_by(&self, unitary: &Operator) -> Result<Operator> {
        self.space.check_same(&unitary.space)?;
        Ok(Self {
            space: self.space,
            matrix: &unitary.matrix * &self.matrix * unitary.matrix.adjoint(),
        })
    }

    /// Keep only matrix elements whose row and column Fock levels are both
    /// `<= max_level`; everything else is zeroed (the projection `P M P`).
    pub fn restrict_fock(&self, max_level: usize) -> Operator {
        let space = self.space;
        let mut m = self.matrix.clone();
        for c in 0..space.dim() {
            for r in 0..space.dim() {
                if space.fock_level(r) > max_level || space.fock_level(c) > max_level {
                    m[(r, c)] = ZERO;
                }
            }
        }
        Operator { space, matrix: m }
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.space.check_same(&state.space)?;
        Ok(StateVector {
            space: self.space,
            amplitudes: &self.matrix * &state.amplitudes,
        })
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

fn max_abs_diff_identity(m: &DMatrix<C64>) -> f64 {
    let mut dev: f64 = 0.0;
    for ((r, c), z) in m
        .iter()
        .enumerate()
        .map(|(k, z)| ((k % m.nrows(), k / m.nrows()), z))
    {
        let target = if r == c { ONE } else { ZERO };
        dev = dev.max((z - target).norm());
    }
    dev
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&Operator> for &Operator {
            type Output = Operator;

            /// Panics when the operands live on different spaces; use the
            /// `checked_*` methods for a fallible variant.
            fn $method(self, rhs: &Operator) -> Operator {
                self.$checked(rhs).expect("operator space mismatch")
            }
        }

        impl $trait<Operator> for Operator {
            type Output = Operator;

            fn $method(self, rhs: Operator) -> Operator {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl Neg for &Operator {
    type Output = Operator;

    fn neg(self) -> Operator {
        Operator {
            space: self.space,
            matrix: -&self.matrix,
        }
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;

    fn mul(self, rhs: f64) -> Operator {
        self.scale(rhs)
    }
}

impl Mul<f64> for Operator {
    type Output = Operator;

    fn mul(mut self, rhs: f64) -> Operator {
        self.matrix *= C64::new(rhs, 0.0);
        self
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;

    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

/// Sum of operators on a common space; `None` for an empty iterator.
pub fn sum_ops<'a>(ops: impl IntoIterator<Item = &'a Operator>) -> Option<Operator> {
    let mut it = ops.into_iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, op| &acc + op))
}

pub fn qubit_op(space: HilbertSpace, i: usize, kind: QubitOpKind) -> Result<Operator> {
    let n = space.n_qubits();
    if i >= n {
        return Err(Error::QubitIndex {
            index: i,
            n_qubits: n,
        });
    }
    let left: DMatrix<C64> = DMatrix::identity(1 << i, 1 << i);
    let right_dim = (1 << (n - 1 - i)) * space.fock_levels();
    let right: DMatrix<C64> = DMatrix::identity(right_dim, right_dim);
    let matrix = left.kronecker(&kind.matrix()).kronecker(&right);
    Ok(Operator { space, matrix })
}

/// Collective operator `Σ_i σ_kind^i`.
pub fn collective_qubit_op(space: HilbertSpace, kind: QubitOpKind) -> Operator {
    let mut acc = Operator::zeros(space);
    for i in 0..space.n_qubits() {
        acc = &acc + &qubit_op(space, i, kind).expect("index in range");
    }
    acc
}

pub fn boson_op(space: HilbertSpace, kind: BosonOpKind) -> Operator {
    let levels = space.fock_levels();
    let mut local = DMatrix::<C64>::zeros(levels, levels);
    for k in 1..levels {
        let amp = C64::new((k as f64).sqrt(), 0.0);
        match kind {
            BosonOpKind::A => local[(k - 1, k)] = amp,
            BosonOpKind::Adag => local[(k, k - 1)] = amp,
            BosonOpKind::N => local[(k, k)] = C64::new(k as f64, 0.0),
        }
    }
    let q = space.qubit_dim();
    let matrix = DMatrix::<C64>::identity(q, q).kronecker(&local);
    Operator { space, matrix }
}

pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.space.check_same(&b.space)?;
    Ok(Operator {
        space: a.space,
        matrix: &a.matrix * &b.matrix - &b.matrix * &a.matrix,
    })
}

pub fn anticommutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.space.check_same(&b.space)?;
    Ok(Operator {
        space: a.space,
        matrix: &a.matrix * &b.matrix + &b.matrix * &a.matrix,
    })
}

/// Largest singular value.
pub fn spectral_norm(a: &Operator) -> f64 {
    if a.matrix.iter().all(|z| *z == ZERO) {
        return 0.0;
    }
    a.matrix.clone().singular_values().max()
}

/// Eigendecomposition of a Hermitian operator, reusable for propagators at
/// many times.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    space: HilbertSpace,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(h: &Operator) -> Result<Self> {
        let deviation = h.hermitian_deviation();
        if deviation > HERMITIAN_RTOL * h.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        let sym = (&h.matrix + h.matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(sym);
        Ok(Self {
            space: h.space,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> Operator {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            let phase = C64::from_polar(1.0, -e * t);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        Operator {
            space: self.space,
            matrix: scaled * v.adjoint(),
        }
    }

    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

/// `U = exp(-i H t)` via Hermitian eigendecomposition.
pub fn evolve_unitary(h: &Operator, t: f64) -> Result<Operator> {
    if t == 0.0 {
        return Ok(Operator::identity(h.space));
    }
    Ok(HermitianEigen::new(h)?.propagator(t))
}

/// Sorted eigenvalues of a Hermitian operator.
pub fn spectrum(h: &Operator) -> Result<Vec<f64>> {
    Ok(HermitianEigen::new(h)?.sorted_eigenvalues())
}

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: HilbertSpace,
    amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn new(space: HilbertSpace, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { space, amplitudes })
    }

    pub fn basis(space: HilbertSpace, index: usize) -> Result<Self> {
        if index >= space.dim() {
            return Err(Error::InvalidState(format!(
                "basis index {index} >= dim {}",
                space.dim()
            )));
        }
        let mut amplitudes = DVector::zeros(space.dim());
        amplitudes[index] = ONE;
        Ok(Self { space, amplitudes })
    }

    /// All qubits in |g>, boson in vacuum: the free-Hamiltonian ground state.
    pub fn ground(space: HilbertSpace) -> Self {
        Self::basis(space, space.ground_index(0)).expect("ground index in range")
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidState(
                "cannot normalize a zero or non-finite state".into(),
            ));
        }
        self.amplitudes /= C64::new(n, 0.0);
        Ok(self)
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.space.check_same(&other.space)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn to_density(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix {
            space: self.space,
            matrix: m,
        }
    }

    /// `<ψ| A |ψ>`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        self.space.check_same(&op.space)?;
        Ok(self.amplitudes.dotc(&(&op.matrix * &self.amplitudes)))
    }
}

/// Trace-one, Hermitian, positive system state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

/// Allowed `|Tr ρ - 1|`.
pub const TRACE_TOL: f64 = 1e-8;
/// Allowed `max |ρ - ρ^dag|`.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Allowed negative eigenvalue.
pub const POSITIVITY_TOL: f64 = 1e-8;

impl DensityMatrix {
    /// Wrap a matrix after checking the trace and Hermiticity invariants.
    pub fn new(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(space, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn new_unchecked(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn basis(space: HilbertSpace, index: usize) -> Result<Self> {
        Ok(StateVector::basis(space, index)?.to_density())
    }

    pub fn maximally_mixed(space: HilbertSpace) -> Self {
        let d = space.dim();
        Self {
            space,
            matrix: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
        }
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn trace_error(&self) -> f64 {
        (self.trace() - ONE).norm()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        Operator {
            space: self.space,
            matrix: self.matrix.clone(),
        }
        .hermitian_deviation()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(sym).eigenvalues.min()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Check the trace and Hermiticity invariants (positivity is on demand).
    pub fn validate(&self) -> Result<()> {
        if self
            .matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        let te = self.trace_error();
        if te > TRACE_TOL {
            return Err(Error::InvalidState(format!("|Tr ρ - 1| = {te:e}")));
        }
        let he = self.hermitian_deviation();
        if he > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("max |ρ - ρ^dag| = {he:e}")));
        }
        Ok(())
    }

    pub fn validate_positive(&self) -> Result<()> {
        let m = self.min_eigenvalue();
        if m < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {m:e}")));
        }
        Ok(())
    }

    /// `U ρ U^dag`.
    pub fn conjugate_by(&self, unitary: &Operator) -> Result<DensityMatrix> {
        self.space.check_same(&unitary.space)?;
        Ok(Self {
            space: self.space,
            matrix: &unitary.matrix * &self.matrix * unitary.matrix.adjoint(),
        })
    }

    /// `Tr(A ρ)`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        self.space.check_same(&op.space)?;
        // Tr(Aρ) = Σ_ij A_ij ρ_ji
        let mut acc = ZERO;
        let (a, r) = (&op.matrix, &self.matrix);
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                acc += a[(i, j)] * r[(j, i)];
            }
        }
        Ok(acc)
    }

    pub(crate) fn hermitize(&mut self) {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        self.matrix = h;
    }

    pub(crate) fn rescale_trace(&mut self) {
        let tr = self.trace().re;
        self.matrix /= C64::new(tr, 0.0);
    }

    pub(crate) fn check_space(&self, other: &HilbertSpace) -> Result<()> {
        self.space.check_same(other)
    }
}

impl From<&StateVector> for DensityMatrix {
    fn from(psi: &StateVector) -> Self {
        psi.to_density()
    }
}

pub(crate) fn check_spaces(a: &HilbertSpace, b: &HilbertSpace) -> Result<()> {
    a.check_same(b)
}
