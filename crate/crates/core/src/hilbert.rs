//! Complex linear algebra over truncated tensor-product Hilbert spaces.
//!
//! The composite space used throughout the crate is
//! `control ⊗ atom ⊗ field₀ ⊗ field₁` with dimensions `2 × 2 × (n_max+1) ×
//! (n_max+1)`, row-major (the last factor varies fastest). The atom basis is
//! ordered `{|e⟩, |g⟩}` so that `σ_z = diag(+1, −1)`; the control basis is
//! `{|0⟩_c, |1⟩_c}` and each field uses the Fock basis `{|0⟩, …, |n_max⟩}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Default bound on the probability weight discarded when a coherent state is
/// truncated to a finite Fock space.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;

/// Tolerance used when checking that a state is normalized.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("Fock state |{n}⟩ lies outside the truncated space (n_max = {n_max})")]
    Truncation { n: usize, n_max: usize },

    #[error(
        "coherent state with |alpha|^2 = {mean} discards tail weight {tail:e} > {tolerance:e} \
         at n_max = {n_max}; n_max >= {required} is needed"
    )]
    TailWeight {
        mean: f64,
        n_max: usize,
        tail: f64,
        tolerance: f64,
        required: usize,
    },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("operator of dimension {op} does not fit subsystem {subsystem} of dimension {expected}")]
    DimensionMismatch {
        subsystem: usize,
        op: usize,
        expected: usize,
    },

    #[error("subsystem index {index} out of range for {count} subsystems")]
    NoSuchSubsystem { index: usize, count: usize },

    #[error("invalid space shape: {0}")]
    InvalidShape(String),

    #[error("non-finite amplitude at index {0}")]
    NonFinite(usize),

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("operator is not Hermitian (max |A - A†| = {0:e})")]
    NotHermitian(f64),

    #[error("operator is not unitary (max |A†A - I| = {0:e})")]
    NotUnitary(f64),
}

pub type HilbertResult<T> = Result<T, HilbertError>;

/// Named factors of the composite space, in storage order.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum Subsystem {
    Control,
    Atom,
    Field0,
    Field1,
}

impl Subsystem {
    pub fn index(self) -> usize {
        match self {
            Self::Control => 0,
            Self::Atom => 1,
            Self::Field0 => 2,
            Self::Field1 => 3,
        }
    }
}

/// Ordered subsystem dimensions of a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceShape {
    dims: Vec<usize>,
}

impl SpaceShape {
    pub fn new(dims: Vec<usize>) -> HilbertResult<Self> {
        if dims.is_empty() {
            return Err(HilbertError::InvalidShape("no subsystems".into()));
        }
        if let Some(k) = dims.iter().position(|&d| d == 0) {
            return Err(HilbertError::InvalidShape(format!("subsystem {k} has dimension 0")));
        }
        Ok(Self { dims })
    }

    /// `control ⊗ atom ⊗ field₀ ⊗ field₁` truncated at `n_max` photons per field.
    pub fn composite(n_max: usize) -> HilbertResult<Self> {
        if n_max < 1 {
            return Err(HilbertError::InvalidShape("n_max must be at least 1".into()));
        }
        Self::new(vec![2, 2, n_max + 1, n_max + 1])
    }

    pub fn qubit() -> Self {
        Self { dims: vec![2] }
    }

    pub fn field(n_max: usize) -> Self {
        Self { dims: vec![n_max + 1] }
    }

    pub fn two_fields(n_max: usize) -> Self {
        Self { dims: vec![n_max + 1, n_max + 1] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Photon-number truncation when this is the composite four-factor shape.
    pub fn n_max(&self) -> Option<usize> {
        match self.dims.as_slice() {
            [2, 2, a, b] if a == b => Some(a - 1),
            _ => None,
        }
    }

    /// Flat index of a multi-index (last factor fastest).
    pub fn index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dims.len());
        multi
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| {
                debug_assert!(i < d);
                acc * d + i
            })
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        out
    }

    /// Product of the dimensions after subsystem `k`.
    pub fn stride(&self, k: usize) -> usize {
        self.dims[k + 1..].iter().product()
    }
}

/// A pure state: dense amplitude vector over a [`SpaceShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    shape: SpaceShape,
    amps: DVector<C64>,
}

/// A state on the four-factor composite space.
pub type CompositeState = StateVector;

impl StateVector {
    /// Wraps raw amplitudes. The vector is not renormalized.
    pub fn from_amplitudes(shape: SpaceShape, amps: DVector<C64>) -> HilbertResult<Self> {
        if amps.len() != shape.total_dim() {
            return Err(HilbertError::ShapeMismatch {
                left: shape.dims.clone(),
                right: vec![amps.len()],
            });
        }
        if let Some(i) = amps.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(HilbertError::NonFinite(i));
        }
        Ok(Self { shape, amps })
    }

    /// Wraps amplitudes and rescales them to unit norm.
    pub fn normalized_from(shape: SpaceShape, amps: DVector<C64>) -> HilbertResult<Self> {
        let s = Self::from_amplitudes(shape, amps)?;
        let norm = s.norm();
        if norm == 0.0 {
            return Err(HilbertError::NotNormalized(0.0));
        }
        Ok(s.scaled(C64::new(1.0 / norm, 0.0)))
    }

    pub fn basis(shape: SpaceShape, multi: &[usize]) -> HilbertResult<Self> {
        if multi.len() != shape.dims.len() || multi.iter().zip(&shape.dims).any(|(i, d)| i >= d) {
            return Err(HilbertError::ShapeMismatch {
                left: shape.dims.clone(),
                right: multi.to_vec(),
            });
        }
        let mut amps = DVector::zeros(shape.total_dim());
        amps[shape.index(multi)] = C64::new(1.0, 0.0);
        Ok(Self { shape, amps })
    }

    /// `a|0⟩ + b|1⟩` on a qubit, normalized.
    pub fn qubit(a: C64, b: C64) -> HilbertResult<Self> {
        Self::normalized_from(SpaceShape::qubit(), DVector::from_vec(vec![a, b]))
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amps
    }

    pub fn amplitude(&self, multi: &[usize]) -> C64 {
        self.amps[self.shape.index(multi)]
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            amps: &self.amps * factor,
        }
    }

    pub fn check_normalized(&self) -> HilbertResult<()> {
        let n = self.norm();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(HilbertError::NotNormalized(n));
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> HilbertResult<C64> {
        self.same_shape(other)?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, other: &Self, factor: C64) -> HilbertResult<Self> {
        self.same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            amps: &self.amps + &other.amps * factor,
        })
    }

    /// Expectation of an operator that is diagonal in the product basis,
    /// given as a function of the multi-index.
    pub fn diagonal_expectation(&self, value: impl Fn(&[usize]) -> f64) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let p = z.norm_sqr();
                if p == 0.0 {
                    0.0
                } else {
                    p * value(&self.shape.multi_index(i))
                }
            })
            .sum()
    }

    fn same_shape(&self, other: &Self) -> HilbertResult<()> {
        if self.shape != other.shape {
            return Err(HilbertError::ShapeMismatch {
                left: self.shape.dims.clone(),
                right: other.shape.dims.clone(),
            });
        }
        Ok(())
    }
}

/// Fock state `|n⟩` of a field truncated at `n_max`.
pub fn fock_state(n: usize, n_max: usize) -> HilbertResult<StateVector> {
    if n > n_max {
        return Err(HilbertError::Truncation { n, n_max });
    }
    StateVector::basis(SpaceShape::field(n_max), &[n])
}

/// Truncated, renormalized coherent state together with the probability weight
/// lost to truncation.
#[derive(Debug, Clone)]
pub struct CoherentState {
    pub state: StateVector,
    pub tail_weight: f64,
}

pub fn coherent_state(alpha: C64, n_max: usize) -> HilbertResult<CoherentState> {
    coherent_state_with_tolerance(alpha, n_max, DEFAULT_TAIL_TOLERANCE)
}

pub fn coherent_state_with_tolerance(
    alpha: C64,
    n_max: usize,
    tolerance: f64,
) -> HilbertResult<CoherentState> {
    let mean = alpha.norm_sqr();
    let tail = poisson_tail(mean, n_max);
    if tail > tolerance {
        let mut required = n_max + 1;
        while poisson_tail(mean, required) > tolerance {
            required += 1;
        }
        return Err(HilbertError::TailWeight {
            mean,
            n_max,
            tail,
            tolerance,
            required,
        });
    }
    // αⁿ/√(n!) by recurrence; the e^{−|α|²/2} prefactor is restored by the
    // renormalization below.
    let mut amps = DVector::zeros(n_max + 1);
    let mut term = C64::new(1.0, 0.0);
    amps[0] = term;
    for n in 1..=n_max {
        term = term * alpha / (n as f64).sqrt();
        amps[n] = term;
    }
    let state = StateVector::normalized_from(SpaceShape::field(n_max), amps)?;
    Ok(CoherentState {
        state,
        tail_weight: tail,
    })
}

/// `P(N > n_max)` for a Poisson distribution with the given mean.
fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    // Sum forward from n_max + 1 in log space until the terms vanish.
    let ln_mean = mean.ln();
    let mut ln_fact: f64 = (1..=n_max + 1).map(|k| (k as f64).ln()).sum();
    let mut n = n_max + 1;
    let mut total = 0.0;
    loop {
        let term = (n as f64 * ln_mean - mean - ln_fact).exp();
        total += term;
        if (n as f64) > mean && term < total * 1e-17 {
            break;
        }
        n += 1;
        ln_fact += (n as f64).ln();
        if n > n_max + 100_000 {
            break;
        }
    }
    total.min(1.0)
}

/// Kronecker product of the factors in order.
pub fn tensor(factors: &[&StateVector]) -> HilbertResult<StateVector> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| HilbertError::InvalidShape("empty tensor product".into()))?;
    let mut dims = first.shape.dims.clone();
    let mut amps = first.amps.clone();
    for f in rest {
        dims.extend_from_slice(&f.shape.dims);
        amps = amps.kronecker(&f.amps);
    }
    StateVector::from_amplitudes(SpaceShape::new(dims)?, amps)
}

/// Dense complex operator on a [`SpaceShape`].
///
/// The `hermitian` and `unitary` flags are only ever set after the
/// corresponding property has been checked numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    shape: SpaceShape,
    matrix: DMatrix<C64>,
    hermitian: bool,
    unitary: bool,
}

impl OperatorMatrix {
    pub fn new(shape: SpaceShape, matrix: DMatrix<C64>) -> HilbertResult<Self> {
        let d = shape.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(HilbertError::ShapeMismatch {
                left: shape.dims.clone(),
                right: vec![matrix.nrows(), matrix.ncols()],
            });
        }
        if let Some(i) = matrix.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(HilbertError::NonFinite(i));
        }
        Ok(Self {
            shape,
            matrix,
            hermitian: false,
            unitary: false,
        })
    }

    pub fn identity(shape: SpaceShape) -> Self {
        let d = shape.total_dim();
        Self {
            shape,
            matrix: DMatrix::identity(d, d),
            hermitian: true,
            unitary: true,
        }
    }

    pub fn zeros(shape: SpaceShape) -> Self {
        let d = shape.total_dim();
        Self {
            shape,
            matrix: DMatrix::zeros(d, d),
            hermitian: true,
            unitary: false,
        }
    }

    pub fn from_diagonal(shape: SpaceShape, diag: &[C64]) -> HilbertResult<Self> {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
        Self::new(shape, m)
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary_flagged(&self) -> bool {
        self.unitary
    }

    /// `max |A − A†|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `max |A†A − I|`.
    pub fn unitarity_residual(&self) -> f64 {
        let prod = dense_mul(&self.matrix.adjoint(), &self.matrix);
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn mark_hermitian(mut self, tolerance: f64) -> HilbertResult<Self> {
        let r = self.hermiticity_residual();
        if r > tolerance {
            return Err(HilbertError::NotHermitian(r));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn mark_unitary(mut self, tolerance: f64) -> HilbertResult<Self> {
        let r = self.unitarity_residual();
        if r > tolerance {
            return Err(HilbertError::NotUnitary(r));
        }
        self.unitary = true;
        Ok(self)
    }

    /// Sets the unitary flag for an operator whose unitarity was established
    /// by the caller (for example blockwise).
    pub(crate) fn assume_unitary(mut self) -> Self {
        self.unitary = true;
        self
    }

    pub fn adjoint(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
            unitary: self.unitary,
        }
    }

    pub fn mul(&self, rhs: &Self) -> HilbertResult<Self> {
        self.same_shape(rhs)?;
        Ok(Self {
            shape: self.shape.clone(),
            matrix: dense_mul(&self.matrix, &rhs.matrix),
            hermitian: false,
            unitary: self.unitary && rhs.unitary,
        })
    }

    pub fn add(&self, rhs: &Self) -> HilbertResult<Self> {
        self.same_shape(rhs)?;
        Ok(Self {
            shape: self.shape.clone(),
            matrix: &self.matrix + &rhs.matrix,
            hermitian: self.hermitian && rhs.hermitian,
            unitary: false,
        })
    }

    pub fn sub(&self, rhs: &Self) -> HilbertResult<Self> {
        self.same_shape(rhs)?;
        Ok(Self {
            shape: self.shape.clone(),
            matrix: &self.matrix - &rhs.matrix,
            hermitian: self.hermitian && rhs.hermitian,
            unitary: false,
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            matrix: &self.matrix * C64::new(factor, 0.0),
            hermitian: self.hermitian,
            unitary: false,
        }
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, rhs: &Self) -> HilbertResult<Self> {
        self.mul(rhs)?.sub(&rhs.mul(self)?)
    }

    pub fn apply(&self, state: &StateVector) -> HilbertResult<StateVector> {
        if state.shape != self.shape {
            return Err(HilbertError::ShapeMismatch {
                left: self.shape.dims.clone(),
                right: state.shape.dims.clone(),
            });
        }
        Ok(StateVector {
            shape: self.shape.clone(),
            amps: &self.matrix * &state.amps,
        })
    }

    /// Entrywise max-norm distance.
    pub fn max_abs_diff(&self, other: &Self) -> HilbertResult<f64> {
        self.same_shape(other)?;
        Ok(self
            .matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn same_shape(&self, other: &Self) -> HilbertResult<()> {
        if self.shape != other.shape {
            return Err(HilbertError::ShapeMismatch {
                left: self.shape.dims.clone(),
                right: other.shape.dims.clone(),
            });
        }
        Ok(())
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn qubit_op(entries: [[C64; 2]; 2]) -> OperatorMatrix {
    let m = DMatrix::from_fn(2, 2, |i, j| entries[i][j]);
    OperatorMatrix::new(SpaceShape::qubit(), m).expect("2x2 operator")
}

/// `σ₊ = |e⟩⟨g|`.
pub fn sigma_plus() -> OperatorMatrix {
    qubit_op([[c(0., 0.), c(1., 0.)], [c(0., 0.), c(0., 0.)]])
}

/// `σ₋ = |g⟩⟨e|`.
pub fn sigma_minus() -> OperatorMatrix {
    qubit_op([[c(0., 0.), c(0., 0.)], [c(1., 0.), c(0., 0.)]])
}

pub fn sigma_x() -> OperatorMatrix {
    let mut op = qubit_op([[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]]);
    op.hermitian = true;
    op.unitary = true;
    op
}

/// `σ_y = i(σ₋ − σ₊)`.
pub fn sigma_y() -> OperatorMatrix {
    let mut op = qubit_op([[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]]);
    op.hermitian = true;
    op.unitary = true;
    op
}

pub fn sigma_z() -> OperatorMatrix {
    let mut op = qubit_op([[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]]);
    op.hermitian = true;
    op.unitary = true;
    op
}

/// Projector `|k⟩⟨k|` on a qubit.
pub fn qubit_projector(k: usize) -> OperatorMatrix {
    let mut m = DMatrix::zeros(2, 2);
    m[(k, k)] = c(1., 0.);
    let mut op = OperatorMatrix::new(SpaceShape::qubit(), m).expect("2x2 operator");
    op.hermitian = true;
    op
}

/// Truncated annihilation and creation operators on `{|0⟩..|n_max⟩}`.
///
/// `a†|n_max⟩ = 0`, so `[a, a†] = 1` fails only on the last level.
pub fn ladder_ops(n_max: usize) -> HilbertResult<(OperatorMatrix, OperatorMatrix)> {
    if n_max < 1 {
        return Err(HilbertError::InvalidShape("n_max must be at least 1".into()));
    }
    let d = n_max + 1;
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    let shape = SpaceShape::field(n_max);
    let a = OperatorMatrix::new(shape, a)?;
    let a_dag = a.adjoint();
    Ok((a, a_dag))
}

/// `a†a` on a field truncated at `n_max`.
pub fn number_op(n_max: usize) -> OperatorMatrix {
    let diag: Vec<C64> = (0..=n_max).map(|n| c(n as f64, 0.0)).collect();
    let mut op = OperatorMatrix::from_diagonal(SpaceShape::field(n_max), &diag).expect("diagonal");
    op.hermitian = true;
    op
}

/// Lifts `op` acting on subsystem `subsystem` to the whole of `shape`, with
/// identity on every other factor.
pub fn embed(op: &OperatorMatrix, subsystem: usize, shape: &SpaceShape) -> HilbertResult<OperatorMatrix> {
    let count = shape.dims.len();
    if subsystem >= count {
        return Err(HilbertError::NoSuchSubsystem { index: subsystem, count });
    }
    let expected = shape.dims[subsystem];
    if op.dim() != expected {
        return Err(HilbertError::DimensionMismatch {
            subsystem,
            op: op.dim(),
            expected,
        });
    }
    let before: usize = shape.dims[..subsystem].iter().product();
    let after: usize = shape.dims[subsystem + 1..].iter().product();
    let left = DMatrix::<C64>::identity(before, before);
    let right = DMatrix::<C64>::identity(after, after);
    let matrix = left.kronecker(&op.matrix).kronecker(&right);
    Ok(OperatorMatrix {
        shape: shape.clone(),
        matrix,
        hermitian: op.hermitian,
        unitary: op.unitary,
    })
}

/// `⟨ψ|A|ψ⟩`.
pub fn expectation(op: &OperatorMatrix, state: &StateVector) -> HilbertResult<C64> {
    let applied = op.apply(state)?;
    Ok(state.amps.dotc(&applied.amps))
}

/// `|⟨ψ|φ⟩|²`, clamped to `[0, 1]` against rounding.
pub fn fidelity(psi: &StateVector, phi: &StateVector) -> HilbertResult<f64> {
    Ok(psi.inner(phi)?.norm_sqr().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn fock_basis_vectors() {
        let v = fock_state(0, 5).unwrap();
        assert_eq!(v.dim(), 6);
        assert_eq!(v.amplitudes()[0], C64::new(1.0, 0.0));
        assert!(v.amplitudes().iter().skip(1).all(|z| *z == C64::new(0.0, 0.0)));

        let v = fock_state(3, 5).unwrap();
        assert_eq!(v.amplitude(&[3]), C64::new(1.0, 0.0));
        close(v.norm(), 1.0, 0.0);

        assert_eq!(
            fock_state(6, 5).unwrap_err(),
            HilbertError::Truncation { n: 6, n_max: 5 }
        );
    }

    #[test]
    fn vacuum_coherent_state() {
        let cs = coherent_state(C64::new(0.0, 0.0), 10).unwrap();
        assert_eq!(cs.state.amplitude(&[0]), C64::new(1.0, 0.0));
        assert_eq!(cs.tail_weight, 0.0);
    }

    #[test]
    fn coherent_mean_photon_number() {
        let alpha = C64::new(1.155f64.sqrt(), 0.0);
        let cs = coherent_state(alpha, 28).unwrap();
        let mean = expectation(&number_op(28), &cs.state).unwrap();
        close(mean.re, 1.155, 1e-8);
        close(mean.im, 0.0, 1e-14);
    }

    #[test]
    fn coherent_tail_oracle() {
        // Independent tail: 1 − Σ_{n≤28} Poisson(5) summed in plain arithmetic.
        let mean: f64 = 5.0;
        let mut term = (-mean).exp();
        let mut tail = 0.0;
        for n in 1..200 {
            term *= mean / n as f64;
            if n > 28 {
                tail += term;
            }
        }
        let cs = coherent_state(C64::new(5f64.sqrt(), 0.0), 28).unwrap();
        assert!(cs.tail_weight <= 1e-10);
        close(cs.tail_weight, tail, 1e-20 + tail * 1e-9);
        close(cs.state.norm(), 1.0, 1e-12);
    }

    #[test]
    fn coherent_truncation_error_names_required_cutoff() {
        let err = coherent_state(C64::new(5f64.sqrt(), 0.0), 10).unwrap_err();
        match err {
            HilbertError::TailWeight { required, tail, .. } => {
                assert!(tail > 1e-10);
                assert!(required > 10);
                assert!(coherent_state(C64::new(5f64.sqrt(), 0.0), required).is_ok());
                assert!(coherent_state(C64::new(5f64.sqrt(), 0.0), required - 1).is_err());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tensor_index_arithmetic() {
        let c0 = StateVector::basis(SpaceShape::qubit(), &[0]).unwrap();
        let e = StateVector::basis(SpaceShape::qubit(), &[0]).unwrap();
        let f0 = fock_state(0, 3).unwrap();
        let psi = tensor(&[&c0, &e, &f0, &f0]).unwrap();
        assert_eq!(psi.amplitudes()[0], C64::new(1.0, 0.0));
        assert_eq!(psi.shape(), &SpaceShape::composite(3).unwrap());

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::qubit(C64::new(1.0, 0.0), C64::new(1.0, 0.0)).unwrap();
        let f1 = fock_state(1, 3).unwrap();
        let psi = tensor(&[&plus, &e, &f1, &f1]).unwrap();
        close(psi.norm(), 1.0, 1e-12);
        // index = ((c·2 + a)·4 + n0)·4 + n1
        for (flat, z) in psi.amplitudes().iter().enumerate() {
            let expect = if flat == (0 * 2 + 0) * 16 + 4 + 1 || flat == (1 * 2 + 0) * 16 + 4 + 1 {
                s
            } else {
                0.0
            };
            close(z.re, expect, 1e-15);
            close(z.im, 0.0, 0.0);
        }
    }

    #[test]
    fn ladder_actions() {
        let n_max = 6;
        let (a, ad) = ladder_ops(n_max).unwrap();
        let one = fock_state(1, n_max).unwrap();
        let out = a.apply(&one).unwrap();
        close((out.amplitude(&[0]) - 1.0).norm(), 0.0, 1e-15);

        let num = ad.mul(&a).unwrap();
        for n in 0..=n_max {
            let v = num.apply(&fock_state(n, n_max).unwrap()).unwrap();
            close(v.amplitude(&[n]).re, n as f64, 1e-13);
        }
        // adjoint is exact entrywise
        assert_eq!(ad.matrix(), &a.matrix().adjoint());

        let comm = a.commutator(&ad).unwrap();
        for n in 0..n_max {
            let v = comm.apply(&fock_state(n, n_max).unwrap()).unwrap();
            close((v.amplitude(&[n]) - 1.0).norm(), 0.0, 1e-13);
        }
        let top = comm.apply(&fock_state(n_max, n_max).unwrap()).unwrap();
        close(top.amplitude(&[n_max]).re, -(n_max as f64), 1e-12);
    }

    #[test]
    fn embedding_actions() {
        let shape = SpaceShape::composite(3).unwrap();
        let sz = embed(&sigma_z(), Subsystem::Atom.index(), &shape).unwrap();
        let e_state = StateVector::basis(shape.clone(), &[1, 0, 2, 1]).unwrap();
        close(expectation(&sz, &e_state).unwrap().re, 1.0, 0.0);
        let g_state = StateVector::basis(shape.clone(), &[1, 1, 2, 1]).unwrap();
        close(expectation(&sz, &g_state).unwrap().re, -1.0, 0.0);

        let id = embed(&OperatorMatrix::identity(SpaceShape::qubit()), 0, &shape).unwrap();
        assert_eq!(id.matrix(), &DMatrix::<C64>::identity(shape.total_dim(), shape.total_dim()));

        assert!(matches!(
            embed(&sigma_z(), Subsystem::Field0.index(), &shape),
            Err(HilbertError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            embed(&sigma_z(), 7, &shape),
            Err(HilbertError::NoSuchSubsystem { .. })
        ));
    }

    #[test]
    fn disjoint_embeddings_commute() {
        let n_max = 3;
        let shape = SpaceShape::composite(n_max).unwrap();
        let (a, ad) = ladder_ops(n_max).unwrap();
        let ops = [
            embed(&sigma_x(), 0, &shape).unwrap(),
            embed(&sigma_y(), 1, &shape).unwrap(),
            embed(&a, 2, &shape).unwrap(),
            embed(&ad, 3, &shape).unwrap(),
        ];
        for i in 0..ops.len() {
            for j in i + 1..ops.len() {
                let comm = ops[i].commutator(&ops[j]).unwrap();
                assert!(comm.max_abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn number_expectation_on_embedded_coherent_state() {
        let n_max = 12;
        let alpha = C64::new(0.8, -0.5);
        let shape = SpaceShape::composite(n_max).unwrap();
        let cs = coherent_state(alpha, n_max).unwrap();
        let c0 = StateVector::basis(SpaceShape::qubit(), &[1]).unwrap();
        let g = StateVector::basis(SpaceShape::qubit(), &[1]).unwrap();
        let psi = tensor(&[&c0, &g, &cs.state, &fock_state(2, n_max).unwrap()]).unwrap();
        let n0 = embed(&number_op(n_max), 2, &shape).unwrap();
        close(expectation(&n0, &psi).unwrap().re, alpha.norm_sqr(), 1e-8);
        let n1 = embed(&number_op(n_max), 3, &shape).unwrap();
        close(expectation(&n1, &psi).unwrap().re, 2.0, 1e-12);
    }

    #[test]
    fn fidelity_properties() {
        let n_max = 30;
        let psi = coherent_state(C64::new(0.7, 0.2), n_max).unwrap().state;
        close(fidelity(&psi, &psi).unwrap(), 1.0, 1e-12);

        for &a2 in &[0.3f64, 1.155, 2.3] {
            let alpha = C64::new(a2.sqrt(), 0.0);
            let p = coherent_state(alpha, n_max).unwrap().state;
            let m = coherent_state(-alpha, n_max).unwrap().state;
            close(fidelity(&p, &m).unwrap(), (-4.0 * a2).exp(), 1e-10);
            close(fidelity(&p, &m).unwrap(), fidelity(&m, &p).unwrap(), 1e-16);
        }
        let a = coherent_state(C64::new(1.155f64.sqrt(), 0.0), 28).unwrap().state;
        let b = coherent_state(C64::new(-(1.155f64.sqrt()), 0.0), 28).unwrap().state;
        close(a.inner(&b).unwrap().norm(), 0.1, 0.001);

        let other = fock_state(0, 3).unwrap();
        assert!(fidelity(&psi, &other).is_err());
    }

    #[test]
    fn pauli_algebra() {
        let sx = sigma_x();
        let sy = sigma_y();
        let sz = sigma_z();
        // σ_x σ_y = i σ_z
        let lhs = sx.mul(&sy).unwrap();
        let rhs = OperatorMatrix::new(SpaceShape::qubit(), sz.matrix() * C64::new(0.0, 1.0)).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-15);
        // σ_x = σ₋ + σ₊
        let sum = sigma_minus().add(&sigma_plus()).unwrap();
        assert!(sum.max_abs_diff(&sx).unwrap() < 1e-15);
        for op in [&sx, &sy, &sz] {
            assert!(op.clone().mark_unitary(1e-14).is_ok());
            assert!(op.clone().mark_hermitian(1e-14).is_ok());
        }
        let rot = OperatorMatrix::new(
            SpaceShape::qubit(),
            DMatrix::from_fn(2, 2, |i, j| {
                if i == j {
                    C64::new(0.0, PI).exp()
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        )
        .unwrap();
        assert!(rot.mark_unitary(1e-14).is_ok());
        assert!(sigma_plus().mark_hermitian(1e-3).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let amps = DVector::from_vec(vec![C64::new(f64::NAN, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(
            StateVector::from_amplitudes(SpaceShape::qubit(), amps).unwrap_err(),
            HilbertError::NonFinite(0)
        );
    }

    #[test]
    fn multi_index_round_trip() {
        let shape = SpaceShape::composite(4).unwrap();
        for flat in 0..shape.total_dim() {
            assert_eq!(shape.index(&shape.multi_index(flat)), flat);
        }
        assert_eq!(shape.n_max(), Some(4));
        assert_eq!(shape.stride(1), 25);
    }
}

/// Dense complex product through faer, which is much faster than the generic
/// nalgebra kernel at the dimensions used here.
pub fn dense_mul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let fa = faer::MatRef::from_column_major_slice(a.as_slice(), a.nrows(), a.ncols());
    let fb = faer::MatRef::from_column_major_slice(b.as_slice(), b.nrows(), b.ncols());
    let prod = fa * fb;
    DMatrix::from_fn(a.nrows(), b.ncols(), |i, j| prod[(i, j)])
}
