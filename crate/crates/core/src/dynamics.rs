//! Hamiltonians and propagators for the atom and the two cavities.
//!
//! All Hamiltonians are stored with ħ factored out, so their entries are
//! angular frequencies (rad/s) and a propagator over `dt` seconds is
//! `exp(−i H dt)`.
//!
//! Three propagator routes are provided:
//!
//! * the closed form: the controlled JC evolution factorizes into diagonal
//!   phases `Λ_k` and `W_k = exp(−i V_k dt)`, which is evaluated exactly on
//!   the two-level excitation blocks `{|e,n⟩, |g,n+1⟩}`;
//! * the linear dispersive approximation, which is diagonal in the product
//!   basis;
//! * a generic numeric route that diagonalizes any Hermitian matrix and
//!   exponentiates its eigenvalues. It knows nothing about the physics and is
//!   the oracle the other two are checked against.
//!
//! Dense [`Propagator`]s are convenient for small truncations. The
//! [`Evolver`] implementations apply the same maps to a state in `O(dim)`
//! without forming the matrix.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::hilbert::{
    dense_mul, embed, ladder_ops, number_op, qubit_projector, sigma_minus, sigma_plus, sigma_z, HilbertError,
    OperatorMatrix, SpaceShape, StateVector, Subsystem, C64,
};

/// Atom basis index of `|e⟩`.
pub const EXCITED: usize = 0;
/// Atom basis index of `|g⟩`.
pub const GROUND: usize = 1;

/// Unitarity tolerance for every emitted propagator.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

/// Largest accepted `max |HV − VΛ|` relative to `max |H|`.
pub const EIGEN_RESIDUAL_TOLERANCE: f64 = 1e-12;

/// Population at the truncation edge above which a warning is logged.
pub const EDGE_POPULATION_WARNING: f64 = 1e-10;

/// Largest coupling-to-detuning ratio accepted as "λ ≪ 1".
pub const DISPERSIVE_MAX_LAMBDA: f64 = 0.02;
/// Bound on `λ²(n_max + 1)`.
pub const DISPERSIVE_MAX_PHOTON_LOAD: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),

    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("propagation interval ends before it starts ({t0} > {t})")]
    Interval { t0: f64, t: f64 },

    #[error("numeric exponential needs a Hermitian generator (max |H - H†| = {0:e})")]
    NotHermitian(f64),

    #[error("propagator is not unitary (max |U†U - I| = {0:e})")]
    NotUnitary(f64),

    #[error("eigendecomposition did not converge (residual {0:e})")]
    Eigen(f64),

    #[error("dispersive propagator refused: {0}")]
    Regime(String),

    #[error("propagators cannot be composed: {0}")]
    Composition(String),
}

pub type DynamicsResult<T> = Result<T, DynamicsError>;

/// One of the two cavities.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum Cavity {
    Zero,
    One,
}

impl Cavity {
    pub const BOTH: [Cavity; 2] = [Cavity::Zero, Cavity::One];

    pub fn index(self) -> usize {
        match self {
            Self::Zero => 0,
            Self::One => 1,
        }
    }

    pub fn from_index(k: usize) -> Option<Self> {
        match k {
            0 => Some(Self::Zero),
            1 => Some(Self::One),
            _ => None,
        }
    }

    /// `k ⊕ 1`.
    pub fn other(self) -> Self {
        match self {
            Self::Zero => Self::One,
            Self::One => Self::Zero,
        }
    }

    pub fn subsystem(self) -> Subsystem {
        match self {
            Self::Zero => Subsystem::Field0,
            Self::One => Subsystem::Field1,
        }
    }
}

/// Physical constants of the atom and both cavities.
#[derive(Debug, Copy, Clone, PartialEq)]
pub struct SystemParams {
    /// Atomic transition frequency (rad/s).
    pub omega_a: f64,
    /// Cavity frequencies (rad/s).
    pub omega_0: f64,
    pub omega_1: f64,
    /// Atom-cavity couplings (1/s).
    pub g_0: f64,
    pub g_1: f64,
    /// Photon-number truncation of each field.
    pub n_max: usize,
}

/// A violated rotating-wave condition `|x| ≤ 0.1 (ω_a + ω_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RwaWarning {
    pub cavity: Cavity,
    pub quantity: &'static str,
    pub value: f64,
    pub bound: f64,
}

impl std::fmt::Display for RwaWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "cavity {}: |{}| = {} exceeds 0.1(omega_a + omega_k) = {}",
            self.cavity.index(),
            self.quantity,
            self.value.abs(),
            self.bound
        )
    }
}

impl SystemParams {
    pub fn new(
        omega_a: f64,
        omega_0: f64,
        omega_1: f64,
        g_0: f64,
        g_1: f64,
        n_max: usize,
    ) -> DynamicsResult<Self> {
        let p = Self {
            omega_a,
            omega_0,
            omega_1,
            g_0,
            g_1,
            n_max,
        };
        p.validate()?;
        for w in p.rwa_warnings() {
            debug!("rotating-wave approximation questionable: {w}");
        }
        Ok(p)
    }

    /// Two identical cavities of frequency `omega` and coupling `g`.
    pub fn identical(omega_a: f64, omega: f64, g: f64, n_max: usize) -> DynamicsResult<Self> {
        Self::new(omega_a, omega, omega, g, g, n_max)
    }

    pub fn validate(&self) -> DynamicsResult<()> {
        let all = [self.omega_a, self.omega_0, self.omega_1, self.g_0, self.g_1];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(DynamicsError::InvalidParams("non-finite parameter".into()));
        }
        if self.omega_a <= 0.0 || self.omega_0 <= 0.0 || self.omega_1 <= 0.0 {
            return Err(DynamicsError::InvalidParams(
                "atomic and cavity frequencies must be positive".into(),
            ));
        }
        if self.n_max < 1 {
            return Err(DynamicsError::InvalidParams("n_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn omega(&self, k: Cavity) -> f64 {
        match k {
            Cavity::Zero => self.omega_0,
            Cavity::One => self.omega_1,
        }
    }

    pub fn coupling(&self, k: Cavity) -> f64 {
        match k {
            Cavity::Zero => self.g_0,
            Cavity::One => self.g_1,
        }
    }

    /// `Δ_k = ω_a − ω_k`.
    pub fn detuning(&self, k: Cavity) -> f64 {
        self.omega_a - self.omega(k)
    }

    /// `λ_k = g_k / |Δ_k|`; `None` on resonance.
    pub fn dispersive_lambda(&self, k: Cavity) -> Option<f64> {
        let d = self.detuning(k);
        (d != 0.0).then(|| self.coupling(k).abs() / d.abs())
    }

    pub fn shape(&self) -> SpaceShape {
        SpaceShape::composite(self.n_max).expect("validated n_max")
    }

    pub fn rwa_warnings(&self) -> Vec<RwaWarning> {
        let mut out = Vec::new();
        for k in Cavity::BOTH {
            let bound = 0.1 * (self.omega_a + self.omega(k));
            for (quantity, value) in [("g", self.coupling(k)), ("Delta", self.detuning(k))] {
                if value.abs() > bound {
                    out.push(RwaWarning {
                        cavity: k,
                        quantity,
                        value,
                        bound,
                    });
                }
            }
        }
        out
    }

    pub fn is_identical(&self) -> bool {
        rel_eq(self.omega_0, self.omega_1) && rel_eq(self.g_0, self.g_1)
    }
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// `sin(ω dt) / ω`, continued to `dt` at `ω = 0`.
pub(crate) fn sin_over(omega: f64, dt: f64) -> f64 {
    let z = omega * dt;
    if z.abs() < 1e-6 {
        dt * (1.0 - z * z / 6.0)
    } else {
        z.sin() / omega
    }
}

/// `Ω_k(x) = √(g_k² x + Δ_k²/4)`.
pub fn rabi_frequency(g: f64, delta: f64, x: f64) -> f64 {
    (g * g * x + delta * delta / 4.0).sqrt()
}

fn kron4(
    control: &OperatorMatrix,
    atom: &OperatorMatrix,
    field0: &OperatorMatrix,
    field1: &OperatorMatrix,
    shape: &SpaceShape,
) -> OperatorMatrix {
    let m = control
        .matrix()
        .kronecker(atom.matrix())
        .kronecker(field0.matrix())
        .kronecker(field1.matrix());
    OperatorMatrix::new(shape.clone(), m).expect("consistent dimensions")
}

/// `H_free = ω_a σ_z/2 + ω₀ a₀†a₀ + ω₁ a₁†a₁`, identity on the control.
pub fn free_hamiltonian(params: &SystemParams) -> OperatorMatrix {
    let shape = params.shape();
    let diag: Vec<C64> = (0..shape.total_dim())
        .map(|i| C64::new(free_energy(params, &shape.multi_index(i)), 0.0))
        .collect();
    OperatorMatrix::from_diagonal(shape, &diag)
        .expect("diagonal")
        .mark_hermitian(0.0)
        .expect("real diagonal")
}

fn atom_sign(atom: usize) -> f64 {
    if atom == EXCITED {
        1.0
    } else {
        -1.0
    }
}

fn free_energy(params: &SystemParams, multi: &[usize]) -> f64 {
    params.omega_a * atom_sign(multi[1]) / 2.0
        + params.omega_0 * multi[2] as f64
        + params.omega_1 * multi[3] as f64
}

/// JC Hamiltonian of the atom with cavity `k` plus the free energy of the other
/// cavity, on `atom ⊗ field₀ ⊗ field₁`-sized blocks embedded with identity
/// control.
fn branch_hamiltonian(params: &SystemParams, k: Cavity) -> DynamicsResult<OperatorMatrix> {
    let n_max = params.n_max;
    let shape = params.shape();
    let (a, a_dag) = ladder_ops(n_max)?;
    let id_c = OperatorMatrix::identity(SpaceShape::qubit());
    let id_f = OperatorMatrix::identity(SpaceShape::field(n_max));
    let num = number_op(n_max);

    let (lower_k, raise_k) = match k {
        Cavity::Zero => (
            kron4(&id_c, &sigma_minus(), &a_dag, &id_f, &shape),
            kron4(&id_c, &sigma_plus(), &a, &id_f, &shape),
        ),
        Cavity::One => (
            kron4(&id_c, &sigma_minus(), &id_f, &a_dag, &shape),
            kron4(&id_c, &sigma_plus(), &id_f, &a, &shape),
        ),
    };
    let sz = embed(&sigma_z(), Subsystem::Atom.index(), &shape)?;
    let n0 = embed(&num, Subsystem::Field0.index(), &shape)?;
    let n1 = embed(&num, Subsystem::Field1.index(), &shape)?;
    let coupling = lower_k.add(&raise_k)?.scale(params.coupling(k));
    let h = sz
        .scale(params.omega_a / 2.0)
        .add(&n0.scale(params.omega_0))?
        .add(&n1.scale(params.omega_1))?
        .add(&coupling)?;
    Ok(h)
}

/// `H_I = |0⟩⟨0| ⊗ (H_JC⁽⁰⁾ + ω₁a₁†a₁) + |1⟩⟨1| ⊗ (H_JC⁽¹⁾ + ω₀a₀†a₀)`.
pub fn interaction_hamiltonian(params: &SystemParams) -> DynamicsResult<OperatorMatrix> {
    let shape = params.shape();
    let mut total = OperatorMatrix::zeros(shape.clone());
    for k in Cavity::BOTH {
        let proj = embed(&qubit_projector(k.index()), Subsystem::Control.index(), &shape)?;
        let hk = branch_hamiltonian(params, k)?;
        total = total.add(&proj.mul(&hk)?)?;
    }
    Ok(total.mark_hermitian(1e-14)?)
}

/// `V_k = Δ_k σ_z/2 + g_k(σ₋a_k† + σ₊a_k)` on the composite space.
pub fn coupling_operator(params: &SystemParams, k: Cavity) -> DynamicsResult<OperatorMatrix> {
    let shape = params.shape();
    let n_max = params.n_max;
    let (a, a_dag) = ladder_ops(n_max)?;
    let id_c = OperatorMatrix::identity(SpaceShape::qubit());
    let id_f = OperatorMatrix::identity(SpaceShape::field(n_max));
    let (lower, raise) = match k {
        Cavity::Zero => (
            kron4(&id_c, &sigma_minus(), &a_dag, &id_f, &shape),
            kron4(&id_c, &sigma_plus(), &a, &id_f, &shape),
        ),
        Cavity::One => (
            kron4(&id_c, &sigma_minus(), &id_f, &a_dag, &shape),
            kron4(&id_c, &sigma_plus(), &id_f, &a, &shape),
        ),
    };
    let sz = embed(&sigma_z(), Subsystem::Atom.index(), &shape)?;
    let v = sz
        .scale(params.detuning(k) / 2.0)
        .add(&lower.add(&raise)?.scale(params.coupling(k)))?;
    Ok(v.mark_hermitian(1e-14)?)
}

/// `N_k = a_k†a_k + σ_z/2` on the composite space.
pub fn excitation_operator(params: &SystemParams, k: Cavity) -> DynamicsResult<OperatorMatrix> {
    let shape = params.shape();
    let n = embed(&number_op(params.n_max), k.subsystem().index(), &shape)?;
    let sz = embed(&sigma_z(), Subsystem::Atom.index(), &shape)?;
    Ok(n.add(&sz.scale(0.5))?)
}

/// A block of `W_k` acting on one or two composite basis states.
#[derive(Debug, Clone, Copy)]
enum WBlock {
    Single { index: usize, value: C64 },
    Pair { indices: [usize; 2], matrix: [[C64; 2]; 2] },
}

/// Exact `exp(−i V dt)` restricted to a coupled pair `{|e,n⟩, |g,n+1⟩}` with
/// `x = n + 1` the eigenvalue of `N + 1/2`.
fn klimov_pair(g: f64, delta: f64, x: f64, dt: f64) -> [[C64; 2]; 2] {
    let omega = rabi_frequency(g, delta, x);
    let cos = (omega * dt).cos();
    let s = sin_over(omega, dt);
    let coupling = g * x.sqrt();
    // cos(Ωdt) − i sin(Ωdt)/Ω · [[Δ/2, g√x], [g√x, −Δ/2]]
    [
        [C64::new(cos, -s * delta / 2.0), C64::new(0.0, -s * coupling)],
        [C64::new(0.0, -s * coupling), C64::new(cos, s * delta / 2.0)],
    ]
}

/// `exp(−i V dt)` on an uncoupled state where `V` reduces to `v`, with
/// `Ω = |Δ|/2`.
fn klimov_single(delta: f64, v: f64, dt: f64) -> C64 {
    let omega = delta.abs() / 2.0;
    C64::new((omega * dt).cos(), -v * sin_over(omega, dt))
}

/// Visits every block of `W_k` inside control branch `control` of the
/// composite space. `|g,0_k⟩` is uncoupled; `|e,n_max⟩` would couple outside
/// the truncated space, so its coupling is dropped.
fn for_each_w_block(
    params: &SystemParams,
    k: Cavity,
    control: usize,
    dt: f64,
    mut visit: impl FnMut(WBlock),
) {
    let shape = params.shape();
    let n_max = params.n_max;
    let g = params.coupling(k);
    let delta = params.detuning(k);
    let idx = |atom: usize, nk: usize, other: usize| {
        let (n0, n1) = match k {
            Cavity::Zero => (nk, other),
            Cavity::One => (other, nk),
        };
        shape.index(&[control, atom, n0, n1])
    };
    for other in 0..=n_max {
        visit(WBlock::Single {
            index: idx(GROUND, 0, other),
            value: klimov_single(delta, -delta / 2.0, dt),
        });
        for n in 0..n_max {
            visit(WBlock::Pair {
                indices: [idx(EXCITED, n, other), idx(GROUND, n + 1, other)],
                matrix: klimov_pair(g, delta, (n + 1) as f64, dt),
            });
        }
        visit(WBlock::Single {
            index: idx(EXCITED, n_max, other),
            value: klimov_single(delta, delta / 2.0, dt),
        });
    }
}

/// Phase of `Λ_k(dt) = exp(−iω_k N_k dt) exp(−iω_{k⊕1} a†_{k⊕1}a_{k⊕1} dt)` on a
/// composite basis state.
pub fn lambda_phase(params: &SystemParams, k: Cavity, multi: &[usize], dt: f64) -> C64 {
    let nk = multi[2 + k.index()] as f64;
    let other = multi[2 + k.other().index()] as f64;
    let excitation = nk + atom_sign(multi[1]) / 2.0;
    let angle = -dt * (params.omega(k) * excitation + params.omega(k.other()) * other);
    C64::from_polar(1.0, angle)
}

/// `W_k(dt) = exp(−i V_k dt)` on the composite space, identity on the control
/// and on the other field.
pub fn klimov_w(params: &SystemParams, k: Cavity, dt: f64) -> OperatorMatrix {
    let shape = params.shape();
    let d = shape.total_dim();
    let mut m = DMatrix::zeros(d, d);
    for control in 0..2 {
        for_each_w_block(params, k, control, dt, |block| match block {
            WBlock::Single { index, value } => m[(index, index)] = value,
            WBlock::Pair { indices, matrix } => {
                for (r, &ri) in indices.iter().enumerate() {
                    for (c, &ci) in indices.iter().enumerate() {
                        m[(ri, ci)] = matrix[r][c];
                    }
                }
            }
        });
    }
    OperatorMatrix::new(shape, m).expect("finite").assume_unitary()
}

/// How a propagator was obtained.
#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum PropagatorMethod {
    ClosedForm,
    NumericExpm,
    Dispersive,
    Free,
    Composite,
}

/// A unitary evolution operator over a time interval.
#[derive(Debug, Clone)]
pub struct Propagator {
    matrix: OperatorMatrix,
    interval: (f64, f64),
    method: PropagatorMethod,
}

impl Propagator {
    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn method(&self) -> PropagatorMethod {
        self.method
    }

    pub fn apply(&self, state: &StateVector) -> DynamicsResult<StateVector> {
        Ok(self.matrix.apply(state)?)
    }

    /// `later ∘ self`, for `later` starting where `self` ends.
    pub fn then(&self, later: &Propagator) -> DynamicsResult<Propagator> {
        let gap = (later.interval.0 - self.interval.1).abs();
        if gap > 1e-12 * self.interval.1.abs().max(1.0) {
            return Err(DynamicsError::Composition(format!(
                "intervals {:?} and {:?} are not adjacent",
                self.interval, later.interval
            )));
        }
        Ok(Propagator {
            matrix: later.matrix.mul(&self.matrix)?,
            interval: (self.interval.0, later.interval.1),
            method: PropagatorMethod::Composite,
        })
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.matrix.unitarity_residual()
    }
}

fn check_interval(t0: f64, t: f64) -> DynamicsResult<f64> {
    if !(t >= t0) {
        return Err(DynamicsError::Interval { t0, t });
    }
    Ok(t - t0)
}

/// `exp(−i H_I (t − t0))` from the closed form
/// `|0⟩⟨0| ⊗ Λ₀W₀ + |1⟩⟨1| ⊗ Λ₁W₁`.
pub fn controlled_propagator(params: &SystemParams, t0: f64, t: f64) -> DynamicsResult<Propagator> {
    let dt = check_interval(t0, t)?;
    let shape = params.shape();
    let d = shape.total_dim();
    let mut m = DMatrix::zeros(d, d);
    for k in Cavity::BOTH {
        let control = k.index();
        for_each_w_block(params, k, control, dt, |block| match block {
            WBlock::Single { index, value } => {
                let phase = lambda_phase(params, k, &shape.multi_index(index), dt);
                m[(index, index)] = phase * value;
            }
            WBlock::Pair { indices, matrix } => {
                // Both members share the excitation number, hence the phase.
                let phase = lambda_phase(params, k, &shape.multi_index(indices[0]), dt);
                for (r, &ri) in indices.iter().enumerate() {
                    for (c, &ci) in indices.iter().enumerate() {
                        m[(ri, ci)] = phase * matrix[r][c];
                    }
                }
            }
        });
    }
    let matrix = OperatorMatrix::new(shape, m)?.assume_unitary();
    Ok(Propagator {
        matrix,
        interval: (t0, t),
        method: PropagatorMethod::ClosedForm,
    })
}

/// Eigendecomposition `H = V diag(E) V†` of a Hermitian operator, reusable for
/// any number of evolution times.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    shape: SpaceShape,
    values: DVector<f64>,
    vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(h: &OperatorMatrix) -> DynamicsResult<Self> {
        let scale = h.max_abs().max(1.0);
        let residual = h.hermiticity_residual();
        if residual > 1e-12 * scale {
            return Err(DynamicsError::NotHermitian(residual));
        }
        let n = h.dim();
        let m = h.matrix();
        let dense = faer::Mat::<C64>::from_fn(n, n, |i, j| m[(i, j)]);
        let eig = dense
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|_| DynamicsError::Eigen(f64::INFINITY))?;
        let (u, s) = (eig.U(), eig.S());
        let values = DVector::from_fn(n, |i, _| s[i].re);
        let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
        let lambda = DMatrix::from_diagonal(&values.map(|e| C64::new(e, 0.0)));
        let residual = (dense_mul(m, &vectors) - dense_mul(&vectors, &lambda)).camax();
        if residual > EIGEN_RESIDUAL_TOLERANCE * scale {
            return Err(DynamicsError::Eigen(residual));
        }
        Ok(Self {
            shape: h.shape().clone(),
            values,
            vectors,
        })
    }

    /// Spectrum in ascending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    /// `V diag(exp(−i E dt)) V†`.
    pub fn exponential(&self, dt: f64) -> DynamicsResult<OperatorMatrix> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= C64::from_polar(1.0, -self.values[j] * dt);
        }
        let u = dense_mul(&scaled, &self.vectors.adjoint());
        let op = OperatorMatrix::new(self.shape.clone(), u)?;
        op.mark_unitary(UNITARITY_TOLERANCE).map_err(|e| match e {
            HilbertError::NotUnitary(r) => DynamicsError::NotUnitary(r),
            other => other.into(),
        })
    }
}

/// `exp(−i H dt)` by Hermitian eigendecomposition.
pub fn numeric_expm(h: &OperatorMatrix, dt: f64) -> DynamicsResult<Propagator> {
    let eig = HermitianEigen::new(h)?;
    Ok(Propagator {
        matrix: eig.exponential(dt)?,
        interval: (0.0, dt),
        method: PropagatorMethod::NumericExpm,
    })
}

fn check_dispersive(params: &SystemParams) -> DynamicsResult<(f64, f64)> {
    if !params.is_identical() {
        return Err(DynamicsError::Regime(
            "the dispersive model assumes identical cavities (omega_0 = omega_1, g_0 = g_1)".into(),
        ));
    }
    let delta = params.detuning(Cavity::Zero);
    let lambda = params.dispersive_lambda(Cavity::Zero).ok_or_else(|| {
        DynamicsError::Regime("resonant cavities (Delta = 0) have no dispersive limit".into())
    })?;
    if lambda > DISPERSIVE_MAX_LAMBDA {
        return Err(DynamicsError::Regime(format!(
            "lambda = g/|Delta| = {lambda} exceeds {DISPERSIVE_MAX_LAMBDA}"
        )));
    }
    let load = lambda * lambda * (params.n_max + 1) as f64;
    if load > DISPERSIVE_MAX_PHOTON_LOAD {
        return Err(DynamicsError::Regime(format!(
            "lambda^2 (n_max + 1) = {load} exceeds {DISPERSIVE_MAX_PHOTON_LOAD} at n_max = {}",
            params.n_max
        )));
    }
    Ok((delta, lambda))
}

/// Eigenvalue of the dispersive interaction-period Hamiltonian on a basis
/// state: `H_JCD⁽ᵏ⁾ + ω a_{k⊕1}†a_{k⊕1}` in the branch selected by the control.
fn dispersive_energy(params: &SystemParams, shift: f64, multi: &[usize]) -> f64 {
    let k = Cavity::from_index(multi[0]).expect("control index");
    let s = atom_sign(multi[1]);
    let nk = multi[2 + k.index()] as f64;
    let other = multi[2 + k.other().index()] as f64;
    let omega = params.omega_0;
    (params.omega_a + shift) * s / 2.0 + (omega + shift * s) * nk + shift / 2.0 + omega * other
}

/// Interaction-period propagator in the linear dispersive approximation.
/// Refuses parameters outside the dispersive regime.
pub fn dispersive_propagator(params: &SystemParams, t_m: f64) -> DynamicsResult<Propagator> {
    let evolver = DispersiveEvolution::new(*params)?;
    let shape = params.shape();
    let diag: Vec<C64> = (0..shape.total_dim())
        .map(|i| C64::from_polar(1.0, -evolver.energy(&shape.multi_index(i)) * t_m))
        .collect();
    let matrix = OperatorMatrix::from_diagonal(shape, &diag)?.assume_unitary();
    Ok(Propagator {
        matrix,
        interval: (0.0, t_m),
        method: PropagatorMethod::Dispersive,
    })
}

/// Time evolution of a state over a duration, without a dense matrix.
pub trait Evolver {
    fn evolve(&self, state: &StateVector, dt: f64) -> DynamicsResult<StateVector>;
}

fn check_composite(params: &SystemParams, state: &StateVector) -> DynamicsResult<()> {
    let shape = params.shape();
    if state.shape() != &shape {
        return Err(HilbertError::ShapeMismatch {
            left: shape.dims().to_vec(),
            right: state.shape().dims().to_vec(),
        }
        .into());
    }
    Ok(())
}

fn apply_diagonal(
    state: &StateVector,
    energy: impl Fn(&[usize]) -> f64,
    dt: f64,
) -> DynamicsResult<StateVector> {
    let shape = state.shape().clone();
    let amps = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, z)| z * C64::from_polar(1.0, -energy(&shape.multi_index(i)) * dt))
        .collect::<Vec<_>>();
    Ok(StateVector::from_amplitudes(shape, DVector::from_vec(amps))?)
}

/// Evolution under `H_free` (atom outside the cavities).
#[derive(Debug, Clone, Copy)]
pub struct FreeEvolution {
    params: SystemParams,
}

impl FreeEvolution {
    pub fn new(params: SystemParams) -> Self {
        Self { params }
    }
}

impl Evolver for FreeEvolution {
    fn evolve(&self, state: &StateVector, dt: f64) -> DynamicsResult<StateVector> {
        check_composite(&self.params, state)?;
        apply_diagonal(state, |m| free_energy(&self.params, m), dt)
    }
}

/// Exact evolution under `H_I` via the blockwise closed form.
#[derive(Debug, Clone, Copy)]
pub struct ClosedFormEvolution {
    params: SystemParams,
}

impl ClosedFormEvolution {
    pub fn new(params: SystemParams) -> Self {
        Self { params }
    }
}

impl Evolver for ClosedFormEvolution {
    fn evolve(&self, state: &StateVector, dt: f64) -> DynamicsResult<StateVector> {
        check_composite(&self.params, state)?;
        let edge = truncation_edge_population(&self.params, state);
        if edge >= EDGE_POPULATION_WARNING {
            warn!("population {edge:e} sits on the photon truncation edge |e, n_max>");
        }
        let shape = state.shape().clone();
        let input = state.amplitudes();
        let mut out = DVector::zeros(input.len());
        for k in Cavity::BOTH {
            for_each_w_block(&self.params, k, k.index(), dt, |block| match block {
                WBlock::Single { index, value } => {
                    let phase = lambda_phase(&self.params, k, &shape.multi_index(index), dt);
                    out[index] = phase * value * input[index];
                }
                WBlock::Pair { indices: [i, j], matrix } => {
                    let phase = lambda_phase(&self.params, k, &shape.multi_index(i), dt);
                    out[i] = phase * (matrix[0][0] * input[i] + matrix[0][1] * input[j]);
                    out[j] = phase * (matrix[1][0] * input[i] + matrix[1][1] * input[j]);
                }
            });
        }
        Ok(StateVector::from_amplitudes(shape, out)?)
    }
}

/// Evolution under the linear dispersive interaction Hamiltonian.
#[derive(Debug, Clone, Copy)]
pub struct DispersiveEvolution {
    params: SystemParams,
    shift: f64,
}

impl DispersiveEvolution {
    pub fn new(params: SystemParams) -> DynamicsResult<Self> {
        let (delta, lambda) = check_dispersive(&params)?;
        Ok(Self {
            params,
            shift: delta * lambda * lambda,
        })
    }

    /// The dispersive shift `Δλ² = g²/Δ`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    fn energy(&self, multi: &[usize]) -> f64 {
        dispersive_energy(&self.params, self.shift, multi)
    }
}

impl Evolver for DispersiveEvolution {
    fn evolve(&self, state: &StateVector, dt: f64) -> DynamicsResult<StateVector> {
        check_composite(&self.params, state)?;
        apply_diagonal(state, |m| self.energy(m), dt)
    }
}

impl Evolver for HermitianEigen {
    fn evolve(&self, state: &StateVector, dt: f64) -> DynamicsResult<StateVector> {
        if state.shape() != &self.shape {
            return Err(HilbertError::ShapeMismatch {
                left: self.shape.dims().to_vec(),
                right: state.shape().dims().to_vec(),
            }
            .into());
        }
        let mut coeffs = self.vectors.adjoint() * state.amplitudes();
        for (c, e) in coeffs.iter_mut().zip(self.values.iter()) {
            *c *= C64::from_polar(1.0, -e * dt);
        }
        let out = &self.vectors * coeffs;
        Ok(StateVector::from_amplitudes(self.shape.clone(), out)?)
    }
}

/// Population on `|e, n_max⟩` of the cavity the control branch couples to,
/// where the truncated coupling is dropped.
pub fn truncation_edge_population(params: &SystemParams, state: &StateVector) -> f64 {
    let n_max = params.n_max;
    state.diagonal_expectation(|m| {
        let k = m[0];
        if m[1] == EXCITED && m[2 + k] == n_max {
            1.0
        } else {
            0.0
        }
    })
}

/// `⟨N_k⟩` restricted to control branch `k`, together with that branch's
/// weight.
pub fn branch_excitation(state: &StateVector, k: Cavity) -> (f64, f64) {
    let weight = state.diagonal_expectation(|m| if m[0] == k.index() { 1.0 } else { 0.0 });
    let value = state.diagonal_expectation(|m| {
        if m[0] == k.index() {
            m[2 + k.index()] as f64 + atom_sign(m[1]) / 2.0
        } else {
            0.0
        }
    });
    (value, weight)
}

/// `⟨σ_z⟩` on a composite state.
pub fn inversion_of(state: &StateVector) -> f64 {
    state.diagonal_expectation(|m| atom_sign(m[1]))
}

/// `⟨a_k†a_k⟩` on a composite state.
pub fn photon_number_of(state: &StateVector, k: Cavity) -> f64 {
    state.diagonal_expectation(|m| m[2 + k.index()] as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{expectation, fock_state, tensor};
    use std::f64::consts::PI;

    fn params(n_max: usize) -> SystemParams {
        SystemParams::new(1.3, 1.1, 1.25, 0.21, 0.17, n_max).unwrap()
    }

    /// Deterministic pseudo-random numbers for test inputs.
    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
        fn state(&mut self, shape: &SpaceShape) -> StateVector {
            let v = (0..shape.total_dim())
                .map(|_| C64::new(self.next() - 0.5, self.next() - 0.5))
                .collect::<Vec<_>>();
            StateVector::normalized_from(shape.clone(), DVector::from_vec(v)).unwrap()
        }
    }

    #[test]
    fn free_hamiltonian_is_diagonal_energy() {
        let p = params(3);
        let h = free_hamiltonian(&p);
        let shape = p.shape();
        let e = StateVector::basis(shape.clone(), &[0, EXCITED, 0, 0]).unwrap();
        assert!((expectation(&h, &e).unwrap().re - p.omega_a / 2.0).abs() < 1e-15);
        let g = StateVector::basis(shape.clone(), &[0, GROUND, 2, 3]).unwrap();
        let expect = -p.omega_a / 2.0 + 2.0 * p.omega_0 + 3.0 * p.omega_1;
        assert!((expectation(&h, &g).unwrap().re - expect).abs() < 1e-14);
        assert!(h.hermiticity_residual() <= 1e-14);
    }

    #[test]
    fn interaction_hamiltonian_structure() {
        let p = params(4);
        let h = interaction_hamiltonian(&p).unwrap();
        assert!(h.hermiticity_residual() <= 1e-14);
        for k in Cavity::BOTH {
            let proj = embed(&qubit_projector(k.index()), 0, &p.shape()).unwrap();
            let n_blk = proj.mul(&excitation_operator(&p, k).unwrap()).unwrap();
            let comm = h.commutator(&n_blk).unwrap();
            assert!(comm.max_abs() <= 1e-12, "{}", comm.max_abs());
        }
        let decoupled = SystemParams { g_0: 0.0, g_1: 0.0, ..p };
        let h0 = interaction_hamiltonian(&decoupled).unwrap();
        assert!(h0.max_abs_diff(&free_hamiltonian(&decoupled)).unwrap() == 0.0);
    }

    #[test]
    fn klimov_identity_at_zero_time() {
        let p = params(5);
        for k in Cavity::BOTH {
            let w = klimov_w(&p, k, 0.0);
            let id = OperatorMatrix::identity(p.shape());
            assert!(w.max_abs_diff(&id).unwrap() < 1e-15);
        }
    }

    #[test]
    fn klimov_resonant_rabi_amplitudes() {
        let g = 0.37;
        let p = SystemParams::new(2.0, 2.0, 2.0, g, g, 6).unwrap();
        let dt = 1.9;
        let w = klimov_w(&p, Cavity::Zero, dt);
        for n in 0..6 {
            let psi = StateVector::basis(p.shape(), &[0, EXCITED, n, 2]).unwrap();
            let out = w.apply(&psi).unwrap();
            let rabi = g * ((n + 1) as f64).sqrt() * dt;
            assert!((out.amplitude(&[0, EXCITED, n, 2]) - C64::new(rabi.cos(), 0.0)).norm() < 1e-14);
            assert!((out.amplitude(&[0, GROUND, n + 1, 2]) - C64::new(0.0, -rabi.sin())).norm() < 1e-14);
        }
    }

    #[test]
    fn klimov_matches_numeric_exponential() {
        let mut rng = Lcg(7);
        for _ in 0..12 {
            let g0 = 2.0 * rng.next() - 1.0;
            let g1 = 2.0 * rng.next() - 1.0;
            let p = SystemParams::new(
                2.0,
                2.0 + (rng.next() - 0.5),
                2.0 + (rng.next() - 0.5),
                g0,
                g1,
                6,
            )
            .unwrap();
            let dt = 10.0 * rng.next();
            for k in Cavity::BOTH {
                let v = coupling_operator(&p, k).unwrap();
                let oracle = numeric_expm(&v, dt).unwrap();
                let closed = klimov_w(&p, k, dt);
                let diff = closed.max_abs_diff(oracle.matrix()).unwrap();
                assert!(diff <= 1e-10, "diff {diff}");
            }
        }
    }

    #[test]
    fn klimov_degenerate_point() {
        // g = Δ = 0: W is the identity, with sin(z)/z → 1.
        let p = SystemParams::new(1.0, 1.0, 1.0, 0.0, 0.0, 3).unwrap();
        let w = klimov_w(&p, Cavity::One, 4.0);
        assert!(w.max_abs_diff(&OperatorMatrix::identity(p.shape())).unwrap() < 1e-15);
    }

    #[test]
    fn controlled_propagator_basics() {
        let p = params(6);
        let u = controlled_propagator(&p, 1.0, 1.0).unwrap();
        assert!(u.matrix().max_abs_diff(&OperatorMatrix::identity(p.shape())).unwrap() < 1e-15);
        assert_eq!(
            controlled_propagator(&p, 2.0, 1.0).unwrap_err(),
            DynamicsError::Interval { t0: 2.0, t: 1.0 }
        );

        let u = controlled_propagator(&p, 0.0, 3.7).unwrap();
        assert!(u.unitarity_residual() <= UNITARITY_TOLERANCE);
        // Control in |0⟩: field 1 only picks up a phase.
        let c0 = StateVector::basis(SpaceShape::qubit(), &[0]).unwrap();
        let e = StateVector::basis(SpaceShape::qubit(), &[EXCITED]).unwrap();
        let psi = tensor(&[&c0, &e, &fock_state(2, 6).unwrap(), &fock_state(3, 6).unwrap()]).unwrap();
        let out = u.apply(&psi).unwrap();
        assert!((photon_number_of(&out, Cavity::One) - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn controlled_propagator_matches_numeric_oracle() {
        let mut rng = Lcg(99);
        for case in 0..4 {
            let p = SystemParams::new(
                1.5,
                1.5 + 0.3 * (rng.next() - 0.5),
                1.5 + 0.3 * (rng.next() - 0.5),
                rng.next(),
                rng.next(),
                6,
            )
            .unwrap();
            let t0 = rng.next();
            let t = t0 + 15.0 * rng.next();
            let closed = controlled_propagator(&p, t0, t).unwrap();
            let h = interaction_hamiltonian(&p).unwrap();
            let eig = HermitianEigen::new(&h).unwrap();
            let oracle = eig.exponential(t - t0).unwrap();
            let diff = closed.matrix().max_abs_diff(&oracle).unwrap();
            assert!(diff <= 1e-9, "case {case}: {diff}");
            for _ in 0..3 {
                let psi = rng.state(&p.shape());
                let a = closed.apply(&psi).unwrap();
                let b = eig.evolve(&psi, t - t0).unwrap();
                let c = ClosedFormEvolution::new(p).evolve(&psi, t - t0).unwrap();
                assert!((a.amplitudes() - b.amplitudes()).camax() <= 1e-9);
                assert!((a.amplitudes() - c.amplitudes()).camax() <= 1e-13);
            }
        }
    }

    #[test]
    fn numeric_expm_basics() {
        let h = OperatorMatrix::zeros(SpaceShape::qubit());
        let u = numeric_expm(&h, 3.0).unwrap();
        assert!(u.matrix().max_abs_diff(&OperatorMatrix::identity(SpaceShape::qubit())).unwrap() < 1e-15);

        let u = numeric_expm(&sigma_z(), PI).unwrap();
        let minus_id = OperatorMatrix::identity(SpaceShape::qubit()).scale(-1.0);
        assert!(u.matrix().max_abs_diff(&minus_id).unwrap() < 1e-15);

        assert!(matches!(
            numeric_expm(&sigma_plus(), 1.0),
            Err(DynamicsError::NotHermitian(_))
        ));
    }

    #[test]
    fn numeric_semigroup() {
        let p = params(3);
        let h = interaction_hamiltonian(&p).unwrap();
        let eig = HermitianEigen::new(&h).unwrap();
        let one = eig.exponential(1.7).unwrap();
        let two = eig.exponential(3.4).unwrap();
        assert!(one.mul(&one).unwrap().max_abs_diff(&two).unwrap() <= 1e-10);
    }

    #[test]
    fn adjacent_intervals_compose() {
        let p = params(4);
        let a = controlled_propagator(&p, 0.0, 1.3).unwrap();
        let b = controlled_propagator(&p, 1.3, 4.0).unwrap();
        let whole = controlled_propagator(&p, 0.0, 4.0).unwrap();
        let composed = a.then(&b).unwrap();
        assert_eq!(composed.interval(), (0.0, 4.0));
        assert!(composed.matrix().max_abs_diff(whole.matrix()).unwrap() <= 1e-9);
        assert!(matches!(b.then(&a), Err(DynamicsError::Composition(_))));
    }

    #[test]
    fn excitation_conserved_per_branch() {
        let p = params(8);
        let mut rng = Lcg(3);
        // keep weight off the truncation edge
        let shape = p.shape();
        let amps = (0..shape.total_dim())
            .map(|i| {
                let m = shape.multi_index(i);
                if m[2] < 5 && m[3] < 5 {
                    C64::new(rng.next() - 0.5, rng.next() - 0.5)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect::<Vec<_>>();
        let psi = StateVector::normalized_from(shape, DVector::from_vec(amps)).unwrap();
        let evo = ClosedFormEvolution::new(p);
        for k in Cavity::BOTH {
            let (n_start, w_start) = branch_excitation(&psi, k);
            for &dt in &[0.5, 3.0, 17.0] {
                let out = evo.evolve(&psi, dt).unwrap();
                let (n_end, w_end) = branch_excitation(&out, k);
                assert!((n_end - n_start).abs() <= 1e-10);
                assert!((w_end - w_start).abs() <= 1e-12);
                assert!((out.norm() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dispersive_propagator_is_diagonal_with_expected_phase() {
        let g = 0.01;
        let delta = 1.0;
        let omega = 5.0;
        let p = SystemParams::identical(omega + delta, omega, g, 6).unwrap();
        let t_m = PI * delta / (2.0 * g * g);
        let u = dispersive_propagator(&p, t_m).unwrap();
        let m = u.matrix().matrix();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if i != j {
                    assert_eq!(m[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
        let shift = delta * (g / delta).powi(2);
        for n in 0..=6 {
            for mm in 0..=6 {
                let idx = p.shape().index(&[0, EXCITED, n, mm]);
                let angle = -((p.omega_a + shift) / 2.0
                    + (omega + shift) * n as f64
                    + shift / 2.0
                    + omega * mm as f64)
                    * t_m;
                assert!((m[(idx, idx)] - C64::from_polar(1.0, angle)).norm() < 1e-9);
            }
        }
        assert!(u.unitarity_residual() <= UNITARITY_TOLERANCE);
    }

    #[test]
    fn dispersive_refuses_outside_regime() {
        let p = SystemParams::identical(6.0, 5.0, 0.1, 6).unwrap();
        assert!(matches!(dispersive_propagator(&p, 1.0), Err(DynamicsError::Regime(_))));
        let p = SystemParams::identical(5.0, 5.0, 0.01, 6).unwrap();
        assert!(matches!(dispersive_propagator(&p, 1.0), Err(DynamicsError::Regime(_))));
        let p = SystemParams::new(6.0, 5.0, 5.1, 0.001, 0.001, 6).unwrap();
        assert!(matches!(dispersive_propagator(&p, 1.0), Err(DynamicsError::Regime(_))));
        // λ = 0.019 is fine at n_max = 6 but not at n_max = 28 + λ² load
        let p = SystemParams::identical(6.0, 5.0, 0.019, 28).unwrap();
        assert!(dispersive_propagator(&SystemParams { n_max: 4, ..p }, 1.0).is_ok());
        let p = SystemParams::identical(6.0, 5.0, 0.0195, 28).unwrap();
        assert!(matches!(DispersiveEvolution::new(p), Err(DynamicsError::Regime(_))));
    }

    #[test]
    fn rwa_warning_channel() {
        let p = SystemParams::new(1.0, 1.0, 1.0, 0.05, 0.5, 2).unwrap();
        let w = p.rwa_warnings();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].cavity, Cavity::One);
        assert!(SystemParams::new(-1.0, 1.0, 1.0, 0.1, 0.1, 2).is_err());
        assert!(SystemParams::new(1.0, 1.0, 1.0, 0.1, 0.1, 0).is_err());
    }

    #[test]
    fn free_evolution_matches_exponential() {
        let p = params(3);
        let mut rng = Lcg(11);
        let psi = rng.state(&p.shape());
        let a = FreeEvolution::new(p).evolve(&psi, 2.2).unwrap();
        let b = numeric_expm(&free_hamiltonian(&p), 2.2).unwrap().apply(&psi).unwrap();
        assert!((a.amplitudes() - b.amplitudes()).camax() < 1e-12);
    }
}
