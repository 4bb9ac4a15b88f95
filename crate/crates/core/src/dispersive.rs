//! Atom crossing both cavities far off resonance, with coherent fields.
//!
//! The atom is prepared in `(|g⟩ + e^{iχ}|e⟩)/√2` with the control in `|+⟩_c`
//! and both fields in `|α⟩`. It flies freely until `T₀`, interacts for
//! `t_m = (2m−1)π|Δ|/(2g²)` and flies freely again until the control and the
//! atom are measured at `t`. In the linear dispersive approximation the field
//! of the visited cavity acquires an atom-dependent rotation by `±π/2`, which
//! leaves cat and Bell-like states after the measurements.
//!
//! The usual formulas assume `Δ > 0`. Every `(−1)^m` below is replaced
//! by `σ = sign(Δ)(−1)^m`, which is the same thing when `Δ > 0` and keeps the
//! constructions exact when `Δ < 0`.

use std::f64::consts::{LN_10, PI, TAU};

use log::debug;
use thiserror::Error;

use crate::dynamics::{
    ClosedFormEvolution, DispersiveEvolution, DynamicsError, Evolver, FreeEvolution,
    SystemParams, DISPERSIVE_MAX_LAMBDA, DISPERSIVE_MAX_PHOTON_LOAD, EXCITED, GROUND,
};
use crate::hilbert::{coherent_state, tensor, HilbertError, StateVector, C64};
use crate::measurement::{
    atom_x_basis, atom_z_basis, control_pm_basis, measure, MeasurementError, ZERO_PROBABILITY,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersiveError {
    #[error("dispersive regime violated: {0}")]
    Regime(RegimeReport),

    #[error("invalid dispersive scenario: {0}")]
    InvalidScenario(String),

    #[error("{0} is undefined: its normalization vanishes")]
    Degenerate(&'static str),

    #[error(transparent)]
    Dynamics(#[from] DynamicsError),

    #[error(transparent)]
    Hilbert(#[from] HilbertError),

    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

pub type DispersiveResult<T> = Result<T, DispersiveError>;

/// Outcome of the control measurement in `{|+⟩_c, |−⟩_c}`.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum ControlOutcome {
    Plus,
    Minus,
}

impl ControlOutcome {
    pub const ALL: [ControlOutcome; 2] = [ControlOutcome::Plus, ControlOutcome::Minus];

    pub fn label(self) -> &'static str {
        match self {
            Self::Plus => "+",
            Self::Minus => "-",
        }
    }

    fn sign(self) -> f64 {
        match self {
            Self::Plus => 1.0,
            Self::Minus => -1.0,
        }
    }
}

/// Outcome of the atom measurement that follows.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum AtomOutcome {
    Excited,
    Ground,
    PlusX,
    MinusX,
}

impl AtomOutcome {
    pub const ALL: [AtomOutcome; 4] = [
        AtomOutcome::Excited,
        AtomOutcome::Ground,
        AtomOutcome::PlusX,
        AtomOutcome::MinusX,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Excited => "e",
            Self::Ground => "g",
            Self::PlusX => "+x",
            Self::MinusX => "-x",
        }
    }

    fn basis_vector(self) -> [C64; 2] {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        match self {
            Self::Excited => [one, zero],
            Self::Ground => [zero, one],
            Self::PlusX => [h, h],
            Self::MinusX => [h, -h],
        }
    }
}

/// Coherent amplitude, atomic phase, schedule and timing of one run.
#[derive(Debug, Copy, Clone, PartialEq)]
pub struct DispersiveScenario {
    pub alpha: C64,
    pub chi: f64,
    /// Schedule index `m ≥ 1` of `t_m = (2m−1)π|Δ|/(2g²)`.
    pub m: usize,
    /// Entry time into the cavities (s).
    pub t0: f64,
    /// Measurement time (s), `t ≥ T₀ + t_m`.
    pub t: f64,
    pub params: SystemParams,
}

/// Regime check at the photon cutoff estimated from `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub lambda: f64,
    /// `⌈|α|² + 10|α|⌉`.
    pub n_max_estimate: usize,
    /// `λ²(n_max + 1)`.
    pub photon_load: f64,
    /// `0.02 − λ`; negative when violated.
    pub lambda_margin: f64,
    /// `10⁻² − λ²(n_max + 1)`; negative when violated.
    pub load_margin: f64,
}

impl RegimeReport {
    pub fn passes(&self) -> bool {
        self.lambda_margin >= 0.0 && self.load_margin >= 0.0
    }
}

impl std::fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "lambda = {:.6} (limit {DISPERSIVE_MAX_LAMBDA}), lambda^2 (n_max + 1) = {:.6} \
             at n_max = {} (limit {DISPERSIVE_MAX_PHOTON_LOAD})",
            self.lambda, self.photon_load, self.n_max_estimate
        )
    }
}

/// `⌈|α|² + 10|α|⌉`, the mean plus ten standard deviations of the photon
/// number.
pub fn n_max_estimate(alpha_sq: f64) -> usize {
    (alpha_sq + 10.0 * alpha_sq.sqrt()).ceil() as usize
}

/// Largest `λ` with `λ²(n_max + 1) ≤ 10⁻²`.
pub fn max_lambda_for(n_max: usize) -> f64 {
    (DISPERSIVE_MAX_PHOTON_LOAD / (n_max + 1) as f64).sqrt()
}

/// `σ = sign(Δ)(−1)^m`.
pub fn schedule_sign(m: usize, delta: f64) -> f64 {
    let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
    parity * delta.signum()
}

/// `t_m = (2m−1)π|Δ|/(2g²)`, after which the dispersive phase `g²t_m/Δ` is
/// `±(2m−1)π/2`.
pub fn interaction_time(m: usize, params: &SystemParams) -> DispersiveResult<f64> {
    let delta = params.detuning(crate::dynamics::Cavity::Zero);
    let g = params.g_0;
    if delta == 0.0 {
        return Err(DispersiveError::InvalidScenario(
            "the interaction schedule is undefined on resonance (Delta = 0)".into(),
        ));
    }
    if g == 0.0 {
        return Err(DispersiveError::InvalidScenario("the schedule needs g != 0".into()));
    }
    if m == 0 {
        return Err(DispersiveError::InvalidScenario("m must be at least 1".into()));
    }
    Ok((2 * m - 1) as f64 * PI * delta.abs() / (2.0 * g * g))
}

/// `Θ = (−1)^m(χ − ω_a t)` reduced to `[0, 2π)`.
pub fn theta_param(m: usize, chi: f64, omega_a: f64, t: f64) -> f64 {
    let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
    (parity * (chi - omega_a * t)).rem_euclid(TAU)
}

/// Earliest `t ≥ t_min` with `theta_param(m, χ, ω_a, t) = Θ`.
pub fn time_for_theta(m: usize, chi: f64, omega_a: f64, theta: f64, t_min: f64) -> f64 {
    let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
    time_for_signed_theta(parity, chi, omega_a, theta, t_min)
}

/// Earliest `t ≥ t_min` with `σ(χ − ω_a t) = Θ` mod 2π.
pub fn time_for_signed_theta(sigma: f64, chi: f64, omega_a: f64, theta: f64, t_min: f64) -> f64 {
    let base = (chi - sigma * theta) / omega_a;
    let period = TAU / omega_a;
    let k = ((t_min - base) / period).ceil();
    base + k * period
}

/// Probability of finding both fields in `|cat⟩₀|cat⟩₁` after the outcomes
/// `+` and `+x`:
/// `𝒫 = 2[1 − sin(Θ + 2|α|²)] / [e^{2|α|²} + 1 − sin Θ − sin(Θ + 2|α|²)]`.
pub fn double_cat_probability(theta: f64, alpha_sq: f64) -> f64 {
    let s2 = (theta + 2.0 * alpha_sq).sin();
    2.0 * (1.0 - s2) / ((2.0 * alpha_sq).exp() + 1.0 - theta.sin() - s2)
}

/// `𝒩 = √2 √(1 − σ e^{−2|α|²} sin(χ − ω_a t))`.
pub fn cat_norm(sigma: f64, alpha_sq: f64, chi: f64, omega_a: f64, t: f64) -> f64 {
    (2.0 * (1.0 - sigma * (-2.0 * alpha_sq).exp() * (chi - omega_a * t).sin())).sqrt()
}

/// `𝒩_Bell = √2 √(1 + e^{−2|α|²})`.
pub fn bell_norm_plus(alpha_sq: f64) -> f64 {
    (2.0 * (1.0 + (-2.0 * alpha_sq).exp())).sqrt()
}

/// `𝒩_bell = √2 √(1 − e^{−2|α|²})`.
pub fn bell_norm_minus(alpha_sq: f64) -> f64 {
    (2.0 * (1.0 - (-2.0 * alpha_sq).exp())).sqrt()
}

impl DispersiveScenario {
    pub fn alpha_sq(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    pub fn delta(&self) -> f64 {
        self.params.detuning(crate::dynamics::Cavity::Zero)
    }

    pub fn omega(&self) -> f64 {
        self.params.omega_0
    }

    pub fn sigma(&self) -> f64 {
        schedule_sign(self.m, self.delta())
    }

    pub fn interaction_time(&self) -> DispersiveResult<f64> {
        interaction_time(self.m, &self.params)
    }

    /// `Θ = σ(χ − ω_a t)` in `[0, 2π)`.
    pub fn theta(&self) -> f64 {
        (self.sigma() * (self.chi - self.params.omega_a * self.t)).rem_euclid(TAU)
    }

    /// `α_m(t) = iσ α e^{−iωt}`.
    pub fn alpha_m(&self) -> C64 {
        C64::new(0.0, self.sigma()) * self.down_amplitude()
    }

    /// `α e^{−iωt}`, the freely rotated amplitude of an unvisited cavity.
    pub fn down_amplitude(&self) -> C64 {
        self.alpha * C64::from_polar(1.0, -self.omega() * self.t)
    }

    /// `iσ e^{i(χ − ω_a t)}`, the weight of `|e⟩|α_m⟩` against `|g⟩|−α_m⟩`.
    pub fn relative_phase(&self) -> C64 {
        C64::new(0.0, self.sigma()) * C64::from_polar(1.0, self.chi - self.params.omega_a * self.t)
    }

    pub fn validate(&self) -> DispersiveResult<()> {
        if !self.params.is_identical() {
            return Err(DispersiveError::InvalidScenario(
                "the cavities must be identical (omega_0 = omega_1, g_0 = g_1)".into(),
            ));
        }
        if !(self.params.g_0 > 0.0) {
            return Err(DispersiveError::InvalidScenario("g must be positive".into()));
        }
        let t_m = self.interaction_time()?;
        if !(self.t0 >= 0.0) || !(self.t >= self.t0 + t_m) {
            return Err(DispersiveError::InvalidScenario(format!(
                "need T0 >= 0 and t >= T0 + t_m = {}",
                self.t0 + t_m
            )));
        }
        if !self.alpha.re.is_finite() || !self.alpha.im.is_finite() || !self.chi.is_finite() {
            return Err(DispersiveError::InvalidScenario("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// Regime report with the cutoff estimated from `α`.
pub fn validate_regime(s: &DispersiveScenario) -> RegimeReport {
    let lambda = s.params.dispersive_lambda(crate::dynamics::Cavity::Zero).unwrap_or(f64::INFINITY);
    let n_max_estimate = n_max_estimate(s.alpha_sq());
    let photon_load = lambda * lambda * (n_max_estimate + 1) as f64;
    RegimeReport {
        lambda,
        n_max_estimate,
        photon_load,
        lambda_margin: DISPERSIVE_MAX_LAMBDA - lambda,
        load_margin: DISPERSIVE_MAX_PHOTON_LOAD - photon_load,
    }
}

fn require_regime(s: &DispersiveScenario) -> DispersiveResult<()> {
    let report = validate_regime(s);
    if !report.passes() {
        return Err(DispersiveError::Regime(report));
    }
    Ok(())
}

/// Advisory distinguishability figures; none of them is enforced.
#[derive(Debug, Copy, Clone, PartialEq)]
pub struct Distinguishability {
    /// `|⟨−α_m|α_m⟩| = e^{−2|α|²}`.
    pub cat_overlap: f64,
    /// `|⟨↓|↑±⟩| = e^{−|α|²}`.
    pub up_down_overlap: f64,
    /// `2e^{−|α|²}/𝒩`, a bound on `|⟨↓|cat⟩|`.
    pub down_cat_bound: f64,
}

impl Distinguishability {
    /// `|α|² ≥ ln 10`.
    pub fn cat_resolved(&self) -> bool {
        self.cat_overlap <= 1e-2
    }

    /// `|α|² ≥ 2 ln 10`.
    pub fn bell_resolved(&self) -> bool {
        self.up_down_overlap <= 1e-2
    }

    pub fn down_cat_resolved(&self) -> bool {
        self.down_cat_bound < 1e-2
    }
}

/// Field states available after the atom leaves the cavities.
#[derive(Debug, Clone)]
pub struct CatBellStates {
    /// `(|−α_m⟩ + iσe^{i(χ−ω_a t)}|α_m⟩)/𝒩`, the same single-mode state in
    /// either cavity.
    pub cat: StateVector,
    pub up_plus: StateVector,
    pub up_minus: StateVector,
    pub down: StateVector,
    /// `(|↑±⟩|↓⟩ + |↓⟩|↑±⟩)/𝒩_Bell`.
    pub bell_big_plus: StateVector,
    pub bell_big_minus: StateVector,
    /// `(|↑±⟩|↓⟩ − |↓⟩|↑±⟩)/𝒩_bell`; `None` when `𝒩_bell` vanishes.
    pub bell_small_plus: Option<StateVector>,
    pub bell_small_minus: Option<StateVector>,
    /// Norms measured on the truncated states.
    pub cat_norm: f64,
    pub bell_big_norm: f64,
    pub bell_small_norm: f64,
    pub guards: Distinguishability,
}

fn coherent(beta: C64, n_max: usize) -> DispersiveResult<StateVector> {
    Ok(coherent_state(beta, n_max)?.state)
}

fn normalize_or_none(v: StateVector) -> (f64, Option<StateVector>) {
    let n = v.norm();
    if n * n < ZERO_PROBABILITY {
        (n, None)
    } else {
        (n, Some(v.scaled(C64::new(1.0 / n, 0.0))))
    }
}

fn two_mode_sum(a: &StateVector, b: &StateVector, sign: f64) -> DispersiveResult<StateVector> {
    let ab = tensor(&[a, b])?;
    let ba = tensor(&[b, a])?;
    Ok(ab.add_scaled(&ba, C64::new(sign, 0.0))?)
}

/// `|cat⟩` for a given relative phase.
fn cat_state(
    up_plus: &StateVector,
    up_minus: &StateVector,
    phase: C64,
) -> DispersiveResult<(f64, Option<StateVector>)> {
    Ok(normalize_or_none(up_minus.add_scaled(up_plus, phase)?))
}

pub fn build_states(s: &DispersiveScenario) -> DispersiveResult<CatBellStates> {
    s.validate()?;
    let n_max = s.params.n_max;
    let up_plus = coherent(s.alpha_m(), n_max)?;
    let up_minus = coherent(-s.alpha_m(), n_max)?;
    let down = coherent(s.down_amplitude(), n_max)?;

    let (cat_norm, cat) = cat_state(&up_plus, &up_minus, s.relative_phase())?;
    let cat = cat.ok_or(DispersiveError::Degenerate("the cat state"))?;
    let (bell_big_norm, bell_big_plus) = normalize_or_none(two_mode_sum(&up_plus, &down, 1.0)?);
    let (_, bell_big_minus) = normalize_or_none(two_mode_sum(&up_minus, &down, 1.0)?);
    let (bell_small_norm, bell_small_plus) =
        normalize_or_none(two_mode_sum(&up_plus, &down, -1.0)?);
    let (_, bell_small_minus) = normalize_or_none(two_mode_sum(&up_minus, &down, -1.0)?);

    let a2 = s.alpha_sq();
    let guards = Distinguishability {
        cat_overlap: (-2.0 * a2).exp(),
        up_down_overlap: (-a2).exp(),
        down_cat_bound: 2.0 * (-a2).exp() / cat_norm,
    };
    if a2 < LN_10 {
        debug!("|alpha|^2 = {a2} < ln 10: the cat components overlap by more than 1e-2");
    }
    Ok(CatBellStates {
        cat,
        up_plus,
        up_minus,
        down,
        bell_big_plus: bell_big_plus.ok_or(DispersiveError::Degenerate("|Bell+>"))?,
        bell_big_minus: bell_big_minus.ok_or(DispersiveError::Degenerate("|Bell->"))?,
        bell_small_plus,
        bell_small_minus,
        cat_norm,
        bell_big_norm,
        bell_small_norm,
        guards,
    })
}

/// `|ψ(0)⟩ = |+⟩_c ⊗ (|g⟩ + e^{iχ}|e⟩)/√2 ⊗ |α⟩₀ ⊗ |α⟩₁`.
pub fn initial_state(s: &DispersiveScenario) -> DispersiveResult<StateVector> {
    let n_max = s.params.n_max;
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let control = StateVector::qubit(h, h)?;
    let atom = StateVector::qubit(C64::from_polar(1.0, s.chi), C64::new(1.0, 0.0))?;
    let field = coherent(s.alpha, n_max)?;
    Ok(tensor(&[&control, &atom, &field, &field])?)
}

/// `|ψ(t)⟩` written out from the dispersive solution, without the global
/// phase `e^{iω_a t/2}`:
/// `(|0⟩_c|ψ₀(t)⟩|↓⟩₁ + |1⟩_c|↓⟩₀|ψ₁(t)⟩)/√2` with
/// `|ψ_k(t)⟩ = (|g⟩|−α_m⟩_k + iσe^{i(χ−ω_a t)}|e⟩|α_m⟩_k)/√2`.
pub fn evolved_state(s: &DispersiveScenario) -> DispersiveResult<StateVector> {
    s.validate()?;
    let n_max = s.params.n_max;
    let up_plus = coherent(s.alpha_m(), n_max)?;
    let up_minus = coherent(-s.alpha_m(), n_max)?;
    let down = coherent(s.down_amplitude(), n_max)?;
    let q = |k: usize| {
        let mut v = [C64::new(0.0, 0.0); 2];
        v[k] = C64::new(1.0, 0.0);
        StateVector::qubit(v[0], v[1])
    };
    let (c0, c1, e, g) = (q(0)?, q(1)?, q(EXCITED)?, q(GROUND)?);
    let phase = s.relative_phase();
    let terms = [
        tensor(&[&c0, &g, &up_minus, &down])?,
        tensor(&[&c0, &e, &up_plus, &down])?.scaled(phase),
        tensor(&[&c1, &g, &down, &up_minus])?,
        tensor(&[&c1, &e, &down, &up_plus])?.scaled(phase),
    ];
    let mut psi = terms[0].clone();
    for t in &terms[1..] {
        psi = psi.add_scaled(t, C64::new(1.0, 0.0))?;
    }
    Ok(psi.scaled(C64::new(0.5, 0.0)))
}

/// Composite state after the two measurements, built from the cat and Bell
/// states, with its joint probability.
#[derive(Debug, Clone)]
pub struct ConditionedState {
    pub state: StateVector,
    pub probability: f64,
}

/// Two-field state left by the given outcomes, unnormalized.
fn conditioned_fields(
    s: &DispersiveScenario,
    states: &CatBellStates,
    control: ControlOutcome,
    atom: AtomOutcome,
) -> DispersiveResult<StateVector> {
    let small = |v: &Option<StateVector>, name| v.clone().ok_or(DispersiveError::Degenerate(name));
    Ok(match (control, atom) {
        (ControlOutcome::Plus, AtomOutcome::Excited) => states.bell_big_plus.clone(),
        (ControlOutcome::Plus, AtomOutcome::Ground) => states.bell_big_minus.clone(),
        (ControlOutcome::Minus, AtomOutcome::Excited) => small(&states.bell_small_plus, "|bell+>")?,
        (ControlOutcome::Minus, AtomOutcome::Ground) => small(&states.bell_small_minus, "|bell->")?,
        (c, AtomOutcome::PlusX) => two_mode_sum(&states.cat, &states.down, c.sign())?,
        (c, AtomOutcome::MinusX) => {
            // χ → χ + π
            let (_, cat) = cat_state(&states.up_plus, &states.up_minus, -s.relative_phase())?;
            let cat = cat.ok_or(DispersiveError::Degenerate("the cat state"))?;
            two_mode_sum(&cat, &states.down, c.sign())?
        }
    })
}

/// Joint probability of the two outcomes on the dispersive solution.
pub fn outcome_probability(
    s: &DispersiveScenario,
    control: ControlOutcome,
    atom: AtomOutcome,
) -> DispersiveResult<f64> {
    let psi = evolved_state(s)?;
    joint_probability(&psi, control, atom)
}

fn atom_basis_for(atom: AtomOutcome) -> crate::measurement::MeasurementBasis {
    match atom {
        AtomOutcome::Excited | AtomOutcome::Ground => atom_z_basis(),
        AtomOutcome::PlusX | AtomOutcome::MinusX => atom_x_basis(),
    }
}

/// Joint probability of the two outcomes on an arbitrary composite state.
pub fn joint_probability(
    psi: &StateVector,
    control: ControlOutcome,
    atom: AtomOutcome,
) -> DispersiveResult<f64> {
    match pipeline_conditioned(psi, control, atom) {
        Ok(c) => Ok(c.probability),
        Err(DispersiveError::Measurement(MeasurementError::ZeroProbability { .. })) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Measures the control, then the atom, on an arbitrary composite state.
pub fn pipeline_conditioned(
    psi: &StateVector,
    control: ControlOutcome,
    atom: AtomOutcome,
) -> DispersiveResult<ConditionedState> {
    let first = measure(psi, &control_pm_basis(), control.label())?;
    let second = measure(&first.post_state, &atom_basis_for(atom), atom.label())?;
    Ok(ConditionedState {
        state: second.post_state,
        probability: first.probability * second.probability,
    })
}

/// `|c⟩_c ⊗ |a⟩ ⊗ fields`, normalized, with the joint outcome probability.
pub fn conditioned_state(
    s: &DispersiveScenario,
    control: ControlOutcome,
    atom: AtomOutcome,
) -> DispersiveResult<ConditionedState> {
    require_regime(s)?;
    let states = build_states(s)?;
    let fields = conditioned_fields(s, &states, control, atom)?;
    if fields.norm().powi(2) < ZERO_PROBABILITY {
        return Err(MeasurementError::ZeroProbability {
            outcome: format!("{}, {}", control.label(), atom.label()),
            probability: 0.0,
        }
        .into());
    }
    let fields = fields.scaled(C64::new(1.0 / fields.norm(), 0.0));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = StateVector::qubit(C64::new(h, 0.0), C64::new(control.sign() * h, 0.0))?;
    let [ae, ag] = atom.basis_vector();
    let a = StateVector::qubit(ae, ag)?;
    Ok(ConditionedState {
        state: tensor(&[&c, &a, &fields])?,
        probability: outcome_probability(s, control, atom)?,
    })
}

/// `|⟨cat|⟨cat| fields⟩|²` for the fields left by `control` and `atom`,
/// from inner products of the truncated states.
pub fn double_cat_probability_from_states(
    s: &DispersiveScenario,
    control: ControlOutcome,
    atom: AtomOutcome,
) -> DispersiveResult<f64> {
    let states = build_states(s)?;
    let fields = conditioned_fields(s, &states, control, atom)?;
    let norm = fields.norm();
    if norm * norm < ZERO_PROBABILITY {
        return Err(DispersiveError::Degenerate("the conditioned field state"));
    }
    let cat_cat = tensor(&[&states.cat, &states.cat])?;
    Ok((cat_cat.inner(&fields)?.norm() / norm).powi(2))
}

fn piecewise(
    s: &DispersiveScenario,
    interaction: &dyn Evolver,
) -> DispersiveResult<StateVector> {
    s.validate()?;
    let t_m = s.interaction_time()?;
    let free = FreeEvolution::new(s.params);
    let psi = initial_state(s)?;
    let psi = free.evolve(&psi, s.t0)?;
    let psi = interaction.evolve(&psi, t_m)?;
    Ok(free.evolve(&psi, s.t - s.t0 - t_m)?)
}

/// `|ψ(t)⟩` by free flight, dispersive interaction, free flight.
pub fn simulate_dispersive(s: &DispersiveScenario) -> DispersiveResult<StateVector> {
    require_regime(s)?;
    piecewise(s, &DispersiveEvolution::new(s.params)?)
}

/// `|ψ(t)⟩` with the exact JC interaction in place of the dispersive one.
pub fn simulate_exact(s: &DispersiveScenario) -> DispersiveResult<StateVector> {
    piecewise(s, &ClosedFormEvolution::new(s.params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::fidelity;

    fn scenario(alpha_sq: f64, m: usize, delta: f64, n_max: usize) -> DispersiveScenario {
        let omega = 10.0;
        let g = 0.015 * delta.abs();
        let params = SystemParams::identical(omega + delta, omega, g, n_max).unwrap();
        let t_m = interaction_time(m, &params).unwrap();
        DispersiveScenario {
            alpha: C64::from_polar(alpha_sq.sqrt(), 0.4),
            chi: 0.9,
            m,
            t0: 3.0,
            t: 3.0 + t_m + 1.7,
            params,
        }
    }

    #[test]
    fn regime_examples() {
        assert!((max_lambda_for(100) - 0.00995).abs() < 1e-5);
        assert!((max_lambda_for(28) * 1000.0).round() / 1000.0 == 0.019);
        assert_eq!(n_max_estimate(5.0), 28);
        let s = scenario(1.155, 1, 1.0, 16);
        let r = validate_regime(&s);
        assert!(r.passes(), "{r}");
        let bad = DispersiveScenario {
            params: SystemParams::identical(11.0, 10.0, 0.03, 16).unwrap(),
            ..s
        };
        assert!(!validate_regime(&bad).passes());
    }

    #[test]
    fn interaction_time_schedule() {
        let s = scenario(1.0, 1, 1.0, 12);
        let t1 = interaction_time(1, &s.params).unwrap();
        let t2 = interaction_time(2, &s.params).unwrap();
        assert!((t2 - 3.0 * t1).abs() < 1e-9 * t2);
        let lam = s.params.dispersive_lambda(crate::dynamics::Cavity::Zero).unwrap();
        assert!((lam * lam * s.delta().abs() * t1 - PI / 2.0).abs() < 1e-12);
        let res = SystemParams::identical(10.0, 10.0, 0.01, 4).unwrap();
        assert!(interaction_time(1, &res).is_err());
    }

    #[test]
    fn theta_round_trip() {
        assert_eq!(theta_param(2, 0.0, 7.0, 0.0), 0.0);
        let a = theta_param(1, 0.4, 3.0, 2.2);
        let b = theta_param(2, 0.4, 3.0, 2.2);
        assert!(((a + b).rem_euclid(TAU)).min(TAU - (a + b).rem_euclid(TAU)) < 1e-12);
        for m in 1..4 {
            let t = time_for_theta(m, 0.4, 3.0, 2.25, 100.0);
            assert!(t >= 100.0 && t < 100.0 + TAU / 3.0);
            assert!((theta_param(m, 0.4, 3.0, t) - 2.25).abs() < 1e-9);
        }
    }

    #[test]
    fn double_cat_known_point() {
        let p = double_cat_probability(2.25, 1.155);
        assert!((p - 0.35).abs() < 0.005, "{p}");
        assert!(double_cat_probability(1.0, 30.0) < 1e-12);
    }

    #[test]
    fn norms_match_closed_forms() {
        for (a2, m, delta) in [(1.155, 1, 1.0), (2.3, 2, 1.0), (0.4, 1, -1.0), (3.0, 3, -2.0)] {
            let s = scenario(a2, m, delta, 40);
            let st = build_states(&s).unwrap();
            let n = cat_norm(s.sigma(), a2, s.chi, s.params.omega_a, s.t);
            assert!((st.cat_norm - n).abs() < 1e-9);
            assert!((st.bell_big_norm - bell_norm_plus(a2)).abs() < 1e-9);
            assert!((st.bell_small_norm - bell_norm_minus(a2)).abs() < 1e-9);
            let ud = st.down.inner(&st.up_plus).unwrap().norm();
            assert!((ud - (-a2).exp()).abs() < 1e-9);
            assert!(st.guards.cat_resolved() == (a2 >= LN_10));
        }
    }

    #[test]
    fn vacuum_has_no_small_bell_states() {
        let mut s = scenario(1.0, 1, 1.0, 10);
        s.alpha = C64::new(0.0, 0.0);
        let st = build_states(&s).unwrap();
        assert!(st.bell_small_plus.is_none() && st.bell_small_minus.is_none());
        assert!(matches!(
            conditioned_state(&s, ControlOutcome::Minus, AtomOutcome::Excited),
            Err(DispersiveError::Degenerate(_))
        ));
    }

    #[test]
    fn written_solution_matches_propagation() {
        for (a2, m, delta) in [(1.155, 1, 1.0), (0.8, 2, 1.0), (1.155, 1, -1.0), (0.5, 3, -1.0)] {
            let s = scenario(a2, m, delta, 16);
            let a = simulate_dispersive(&s).unwrap();
            let b = evolved_state(&s).unwrap();
            assert!(fidelity(&a, &b).unwrap() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn entry_time_does_not_matter() {
        let s = scenario(1.155, 1, 1.0, 16);
        let later = DispersiveScenario { t0: 0.0, ..s };
        let a = simulate_dispersive(&s).unwrap();
        let b = simulate_dispersive(&later).unwrap();
        assert!(fidelity(&a, &b).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn conditioned_states_match_pipeline() {
        for (a2, m, delta) in [(1.155, 1, 1.0), (0.7, 2, -1.0)] {
            let s = scenario(a2, m, delta, 16);
            let psi = simulate_dispersive(&s).unwrap();
            let mut total_z = 0.0;
            let mut total_x = 0.0;
            for c in ControlOutcome::ALL {
                for a in AtomOutcome::ALL {
                    let built = conditioned_state(&s, c, a).unwrap();
                    let piped = pipeline_conditioned(&psi, c, a).unwrap();
                    let f = fidelity(&built.state, &piped.state).unwrap();
                    assert!(f > 1.0 - 1e-9, "{c:?} {a:?}: {f}");
                    assert!((built.probability - piped.probability).abs() < 1e-12);
                    match a {
                        AtomOutcome::Excited | AtomOutcome::Ground => total_z += piped.probability,
                        _ => total_x += piped.probability,
                    }
                }
            }
            assert!((total_z - 1.0).abs() < 1e-10 && (total_x - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn control_probabilities() {
        let s = scenario(1.155, 1, 1.0, 16);
        let e2 = (-2.0 * 1.155f64).exp();
        let pe = outcome_probability(&s, ControlOutcome::Plus, AtomOutcome::Excited).unwrap();
        let pg = outcome_probability(&s, ControlOutcome::Plus, AtomOutcome::Ground).unwrap();
        assert!((pe + pg - (1.0 + e2) / 2.0).abs() < 1e-9);
        assert!((pe - pg).abs() < 1e-12);
    }

    #[test]
    fn double_cat_from_states() {
        for (a2, m, delta) in [(1.155, 1, 1.0), (0.3, 2, 1.0), (2.0, 1, -1.0), (1.5, 3, 1.0)] {
            let s = scenario(a2, m, delta, 30);
            let from_states =
                double_cat_probability_from_states(&s, ControlOutcome::Plus, AtomOutcome::PlusX)
                    .unwrap();
            let closed = double_cat_probability(s.theta(), a2);
            assert!((from_states - closed).abs() < 1e-6, "{from_states} vs {closed}");
            let minus =
                double_cat_probability_from_states(&s, ControlOutcome::Minus, AtomOutcome::PlusX)
                    .unwrap();
            assert!(minus < 1e-20);
        }
    }
}
