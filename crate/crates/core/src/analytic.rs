//! Closed-form observables for an atom launched excited through two cavities
//! holding Fock states, with the control measured at `t_m`.
//!
//! The state at `t ≥ t_m` is
//!
//! ```text
//! |ψ(t)⟩ = |0⟩/𝒩₀ ⊗ (ξ₁|e,n₀,n₁⟩ + ξ₂|g,n₀+1,n₁⟩ + ξ₃|g,n₀,n₁+1⟩ + ξ₄|e,n₀−1,n₁+1⟩)
//!        + |1⟩/𝒩₀ ⊗ (ξ₅|e,n₀,n₁⟩ + ξ₆|g,n₀,n₁+1⟩ + ξ₇|g,n₀+1,n₁⟩ + ξ₈|e,n₀+1,n₁−1⟩)
//! ```
//!
//! where the control phase `e^{iφ}` is carried by ξ₅..ξ₈. Every observable in
//! this module is either read off these coefficients or given by a resonant
//! closed form; [`simulate_rabi`] produces the same state by explicit
//! evolution and measurement.

use std::f64::consts::PI;

use thiserror::Error;

use crate::dynamics::{
    rabi_frequency, sin_over, Cavity, ClosedFormEvolution, DynamicsError, Evolver, SystemParams,
    EXCITED, GROUND,
};
use crate::hilbert::{fock_state, tensor, HilbertError, StateVector, C64};
use crate::measurement::{control_basis, measure, MeasurementError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("no photon can be exchanged when n = 0")]
    NoExchange,

    #[error(transparent)]
    Dynamics(#[from] DynamicsError),

    #[error(transparent)]
    Measurement(#[from] MeasurementError),

    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

pub type AnalyticResult<T> = Result<T, AnalyticError>;

/// Initial Fock occupations, couplings, frequencies and the two times of a
/// resonant-or-detuned passage.
#[derive(Debug, Copy, Clone, PartialEq)]
pub struct RabiScenario {
    pub theta: f64,
    pub phi: f64,
    pub n0: usize,
    pub n1: usize,
    pub g0: f64,
    pub g1: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub omega0: f64,
    pub omega1: f64,
    /// Control measurement time (s).
    pub t_m: f64,
    /// Observation time (s), `t ≥ t_m`.
    pub t: f64,
}

impl RabiScenario {
    /// Resonant identical cavities with `n` photons each.
    pub fn identical_resonant(theta: f64, g: f64, n: usize, omega: f64, t_m: f64, t: f64) -> Self {
        Self {
            theta,
            phi: 0.0,
            n0: n,
            n1: n,
            g0: g,
            g1: g,
            delta0: 0.0,
            delta1: 0.0,
            omega0: omega,
            omega1: omega,
            t_m,
            t,
        }
    }

    pub fn validate(&self) -> AnalyticResult<()> {
        let values = [
            self.theta, self.phi, self.g0, self.g1, self.delta0, self.delta1, self.omega0,
            self.omega1, self.t_m, self.t,
        ];
        if values.iter().any(|x| !x.is_finite()) {
            return Err(AnalyticError::InvalidScenario("non-finite parameter".into()));
        }
        if !(self.t_m >= 0.0 && self.t >= self.t_m) {
            return Err(AnalyticError::InvalidScenario(format!(
                "need 0 <= t_m <= t, got t_m = {}, t = {}",
                self.t_m, self.t
            )));
        }
        let wa0 = self.omega0 + self.delta0;
        let wa1 = self.omega1 + self.delta1;
        if (wa0 - wa1).abs() > 1e-12 * wa0.abs().max(1.0) {
            return Err(AnalyticError::InvalidScenario(format!(
                "omega_k + Delta_k must give one atomic frequency ({wa0} vs {wa1})"
            )));
        }
        Ok(())
    }

    /// `ω_a = ω₀ + Δ₀`.
    pub fn omega_a(&self) -> f64 {
        self.omega0 + self.delta0
    }

    pub fn is_resonant(&self) -> bool {
        self.delta0 == 0.0 && self.delta1 == 0.0
    }

    pub fn tau(&self) -> f64 {
        self.t - self.t_m
    }

    pub fn system_params(&self, n_max: usize) -> AnalyticResult<SystemParams> {
        Ok(SystemParams::new(
            self.omega_a(),
            self.omega0,
            self.omega1,
            self.g0,
            self.g1,
            n_max,
        )?)
    }

    fn coupling(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            (self.g0, self.delta0)
        } else {
            (self.g1, self.delta1)
        }
    }

    /// `f_c` for cavity `k` at `Ω_k(x)`.
    fn f(&self, k: usize, x: usize, tau: f64) -> C64 {
        let (g, delta) = self.coupling(k);
        let omega = rabi_frequency(g, delta, x as f64);
        C64::new((omega * tau).cos(), -0.5 * delta * sin_over(omega, tau))
    }

    /// `h_c` for cavity `k` at `Ω_k(x)`.
    fn h(&self, k: usize, x: usize, tau: f64) -> C64 {
        let (g, delta) = self.coupling(k);
        let omega = rabi_frequency(g, delta, x as f64);
        C64::new(0.0, -g * (x as f64).sqrt() * sin_over(omega, tau))
    }

    /// Eigenvalue of `Λ_k(τ)` on `|s, m₀, m₁⟩`, with `s = ±1` the atomic
    /// σ_z value.
    fn ph(&self, k: usize, s: f64, m0: usize, m1: usize, tau: f64) -> C64 {
        let (wk, wo, mk, mo) = if k == 0 {
            (self.omega0, self.omega1, m0, m1)
        } else {
            (self.omega1, self.omega0, m1, m0)
        };
        C64::from_polar(1.0, -tau * (wk * (mk as f64 + s / 2.0) + wo * mo as f64))
    }
}

/// The eight state coefficients and the normalization `𝒩₀`.
#[derive(Debug, Copy, Clone, PartialEq)]
pub struct XiCoefficients {
    pub xi: [C64; 8],
    pub norm_n0: f64,
}

/// Basis state `[control, atom, n₀, n₁]` that ξⱼ multiplies, or `None` when it
/// would need a negative photon number.
pub fn xi_basis_state(s: &RabiScenario, j: usize) -> Option<[usize; 4]> {
    let (n0, n1) = (s.n0, s.n1);
    match j {
        0 => Some([0, EXCITED, n0, n1]),
        1 => Some([0, GROUND, n0 + 1, n1]),
        2 => Some([0, GROUND, n0, n1 + 1]),
        3 => n0.checked_sub(1).map(|m| [0, EXCITED, m, n1 + 1]),
        4 => Some([1, EXCITED, n0, n1]),
        5 => Some([1, GROUND, n0, n1 + 1]),
        6 => Some([1, GROUND, n0 + 1, n1]),
        7 => n1.checked_sub(1).map(|m| [1, EXCITED, n0 + 1, m]),
        _ => None,
    }
}

impl XiCoefficients {
    /// Normalized amplitudes `ξⱼ/𝒩₀` with the basis states they sit on.
    pub fn components(&self, s: &RabiScenario) -> Vec<([usize; 4], C64)> {
        (0..8)
            .filter_map(|j| xi_basis_state(s, j).map(|b| (b, self.xi[j] / self.norm_n0)))
            .collect()
    }

    /// `Σ|ξⱼ|²/𝒩₀²`.
    pub fn total_probability(&self) -> f64 {
        self.xi.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.norm_n0.powi(2)
    }

    /// `Σ|ξⱼ|² v(basis state)/𝒩₀²` for an observable diagonal in the product basis.
    fn diagonal(&self, s: &RabiScenario, value: impl Fn(&[usize; 4]) -> f64) -> f64 {
        self.components(s)
            .iter()
            .map(|(b, z)| z.norm_sqr() * value(b))
            .sum()
    }
}

/// `𝒩₀² = cos⁴θ + sin⁴θ + 2 sin²θ cos²θ Re⟨e,n₀,n₁|W₀†Λ₀†Λ₁W₁|e,n₀,n₁⟩`.
fn norm_sq(s: &RabiScenario) -> f64 {
    let (sn, cs) = s.theta.sin_cos();
    let (c2, s2) = (cs * cs, sn * sn);
    let (n0, n1, tm) = (s.n0, s.n1, s.t_m);
    let a0 = s.ph(0, 1.0, n0, n1, tm) * s.f(0, n0 + 1, tm);
    let a1 = s.ph(1, 1.0, n0, n1, tm) * s.f(1, n1 + 1, tm);
    c2 * c2 + s2 * s2 + 2.0 * c2 * s2 * (a0.conj() * a1).re
}

/// `𝒩₀`, valid for any detuning.
pub fn norm_n0(s: &RabiScenario) -> f64 {
    norm_sq(s).sqrt()
}

/// Resonant closed form
/// `𝒩₀² = cos⁴θ + sin⁴θ + 2 sin²θ cos²θ cos(g₀t_m√(n₀+1)) cos(g₁t_m√(n₁+1))`.
pub fn norm_n0_resonant(s: &RabiScenario) -> f64 {
    let (sn, cs) = s.theta.sin_cos();
    let (c2, s2) = (cs * cs, sn * sn);
    let k0 = (s.t_m * s.g0 * ((s.n0 + 1) as f64).sqrt()).cos();
    let k1 = (s.t_m * s.g1 * ((s.n1 + 1) as f64).sqrt()).cos();
    (c2 * c2 + s2 * s2 + 2.0 * s2 * c2 * k0 * k1).sqrt()
}

/// ξ₁..ξ₈ for any detuning. Λ phases are evaluated on the definite Fock
/// occupations they act on.
pub fn xi_coefficients(s: &RabiScenario) -> AnalyticResult<XiCoefficients> {
    s.validate()?;
    let (sn, cs) = s.theta.sin_cos();
    let e = C64::from_polar(1.0, s.phi);
    let (n0, n1, t, tm, tau) = (s.n0, s.n1, s.t, s.t_m, s.tau());
    let c3 = cs.powi(3);
    let s3 = sn.powi(3);
    let cs2 = cs * sn * sn;
    let sc2 = sn * cs * cs;

    // branch 1 during [0, t_m], branch 0 afterwards
    let p10 = s.ph(1, 1.0, n0, n1, tm) * s.ph(0, 1.0, n0, n1, tau);
    let p10_swap = s.ph(1, 1.0, n0, n1, tm) * s.ph(0, -1.0, n0, n1 + 1, tau);
    // branch 0 during [0, t_m], branch 1 afterwards
    let p01 = s.ph(0, 1.0, n0, n1, tm) * s.ph(1, 1.0, n0, n1, tau);
    let p01_swap = s.ph(0, 1.0, n0, n1, tm) * s.ph(1, -1.0, n0 + 1, n1, tau);
    let p00 = s.ph(0, 1.0, n0, n1, t);
    let p11 = s.ph(1, 1.0, n0, n1, t);

    let xi = [
        c3 * p00 * s.f(0, n0 + 1, t) + cs2 * p10 * s.f(1, n1 + 1, tm) * s.f(0, n0 + 1, tau),
        c3 * p00 * s.h(0, n0 + 1, t) + cs2 * p10 * s.f(1, n1 + 1, tm) * s.h(0, n0 + 1, tau),
        cs2 * p10_swap * s.h(1, n1 + 1, tm) * s.f(0, n0, tau).conj(),
        cs2 * p10_swap * s.h(1, n1 + 1, tm) * s.h(0, n0, tau),
        e * (s3 * p11 * s.f(1, n1 + 1, t) + sc2 * p01 * s.f(0, n0 + 1, tm) * s.f(1, n1 + 1, tau)),
        e * (s3 * p11 * s.h(1, n1 + 1, t) + sc2 * p01 * s.f(0, n0 + 1, tm) * s.h(1, n1 + 1, tau)),
        e * sc2 * p01_swap * s.h(0, n0 + 1, tm) * s.f(1, n1, tau).conj(),
        e * sc2 * p01_swap * s.h(0, n0 + 1, tm) * s.h(1, n1, tau),
    ];
    Ok(XiCoefficients {
        xi,
        norm_n0: norm_n0(s),
    })
}

fn atom_sign(b: &[usize; 4]) -> f64 {
    if b[1] == EXCITED {
        1.0
    } else {
        -1.0
    }
}

/// `⟨σ_z⟩(t)` for any detuning.
pub fn inversion(s: &RabiScenario) -> AnalyticResult<f64> {
    Ok(xi_coefficients(s)?.diagonal(s, atom_sign))
}

/// `⟨σ_z⟩(t)` from the resonant expectation values
/// `Re⟨T_ji†σ_zT_jj⟩` and `⟨T_ji†σ_zT_ji⟩`.
pub fn inversion_resonant(s: &RabiScenario) -> AnalyticResult<f64> {
    s.validate()?;
    if !s.is_resonant() {
        return Err(AnalyticError::InvalidScenario(
            "the resonant inversion formula needs Delta_0 = Delta_1 = 0".into(),
        ));
    }
    let (sn, cs) = s.theta.sin_cos();
    let (t, tm, tau) = (s.t, s.t_m, s.tau());
    let g = [s.g0, s.g1];
    let n = [s.n0 as f64, s.n1 as f64];
    let up = |j: usize| g[j] * (n[j] + 1.0).sqrt();
    let down = |j: usize| g[j] * n[j].sqrt();
    let diag = |j: usize| (2.0 * up(j) * t).cos();
    // j measured last, i first
    let cross = |j: usize, i: usize| ((2.0 * t - tm) * up(j)).cos() * (tm * up(i)).cos();
    let swapped = |j: usize, i: usize| {
        let ci = (tm * up(i)).cos();
        let si = (tm * up(i)).sin();
        (2.0 * tau * up(j)).cos() * ci * ci - (2.0 * tau * down(j)).cos() * si * si
    };
    let (c2, s2) = (cs * cs, sn * sn);
    let value = c2.powi(3) * diag(0)
        + s2.powi(3) * diag(1)
        + 2.0 * c2 * c2 * s2 * cross(0, 1)
        + 2.0 * s2 * s2 * c2 * cross(1, 0)
        + c2 * s2 * s2 * swapped(0, 1)
        + s2 * c2 * c2 * swapped(1, 0);
    Ok(value / norm_n0_resonant(s).powi(2))
}

/// Resonant identical cavities (`g₀ = g₁ = g`, `n₀ = n₁ = n`):
///
/// ```text
/// ⟨σ_z⟩ = [2(3 + cos 4θ) cos(2gt√(n+1))
///          + 2 sin²2θ (cos[2g(t−t_m)√(n+1)](1 + cos²(gt_m√(n+1)))
///                      − cos[2g(t−t_m)√n] sin²(gt_m√(n+1)))]
///         / [7 + cos 4θ + 2 sin²2θ cos(2gt_m√(n+1))]
/// ```
pub fn inversion_identical_resonant(theta: f64, g: f64, n: usize, t: f64, t_m: f64) -> f64 {
    let a = g * ((n + 1) as f64).sqrt();
    let b = g * (n as f64).sqrt();
    let s2 = (2.0 * theta).sin().powi(2);
    let c4 = (4.0 * theta).cos();
    let cm = (a * t_m).cos();
    let sm = (a * t_m).sin();
    let tau = t - t_m;
    let num = 2.0 * (3.0 + c4) * (2.0 * a * t).cos()
        + 2.0 * s2 * ((2.0 * a * tau).cos() * (1.0 + cm * cm) - (2.0 * b * tau).cos() * sm * sm);
    let den = 7.0 + c4 + 2.0 * s2 * (2.0 * a * t_m).cos();
    num / den
}

/// Single-cavity inversion `Δ²/4Ω² + (1 − Δ²/4Ω²) cos 2Ωt`, `Ω = Ω(n+1)`.
pub fn inversion_single_cavity(g: f64, delta: f64, n: usize, t: f64) -> f64 {
    let omega = rabi_frequency(g, delta, (n + 1) as f64);
    if omega == 0.0 {
        return 1.0;
    }
    let r = delta * delta / (4.0 * omega * omega);
    r + (1.0 - r) * (2.0 * omega * t).cos()
}

/// `⟨a_j†a_j⟩(t)` for any detuning.
pub fn photon_average(s: &RabiScenario, j: Cavity) -> AnalyticResult<f64> {
    let idx = 2 + j.index();
    Ok(xi_coefficients(s)?.diagonal(s, |b| b[idx] as f64))
}

/// `⟨a_j†a_j⟩` for resonant identical cavities at `θ = π/4`, the same in
/// both cavities:
///
/// `n + (B² + S² cos²(g√n (t−t_m))) / (4(1 + C²))`
///
/// with `C = cos(g√(n+1) t_m)`, `S = sin(g√(n+1) t_m)` and
/// `B = 2C sin(g√(n+1)(t−t_m)) + S cos(g√(n+1)(t−t_m))`.
pub fn photon_average_max_indefinite(g: f64, n: usize, t_m: f64, t: f64) -> f64 {
    let a = g * ((n + 1) as f64).sqrt();
    let b = g * (n as f64).sqrt();
    let tau = t - t_m;
    let (s, c) = (a * t_m).sin_cos();
    let big_b = 2.0 * c * (a * tau).sin() + s * (a * tau).cos();
    n as f64 + (big_b * big_b + s * s * (b * tau).cos().powi(2)) / (4.0 * (1.0 + c * c))
}

/// Single resonant cavity: `n + sin²(g√(n+1) t)`.
pub fn photon_average_single_cavity(g: f64, n: usize, t: f64) -> f64 {
    n as f64 + (g * ((n + 1) as f64).sqrt() * t).sin().powi(2)
}

/// Probability that the atom ends excited with one photon moved between the
/// cavities, `(|ξ₄|² + |ξ₈|²)/𝒩₀²`, for any θ and detuning.
pub fn shuttle_probability(s: &RabiScenario) -> AnalyticResult<f64> {
    let xi = xi_coefficients(s)?;
    Ok((xi.xi[3].norm_sqr() + xi.xi[7].norm_sqr()) / xi.norm_n0.powi(2))
}

/// Resonant photon-exchange probability at `θ = π/4`:
///
/// ```text
/// 𝒫ᵢ = [sin²(g₁√n₁ τ) sin²(g₀√(n₀+1) t_m) + sin²(g₀√n₀ τ) sin²(g₁√(n₁+1) t_m)]
///      / [4 cos(g₀√(n₀+1) t_m) cos(g₁√(n₁+1) t_m) + 4]
/// ```
pub fn exchange_probability(s: &RabiScenario) -> AnalyticResult<f64> {
    s.validate()?;
    if !s.is_resonant() {
        return Err(AnalyticError::InvalidScenario(
            "the exchange probability formula needs Delta_0 = Delta_1 = 0".into(),
        ));
    }
    if (s.theta - PI / 4.0).abs() > 1e-12 {
        return Err(AnalyticError::InvalidScenario(
            "the exchange probability formula needs theta = pi/4".into(),
        ));
    }
    let (tm, tau) = (s.t_m, s.tau());
    let up0 = s.g0 * ((s.n0 + 1) as f64).sqrt();
    let up1 = s.g1 * ((s.n1 + 1) as f64).sqrt();
    let down0 = s.g0 * (s.n0 as f64).sqrt();
    let down1 = s.g1 * (s.n1 as f64).sqrt();
    let num = (down1 * tau).sin().powi(2) * (up0 * tm).sin().powi(2)
        + (down0 * tau).sin().powi(2) * (up1 * tm).sin().powi(2);
    let den = 4.0 * (up0 * tm).cos() * (up1 * tm).cos() + 4.0;
    Ok(num / den)
}

/// Identical resonant cavities at `θ = π/4`:
/// `𝒫ᵢ = sin²(g√n (t−t_m)) sin²(g√(n+1) t_m) / (cos(2g√(n+1) t_m) + 3)`.
pub fn exchange_probability_identical(g: f64, n: usize, t_m: f64, t: f64) -> f64 {
    let a = g * ((n + 1) as f64).sqrt();
    let b = g * (n as f64).sqrt();
    (b * (t - t_m)).sin().powi(2) * (a * t_m).sin().powi(2) / ((2.0 * a * t_m).cos() + 3.0)
}

/// Times `(t_m, t)` at which identical cavities with `n ≥ 1` photons exchange a
/// photon with probability 1/2:
/// `t_m = π(2l−1)/(2g√(n+1))`, `t = (π/2g)(1/√n + 1/√(n+1))(2l−1)`.
pub fn exchange_optimum(n: usize, g: f64, l: usize) -> AnalyticResult<(f64, f64)> {
    if n == 0 {
        return Err(AnalyticError::NoExchange);
    }
    if l == 0 {
        return Err(AnalyticError::InvalidScenario("l must be at least 1".into()));
    }
    let odd = (2 * l - 1) as f64;
    let nf = n as f64;
    let t_m = PI * odd / (2.0 * g * (nf + 1.0).sqrt());
    let t = PI / (2.0 * g) * (1.0 / nf.sqrt() + 1.0 / (nf + 1.0).sqrt()) * odd;
    Ok((t_m, t))
}

/// States produced along the explicit evolve, measure, evolve sequence.
#[derive(Debug, Clone)]
pub struct RabiSimulation {
    /// State just before the control measurement.
    pub at_measurement: StateVector,
    /// Probability of finding the control in `|θ,φ⟩`, equal to `𝒩₀²`.
    pub outcome_probability: f64,
    /// State at `t`.
    pub final_state: StateVector,
}

/// `|θ,φ⟩_c ⊗ |e⟩ ⊗ |n₀⟩ ⊗ |n₁⟩`.
pub fn rabi_initial_state(s: &RabiScenario, n_max: usize) -> AnalyticResult<StateVector> {
    let (sn, cs) = s.theta.sin_cos();
    let control = StateVector::qubit(C64::new(cs, 0.0), C64::from_polar(sn, s.phi))?;
    let atom = StateVector::qubit(C64::new(1.0, 0.0), C64::new(0.0, 0.0))?;
    Ok(tensor(&[
        &control,
        &atom,
        &fock_state(s.n0, n_max)?,
        &fock_state(s.n1, n_max)?,
    ])?)
}

/// Evolves to `t_m`, conditions the control on `|θ,φ⟩` and evolves to `t`
/// with the given evolver.
pub fn simulate_rabi_with(
    s: &RabiScenario,
    n_max: usize,
    evolver: &dyn Evolver,
) -> AnalyticResult<RabiSimulation> {
    s.validate()?;
    let psi0 = rabi_initial_state(s, n_max)?;
    let at_measurement = evolver.evolve(&psi0, s.t_m)?;
    let record = measure(&at_measurement, &control_basis(s.theta, s.phi), "theta")?;
    let final_state = evolver.evolve(&record.post_state, s.tau())?;
    Ok(RabiSimulation {
        at_measurement,
        outcome_probability: record.probability,
        final_state,
    })
}

/// [`simulate_rabi_with`] using the exact closed-form propagator.
pub fn simulate_rabi(s: &RabiScenario, n_max: usize) -> AnalyticResult<RabiSimulation> {
    let evolver = ClosedFormEvolution::new(s.system_params(n_max)?);
    simulate_rabi_with(s, n_max, &evolver)
}
