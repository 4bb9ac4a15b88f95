//! Projective measurements on the control qubit and on the atom.
//!
//! A measurement here conditions on a named outcome; nothing is sampled.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;
use thiserror::Error;

use crate::hilbert::{HilbertError, StateVector, Subsystem, C64};

/// Outcomes less likely than this have no defined post-measurement state.
pub const ZERO_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),

    #[error("outcome {outcome:?} has probability {probability:e}; the post-measurement state is undefined")]
    ZeroProbability { outcome: String, probability: f64 },

    #[error("basis has no outcome labelled {0:?}")]
    UnknownOutcome(String),

    #[error("measured subsystem has dimension {0}, expected a qubit")]
    NotQubit(usize),
}

pub type MeasurementResult<T> = Result<T, MeasurementError>;

/// An orthonormal basis of one qubit factor, with outcome labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBasis {
    subsystem: Subsystem,
    vectors: [[C64; 2]; 2],
    labels: [String; 2],
}

impl MeasurementBasis {
    pub fn new(
        subsystem: Subsystem,
        vectors: [[C64; 2]; 2],
        labels: [&str; 2],
    ) -> MeasurementResult<Self> {
        let basis = Self {
            subsystem,
            vectors,
            labels: labels.map(str::to_owned),
        };
        let residual = basis.orthonormality_residual();
        if residual > 1e-12 {
            return Err(HilbertError::InvalidShape(format!(
                "basis vectors are not orthonormal (residual {residual:e})"
            ))
            .into());
        }
        Ok(basis)
    }

    pub fn subsystem(&self) -> Subsystem {
        self.subsystem
    }

    pub fn vectors(&self) -> &[[C64; 2]; 2] {
        &self.vectors
    }

    pub fn labels(&self) -> [&str; 2] {
        [&self.labels[0], &self.labels[1]]
    }

    pub fn outcome_index(&self, label: &str) -> MeasurementResult<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| MeasurementError::UnknownOutcome(label.to_owned()))
    }

    /// `max |⟨v_i|v_j⟩ − δ_ij|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let ip: C64 = (0..2)
                    .map(|d| self.vectors[i][d].conj() * self.vectors[j][d])
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - expect).norm());
            }
        }
        worst
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `{cos θ|0⟩ + e^{iφ} sin θ|1⟩, sin θ|0⟩ − e^{iφ} cos θ|1⟩}`, labelled
/// `theta` and `theta_perp`.
pub fn control_basis(theta: f64, phi: f64) -> MeasurementBasis {
    let e = C64::from_polar(1.0, phi);
    let (s, c) = theta.sin_cos();
    MeasurementBasis {
        subsystem: Subsystem::Control,
        vectors: [[re(c), e * s], [re(s), -e * c]],
        labels: ["theta".into(), "theta_perp".into()],
    }
}

/// `{|+⟩_c, |−⟩_c}`, labelled `+` and `-`.
pub fn control_pm_basis() -> MeasurementBasis {
    let h = re(FRAC_1_SQRT_2);
    MeasurementBasis {
        subsystem: Subsystem::Control,
        vectors: [[h, h], [h, -h]],
        labels: ["+".into(), "-".into()],
    }
}

/// `{|0⟩_c, |1⟩_c}`, labelled `0` and `1`.
pub fn control_z_basis() -> MeasurementBasis {
    MeasurementBasis {
        subsystem: Subsystem::Control,
        vectors: [[re(1.0), re(0.0)], [re(0.0), re(1.0)]],
        labels: ["0".into(), "1".into()],
    }
}

/// `{|e⟩, |g⟩}`, labelled `e` and `g`.
pub fn atom_z_basis() -> MeasurementBasis {
    MeasurementBasis {
        subsystem: Subsystem::Atom,
        vectors: [[re(1.0), re(0.0)], [re(0.0), re(1.0)]],
        labels: ["e".into(), "g".into()],
    }
}

/// `{(|e⟩ + |g⟩)/√2, (|e⟩ − |g⟩)/√2}`, labelled `+x` and `-x`.
pub fn atom_x_basis() -> MeasurementBasis {
    let h = re(FRAC_1_SQRT_2);
    MeasurementBasis {
        subsystem: Subsystem::Atom,
        vectors: [[h, h], [h, -h]],
        labels: ["+x".into(), "-x".into()],
    }
}

/// Result of conditioning a state on one outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub outcome: String,
    pub probability: f64,
    pub post_state: StateVector,
}

/// `(|v⟩⟨v| ⊗ 1) ψ` for basis vector `v` on the measured factor.
fn project(
    state: &StateVector,
    basis: &MeasurementBasis,
    outcome: usize,
) -> MeasurementResult<DVector<C64>> {
    let shape = state.shape();
    let k = basis.subsystem.index();
    let dims = shape.dims();
    if k >= dims.len() {
        return Err(HilbertError::NoSuchSubsystem {
            index: k,
            count: dims.len(),
        }
        .into());
    }
    if dims[k] != 2 {
        return Err(MeasurementError::NotQubit(dims[k]));
    }
    let stride = shape.stride(k);
    let v = basis.vectors[outcome];
    let amps = state.amplitudes();
    let mut out = DVector::zeros(amps.len());
    for i in 0..amps.len() {
        if (i / stride) % 2 != 0 {
            continue;
        }
        let j = i + stride;
        let overlap = v[0].conj() * amps[i] + v[1].conj() * amps[j];
        out[i] = v[0] * overlap;
        out[j] = v[1] * overlap;
    }
    Ok(out)
}

/// Outcome probabilities `‖P_i ψ‖²` in basis order.
pub fn probabilities(state: &StateVector, basis: &MeasurementBasis) -> MeasurementResult<[f64; 2]> {
    Ok([
        project(state, basis, 0)?.norm_squared(),
        project(state, basis, 1)?.norm_squared(),
    ])
}

/// Conditions `state` on `outcome`.
pub fn measure(
    state: &StateVector,
    basis: &MeasurementBasis,
    outcome: &str,
) -> MeasurementResult<MeasurementRecord> {
    measure_index(state, basis, basis.outcome_index(outcome)?)
}

pub fn measure_index(
    state: &StateVector,
    basis: &MeasurementBasis,
    outcome: usize,
) -> MeasurementResult<MeasurementRecord> {
    let projected = project(state, basis, outcome)?;
    let probability = projected.norm_squared();
    let label = basis.labels[outcome].clone();
    if probability < ZERO_PROBABILITY {
        return Err(MeasurementError::ZeroProbability {
            outcome: label,
            probability,
        });
    }
    let post_state = StateVector::normalized_from(state.shape().clone(), projected)?;
    Ok(MeasurementRecord {
        outcome: label,
        probability,
        post_state,
    })
}

/// Every outcome with a defined post-measurement state.
pub fn measure_all(
    state: &StateVector,
    basis: &MeasurementBasis,
) -> MeasurementResult<Vec<MeasurementRecord>> {
    let mut out = Vec::with_capacity(2);
    for i in 0..2 {
        match measure_index(state, basis, i) {
            Ok(r) => out.push(r),
            Err(MeasurementError::ZeroProbability { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{fock_state, tensor, SpaceShape};
    use std::f64::consts::PI;

    fn random_state(seed: u64, shape: &SpaceShape) -> StateVector {
        let mut x = seed;
        let mut next = move || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let v = (0..shape.total_dim()).map(|_| C64::new(next(), next())).collect();
        StateVector::normalized_from(shape.clone(), DVector::from_vec(v)).unwrap()
    }

    #[test]
    fn control_basis_special_cases() {
        let b = control_basis(0.0, 0.0);
        assert_eq!(b.vectors()[0], [re(1.0), re(0.0)]);
        assert!((b.vectors()[1][1] + re(1.0)).norm() < 1e-15);
        let b = control_basis(PI / 4.0, 0.0);
        let pm = control_pm_basis();
        for i in 0..2 {
            for d in 0..2 {
                assert!((b.vectors()[i][d] - pm.vectors()[i][d]).norm() < 1e-15);
            }
        }
        for k in 0..20 {
            let b = control_basis(0.07 * k as f64, 0.31 * k as f64);
            assert!(b.orthonormality_residual() < 1e-14);
        }
    }

    #[test]
    fn atom_x_outcomes() {
        let b = atom_x_basis();
        assert!(b.orthonormality_residual() < 1e-15);
        let e = tensor(&[
            &StateVector::basis(SpaceShape::qubit(), &[0]).unwrap(),
            &StateVector::basis(SpaceShape::qubit(), &[0]).unwrap(),
            &fock_state(1, 2).unwrap(),
            &fock_state(0, 2).unwrap(),
        ])
        .unwrap();
        let p = probabilities(&e, &b).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn certain_outcome_leaves_state_unchanged() {
        let shape = SpaceShape::composite(3).unwrap();
        let psi = StateVector::basis(shape, &[0, 0, 2, 1]).unwrap();
        let r = measure(&psi, &control_z_basis(), "0").unwrap();
        assert_eq!(r.probability, 1.0);
        assert_eq!(r.post_state, psi);
        assert!(matches!(
            measure(&psi, &control_z_basis(), "1"),
            Err(MeasurementError::ZeroProbability { .. })
        ));
        assert!(matches!(
            measure(&psi, &control_z_basis(), "x"),
            Err(MeasurementError::UnknownOutcome(_))
        ));
    }

    #[test]
    fn completeness_and_repeatability() {
        let shape = SpaceShape::composite(3).unwrap();
        let bases = [control_basis(0.4, 1.1), control_pm_basis(), atom_x_basis(), atom_z_basis()];
        for seed in 0..10 {
            let psi = random_state(seed, &shape);
            for b in &bases {
                let p = probabilities(&psi, b).unwrap();
                assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
                for r in measure_all(&psi, b).unwrap() {
                    assert!((r.post_state.norm() - 1.0).abs() < 1e-12);
                    let again = measure(&r.post_state, b, &r.outcome).unwrap();
                    assert!((again.probability - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn measurements_on_distinct_factors_commute() {
        let shape = SpaceShape::composite(2).unwrap();
        let (c, a) = (control_basis(0.3, 2.0), atom_x_basis());
        for seed in 0..5 {
            let psi = random_state(100 + seed, &shape);
            for i in 0..2 {
                for j in 0..2 {
                    let first = measure_index(&psi, &c, i).unwrap();
                    let second = measure_index(&first.post_state, &a, j).unwrap();
                    let p_ca = first.probability * second.probability;
                    let first = measure_index(&psi, &a, j).unwrap();
                    let second = measure_index(&first.post_state, &c, i).unwrap();
                    let p_ac = first.probability * second.probability;
                    assert!((p_ca - p_ac).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_non_qubit_factor() {
        let psi = fock_state(1, 3).unwrap();
        assert!(matches!(
            probabilities(&psi, &control_pm_basis()),
            Err(MeasurementError::NotQubit(4))
        ));
    }
}
