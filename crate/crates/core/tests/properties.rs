use std::f64::consts::{PI, TAU};

use jcpath::analytic::{
    exchange_probability, inversion, inversion_identical_resonant, photon_average_single_cavity,
    shuttle_probability,     xi_coefficients, RabiScenario,
};
use jcpath::dispersive::double_cat_probability;
use jcpath::dynamics::{
    branch_excitation, controlled_propagator, Cavity, ClosedFormEvolution, Evolver, SystemParams,
};
use jcpath::hilbert::{StateVector, C64};
use jcpath::measurement::{atom_x_basis, control_basis, probabilities};
use nalgebra::DVector;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SystemParams> {
    (0.05..1.0f64, 0.05..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 1usize..5).prop_map(
        |(g0, g1, d0, d1, n_max)| {
            SystemParams::new(10.0, 10.0 - d0 * g0, 10.0 - d1 * g1, g0, g1, n_max).unwrap()
        },
    )
}

fn state_for(p: &SystemParams, raw: &[(f64, f64)]) -> StateVector {
    let shape = p.shape();
    let amps = (0..shape.total_dim())
        .map(|i| {
            let (re, im) = raw[i % raw.len()];
            C64::new(re + 1e-3 * i as f64, im)
        })
        .collect();
    StateVector::normalized_from(shape, DVector::from_vec(amps)).unwrap()
}

fn scenario() -> impl Strategy<Value = RabiScenario> {
    (
        (0.0..PI / 2.0, 0.0..TAU, 0usize..6, 0usize..6),
        (0.1..1.0f64, 0.1..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        (0.0..15.0f64, 0.0..15.0f64),
    )
        .prop_map(|((theta, phi, n0, n1), (g0, g1, d0, d1), (t_m, tau))| RabiScenario {
            theta,
            phi,
            n0,
            n1,
            g0,
            g1,
            delta0: d0 * g0,
            delta1: d1 * g1,
            omega0: 10.0 - d0 * g0,
            omega1: 10.0 - d1 * g1,
            t_m,
            t: t_m + tau,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn controlled_propagator_is_unitary(p in params(), t0 in 0.0..5.0f64, dt in 0.0..30.0f64) {
        let u = controlled_propagator(&p, t0, t0 + dt).unwrap();
        prop_assert!(u.unitarity_residual() < 1e-12);
    }

    #[test]
    fn evolution_keeps_norm_and_branch_excitation(
        p in params(),
        raw in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 8),
        dt in 0.0..30.0f64,
    ) {
        let psi = state_for(&p, &raw);
        let later = ClosedFormEvolution::new(p).evolve(&psi, dt).unwrap();
        prop_assert!((later.norm() - 1.0).abs() < 1e-12);
        for k in Cavity::BOTH {
            let (e0, w0) = branch_excitation(&psi, k);
            let (e1, w1) = branch_excitation(&later, k);
            prop_assert!((e0 - e1).abs() < 1e-10);
            prop_assert!((w0 - w1).abs() < 1e-12);
        }
    }

    #[test]
    fn measurement_probabilities_sum_to_one(
        p in params(),
        raw in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 5),
        theta in 0.0..PI,
        phi in 0.0..TAU,
    ) {
        let psi = state_for(&p, &raw);
        for basis in [control_basis(theta, phi), atom_x_basis()] {
            let [a, b] = probabilities(&psi, &basis).unwrap();
            prop_assert!(a >= 0.0 && b >= 0.0);
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn xi_coefficients_are_normalized(s in scenario()) {
        let xi = xi_coefficients(&s).unwrap();
        prop_assert!((xi.total_probability() - 1.0).abs() < 1e-10);
        let w = inversion(&s).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&w));
    }

    #[test]
    fn identical_cavities_are_symmetric_in_theta(
        theta in 0.0..PI / 2.0,
        n in 0usize..8,
        t_m in 0.0..20.0f64,
        tau in 0.0..20.0f64,
    ) {
        let a = inversion_identical_resonant(theta, 1.0, n, t_m + tau, t_m);
        let b = inversion_identical_resonant(PI / 2.0 - theta, 1.0, n, t_m + tau, t_m);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn single_cavity_photon_number_stays_within_one_quantum(n in 0usize..20, t in 0.0..50.0f64) {
        let avg = photon_average_single_cavity(1.0, n, t);
        prop_assert!(avg >= n as f64 - 1e-12 && avg <= n as f64 + 1.0 + 1e-12);
    }

    #[test]
    fn exchange_probability_is_at_most_one_half(mut s in scenario()) {
        s.theta = PI / 4.0;
        s.delta0 = 0.0;
        s.delta1 = 0.0;
        s.omega0 = 10.0;
        s.omega1 = 10.0;
        let p = exchange_probability(&s).unwrap();
        prop_assert!((-1e-12..=0.5 + 1e-12).contains(&p));
        prop_assert!((p - shuttle_probability(&s).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn double_cat_probability_is_a_probability(theta in -10.0..10.0f64, a2 in 0.0..10.0f64) {
        let p = double_cat_probability(theta, a2);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
    }
}
