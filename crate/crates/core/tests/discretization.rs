use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use seco_core::{
    discretize_interval, propagate_nonlinear, HoldKind, IntervalReference, LinearSystem, PhaseTag, RocketModel,
    RocketParams,
};
use seco_testkit::lti::exact_foh;

fn reference(hold: HoldKind, x: &[f64], uk: &[f64], uk1: &[f64], s: f64) -> IntervalReference {
    IntervalReference {
        interval: 1,
        x_bar: DVector::from_column_slice(x),
        u_bar_k: DVector::from_column_slice(uk),
        u_bar_k1: DVector::from_column_slice(uk1),
        s_bar: s,
        hold,
    }
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

#[test]
fn double_integrator_closed_form() {
    let sys = LinearSystem::double_integrator(1);
    let r = reference(HoldKind::Foh, &[0.0, 0.0], &[0.0], &[0.0], 1.0);
    let d = discretize_interval(&sys, &r, 16).unwrap();
    assert!(max_diff(&d.a, &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])) <= 1e-9);
    assert!(max_diff(&d.b_minus, &DMatrix::from_column_slice(2, 1, &[1.0 / 3.0, 0.5])) <= 1e-9);
    assert!(max_diff(&d.b_plus, &DMatrix::from_column_slice(2, 1, &[1.0 / 6.0, 0.5])) <= 1e-9);

    let r = reference(HoldKind::Zoh, &[0.0, 0.0], &[0.0], &[0.0], 1.0);
    let d = discretize_interval(&sys, &r, 16).unwrap();
    assert!(max_diff(&d.b_minus, &DMatrix::from_column_slice(2, 1, &[0.5, 1.0])) <= 1e-9);
    assert!(d.b_plus.iter().all(|&v| v == 0.0));
}

#[test]
fn random_lti_matches_matrix_exponential() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=3);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let s = rng.random_range(0.2..2.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let uk: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let uk1: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sys = LinearSystem::new(a.clone(), b.clone());
        let (phi, bm, bp, bzoh) = exact_foh(&a, &b, s);

        let d = discretize_interval(&sys, &reference(HoldKind::Foh, &x, &uk, &uk1, s), 256).unwrap();
        assert!(max_diff(&d.a, &phi) <= 1e-9);
        assert!(max_diff(&d.b_minus, &bm) <= 1e-9);
        assert!(max_diff(&d.b_plus, &bp) <= 1e-9);

        let d = discretize_interval(&sys, &reference(HoldKind::Zoh, &x, &uk, &uk1, s), 256).unwrap();
        assert!(max_diff(&d.a, &phi) <= 1e-9);
        assert!(max_diff(&d.b_minus, &bzoh) <= 1e-9);
        assert!(d.b_plus.iter().all(|&v| v == 0.0));
    }
}

fn rocket_reference(hold: HoldKind) -> IntervalReference {
    reference(hold, &[95_000.0, 600.0, 20.0, -70.0, 3.0, 0.4, 0.02], &[3e6, 0.05], &[4e6, -0.02], 0.7)
}

#[test]
fn dilation_column_matches_finite_difference() {
    let p = RocketParams::default();
    for (phase, hold) in [(PhaseTag::HighThrust, HoldKind::Foh), (PhaseTag::Coast, HoldKind::Zoh)] {
        let sys = RocketModel::new(&p, phase);
        let r = rocket_reference(hold);
        let d = discretize_interval(&sys, &r, 64).unwrap();
        let h = 1e-6;
        let mut rp = r.clone();
        rp.s_bar += h;
        let mut rm = r.clone();
        rm.s_bar -= h;
        let fd = (propagate_nonlinear(&sys, &rp, 64).unwrap() - propagate_nonlinear(&sys, &rm, 64).unwrap()) / (2.0 * h);
        let err = (&d.s - &fd).amax() / fd.amax();
        assert!(err < 1e-6, "{phase:?}: {err:e}");
    }
}

#[test]
fn zero_dynamics_are_identity() {
    let sys = LinearSystem::new(DMatrix::zeros(4, 4), DMatrix::zeros(4, 2));
    let r = reference(HoldKind::Foh, &[1.0, 2.0, 3.0, 4.0], &[1.0, -1.0], &[0.5, 0.5], 3.0);
    let d = discretize_interval(&sys, &r, 16).unwrap();
    assert_eq!(d.a, DMatrix::identity(4, 4));
    assert_eq!(d.x_prop, r.x_bar);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The affine update reproduces the propagated endpoint at the reference,
    /// and is first-order accurate nearby.
    #[test]
    fn affine_update_is_consistent_with_propagation(
        dx in prop::collection::vec(-1.0f64..1.0, 7),
        du in prop::collection::vec(-1.0f64..1.0, 2),
        ds in -1.0f64..1.0,
        powered in any::<bool>(),
    ) {
        let p = RocketParams::default();
        let (phase, hold) = if powered { (PhaseTag::HighThrust, HoldKind::Foh) } else { (PhaseTag::Coast, HoldKind::Zoh) };
        let sys = RocketModel::new(&p, phase);
        let r = rocket_reference(hold);
        let d = discretize_interval(&sys, &r, 16).unwrap();
        let at_ref = d.apply(&r.x_bar, &r.u_bar_k, &r.u_bar_k1, r.s_bar);
        prop_assert!((&at_ref - &d.x_prop).amax() <= 1e-9 * d.x_prop.amax());

        let x_scale = [100.0, 1.0, 1.0, 0.1, 0.1, 1e-3, 1e-4];
        let u_scale = [1e3, 1e-4];
        let eps = 1e-2;
        let mut pert = r.clone();
        for i in 0..7 {
            pert.x_bar[i] += eps * dx[i] * x_scale[i];
        }
        let mut du_vec = DVector::zeros(2);
        for i in 0..2 {
            du_vec[i] = eps * du[i] * u_scale[i];
        }
        pert.u_bar_k += &du_vec;
        pert.u_bar_k1 += &du_vec;
        pert.s_bar += eps * ds * 1e-3;
        let truth = propagate_nonlinear(&sys, &pert, 16).unwrap();
        let linear = d.apply(&pert.x_bar, &pert.u_bar_k, &pert.u_bar_k1, pert.s_bar);
        let moved = (&truth - &d.x_prop).amax();
        prop_assert!((&truth - &linear).amax() <= 1e-3 * moved.max(1e-9));
    }
}
