use std::sync::Arc;

use twopoint_core::diff::{derivative_table, DiffConfig};
use twopoint_core::geometry::{ConstantMetric, ConstantTensor, Lagrangian};
use twopoint_core::hj::{integrate, PrincipalFunction, SolverSettings};
use twopoint_core::models::{kl_bernoulli, kl_categorical, reference_fields};
use twopoint_core::potential::{check_potential, metric_from_table, rank4_from_table, skewness_from_table};
use twopoint_core::sampling::sample_domain;
use twopoint_core::{Matrix, SymTensor};

fn settings() -> SolverSettings {
    SolverSettings::default()
}

#[test]
fn principal_function_is_a_potential() {
    let m = kl_categorical(3).unwrap();
    let (g, t) = reference_fields(&m).unwrap();
    let s = PrincipalFunction::new(Lagrangian::new(g, t).unwrap(), settings()).unwrap();
    for q in sample_domain(&m.domain, 3, 5) {
        let c = check_potential(&s, &q, 1e-8, &DiffConfig::finite_difference()).unwrap();
        assert!(c.passed, "{q:?}: {c:?}");
    }
}

#[test]
fn constant_metric_round_trips_exactly() {
    let m = Matrix::from_rows(vec![vec![2.0, 0.3], vec![0.3, 0.7]]).unwrap();
    let l = Lagrangian::new(Arc::new(ConstantMetric(m.clone())), Arc::new(ConstantTensor::zero(2, 3))).unwrap();
    let s = PrincipalFunction::new(l, settings()).unwrap();
    let cfg = DiffConfig::finite_difference();
    let table = derivative_table(&s, &[0.4, -0.2], 3, &cfg).unwrap();
    assert!(metric_from_table(&table, &cfg).tensor.to_matrix().max_abs_diff(&m) < 1e-8);
    assert!(skewness_from_table(&table, &cfg).tensor.max_abs() < 1e-6);
}

#[test]
fn geodesic_speed_is_conserved() {
    let m = kl_categorical(3).unwrap();
    let (g, _) = reference_fields(&m).unwrap();
    let l = Lagrangian::geodesic(g.clone());
    let tr = integrate(&l, &[0.2, 0.3], &[0.15, -0.1], 200, &DiffConfig::finite_difference()).unwrap();
    let energy = |k: usize| {
        let metric = g.metric(&tr.positions[k]).unwrap();
        0.5 * metric.bilinear(&tr.velocities[k], &tr.velocities[k])
    };
    let e0 = energy(0);
    for k in 0..tr.len() {
        assert!((energy(k) - e0).abs() <= 1e-10 * e0, "step {k}: {} vs {e0}", energy(k));
    }
    // L = E along a geodesic, so the action over [0, 1] equals the energy.
    assert!((tr.total_action() - e0).abs() <= 1e-9 * e0);
}

#[test]
fn quartic_lagrangian_keeps_rank4_combinations_zero() {
    let m = kl_bernoulli();
    let (g, t) = reference_fields(&m).unwrap();
    let c = Arc::new(ConstantTensor(SymTensor::from_fn(1, 4, |_| 5.0)));
    let s = PrincipalFunction::new(Lagrangian::with_quartic(g, t, c, 0.5).unwrap(), settings()).unwrap();
    let cfg = DiffConfig::finite_difference();
    let table = derivative_table(&s, &[0.35], 4, &cfg).unwrap();
    let r = rank4_from_table(&table);
    assert!(r.scaled_residual() <= 1e-3, "{r:?}");
    assert!(r.derivative_scale > 1.0);
}
