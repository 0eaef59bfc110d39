use std::sync::Arc;

use proptest::prelude::*;

use twopoint_core::diff::{derivative_table, mixed_partial, BlackBox, DiffConfig, SlotPattern, TwoPointFunction};
use twopoint_core::geometry::{
    a_tensor, christoffel_lc, duality_residual, lagrangian_value, ConstantTensor, Lagrangian,
};
use twopoint_core::models::{by_name, reference_fields, synthetic_2d, ModelDescriptor};
use twopoint_core::potential::{extract_metric, extract_skewness, rank4_from_table, sign_table};
use twopoint_core::SymTensor;

fn model(name: &str) -> ModelDescriptor {
    by_name(name).unwrap()
}

fn unit_point(m: &ModelDescriptor, u: &[f64]) -> Vec<f64> {
    m.domain.from_unit(&u[..m.dim])
}

fn unit() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 4)
}

const POTENTIALS: [&str; 5] = ["quadratic:diag:3,0.5", "kl-bernoulli", "kl-bernoulli:logit", "kl-categorical:3", "cantoni:2"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn slot_order_does_not_matter(u in unit(), perm in 0usize..24) {
        let m = model("kl-categorical:3");
        let s = m.potential().unwrap();
        let q = unit_point(&m, &u);
        let marks = ["L", "R", "R", "L"];
        let idx = [0usize, 1, 0, 1];
        let mut order: Vec<usize> = (0..4).collect();
        let mut k = perm;
        for i in (1..4).rev() {
            order.swap(i, k % (i + 1));
            k /= i + 1;
        }
        let pm: String = order.iter().map(|&i| marks[i]).collect();
        let pi: Vec<usize> = order.iter().map(|&i| idx[i]).collect();
        let fd = DiffConfig::finite_difference();
        let base = mixed_partial(s.as_ref(), &q, &SlotPattern::parse("LRRL", &idx).unwrap(), &fd).unwrap();
        let permuted = mixed_partial(s.as_ref(), &q, &SlotPattern::parse(&pm, &pi).unwrap(), &fd).unwrap();
        prop_assert!((base.value - permuted.value).abs() <= fd.tolerance(4) * base.value.abs().max(1.0));
    }

    #[test]
    fn order2_and_order3_signs_hold_on_every_potential(u in unit(), which in 0usize..5, fd in any::<bool>()) {
        let m = model(POTENTIALS[which]);
        let q = unit_point(&m, &u);
        let cfg = if fd { DiffConfig::finite_difference() } else { DiffConfig::taylor_jet() };
        let table = sign_table(m.potential().unwrap().as_ref(), &q, &cfg).unwrap();
        prop_assert!(table.matches(), "{} at {q:?}: {table:?}", m.name);
        prop_assert!(table.order2_residual <= table.order2_bound / 10.0);
    }

    #[test]
    fn rank4_combinations_vanish(u in unit(), which in 0usize..5) {
        let m = model(POTENTIALS[which]);
        let q = unit_point(&m, &u);
        let cfg = DiffConfig::taylor_jet();
        let table = derivative_table(m.potential().unwrap().as_ref(), &q, 4, &cfg).unwrap();
        prop_assert!(rank4_from_table(&table).scaled_residual() <= cfg.tolerance(4));
    }

    #[test]
    fn symmetric_potentials_have_no_skewness(u in unit(), which in 0usize..3) {
        let cfg = DiffConfig::finite_difference();
        let (s, q): (Arc<dyn TwoPointFunction>, Vec<f64>) = match which {
            0 => { let m = model("cantoni:2"); let q = unit_point(&m, &u); (m.potential().unwrap().clone(), q) }
            1 => { let m = model("quadratic:rows:2,0.5/0.5,1"); let q = unit_point(&m, &u); (m.potential().unwrap().clone(), q) }
            _ => {
                let m = model("kl-categorical:3");
                let kl = m.potential().unwrap().clone();
                let q = unit_point(&m, &u);
                let sym = BlackBox::new(2, "symmetrized kl", move |x: &[f64], y: &[f64]| Ok(kl.eval(x, y)? + kl.eval(y, x)?));
                (Arc::new(sym), q)
            }
        };
        let t = extract_skewness(s.as_ref(), &q, &cfg).unwrap();
        let g = extract_metric(s.as_ref(), &q, &cfg).unwrap();
        prop_assert!(t.tensor.max_abs() <= 1e-4 * g.tensor.max_abs().max(1.0), "{:?}", t.tensor);
    }

    #[test]
    fn minimum_gives_psd_and_maximum_gives_nsd(u in unit(), which in 0usize..5) {
        let m = model(POTENTIALS[which]);
        let q = unit_point(&m, &u);
        let g = extract_metric(m.potential().unwrap().as_ref(), &q, &DiffConfig::taylor_jet()).unwrap().tensor.to_matrix();
        let eig = g.symmetric_eigenvalues();
        let slack = 1e-10 * g.max_abs();
        if m.name.starts_with("cantoni") {
            prop_assert!(eig.iter().all(|&l| l <= slack));
            // Radial and phase directions span the kernel.
            prop_assert!(eig.iter().filter(|l| l.abs() <= slack).count() >= 2);
            let phase = [-q[2], -q[3], q[0], q[1]];
            for dir in [q.clone(), phase.to_vec()] {
                prop_assert!(g.mul_vec(&dir).iter().all(|c| c.abs() <= slack));
            }
        } else {
            prop_assert!(eig.iter().all(|&l| l >= -slack));
        }
    }

    #[test]
    fn dual_connections_satisfy_the_duality_identity(
        u in unit(),
        x in prop::collection::vec(-1.0..1.0f64, 2),
        y in prop::collection::vec(-1.0..1.0f64, 2),
        z in prop::collection::vec(-1.0..1.0f64, 2),
        which in 0usize..3,
    ) {
        let m = match which { 0 => model("kl-bernoulli"), 1 => model("kl-categorical:3"), _ => synthetic_2d() };
        let (g, t) = reference_fields(&m).unwrap();
        let q = unit_point(&m, &u);
        let n = m.dim;
        for cfg in [DiffConfig::finite_difference(), DiffConfig::taylor_jet()] {
            let r = duality_residual(g.as_ref(), t.as_ref(), &q, &x[..n], &y[..n], &z[..n], &cfg).unwrap();
            prop_assert!(r <= 1e-5, "{} at {q:?}: {r}", m.name);
        }
    }

    #[test]
    fn christoffel_symbols_are_symmetric(u in unit(), which in 0usize..3) {
        let m = match which { 0 => model("kl-bernoulli"), 1 => model("kl-categorical:4"), _ => synthetic_2d() };
        let (g, _) = reference_fields(&m).unwrap();
        let q = unit_point(&m, &u);
        let c = christoffel_lc(g.as_ref(), &q, &DiffConfig::finite_difference()).unwrap();
        let n = m.dim;
        for i in 0..n { for j in 0..n { for k in 0..n {
            prop_assert_eq!(c.upper.get(&[i, j, k]), c.upper.get(&[i, k, j]));
        }}}
    }

    #[test]
    fn quadratic_lagrangian_scales_by_four(u in unit(), v in prop::collection::vec(-2.0..2.0f64, 3)) {
        let m = model("kl-categorical:4");
        let (g, _) = reference_fields(&m).unwrap();
        let l = Lagrangian::geodesic(g);
        let q = unit_point(&m, &u);
        let v2: Vec<f64> = v.iter().map(|c| 2.0 * c).collect();
        let a = lagrangian_value(&l, &q, &v).unwrap();
        let b = lagrangian_value(&l, &q, &v2).unwrap();
        prop_assert!((b - 4.0 * a).abs() <= 1e-14 * b.abs().max(1e-300));
    }
}

#[test]
fn constant_skewness_has_zero_a_tensor() {
    let t = ConstantTensor(SymTensor::from_fn(3, 3, |ix| 1.0 + ix.iter().sum::<usize>() as f64));
    for cfg in [DiffConfig::finite_difference(), DiffConfig::taylor_jet()] {
        let a = a_tensor(&t, &[0.1, 0.2, 0.3], &cfg).unwrap();
        assert_eq!(a.max_abs(), 0.0);
    }
}

#[test]
fn bernoulli_fields_carry_the_fisher_rao_skewness() {
    let m = model("kl-bernoulli");
    let (g, t) = reference_fields(&m).unwrap();
    let p = 0.3f64;
    let w = p * (1.0 - p);
    assert!((g.metric(&[p]).unwrap().get(0, 0) - 1.0 / w).abs() < 1e-12);
    assert!((t.skewness(&[p]).unwrap().at(&[0, 0, 0]) - (2.0 * p - 1.0) / (w * w)).abs() < 1e-12);
    assert_eq!(g.dim(), 1);
    assert_eq!(t.dim(), 1);
}
