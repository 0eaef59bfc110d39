use proptest::prelude::*;

use twopoint_core::diff::DiffConfig;
use twopoint_core::models::{by_name, cantoni_overlap, kl_bernoulli, kl_categorical};
use twopoint_core::potential::check_potential;
use twopoint_core::sampling::sample_domain;

const WITH_POTENTIAL: [&str; 8] = [
    "quadratic:identity:3",
    "quadratic:diag:2,0.5",
    "kl-bernoulli",
    "kl-bernoulli:logit",
    "kl-categorical:3",
    "kl-categorical:5",
    "cantoni:2",
    "cantoni:3",
];

#[test]
fn every_potential_passes_the_first_order_check() {
    for name in WITH_POTENTIAL {
        let m = by_name(name).unwrap();
        let s = m.potential().unwrap();
        for q in sample_domain(&m.domain, 20, 3) {
            for (cfg, tol) in [(DiffConfig::taylor_jet(), 1e-10), (DiffConfig::finite_difference(), 1e-6)] {
                let c = check_potential(s.as_ref(), &q, tol, &cfg).unwrap();
                assert!(c.passed, "{name} at {q:?}: {c:?}");
            }
        }
    }
}

/// `|<psi|phi>|^2 / (|psi|^2 |phi|^2)` with complex arithmetic spelled out.
type C = (f64, f64);

fn mul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn conj(a: C) -> C {
    (a.0, -a.1)
}

fn to_complex(q: &[f64]) -> Vec<C> {
    let n = q.len() / 2;
    (0..n).map(|j| (q[j], q[n + j])).collect()
}

fn to_real(z: &[C]) -> Vec<f64> {
    z.iter().map(|c| c.0).chain(z.iter().map(|c| c.1)).collect()
}

fn apply(u: &[[C; 2]; 2], z: &[C]) -> Vec<C> {
    (0..2)
        .map(|i| {
            let a = mul(u[i][0], z[0]);
            let b = mul(u[i][1], z[1]);
            (a.0 + b.0, a.1 + b.1)
        })
        .collect()
}

/// `[[a, -e^{i phi} conj(b)], [b, e^{i phi} conj(a)]]` with `|a|^2 + |b|^2 = 1`.
fn unitary(t: f64, alpha: f64, beta: f64, phi: f64) -> [[C; 2]; 2] {
    let a = (t.cos() * alpha.cos(), t.cos() * alpha.sin());
    let b = (t.sin() * beta.cos(), t.sin() * beta.sin());
    let e = (phi.cos(), phi.sin());
    let nb = mul(e, conj(b));
    [[a, (-nb.0, -nb.1)], [b, mul(e, conj(a))]]
}

fn state() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 4).prop_filter("nonzero", |v| v.iter().map(|c| c * c).sum::<f64>() > 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cantoni_is_unitarily_invariant(
        x in state(), y in state(),
        t in 0.0..6.3f64, a in 0.0..6.3f64, b in 0.0..6.3f64, phi in 0.0..6.3f64,
    ) {
        let s = cantoni_overlap(2).unwrap();
        let s = s.potential().unwrap();
        let u = unitary(t, a, b, phi);
        let ux = to_real(&apply(&u, &to_complex(&x)));
        let uy = to_real(&apply(&u, &to_complex(&y)));
        let before = s.eval(&x, &y).unwrap();
        let after = s.eval(&ux, &uy).unwrap();
        prop_assert!((before - after).abs() <= 1e-12, "{before} vs {after}");
    }

    #[test]
    fn cantoni_ignores_scale_and_phase_of_each_argument(
        x in state(), y in state(), r in 0.1..5.0f64, theta in 0.0..6.3f64,
    ) {
        let s = cantoni_overlap(2).unwrap();
        let s = s.potential().unwrap();
        let c = (r * theta.cos(), r * theta.sin());
        let cx = to_real(&to_complex(&x).iter().map(|&z| mul(c, z)).collect::<Vec<_>>());
        let cy = to_real(&to_complex(&y).iter().map(|&z| mul(c, z)).collect::<Vec<_>>());
        let before = s.eval(&x, &y).unwrap();
        prop_assert!((s.eval(&cx, &y).unwrap() - before).abs() <= 1e-12);
        prop_assert!((s.eval(&x, &cy).unwrap() - before).abs() <= 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&before));
    }

    #[test]
    fn two_outcome_categorical_is_bernoulli(p in 0.01..0.99f64, r in 0.01..0.99f64) {
        let cat = kl_categorical(2).unwrap();
        let bern = kl_bernoulli();
        let a = cat.potential().unwrap().eval(&[p], &[r]).unwrap();
        let b = bern.potential().unwrap().eval(&[p], &[r]).unwrap();
        prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0));
    }
}
