use twopoint_core::diff::{derivative_table, mixed_partial, Analytic, DiffConfig, PotentialExpr, SlotPattern};
use twopoint_core::models::{by_name, ModelDescriptor};
use twopoint_core::sampling::sample_domain;
use twopoint_core::tensor::all_multi_indices;
use twopoint_core::{Result, Scalar};

fn analytic_models() -> Vec<ModelDescriptor> {
    [
        "quadratic:rows:2,0.5/0.5,1",
        "kl-bernoulli",
        "kl-bernoulli:logit",
        "kl-categorical:3",
        "kl-categorical:4",
        "cantoni:2",
    ]
    .iter()
    .map(|n| by_name(n).unwrap())
    .collect()
}

fn words(order: usize) -> Vec<String> {
    (0..1usize << order)
        .map(|bits| (0..order).map(|i| if bits >> i & 1 == 1 { 'R' } else { 'L' }).collect())
        .collect()
}

#[test]
fn jet_and_finite_differences_agree_on_every_model() {
    let jet = DiffConfig::taylor_jet();
    let fd = DiffConfig::finite_difference();
    for model in analytic_models() {
        let s = model.potential().unwrap();
        for q in sample_domain(&model.domain, 3, 11) {
            let a = derivative_table(s.as_ref(), &q, 4, &jet).unwrap();
            let b = derivative_table(s.as_ref(), &q, 4, &fd).unwrap();
            for order in 1..=4 {
                let bound = if order <= 3 { 1e-6 } else { 1e-4 };
                let scale = a.max_abs_of_order(order).max(1.0);
                for marks in words(order) {
                    for idx in all_multi_indices(model.dim, order) {
                        let (x, y) = (a.value(&marks, &idx), b.value(&marks, &idx));
                        assert!(
                            (x - y).abs() <= bound * scale,
                            "{} at {q:?}: {marks}{idx:?} jet {x} fd {y}",
                            model.name
                        );
                    }
                }
            }
        }
    }
}

/// A degree-4 polynomial two-point function with hand-computable partials.
struct Quartic;

impl PotentialExpr for Quartic {
    fn dim(&self) -> usize {
        2
    }
    fn label(&self) -> String {
        "quartic".into()
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        // x0^2 y1^2 + 3 x0 x1 y0 y1 - 2 y0^4 + x1^3 y0
        let t1 = x[0].clone().square() * y[1].clone().square();
        let t2 = x[0].clone() * x[1].clone() * y[0].clone() * y[1].clone() * 3.0;
        let t3 = y[0].clone().powi(4) * -2.0;
        let t4 = x[1].clone().powi(3) * y[0].clone();
        Ok(t1 + t2 + t3 + t4)
    }
}

#[test]
fn jets_are_exact_on_polynomials() {
    let s = Analytic(Quartic);
    let q = [0.7, -1.3];
    let jet = DiffConfig::taylor_jet();
    let d = |marks: &str, idx: &[usize]| {
        mixed_partial(&s, &q, &SlotPattern::parse(marks, idx).unwrap(), &jet)
            .unwrap()
            .value
    };
    let (a, b) = (q[0], q[1]);
    // d/dx0 = 2 x0 y1^2 + 3 x1 y0 y1
    assert_eq!(d("L", &[0]), 2.0 * a * b * b + 3.0 * b * a * b);
    // d2/dx0 dy1 = 4 x0 y1 + 3 x1 y0
    assert_eq!(d("LR", &[0, 1]), 4.0 * a * b + 3.0 * b * a);
    // d4/dy0^4 = -48
    assert_eq!(d("RRRR", &[0, 0, 0, 0]), -48.0);
    // d4/dx0^2 dy1^2 = 4
    assert_eq!(d("LLRR", &[0, 0, 1, 1]), 4.0);
    // d4/dx1^3 dy0 = 6
    assert_eq!(d("LLLR", &[1, 1, 1, 0]), 6.0);
    // d4/dx0 dx1 dy0 dy1 = 3
    assert_eq!(d("LLRR", &[0, 1, 0, 1]), 3.0);
    assert_eq!(d("LLLL", &[0, 0, 0, 0]), 0.0);
}
