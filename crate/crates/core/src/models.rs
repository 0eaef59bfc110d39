//! Built-in potentials and tensor fields.

use std::fmt;
use std::sync::Arc;

use crate::diff::{Analytic, PotentialExpr, TwoPointFunction};
use crate::error::{Error, Result};
use crate::geometry::{MetricField, SkewnessField};
use crate::jet::Scalar;
use crate::tensor::{Matrix, SymTensor};

/// Where a model's coordinates are valid.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// All of `R^n`; samplers use `[-1, 1]^n`.
    Euclidean { dim: usize },
    /// Open box `lo < q < hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open simplex `q_i > 0`, `sum q_i < 1`.
    Simplex { dim: usize },
    /// `R^n` without the origin.
    Punctured { dim: usize },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Euclidean { dim } | Domain::Simplex { dim } | Domain::Punctured { dim } => *dim,
            Domain::Box { lo, .. } => lo.len(),
        }
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        if q.len() != self.dim() || q.iter().any(|c| !c.is_finite()) {
            return false;
        }
        match self {
            Domain::Euclidean { .. } => true,
            Domain::Box { lo, hi } => q.iter().zip(lo.iter().zip(hi)).all(|(c, (a, b))| a < c && c < b),
            Domain::Simplex { .. } => q.iter().all(|&c| c > 0.0) && q.iter().sum::<f64>() < 1.0,
            Domain::Punctured { .. } => q.iter().any(|&c| c != 0.0),
        }
    }

    /// A representative interior point: the origin, the box centre, the
    /// simplex barycentre, or the first basis vector.
    pub fn center(&self) -> Vec<f64> {
        let n = self.dim();
        match self {
            Domain::Euclidean { .. } => vec![0.0; n],
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            Domain::Simplex { .. } => vec![1.0 / (n as f64 + 1.0); n],
            Domain::Punctured { .. } => {
                let mut e = vec![0.0; n];
                e[0] = 1.0;
                e
            }
        }
    }

    /// Maps a point of the unit cube into the interior, keeping clear of
    /// the boundary.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Domain::Euclidean { .. } => u.iter().map(|c| 2.0 * c - 1.0).collect(),
            Domain::Box { lo, hi } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(c, (a, b))| a + (b - a) * (0.2 + 0.6 * c))
                .collect(),
            Domain::Simplex { .. } => {
                let w: Vec<f64> = u.iter().map(|c| 0.5 + c).collect();
                let total = 1.0 + w.iter().sum::<f64>();
                w.iter().map(|c| c / total).collect()
            }
            Domain::Punctured { .. } => {
                let mut z: Vec<f64> = u.iter().map(|c| 2.0 * c - 1.0).collect();
                let mut norm = z.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm < 0.1 {
                    z[0] += 0.5;
                    norm = z.iter().map(|c| c * c).sum::<f64>().sqrt();
                }
                z.iter().map(|c| c / norm).collect()
            }
        }
    }
}

/// A named model: a potential, reference tensor fields, or both.
#[derive(Clone)]
pub struct ModelDescriptor {
    pub name: String,
    pub dim: usize,
    pub domain: Domain,
    pub potential: Option<Arc<dyn TwoPointFunction>>,
    pub metric: Option<Arc<dyn MetricField>>,
    pub skewness: Option<Arc<dyn SkewnessField>>,
}

impl fmt::Debug for ModelDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelDescriptor")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("potential", &self.potential.as_ref().map(|p| p.label()))
            .field("metric", &self.metric.as_ref().map(|m| m.label()))
            .field("skewness", &self.skewness.as_ref().map(|t| t.label()))
            .finish()
    }
}

impl ModelDescriptor {
    pub fn potential(&self) -> Result<&Arc<dyn TwoPointFunction>> {
        self.potential
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("model {} has no potential", self.name)))
    }
}

fn require(domain: &Domain, q: &[f64], what: &str) -> Result<()> {
    if domain.contains(q) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what}: point {q:?} is outside the model domain")))
    }
}

// ---------------------------------------------------------------- quadratic

#[derive(Clone, Debug)]
pub struct Quadratic {
    m: Matrix,
}

impl PotentialExpr for Quadratic {
    fn dim(&self) -> usize {
        self.m.dim()
    }
    fn label(&self) -> String {
        format!("quadratic (n = {})", self.m.dim())
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let n = self.m.dim();
        let d: Vec<S> = (0..n).map(|i| y[i].clone() - x[i].clone()).collect();
        let mut acc = d[0].constant_like(0.0);
        for i in 0..n {
            for j in 0..n {
                acc = acc + d[i].clone() * d[j].clone() * (0.5 * self.m.get(i, j));
            }
        }
        Ok(acc)
    }
}

/// `S = ½ (y − x)ᵀ M (y − x)` for symmetric positive-definite `M`.
pub fn quadratic_model(m: Matrix) -> Result<ModelDescriptor> {
    let asym = m.asymmetry();
    if asym > 1e-12 * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = m.symmetric_eigenvalues();
    if eig.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Domain(format!(
            "quadratic model needs a positive-definite matrix, eigenvalues {eig:?}"
        )));
    }
    let n = m.dim();
    Ok(ModelDescriptor {
        name: format!("quadratic:{n}"),
        dim: n,
        domain: Domain::Euclidean { dim: n },
        potential: Some(Arc::new(Analytic(Quadratic { m: m.clone() }))),
        metric: Some(Arc::new(crate::geometry::ConstantMetric(m))),
        skewness: Some(Arc::new(crate::geometry::ConstantTensor::zero(n, 3))),
    })
}

// ---------------------------------------------------------------- KL, Bernoulli

#[derive(Clone, Copy, Debug, Default)]
pub struct KlBernoulli;

fn unit_interval(p: f64, what: &str) -> Result<()> {
    if 0.0 < p && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what}: p = {p} outside (0, 1)")))
    }
}

impl PotentialExpr for KlBernoulli {
    fn dim(&self) -> usize {
        1
    }
    fn label(&self) -> String {
        "kl-bernoulli".into()
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        unit_interval(x[0].value(), "kl-bernoulli")?;
        unit_interval(y[0].value(), "kl-bernoulli")?;
        let p = x[0].clone();
        let q = y[0].clone();
        let p1 = -p.clone() + 1.0;
        let q1 = -q.clone() + 1.0;
        Ok(p.clone() * (p.ln() - q.ln()) + p1.clone() * (p1.ln() - q1.ln()))
    }
}

/// Fisher–Rao metric of the Bernoulli family, `1/(p(1−p))`.
#[derive(Clone, Copy, Debug, Default)]
pub struct BernoulliMetric;

impl MetricField for BernoulliMetric {
    fn dim(&self) -> usize {
        1
    }
    fn label(&self) -> String {
        "bernoulli fisher-rao".into()
    }
    fn metric(&self, q: &[f64]) -> Result<Matrix> {
        unit_interval(q[0], "bernoulli metric")?;
        Ok(Matrix::from_diagonal(&[1.0 / (q[0] * (1.0 - q[0]))]))
    }
    fn metric_gradient(&self, q: &[f64]) -> Option<Result<Vec<Matrix>>> {
        Some(unit_interval(q[0], "bernoulli metric").map(|_| {
            let (p, w) = (q[0], q[0] * (1.0 - q[0]));
            vec![Matrix::from_diagonal(&[(2.0 * p - 1.0) / (w * w)])]
        }))
    }
}

/// Skewness generated by the Bernoulli KL divergence, `(2p−1)/(p(1−p))²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct BernoulliSkewness;

impl SkewnessField for BernoulliSkewness {
    fn dim(&self) -> usize {
        1
    }
    fn label(&self) -> String {
        "bernoulli kl skewness".into()
    }
    fn skewness(&self, q: &[f64]) -> Result<SymTensor> {
        unit_interval(q[0], "bernoulli skewness")?;
        let (p, w) = (q[0], q[0] * (1.0 - q[0]));
        Ok(SymTensor::from_fn(1, 3, |_| (2.0 * p - 1.0) / (w * w)))
    }
    fn skewness_gradient(&self, q: &[f64]) -> Option<Result<Vec<SymTensor>>> {
        Some(unit_interval(q[0], "bernoulli skewness").map(|_| {
            let (p, w) = (q[0], q[0] * (1.0 - q[0]));
            let d = 2.0 / (w * w) + 2.0 * (2.0 * p - 1.0).powi(2) / (w * w * w);
            vec![SymTensor::from_fn(1, 3, |_| d)]
        }))
    }
}

pub fn kl_bernoulli() -> ModelDescriptor {
    ModelDescriptor {
        name: "kl-bernoulli".into(),
        dim: 1,
        domain: Domain::Box {
            lo: vec![0.0],
            hi: vec![1.0],
        },
        potential: Some(Arc::new(Analytic(KlBernoulli))),
        metric: Some(Arc::new(BernoulliMetric)),
        skewness: Some(Arc::new(BernoulliSkewness)),
    }
}

/// The Bernoulli KL divergence in the logit chart `θ = log(p/(1−p))`.
#[derive(Clone, Copy, Debug, Default)]
pub struct KlBernoulliLogit;

impl PotentialExpr for KlBernoulliLogit {
    fn dim(&self) -> usize {
        1
    }
    fn label(&self) -> String {
        "kl-bernoulli (logit chart)".into()
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let sigmoid = |t: &S| ((-t.clone()).exp() + 1.0).recip();
        KlBernoulli.eval(&[sigmoid(&x[0])], &[sigmoid(&y[0])])
    }
}

pub fn kl_bernoulli_logit() -> ModelDescriptor {
    ModelDescriptor {
        name: "kl-bernoulli:logit".into(),
        dim: 1,
        domain: Domain::Box {
            lo: vec![-3.0],
            hi: vec![3.0],
        },
        potential: Some(Arc::new(Analytic(KlBernoulliLogit))),
        metric: None,
        skewness: None,
    }
}

// ---------------------------------------------------------------- KL, categorical

/// KL divergence on the categorical family with `m` outcomes, in the chart
/// of the last `m − 1` probabilities (`p_0 = 1 − Σ p_i`).
#[derive(Clone, Copy, Debug)]
pub struct KlCategorical {
    m: usize,
}

fn simplex_check(q: &[f64], what: &str) -> Result<f64> {
    let p0 = 1.0 - q.iter().sum::<f64>();
    if q.iter().all(|&c| c > 0.0) && p0 > 0.0 {
        Ok(p0)
    } else {
        Err(Error::Domain(format!("{what}: {q:?} outside the open simplex")))
    }
}

impl PotentialExpr for KlCategorical {
    fn dim(&self) -> usize {
        self.m - 1
    }
    fn label(&self) -> String {
        format!("kl-categorical:{}", self.m)
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let xv: Vec<f64> = x.iter().map(|c| c.value()).collect();
        let yv: Vec<f64> = y.iter().map(|c| c.value()).collect();
        simplex_check(&xv, "kl-categorical")?;
        simplex_check(&yv, "kl-categorical")?;
        let term = |a: S, b: S| a.clone() * (a.ln() - b.ln());
        let mut x0 = x[0].constant_like(1.0);
        let mut y0 = y[0].constant_like(1.0);
        let mut acc = x[0].constant_like(0.0);
        for i in 0..self.m - 1 {
            x0 = x0 - x[i].clone();
            y0 = y0 - y[i].clone();
            acc = acc + term(x[i].clone(), y[i].clone());
        }
        Ok(acc + term(x0, y0))
    }
}

/// `g_ij = δ_ij / p_i + 1 / p_0`.
#[derive(Clone, Copy, Debug)]
pub struct CategoricalMetric {
    pub dim: usize,
}

impl MetricField for CategoricalMetric {
    fn dim(&self) -> usize {
        self.dim
    }
    fn label(&self) -> String {
        format!("categorical fisher-rao (m = {})", self.dim + 1)
    }
    fn metric(&self, q: &[f64]) -> Result<Matrix> {
        let p0 = simplex_check(q, "categorical metric")?;
        Ok(Matrix::from_fn(self.dim, |i, j| {
            1.0 / p0 + if i == j { 1.0 / q[i] } else { 0.0 }
        }))
    }
    fn metric_gradient(&self, q: &[f64]) -> Option<Result<Vec<Matrix>>> {
        Some(simplex_check(q, "categorical metric").map(|p0| {
            (0..self.dim)
                .map(|s| {
                    Matrix::from_fn(self.dim, |i, j| {
                        let own = if i == j && j == s { -1.0 / (q[s] * q[s]) } else { 0.0 };
                        own + 1.0 / (p0 * p0)
                    })
                })
                .collect()
        }))
    }
}

/// `T_ijk = 1/p_0² − δ_ijk / p_i²`.
#[derive(Clone, Copy, Debug)]
pub struct CategoricalSkewness {
    pub dim: usize,
}

impl SkewnessField for CategoricalSkewness {
    fn dim(&self) -> usize {
        self.dim
    }
    fn label(&self) -> String {
        format!("categorical kl skewness (m = {})", self.dim + 1)
    }
    fn skewness(&self, q: &[f64]) -> Result<SymTensor> {
        let p0 = simplex_check(q, "categorical skewness")?;
        Ok(SymTensor::from_fn(self.dim, 3, |ix| {
            let own = if ix[0] == ix[1] && ix[1] == ix[2] {
                1.0 / (q[ix[0]] * q[ix[0]])
            } else {
                0.0
            };
            1.0 / (p0 * p0) - own
        }))
    }
    fn skewness_gradient(&self, q: &[f64]) -> Option<Result<Vec<SymTensor>>> {
        Some(simplex_check(q, "categorical skewness").map(|p0| {
            (0..self.dim)
                .map(|s| {
                    SymTensor::from_fn(self.dim, 3, |ix| {
                        let own = if ix.iter().all(|&i| i == s) {
                            2.0 / q[s].powi(3)
                        } else {
                            0.0
                        };
                        2.0 / p0.powi(3) + own
                    })
                })
                .collect()
        }))
    }
}

pub fn kl_categorical(m: usize) -> Result<ModelDescriptor> {
    if m < 2 {
        return Err(Error::Config(format!("kl-categorical needs m >= 2, got {m}")));
    }
    let n = m - 1;
    Ok(ModelDescriptor {
        name: format!("kl-categorical:{m}"),
        dim: n,
        domain: Domain::Simplex { dim: n },
        potential: Some(Arc::new(Analytic(KlCategorical { m }))),
        metric: Some(Arc::new(CategoricalMetric { dim: n })),
        skewness: Some(Arc::new(CategoricalSkewness { dim: n })),
    })
}

// ---------------------------------------------------------------- Cantoni

/// `S(ψ, φ) = |⟨ψ|φ⟩|² / (|ψ|² |φ|²)` with `ψ = Σ (x^j + i y^j) e_j`; real
/// coordinates are ordered `(x^0, …, x^{N−1}, y^0, …, y^{N−1})`.
#[derive(Clone, Copy, Debug)]
pub struct CantoniOverlap {
    n: usize,
}

impl PotentialExpr for CantoniOverlap {
    fn dim(&self) -> usize {
        2 * self.n
    }
    fn label(&self) -> String {
        format!("cantoni:{}", self.n)
    }
    fn eval<S: Scalar>(&self, a: &[S], b: &[S]) -> Result<S> {
        for (v, which) in [(a, "first"), (b, "second")] {
            if v.iter().all(|c| c.value() == 0.0) {
                return Err(Error::Domain(format!("cantoni: {which} argument is the zero vector")));
            }
        }
        let n = self.n;
        let zero = a[0].constant_like(0.0);
        let (mut re, mut im, mut na, mut nb) = (zero.clone(), zero.clone(), zero.clone(), zero);
        for j in 0..n {
            let (x, y) = (a[j].clone(), a[n + j].clone());
            let (big_x, big_y) = (b[j].clone(), b[n + j].clone());
            re = re + x.clone() * big_x.clone() + y.clone() * big_y.clone();
            im = im + x.clone() * big_y.clone() - y.clone() * big_x.clone();
            na = na + x.square() + y.square();
            nb = nb + big_x.square() + big_y.square();
        }
        Ok((re.square() + im.square()) / (na * nb))
    }
}

/// Closed-form tensor in the form displayed with the Cantoni example:
/// diagonal blocks `2(x_j x_k + y_j y_k − δ_jk R²)/R⁴` on `dx dx` and `dy dy`,
/// and `(y_j x_k − y_k x_j)/R⁴` on `dx^j dy^k − dy^j dx^k`.
#[derive(Clone, Copy, Debug)]
pub struct CantoniDisplayedMetric {
    pub n: usize,
}

/// The same tensor obtained by expanding `−∂²S/∂ψ∂φ` directly: equal
/// diagonal blocks, cross block `g(dx^j, dy^k) = 2(x_j y_k − y_j x_k)/R⁴`.
#[derive(Clone, Copy, Debug)]
pub struct CantoniDerivedMetric {
    pub n: usize,
}

fn cantoni_blocks(n: usize, q: &[f64], cross: impl Fn(f64, f64, f64, f64) -> f64) -> Result<Matrix> {
    if q.len() != 2 * n {
        return Err(Error::Dimension(format!("cantoni metric needs {} coordinates", 2 * n)));
    }
    let r2: f64 = q.iter().map(|c| c * c).sum();
    if r2 == 0.0 {
        return Err(Error::Domain("cantoni metric at the zero vector".into()));
    }
    let r4 = r2 * r2;
    let (x, y) = q.split_at(n);
    Ok(Matrix::from_fn(2 * n, |a, b| {
        let (ia, ib) = (a % n, b % n);
        match (a < n, b < n) {
            (true, true) | (false, false) => {
                let delta = if ia == ib { r2 } else { 0.0 };
                2.0 * (x[ia] * x[ib] + y[ia] * y[ib] - delta) / r4
            }
            // g(dx^j, dy^k)
            (true, false) => cross(x[ia], y[ia], x[ib], y[ib]) / r4,
            // g(dy^j, dx^k) = g(dx^k, dy^j)
            (false, true) => cross(x[ib], y[ib], x[ia], y[ia]) / r4,
        }
    }))
}

impl MetricField for CantoniDisplayedMetric {
    fn dim(&self) -> usize {
        2 * self.n
    }
    fn label(&self) -> String {
        "cantoni displayed tensor".into()
    }
    fn metric(&self, q: &[f64]) -> Result<Matrix> {
        // coefficient c_jk = (y_j x_k − y_k x_j) multiplies dx^j⊗dy^k
        cantoni_blocks(self.n, q, |xj, yj, xk, yk| yj * xk - yk * xj)
    }
}

impl MetricField for CantoniDerivedMetric {
    fn dim(&self) -> usize {
        2 * self.n
    }
    fn label(&self) -> String {
        "cantoni derived tensor".into()
    }
    fn metric(&self, q: &[f64]) -> Result<Matrix> {
        cantoni_blocks(self.n, q, |xj, yj, xk, yk| 2.0 * (xj * yk - yj * xk))
    }
}

pub fn cantoni_overlap(n: usize) -> Result<ModelDescriptor> {
    if n < 2 {
        return Err(Error::Config(format!("cantoni needs complex dimension >= 2, got {n}")));
    }
    Ok(ModelDescriptor {
        name: format!("cantoni:{n}"),
        dim: 2 * n,
        domain: Domain::Punctured { dim: 2 * n },
        potential: Some(Arc::new(Analytic(CantoniOverlap { n }))),
        metric: Some(Arc::new(CantoniDisplayedMetric { n })),
        skewness: None,
    })
}

// ---------------------------------------------------------------- synthetic fields

/// `T_ijk(q) = c_ijk (1 + q^0 + 2 q^1)` with
/// `c_000 = 1, c_001 = 0.5, c_011 = −0.3, c_111 = 0.8`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SyntheticSkewness;

impl SyntheticSkewness {
    fn base(ix: &[usize]) -> f64 {
        match ix.iter().filter(|&&i| i == 1).count() {
            0 => 1.0,
            1 => 0.5,
            2 => -0.3,
            _ => 0.8,
        }
    }
}

impl SkewnessField for SyntheticSkewness {
    fn dim(&self) -> usize {
        2
    }
    fn label(&self) -> String {
        "synthetic linear skewness".into()
    }
    fn skewness(&self, q: &[f64]) -> Result<SymTensor> {
        let f = 1.0 + q[0] + 2.0 * q[1];
        Ok(SymTensor::from_fn(2, 3, |ix| SyntheticSkewness::base(ix) * f))
    }
    fn skewness_gradient(&self, _q: &[f64]) -> Option<Result<Vec<SymTensor>>> {
        Some(Ok(vec![
            SymTensor::from_fn(2, 3, SyntheticSkewness::base),
            SymTensor::from_fn(2, 3, |ix| 2.0 * SyntheticSkewness::base(ix)),
        ]))
    }
}

/// Fields only: the categorical(3) Fisher–Rao metric with [`SyntheticSkewness`].
pub fn synthetic_2d() -> ModelDescriptor {
    ModelDescriptor {
        name: "synthetic-2d".into(),
        dim: 2,
        domain: Domain::Simplex { dim: 2 },
        potential: None,
        metric: Some(Arc::new(CategoricalMetric { dim: 2 })),
        skewness: Some(Arc::new(SyntheticSkewness)),
    }
}

/// `(g, T)` reference fields of a model.
pub fn reference_fields(
    model: &ModelDescriptor,
) -> Result<(Arc<dyn MetricField>, Arc<dyn SkewnessField>)> {
    match (&model.metric, &model.skewness) {
        (Some(g), Some(t)) => Ok((g.clone(), t.clone())),
        _ => Err(Error::Unsupported(format!(
            "model {} has no reference (g, T) fields",
            model.name
        ))),
    }
}

/// Names accepted by [`by_name`], for usage text.
pub const REGISTRY: &[&str] = &[
    "quadratic:identity[:n]",
    "quadratic:diag:a,b,...",
    "quadratic:rows:a,b/c,d",
    "kl-bernoulli",
    "kl-bernoulli:logit",
    "kl-categorical:<m>",
    "cantoni:<N>",
    "synthetic-2d",
];

fn parse_f64s(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse {t:?} as a number")))
        })
        .collect()
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Config(format!("{what}: cannot parse {s:?} as a positive integer")))
}

pub fn by_name(name: &str) -> Result<ModelDescriptor> {
    let parts: Vec<&str> = name.splitn(3, ':').collect();
    let model = match parts.as_slice() {
        ["kl-bernoulli"] => kl_bernoulli(),
        ["kl-bernoulli", "logit"] => kl_bernoulli_logit(),
        ["kl-categorical", m] => kl_categorical(parse_usize(m, "kl-categorical")?)?,
        ["cantoni", n] => cantoni_overlap(parse_usize(n, "cantoni")?)?,
        ["synthetic-2d"] => synthetic_2d(),
        ["quadratic", "identity"] => quadratic_model(Matrix::identity(2))?,
        ["quadratic", "identity", n] => {
            let n = parse_usize(n, "quadratic:identity")?;
            if n == 0 {
                return Err(Error::Config("quadratic dimension must be positive".into()));
            }
            quadratic_model(Matrix::identity(n))?
        }
        ["quadratic", "diag", vals] => quadratic_model(Matrix::from_diagonal(&parse_f64s(vals)?))?,
        ["quadratic", "rows", rows] => {
            let rows = rows.split('/').map(parse_f64s).collect::<Result<Vec<_>>>()?;
            quadratic_model(Matrix::from_rows(rows).map_err(|e| Error::Config(e.to_string()))?)?
        }
        _ => {
            return Err(Error::Config(format!(
                "unknown model {name:?}; known models: {}",
                REGISTRY.join(", ")
            )))
        }
    };
    Ok(ModelDescriptor {
        name: name.to_string(),
        ..model
    })
}

/// Checks a point against a model's domain.
pub fn check_point(model: &ModelDescriptor, q: &[f64]) -> Result<()> {
    if q.len() != model.dim {
        return Err(Error::Dimension(format!(
            "model {} has dimension {}, point has {}",
            model.name,
            model.dim,
            q.len()
        )));
    }
    require(&model.domain, q, &model.name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::DiffConfig;
    use crate::potential::extract_metric;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_values() {
        let m = quadratic_model(Matrix::identity(2)).unwrap();
        let s = m.potential().unwrap();
        assert_eq!(s.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(s.eval(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!(quadratic_model(Matrix::from_diagonal(&[1.0, -1.0])).is_err());
        let bad = Matrix::from_rows(vec![vec![1.0, 0.2], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(quadratic_model(bad), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn bernoulli_values() {
        let s = kl_bernoulli().potential.unwrap();
        assert_eq!(s.eval(&[0.5], &[0.5]).unwrap(), 0.0);
        let expect = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(s.eval(&[0.5], &[0.25]).unwrap(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(expect, 0.14384, epsilon = 1e-5);
        assert!(matches!(s.eval(&[1.2], &[0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn categorical_two_is_bernoulli() {
        let b = kl_bernoulli().potential.unwrap();
        let c = kl_categorical(2).unwrap().potential.unwrap();
        for (p, q) in [(0.2, 0.3), (0.5, 0.9), (0.77, 0.01)] {
            // the chart coordinate of categorical(2) is p_1, Bernoulli uses p = p_1
            let a = b.eval(&[p], &[q]).unwrap();
            let d = c.eval(&[p], &[q]).unwrap();
            assert_abs_diff_eq!(a, d, epsilon = 4.0 * f64::EPSILON * a.abs().max(1.0));
        }
    }

    #[test]
    fn categorical_metric_at_uniform_point() {
        let m = kl_categorical(3).unwrap();
        let g = m.metric.unwrap().metric(&[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert_abs_diff_eq!(g.get(0, 0), 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.get(0, 1), 3.0, epsilon = 1e-12);
        assert!(kl_categorical(1).is_err());
        let s = m.potential.unwrap();
        assert!(s.eval(&[0.6, 0.5], &[0.2, 0.2]).is_err());
    }

    #[test]
    fn cantoni_invariances() {
        let s = cantoni_overlap(2).unwrap().potential.unwrap();
        let psi = [0.3, -0.5, 0.8, 0.1];
        assert_abs_diff_eq!(s.eval(&psi, &psi).unwrap(), 1.0, epsilon = 1e-15);
        // multiply by lambda = 2 - 3i
        let (lr, li) = (2.0, -3.0);
        let scaled = [
            lr * psi[0] - li * psi[2],
            lr * psi[1] - li * psi[3],
            lr * psi[2] + li * psi[0],
            lr * psi[3] + li * psi[1],
        ];
        assert_abs_diff_eq!(s.eval(&psi, &scaled).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(s.eval(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(s.eval(&[0.0; 4], &psi).is_err());
        assert!(cantoni_overlap(1).is_err());
    }

    #[test]
    fn cantoni_displayed_and_derived_agree_at_basis_vector() {
        let e1 = [1.0, 0.0, 0.0, 0.0];
        let a = CantoniDisplayedMetric { n: 2 }.metric(&e1).unwrap();
        let b = CantoniDerivedMetric { n: 2 }.metric(&e1).unwrap();
        assert_eq!(a.max_abs_diff(&b), 0.0);
        let s = cantoni_overlap(2).unwrap().potential.unwrap();
        let g = extract_metric(s.as_ref(), &e1, &DiffConfig::taylor_jet()).unwrap();
        assert!(g.tensor.to_matrix().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn cantoni_derived_tensor_matches_extraction() {
        let s = cantoni_overlap(2).unwrap().potential.unwrap();
        let psi = [0.5, 0.1, -0.4, 0.7];
        let g = extract_metric(s.as_ref(), &psi, &DiffConfig::taylor_jet()).unwrap();
        let b = CantoniDerivedMetric { n: 2 }.metric(&psi).unwrap();
        assert!(g.tensor.to_matrix().max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn cantoni_displayed_cross_block() {
        // ψ = (1, i)/√2: x = (a, 0), y = (0, a) with a = 1/√2
        let a = 0.5f64.sqrt();
        let q = [a, 0.0, 0.0, a];
        let shown = CantoniDisplayedMetric { n: 2 }.metric(&q).unwrap();
        let derived = CantoniDerivedMetric { n: 2 }.metric(&q).unwrap();
        // g(dx^0, dy^1)
        assert_abs_diff_eq!(shown.get(0, 3), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(derived.get(0, 3), 1.0, epsilon = 1e-15);
        assert!(shown.asymmetry() < 1e-15);
    }

    #[test]
    fn synthetic_fields_are_consistent() {
        let m = synthetic_2d();
        let (_, t) = reference_fields(&m).unwrap();
        let v = t.skewness(&[0.2, 0.3]).unwrap();
        assert_abs_diff_eq!(v.at(&[0, 1, 1]), -0.3 * 1.8, epsilon = 1e-15);
        assert_abs_diff_eq!(v.at(&[1, 0, 1]), -0.3 * 1.8, epsilon = 1e-15);
        assert!(reference_fields(&kl_bernoulli_logit()).is_err());
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(by_name("quadratic:identity:3").unwrap().dim, 3);
        assert_eq!(by_name("quadratic:diag:2,3").unwrap().dim, 2);
        assert_eq!(by_name("quadratic:rows:2,0.5/0.5,1").unwrap().dim, 2);
        assert_eq!(by_name("cantoni:3").unwrap().dim, 6);
        assert_eq!(by_name("kl-categorical:4").unwrap().dim, 3);
        assert!(matches!(by_name("gaussian"), Err(Error::Config(_))));
        assert!(matches!(by_name("kl-categorical:x"), Err(Error::Config(_))));
    }

    #[test]
    fn domain_mapping_stays_inside() {
        let doms = [
            Domain::Euclidean { dim: 2 },
            Domain::Box { lo: vec![0.0], hi: vec![1.0] },
            Domain::Simplex { dim: 3 },
            Domain::Punctured { dim: 4 },
        ];
        for d in doms {
            for u in [0.0, 0.3, 0.999] {
                let p = d.from_unit(&vec![u; d.dim()]);
                assert!(d.contains(&p), "{d:?} {p:?}");
            }
            assert!(d.contains(&d.center()));
        }
    }
}
