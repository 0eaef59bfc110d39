//! Tensor fields on a chart and the connections built from them.

use std::fmt;
use std::sync::Arc;

use crate::diff::{vector_gradient, DiffConfig};
use crate::error::{Error, Result};
use crate::tensor::{invert_matrix, raise_first_index, DenseTensor, Matrix, SymTensor};

/// A symmetric metric field `q -> g(q)`.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn metric(&self, q: &[f64]) -> Result<Matrix>;

    /// `out[s] = d g / d q^s`, when known in closed form.
    fn metric_gradient(&self, _q: &[f64]) -> Option<Result<Vec<Matrix>>> {
        None
    }
}

/// A fully symmetric rank-3 field.
pub trait SkewnessField: Send + Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn skewness(&self, q: &[f64]) -> Result<SymTensor>;

    fn skewness_gradient(&self, _q: &[f64]) -> Option<Result<Vec<SymTensor>>> {
        None
    }
}

/// A fully symmetric rank-4 field.
pub trait QuarticField: Send + Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn quartic(&self, q: &[f64]) -> Result<SymTensor>;

    fn quartic_gradient(&self, _q: &[f64]) -> Option<Result<Vec<SymTensor>>> {
        None
    }

    /// True when the field vanishes everywhere, letting callers skip it.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct ConstantMetric(pub Matrix);

impl MetricField for ConstantMetric {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn label(&self) -> String {
        "constant metric".into()
    }
    fn metric(&self, _q: &[f64]) -> Result<Matrix> {
        Ok(self.0.clone())
    }
    fn metric_gradient(&self, _q: &[f64]) -> Option<Result<Vec<Matrix>>> {
        let n = self.0.dim();
        Some(Ok(vec![Matrix::zeros(n); n]))
    }
}

/// A spatially constant symmetric tensor; serves as both a skewness and a
/// quartic field depending on its rank.
#[derive(Clone, Debug)]
pub struct ConstantTensor(pub SymTensor);

impl ConstantTensor {
    pub fn zero(dim: usize, rank: usize) -> Self {
        ConstantTensor(SymTensor::zeros(dim, rank))
    }

    fn zeros_gradient(&self) -> Vec<SymTensor> {
        let n = self.0.dim();
        vec![SymTensor::zeros(n, self.0.rank()); n]
    }
}

impl SkewnessField for ConstantTensor {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn label(&self) -> String {
        "constant skewness".into()
    }
    fn skewness(&self, _q: &[f64]) -> Result<SymTensor> {
        if self.0.rank() != 3 {
            return Err(Error::Dimension(format!("skewness needs rank 3, got {}", self.0.rank())));
        }
        Ok(self.0.clone())
    }
    fn skewness_gradient(&self, _q: &[f64]) -> Option<Result<Vec<SymTensor>>> {
        Some(Ok(self.zeros_gradient()))
    }
}

impl QuarticField for ConstantTensor {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn label(&self) -> String {
        "constant quartic".into()
    }
    fn quartic(&self, _q: &[f64]) -> Result<SymTensor> {
        if self.0.rank() != 4 {
            return Err(Error::Dimension(format!("quartic field needs rank 4, got {}", self.0.rank())));
        }
        Ok(self.0.clone())
    }
    fn quartic_gradient(&self, _q: &[f64]) -> Option<Result<Vec<SymTensor>>> {
        Some(Ok(self.zeros_gradient()))
    }
    fn is_zero(&self) -> bool {
        self.0.max_abs() == 0.0
    }
}

fn check_dim(q: &[f64], n: usize, what: &str) -> Result<()> {
    if q.len() != n {
        return Err(Error::Dimension(format!("{what} has dimension {n}, point has {}", q.len())));
    }
    Ok(())
}

/// `out[s] = d g / d q^s`, analytic when available, else central differences.
pub fn metric_derivatives(g: &dyn MetricField, q: &[f64], cfg: &DiffConfig) -> Result<Vec<Matrix>> {
    check_dim(q, g.dim(), "metric field")?;
    if let Some(r) = g.metric_gradient(q) {
        return r;
    }
    let n = g.dim();
    let rows = vector_gradient(|p| Ok(g.metric(p)?.as_slice().to_vec()), q, cfg)?;
    rows.into_iter()
        .map(|flat| Matrix::from_rows(flat.chunks(n).map(|c| c.to_vec()).collect()))
        .collect()
}

fn sym_derivatives(
    analytic: Option<Result<Vec<SymTensor>>>,
    eval: impl Fn(&[f64]) -> Result<SymTensor>,
    q: &[f64],
    dim: usize,
    rank: usize,
    cfg: &DiffConfig,
) -> Result<Vec<SymTensor>> {
    if let Some(r) = analytic {
        return r;
    }
    let rows = vector_gradient(|p| Ok(eval(p)?.values().to_vec()), q, cfg)?;
    rows.into_iter()
        .map(|vals| SymTensor::from_values(dim, rank, vals))
        .collect()
}

pub fn skewness_derivatives(t: &dyn SkewnessField, q: &[f64], cfg: &DiffConfig) -> Result<Vec<SymTensor>> {
    check_dim(q, t.dim(), "skewness field")?;
    sym_derivatives(t.skewness_gradient(q), |p| t.skewness(p), q, t.dim(), 3, cfg)
}

pub fn quartic_derivatives(c: &dyn QuarticField, q: &[f64], cfg: &DiffConfig) -> Result<Vec<SymTensor>> {
    check_dim(q, c.dim(), "quartic field")?;
    sym_derivatives(c.quartic_gradient(q), |p| c.quartic(p), q, c.dim(), 4, cfg)
}

/// Levi-Civita symbols: `upper[i][j][k] = Γ^i_jk` and `lower[i][j][k] = Γ_ijk = g_il Γ^l_jk`.
#[derive(Clone, Debug)]
pub struct Christoffel {
    pub upper: DenseTensor,
    pub lower: DenseTensor,
}

pub fn christoffel_lc(g: &dyn MetricField, q: &[f64], cfg: &DiffConfig) -> Result<Christoffel> {
    let metric = g.metric(q)?;
    christoffel_with(&metric, &metric_derivatives(g, q, cfg)?)
}

pub(crate) fn christoffel_with(metric: &Matrix, dg: &[Matrix]) -> Result<Christoffel> {
    let n = metric.dim();
    let inv = invert_matrix(metric)?;
    let lower = DenseTensor::from_fn(n, 3, |ix| {
        let (l, j, k) = (ix[0], ix[1], ix[2]);
        0.5 * (dg[j].get(l, k) + dg[k].get(l, j) - dg[l].get(j, k))
    });
    let upper = DenseTensor::from_fn(n, 3, |ix| {
        (0..n).map(|l| inv.get(ix[0], l) * lower.get(&[l, ix[1], ix[2]])).sum()
    });
    Ok(Christoffel { upper, lower })
}

/// `Γ^i_±jk = Γ^i_jk ± g^{il} T_ljk`.
pub fn dual_christoffel(
    g: &dyn MetricField,
    t: &dyn SkewnessField,
    q: &[f64],
    sign: f64,
    cfg: &DiffConfig,
) -> Result<DenseTensor> {
    if sign.abs() != 1.0 {
        return Err(Error::Config(format!("connection sign must be +1 or -1, got {sign}")));
    }
    let lc = christoffel_lc(g, q, cfg)?;
    let raised = raise_first_index(&invert_matrix(&g.metric(q)?)?, &t.skewness(q)?)?;
    Ok(lc.upper.add_scaled(&raised, sign))
}

/// `X g(Y,Z) - g(∇_X Y, Z) - g(Y, ∇*_X Z)` for constant coordinate fields,
/// with `∇ = Γ_+` and `∇* = Γ_-`.
pub fn duality_residual(
    g: &dyn MetricField,
    t: &dyn SkewnessField,
    q: &[f64],
    x: &[f64],
    y: &[f64],
    z: &[f64],
    cfg: &DiffConfig,
) -> Result<f64> {
    let n = g.dim();
    let metric = g.metric(q)?;
    let dg = metric_derivatives(g, q, cfg)?;
    let plus = dual_christoffel(g, t, q, 1.0, cfg)?;
    let minus = dual_christoffel(g, t, q, -1.0, cfg)?;
    let lhs: f64 = (0..n).map(|s| x[s] * dg[s].bilinear(y, z)).sum();
    let cov = |gamma: &DenseTensor, a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        acc += gamma.get(&[i, j, k]) * x[j] * a[k];
                    }
                }
                acc
            })
            .collect()
    };
    let rhs = metric.bilinear(&cov(&plus, y), z) + metric.bilinear(y, &cov(&minus, z));
    Ok(lhs - rhs)
}

/// `A_rjks = d_s T_jkr + d_k T_jrs + d_j T_rks - d_r T_jks`.
pub fn a_tensor(t: &dyn SkewnessField, q: &[f64], cfg: &DiffConfig) -> Result<DenseTensor> {
    Ok(a_tensor_with(&skewness_derivatives(t, q, cfg)?, t.dim()))
}

pub(crate) fn a_tensor_with(dt: &[SymTensor], n: usize) -> DenseTensor {
    DenseTensor::from_fn(n, 4, |ix| {
        let (r, j, k, s) = (ix[0], ix[1], ix[2], ix[3]);
        dt[s].at(&[j, k, r]) + dt[k].at(&[j, r, s]) + dt[j].at(&[r, k, s]) - dt[r].at(&[j, k, s])
    })
}

/// `L(q, v) = ½ g vv + (α/6) T vvv + (1/24) C vvvv`.
#[derive(Clone)]
pub struct Lagrangian {
    pub g: Arc<dyn MetricField>,
    pub t: Arc<dyn SkewnessField>,
    pub c: Arc<dyn QuarticField>,
    pub alpha: f64,
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lagrangian")
            .field("g", &self.g.label())
            .field("t", &self.t.label())
            .field("c", &self.c.label())
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl Lagrangian {
    /// Cubic Lagrangian with `α = ½` and no quartic term.
    pub fn new(g: Arc<dyn MetricField>, t: Arc<dyn SkewnessField>) -> Result<Self> {
        let n = g.dim();
        Lagrangian::with_quartic(g, t, Arc::new(ConstantTensor::zero(n, 4)), 0.5)
    }

    pub fn with_quartic(
        g: Arc<dyn MetricField>,
        t: Arc<dyn SkewnessField>,
        c: Arc<dyn QuarticField>,
        alpha: f64,
    ) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be finite, got {alpha}")));
        }
        if t.dim() != g.dim() || c.dim() != g.dim() {
            return Err(Error::Dimension(format!(
                "field dimensions disagree: g {}, T {}, C {}",
                g.dim(),
                t.dim(),
                c.dim()
            )));
        }
        Ok(Lagrangian { g, t, c, alpha })
    }

    /// Geodesic Lagrangian `½ g vv`.
    pub fn geodesic(g: Arc<dyn MetricField>) -> Self {
        let n = g.dim();
        Lagrangian::with_quartic(
            g,
            Arc::new(ConstantTensor::zero(n, 3)),
            Arc::new(ConstantTensor::zero(n, 4)),
            0.5,
        )
        .expect("consistent dimensions")
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be finite, got {alpha}")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }
}

pub fn lagrangian_value(l: &Lagrangian, q: &[f64], v: &[f64]) -> Result<f64> {
    check_dim(q, l.dim(), "lagrangian")?;
    check_dim(v, l.dim(), "lagrangian")?;
    let mut value = 0.5 * l.g.metric(q)?.bilinear(v, v);
    if l.alpha != 0.0 {
        value += l.alpha / 6.0 * l.t.skewness(q)?.full_contraction(v);
    }
    if !l.c.is_zero() {
        value += l.c.quartic(q)?.full_contraction(v) / 24.0;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct Polar;

    impl MetricField for Polar {
        fn dim(&self) -> usize {
            2
        }
        fn label(&self) -> String {
            "polar".into()
        }
        fn metric(&self, q: &[f64]) -> Result<Matrix> {
            Ok(Matrix::from_diagonal(&[1.0, q[0] * q[0]]))
        }
    }

    struct FisherBernoulli;

    impl MetricField for FisherBernoulli {
        fn dim(&self) -> usize {
            1
        }
        fn label(&self) -> String {
            "fisher".into()
        }
        fn metric(&self, q: &[f64]) -> Result<Matrix> {
            Ok(Matrix::from_diagonal(&[1.0 / (q[0] * (1.0 - q[0]))]))
        }
    }

    struct LinearSkew;

    impl SkewnessField for LinearSkew {
        fn dim(&self) -> usize {
            1
        }
        fn label(&self) -> String {
            "linear".into()
        }
        fn skewness(&self, q: &[f64]) -> Result<SymTensor> {
            Ok(SymTensor::from_fn(1, 3, |_| 3.0 * q[0] + 1.0))
        }
    }

    #[test]
    fn flat_metric_has_no_symbols() {
        let g = ConstantMetric(Matrix::from_diagonal(&[2.0, 3.0]));
        let c = christoffel_lc(&g, &[0.1, 0.2], &DiffConfig::finite_difference()).unwrap();
        assert_eq!(c.upper.max_abs(), 0.0);
    }

    #[test]
    fn polar_coordinates() {
        let c = christoffel_lc(&Polar, &[2.0, 0.3], &DiffConfig::finite_difference()).unwrap();
        assert_abs_diff_eq!(c.upper.get(&[0, 1, 1]), -2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(c.upper.get(&[1, 0, 1]), 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(c.upper.get(&[1, 1, 0]), 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(c.upper.get(&[0, 0, 0]), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn bernoulli_symbol() {
        for p in [0.2, 0.5, 0.7] {
            let c = christoffel_lc(&FisherBernoulli, &[p], &DiffConfig::finite_difference()).unwrap();
            let expect = (2.0 * p - 1.0) / (2.0 * p * (1.0 - p));
            assert_abs_diff_eq!(c.upper.get(&[0, 0, 0]), expect, epsilon = 1e-7);
        }
    }

    #[test]
    fn duals_average_to_levi_civita() {
        let cfg = DiffConfig::finite_difference();
        let t = ConstantTensor(SymTensor::from_fn(2, 3, |ix| 1.0 + ix.iter().sum::<usize>() as f64));
        let q = [1.5, 0.2];
        let lc = christoffel_lc(&Polar, &q, &cfg).unwrap();
        let p = dual_christoffel(&Polar, &t, &q, 1.0, &cfg).unwrap();
        let m = dual_christoffel(&Polar, &t, &q, -1.0, &cfg).unwrap();
        let avg = p.add_scaled(&m, 1.0);
        assert!(avg.max_abs_diff(&lc.upper.add_scaled(&lc.upper, 1.0)) < 1e-12);
        let r = duality_residual(&Polar, &t, &q, &[0.3, -1.0], &[1.0, 0.5], &[-0.2, 0.7], &cfg).unwrap();
        assert!(r.abs() < 1e-7, "{r}");
    }

    #[test]
    fn a_tensor_cases() {
        let cfg = DiffConfig::finite_difference();
        let a = a_tensor(&LinearSkew, &[0.4], &cfg).unwrap();
        assert_abs_diff_eq!(a.get(&[0, 0, 0, 0]), 6.0, epsilon = 1e-8);
        let flat = a_tensor(&ConstantTensor(SymTensor::from_fn(2, 3, |_| 2.0)), &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(flat.max_abs(), 0.0);
    }

    #[test]
    fn lagrangian_examples() {
        let g: Arc<dyn MetricField> = Arc::new(ConstantMetric(Matrix::identity(2)));
        let l = Lagrangian::geodesic(g);
        assert_eq!(lagrangian_value(&l, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(lagrangian_value(&l, &[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5);

        let l1 = Lagrangian::with_quartic(
            Arc::new(ConstantMetric(Matrix::from_diagonal(&[2.0]))),
            Arc::new(ConstantTensor(SymTensor::from_fn(1, 3, |_| 6.0))),
            Arc::new(ConstantTensor(SymTensor::from_fn(1, 4, |_| 24.0))),
            0.5,
        )
        .unwrap();
        assert_abs_diff_eq!(lagrangian_value(&l1, &[0.0], &[1.0]).unwrap(), 2.5, epsilon = 1e-15);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let r = Lagrangian::with_quartic(
            Arc::new(ConstantMetric(Matrix::identity(2))),
            Arc::new(ConstantTensor::zero(1, 3)),
            Arc::new(ConstantTensor::zero(2, 4)),
            0.5,
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
        let l = Lagrangian::geodesic(Arc::new(ConstantMetric(Matrix::identity(1))));
        assert!(l.with_alpha(f64::NAN).is_err());
    }
}
