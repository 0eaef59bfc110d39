//! Mixed partial derivatives of two-point functions on the diagonal.
//!
//! A slot `L i` differentiates with respect to the first argument's
//! coordinate `x^i`, a slot `R i` with respect to the second argument's
//! `y^i`. Internally the `2n` product coordinates are numbered `x^0..x^{n-1}`
//! then `y^0..y^{n-1}`, and a pattern is reduced to the sorted multiset of
//! those variable numbers, since partial derivatives commute.
//!
//! Two backends:
//! * [`DiffMethod::TaylorJet`] evaluates the function once on jets (exact up
//!   to rounding) and needs [`TwoPointFunction::eval_jet`].
//! * [`DiffMethod::FiniteDifference`] uses product central-difference
//!   stencils with Richardson extrapolation over steps `h, 2h, ..., Lh`, and
//!   works on black-box evaluators.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace, Scalar};

/// Which argument a derivative slot acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    L,
    R,
}

/// An ordered list of derivative slots with coordinate indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SlotPattern {
    marks: Vec<(Slot, usize)>,
}

impl SlotPattern {
    pub fn new(marks: Vec<(Slot, usize)>) -> Result<Self> {
        if marks.is_empty() || marks.len() > 4 {
            return Err(Error::Dimension(format!(
                "slot patterns have length 1..=4, got {}",
                marks.len()
            )));
        }
        Ok(SlotPattern { marks })
    }

    /// Builds a pattern from a mark string such as `"LRRL"` and one index per mark.
    pub fn parse(marks: &str, indices: &[usize]) -> Result<Self> {
        if marks.len() != indices.len() {
            return Err(Error::Dimension(format!(
                "pattern {marks:?} needs {} indices, got {}",
                marks.len(),
                indices.len()
            )));
        }
        let slots = marks
            .chars()
            .zip(indices)
            .map(|(c, &i)| match c {
                'L' | 'l' => Ok((Slot::L, i)),
                'R' | 'r' => Ok((Slot::R, i)),
                other => Err(Error::Config(format!("unknown slot mark {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        SlotPattern::new(slots)
    }

    pub fn marks(&self) -> &[(Slot, usize)] {
        &self.marks
    }

    pub fn order(&self) -> usize {
        self.marks.len()
    }

    /// Sorted product-coordinate numbers for a chart of dimension `dim`.
    pub fn variables(&self, dim: usize) -> Result<Vec<u8>> {
        let mut vars = self
            .marks
            .iter()
            .map(|&(slot, i)| {
                if i >= dim {
                    return Err(Error::Dimension(format!("slot index {i} out of range 0..{dim}")));
                }
                Ok(match slot {
                    Slot::L => i as u8,
                    Slot::R => (dim + i) as u8,
                })
            })
            .collect::<Result<Vec<u8>>>()?;
        vars.sort_unstable();
        Ok(vars)
    }
}

impl fmt::Display for SlotPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (slot, _) in &self.marks {
            write!(f, "{slot:?}")?;
        }
        write!(f, "(")?;
        for (k, (_, i)) in self.marks.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffMethod {
    TaylorJet,
    FiniteDifference,
}

/// Differentiation settings.
///
/// `base_step = None` selects the per-order policy
/// `h_k = eps^(1/(k+2)) * max(1, |q|_inf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffConfig {
    pub method: DiffMethod,
    pub base_step: Option<f64>,
    pub richardson_levels: usize,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            method: DiffMethod::TaylorJet,
            base_step: None,
            richardson_levels: 2,
        }
    }
}

impl DiffConfig {
    pub fn taylor_jet() -> Self {
        DiffConfig::default()
    }

    pub fn finite_difference() -> Self {
        DiffConfig {
            method: DiffMethod::FiniteDifference,
            ..DiffConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.base_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("base step must be positive, got {h}")));
            }
        }
        if !(1..=4).contains(&self.richardson_levels) {
            return Err(Error::Config(format!(
                "richardson levels must be in 1..=4, got {}",
                self.richardson_levels
            )));
        }
        Ok(())
    }

    /// Finite-difference step for derivatives of the given order around a
    /// point whose largest coordinate magnitude is `scale`.
    pub fn step(&self, order: usize, scale: f64) -> f64 {
        let h = self
            .base_step
            .unwrap_or_else(|| f64::EPSILON.powf(1.0 / (order as f64 + 2.0)));
        h * scale.max(1.0)
    }

    /// Relative accuracy expected of derivatives of the given order, used as
    /// the unit for sign-residual and vanishing checks.
    pub fn tolerance(&self, order: usize) -> f64 {
        match self.method {
            DiffMethod::TaylorJet => 1e-10,
            DiffMethod::FiniteDifference => match order {
                0 | 1 => 1e-8,
                2 => 1e-6,
                3 => 1e-5,
                _ => 1e-3,
            },
        }
    }
}

/// A scalar function `S(x, y)` on a chart product.
pub trait TwoPointFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    /// Jet evaluation for functions written against [`Scalar`]; `None` marks
    /// a black-box evaluator.
    fn eval_jet(&self, _x: &[Jet], _y: &[Jet]) -> Option<Result<Jet>> {
        None
    }

    /// Whether `eval` may be called from several workers simultaneously.
    fn is_reentrant(&self) -> bool {
        true
    }
}

/// A two-point function written once, generically over [`Scalar`].
pub trait PotentialExpr: Send + Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S>;
}

/// Adapter exposing a [`PotentialExpr`] through both backends.
#[derive(Clone, Debug)]
pub struct Analytic<P>(pub P);

impl<P: PotentialExpr> TwoPointFunction for Analytic<P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn label(&self) -> String {
        self.0.label()
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.0.eval(x, y)
    }

    fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Option<Result<Jet>> {
        Some(self.0.eval(x, y))
    }
}

/// Black-box two-point function from a closure.
pub struct BlackBox<F> {
    dim: usize,
    label: String,
    f: F,
}

impl<F> BlackBox<F>
where
    F: Fn(&[f64], &[f64]) -> Result<f64> + Send + Sync,
{
    pub fn new(dim: usize, label: impl Into<String>, f: F) -> Self {
        BlackBox {
            dim,
            label: label.into(),
            f,
        }
    }
}

impl<F> TwoPointFunction for BlackBox<F>
where
    F: Fn(&[f64], &[f64]) -> Result<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        (self.f)(x, y)
    }
}

/// A derivative value with its error estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn check_point(s: &dyn TwoPointFunction, pts: &[&[f64]]) -> Result<()> {
    for p in pts {
        if p.len() != s.dim() {
            return Err(Error::Dimension(format!(
                "{} expects points of dimension {}, got {}",
                s.label(),
                s.dim(),
                p.len()
            )));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite base point".into()));
        }
    }
    Ok(())
}

/// One-dimensional central-difference weights (offset, weight) in units of
/// the step, for derivative multiplicity 1..=4.
fn stencil_1d(multiplicity: usize) -> &'static [(i32, f64)] {
    match multiplicity {
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => unreachable!("multiplicity above 4"),
    }
}

/// Product stencil for a sorted variable multiset: lattice offsets over all
/// `nvars` product coordinates, with weights (before dividing by `h^order`).
fn product_stencil(vars: &[u8], nvars: usize) -> Vec<(Vec<i32>, f64)> {
    let mut groups: Vec<(u8, usize)> = Vec::new();
    for &v in vars {
        match groups.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => groups.push((v, 1)),
        }
    }
    let mut out = vec![(vec![0i32; nvars], 1.0)];
    for (var, mult) in groups {
        let mut next = Vec::with_capacity(out.len() * 5);
        for (offset, w) in &out {
            for &(o, wo) in stencil_1d(mult) {
                let mut off = offset.clone();
                off[var as usize] = o;
                next.push((off, w * wo));
            }
        }
        out = next;
    }
    out
}

/// Finite-difference estimates of several same-order mixed partials of `s`
/// at the product point `base = (x, y)`.
fn fd_estimates(
    s: &dyn TwoPointFunction,
    base: &[f64],
    patterns: &[Vec<u8>],
    order: usize,
    cfg: &DiffConfig,
) -> Result<Vec<Estimate>> {
    cfg.validate()?;
    let n = s.dim();
    let nvars = 2 * n;
    let scale = base.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let h = cfg.step(order, scale);
    let levels = cfg.richardson_levels;

    let stencils: Vec<Vec<(Vec<i32>, f64)>> =
        patterns.iter().map(|p| product_stencil(p, nvars)).collect();

    // Unique lattice points over every pattern and level.
    let mut index: HashMap<Vec<i32>, usize> = HashMap::new();
    let mut lattice: Vec<Vec<i32>> = Vec::new();
    for st in &stencils {
        for level in 1..=levels as i32 {
            for (off, _) in st {
                let key: Vec<i32> = off.iter().map(|o| o * level).collect();
                if !index.contains_key(&key) {
                    index.insert(key.clone(), lattice.len());
                    lattice.push(key);
                }
            }
        }
    }

    let eval_at = |key: &Vec<i32>| -> Result<f64> {
        let z: Vec<f64> = base
            .iter()
            .zip(key)
            .map(|(b, &o)| b + h * o as f64)
            .collect();
        let v = s.eval(&z[..n], &z[n..])?;
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "{} is not finite at x = {:?}, y = {:?}",
                s.label(),
                &z[..n],
                &z[n..]
            )));
        }
        Ok(v)
    };
    let values: Vec<f64> = if s.is_reentrant() && lattice.len() > 8 {
        lattice.par_iter().map(eval_at).collect::<Result<_>>()?
    } else {
        lattice.iter().map(eval_at).collect::<Result<_>>()?
    };

    let mut out = Vec::with_capacity(patterns.len());
    for st in &stencils {
        let mut raw = Vec::with_capacity(levels);
        let mut noise = 0.0f64;
        for level in 1..=levels as i32 {
            let step = h * level as f64;
            let denom = step.powi(order as i32);
            let mut acc = 0.0;
            let mut fmax = 0.0f64;
            let mut wsum = 0.0;
            for (off, w) in st {
                let key: Vec<i32> = off.iter().map(|o| o * level).collect();
                let f = values[index[&key]];
                acc += w * f;
                fmax = fmax.max(f.abs());
                wsum += w.abs();
            }
            raw.push(acc / denom);
            if level == 1 {
                noise = f64::EPSILON * fmax * wsum / denom;
            }
        }
        out.push(richardson(&raw, noise));
    }
    Ok(out)
}

/// Neville extrapolation to zero step in `h^2`, steps proportional to 1, 2, ...
fn richardson(raw: &[f64], noise: f64) -> Estimate {
    let l = raw.len();
    let mut table = vec![raw.to_vec()];
    for k in 1..l {
        let prev = &table[k - 1];
        let mut row = Vec::with_capacity(l - k);
        for j in k..l {
            let xa = ((j - k + 1) as f64).powi(2);
            let xb = ((j + 1) as f64).powi(2);
            row.push((xa * prev[j - k + 1] - xb * prev[j - k]) / (xa - xb));
        }
        table.push(row);
    }
    let value = table[l - 1][0];
    let error = if l >= 2 {
        (value - table[l - 2][0]).abs().max(noise)
    } else {
        noise
    };
    let warning = (error > 1e-3 * value.abs() + 100.0 * noise).then(|| {
        format!("richardson sequence not converged: estimate {value:.6e}, error {error:.3e}")
    });
    Estimate {
        value,
        error,
        warning,
    }
}

fn jet_eval(s: &dyn TwoPointFunction, x: &[f64], y: &[f64]) -> Result<Jet> {
    let n = s.dim();
    let space = JetSpace::shared(2 * n);
    let xs: Vec<Jet> = (0..n).map(|i| Jet::variable(&space, i, x[i])).collect();
    let ys: Vec<Jet> = (0..n).map(|i| Jet::variable(&space, n + i, y[i])).collect();
    let jet = s.eval_jet(&xs, &ys).ok_or_else(|| {
        Error::Unsupported(format!(
            "{} is a black-box evaluator; use the finite-difference method",
            s.label()
        ))
    })??;
    if jet.coefficients().iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain(format!(
            "{} has non-finite Taylor coefficients at x = {x:?}, y = {y:?}",
            s.label()
        )));
    }
    Ok(jet)
}

fn jet_estimate(jet: &Jet, vars: &[u8]) -> Estimate {
    let value = jet.derivative(vars).expect("pattern within jet degree");
    Estimate {
        value,
        error: 16.0 * f64::EPSILON * value.abs(),
        warning: None,
    }
}

/// `d^r S / (d slot_1 ... d slot_r)` at `x = y = q`.
pub fn mixed_partial(
    s: &dyn TwoPointFunction,
    q: &[f64],
    pattern: &SlotPattern,
    cfg: &DiffConfig,
) -> Result<Estimate> {
    mixed_partial_at(s, q, q, pattern, cfg)
}

/// Mixed partial at an arbitrary product point `(x, y)`.
pub fn mixed_partial_at(
    s: &dyn TwoPointFunction,
    x: &[f64],
    y: &[f64],
    pattern: &SlotPattern,
    cfg: &DiffConfig,
) -> Result<Estimate> {
    check_point(s, &[x, y])?;
    let vars = pattern.variables(s.dim())?;
    match cfg.method {
        DiffMethod::TaylorJet => Ok(jet_estimate(&jet_eval(s, x, y)?, &vars)),
        DiffMethod::FiniteDifference => {
            let base: Vec<f64> = x.iter().chain(y).copied().collect();
            Ok(fd_estimates(s, &base, &[vars], pattern.order(), cfg)?.remove(0))
        }
    }
}

/// All first partials at `(x, y)`: `(dS/dx, dS/dy)`.
pub fn gradient_at(
    s: &dyn TwoPointFunction,
    x: &[f64],
    y: &[f64],
    cfg: &DiffConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_point(s, &[x, y])?;
    let n = s.dim();
    let patterns: Vec<Vec<u8>> = (0..2 * n as u8).map(|v| vec![v]).collect();
    let values: Vec<f64> = match cfg.method {
        DiffMethod::TaylorJet => {
            let jet = jet_eval(s, x, y)?;
            patterns.iter().map(|p| jet_estimate(&jet, p).value).collect()
        }
        DiffMethod::FiniteDifference => {
            let base: Vec<f64> = x.iter().chain(y).copied().collect();
            fd_estimates(s, &base, &patterns, 1, cfg)?
                .into_iter()
                .map(|e| e.value)
                .collect()
        }
    };
    let (gx, gy) = values.split_at(n);
    Ok((gx.to_vec(), gy.to_vec()))
}

/// The `2n` first partials at `(q, q)`, x-partials first.
pub fn diagonal_gradient(s: &dyn TwoPointFunction, q: &[f64], cfg: &DiffConfig) -> Result<Vec<f64>> {
    let (mut gx, gy) = gradient_at(s, q, q, cfg)?;
    gx.extend(gy);
    Ok(gx)
}

/// Every mixed partial of orders `1..=max_order` at `(q, q)`, keyed by the
/// sorted product-coordinate multiset.
#[derive(Clone, Debug)]
pub struct DerivativeTable {
    dim: usize,
    max_order: usize,
    method: DiffMethod,
    entries: BTreeMap<Vec<u8>, Estimate>,
}

impl DerivativeTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn method(&self) -> DiffMethod {
        self.method
    }

    pub fn estimate(&self, pattern: &SlotPattern) -> Result<&Estimate> {
        let vars = pattern.variables(self.dim)?;
        self.entries.get(&vars).ok_or_else(|| {
            Error::Dimension(format!(
                "pattern {pattern} exceeds the table's maximum order {}",
                self.max_order
            ))
        })
    }

    /// Value for a pattern given as a mark string and indices, e.g. `("LLR", [i, j, k])`.
    pub fn value(&self, marks: &str, indices: &[usize]) -> f64 {
        let p = SlotPattern::parse(marks, indices).expect("valid pattern");
        self.estimate(&p).expect("pattern in table").value
    }

    /// Largest magnitude among derivatives of the given order.
    pub fn max_abs_of_order(&self, order: usize) -> f64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.len() == order)
            .fold(0.0, |m, (_, e)| m.max(e.value.abs()))
    }

    /// Largest error estimate among derivatives of the given order.
    pub fn max_error_of_order(&self, order: usize) -> f64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.len() == order)
            .fold(0.0, |m, (_, e)| m.max(e.error))
    }

    pub fn warnings(&self) -> Vec<String> {
        self.entries
            .values()
            .filter_map(|e| e.warning.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn multisets(nvars: usize, order: usize) -> Vec<Vec<u8>> {
    use itertools::Itertools;
    (0..nvars as u8).combinations_with_replacement(order).collect()
}

pub fn derivative_table(
    s: &dyn TwoPointFunction,
    q: &[f64],
    max_order: usize,
    cfg: &DiffConfig,
) -> Result<DerivativeTable> {
    check_point(s, &[q])?;
    if !(1..=4).contains(&max_order) {
        return Err(Error::Dimension(format!("max order must be in 1..=4, got {max_order}")));
    }
    let n = s.dim();
    let mut entries = BTreeMap::new();
    match cfg.method {
        DiffMethod::TaylorJet => {
            let jet = jet_eval(s, q, q)?;
            for order in 1..=max_order {
                for vars in multisets(2 * n, order) {
                    let e = jet_estimate(&jet, &vars);
                    entries.insert(vars, e);
                }
            }
        }
        DiffMethod::FiniteDifference => {
            let base: Vec<f64> = q.iter().chain(q).copied().collect();
            for order in 1..=max_order {
                let pats = multisets(2 * n, order);
                let ests = fd_estimates(s, &base, &pats, order, cfg)?;
                entries.extend(pats.into_iter().zip(ests));
            }
        }
    }
    Ok(DerivativeTable {
        dim: n,
        max_order,
        method: cfg.method,
        entries,
    })
}

/// Central-difference Jacobian of a vector-valued function of a point:
/// `out[s][c] = d f_c / d q^s`.
pub fn vector_gradient<F>(f: F, q: &[f64], cfg: &DiffConfig) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let scale = q.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let h = cfg.step(1, scale);
    let levels = cfg.richardson_levels;
    let mut out = Vec::with_capacity(q.len());
    let mut probe = q.to_vec();
    for s in 0..q.len() {
        let mut per_level: Vec<Vec<f64>> = Vec::with_capacity(levels);
        for level in 1..=levels {
            let step = h * level as f64;
            probe[s] = q[s] + step;
            let plus = f(&probe)?;
            probe[s] = q[s] - step;
            let minus = f(&probe)?;
            probe[s] = q[s];
            per_level.push(
                plus.iter()
                    .zip(&minus)
                    .map(|(a, b)| (a - b) / (2.0 * step))
                    .collect(),
            );
        }
        let ncomp = per_level[0].len();
        let row: Vec<f64> = (0..ncomp)
            .map(|c| {
                let raw: Vec<f64> = per_level.iter().map(|v| v[c]).collect();
                richardson(&raw, 0.0).value
            })
            .collect();
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field derivative at {q:?}")));
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct HalfSquared(usize);

    impl PotentialExpr for HalfSquared {
        fn dim(&self) -> usize {
            self.0
        }
        fn label(&self) -> String {
            "half-squared".into()
        }
        fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
            let mut acc = x[0].constant_like(0.0);
            for i in 0..self.0 {
                acc = acc + (y[i].clone() - x[i].clone()).square() * 0.5;
            }
            Ok(acc)
        }
    }

    fn both() -> [DiffConfig; 2] {
        [DiffConfig::taylor_jet(), DiffConfig::finite_difference()]
    }

    #[test]
    fn quadratic_second_derivatives() {
        let s = Analytic(HalfSquared(2));
        let q = [0.3, -1.2];
        for cfg in both() {
            for i in 0..2 {
                let ll = mixed_partial(&s, &q, &SlotPattern::parse("LL", &[i, i]).unwrap(), &cfg).unwrap();
                let lr = mixed_partial(&s, &q, &SlotPattern::parse("LR", &[i, i]).unwrap(), &cfg).unwrap();
                assert_abs_diff_eq!(ll.value, 1.0, epsilon = 1e-7);
                assert_abs_diff_eq!(lr.value, -1.0, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn product_is_not_a_potential() {
        let s = BlackBox::new(1, "xy", |x: &[f64], y: &[f64]| Ok(x[0] * y[0]));
        let g = diagonal_gradient(&s, &[1.0], &DiffConfig::finite_difference()).unwrap();
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn jet_on_black_box_is_unsupported() {
        let s = BlackBox::new(1, "xy", |x: &[f64], y: &[f64]| Ok(x[0] * y[0]));
        let p = SlotPattern::parse("LR", &[0, 0]).unwrap();
        assert!(matches!(
            mixed_partial(&s, &[1.0], &p, &DiffConfig::taylor_jet()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn non_finite_stencil_is_a_domain_error() {
        let s = BlackBox::new(1, "log", |x: &[f64], y: &[f64]| Ok((x[0] * y[0]).ln()));
        let p = SlotPattern::parse("LL", &[0, 0]).unwrap();
        let err = mixed_partial(&s, &[0.0], &p, &DiffConfig::finite_difference()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
    }

    #[test]
    fn slot_order_is_irrelevant() {
        let s = Analytic(HalfSquared(2));
        let a = SlotPattern::parse("LRL", &[0, 1, 1]).unwrap();
        let b = SlotPattern::parse("LLR", &[1, 0, 1]).unwrap();
        assert_eq!(a.variables(2).unwrap(), b.variables(2).unwrap());
        let t = derivative_table(&s, &[0.1, 0.2], 3, &DiffConfig::taylor_jet()).unwrap();
        assert_eq!(t.estimate(&a).unwrap(), t.estimate(&b).unwrap());
    }

    #[test]
    fn table_sizes() {
        let s = Analytic(HalfSquared(2));
        let t = derivative_table(&s, &[0.1, 0.2], 4, &DiffConfig::taylor_jet()).unwrap();
        // multisets over 4 product coordinates of sizes 1..=4
        assert_eq!(t.len(), 4 + 10 + 20 + 35);
        assert!(t.estimate(&SlotPattern::parse("LL", &[0, 0]).unwrap()).is_ok());
        let t2 = derivative_table(&s, &[0.1, 0.2], 2, &DiffConfig::taylor_jet()).unwrap();
        assert!(t2.estimate(&SlotPattern::parse("LLL", &[0, 0, 0]).unwrap()).is_err());
    }

    #[test]
    fn pattern_validation() {
        assert!(SlotPattern::parse("LLLLL", &[0; 5]).is_err());
        assert!(SlotPattern::parse("LX", &[0, 0]).is_err());
        assert!(SlotPattern::parse("LR", &[0]).is_err());
        let p = SlotPattern::parse("LR", &[0, 3]).unwrap();
        assert!(p.variables(2).is_err());
        assert_eq!(p.to_string(), "LR(0,3)");
    }

    #[test]
    fn config_validation() {
        let mut c = DiffConfig::finite_difference();
        c.richardson_levels = 5;
        assert!(c.validate().is_err());
        c.richardson_levels = 2;
        c.base_step = Some(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn richardson_removes_h2_term() {
        // D(h) = 1 + h^2 exactly -> extrapolated value 1
        let raw = [1.0 + 1e-4, 1.0 + 4e-4];
        assert_abs_diff_eq!(richardson(&raw, 0.0).value, 1.0, epsilon = 1e-15);
        let raw3 = [1.0 + 1e-4 + 1e-8, 1.0 + 4e-4 + 16e-8, 1.0 + 9e-4 + 81e-8];
        assert_abs_diff_eq!(richardson(&raw3, 0.0).value, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn vector_gradient_of_polynomial() {
        let f = |q: &[f64]| Ok(vec![q[0] * q[0] * q[1], q[1].powi(3)]);
        let g = vector_gradient(f, &[2.0, 3.0], &DiffConfig::finite_difference()).unwrap();
        assert_abs_diff_eq!(g[0][0], 12.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1][0], 4.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[0][1], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1][1], 27.0, epsilon = 1e-7);
    }
}
