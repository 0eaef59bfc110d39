//! Tensors generated by a two-point potential at the diagonal.
//!
//! Conventions, all evaluated at `x = y = q`:
//! * metric `g_jk = -(d^2 S / dx^j dy^k)`, symmetrized;
//! * skewness `T_ijk = d^3 S/dx^i dx^j dy^k - d^3 S/dy^i dy^j dx^k`, symmetrized;
//! * `Q1`, `Q2` are the two order-4 antisymmetrized sums, symmetrized.
//!
//! Each combination `P - P̄` (with `P̄` swapping every `L` and `R`) equals a
//! fixed sign times the reference tensor. The signs are listed in
//! [`ORDER2_SIGNS`] and [`ORDER3_SIGNS`].

use std::collections::BTreeMap;

use serde::Serialize;

use crate::diff::{derivative_table, diagonal_gradient, DerivativeTable, DiffConfig, TwoPointFunction};
use crate::error::{Error, Result};
use crate::tensor::{all_multi_indices, symmetrize, DenseTensor, Point, SymTensor};

/// Order-2 patterns, sign of each raw value relative to `g`.
pub const ORDER2_SIGNS: [(&str, f64); 4] = [("LL", 1.0), ("RR", 1.0), ("LR", -1.0), ("RL", -1.0)];

/// Order-3 patterns `P`, sign of `P - P̄` relative to `T`.
pub const ORDER3_SIGNS: [(&str, f64); 8] = [
    ("LLL", -1.0),
    ("LLR", 1.0),
    ("LRL", 1.0),
    ("RLL", 1.0),
    ("LRR", -1.0),
    ("RLR", -1.0),
    ("RRL", -1.0),
    ("RRR", 1.0),
];

/// Pattern pairs whose differences are summed into `Q1` and `Q2`.
pub const Q1_TERMS: [(&str, &str); 4] = [
    ("LRRL", "RLLR"),
    ("LRRR", "RLLL"),
    ("LRLL", "RLRR"),
    ("LRLR", "RLRL"),
];
pub const Q2_TERMS: [(&str, &str); 4] = [
    ("LLLL", "RRRR"),
    ("LLLR", "RRRL"),
    ("LLRL", "RRLR"),
    ("LLRR", "RRLL"),
];

/// Factor applied to the differentiation tolerance before a sign residual
/// is treated as an inconsistency.
pub const INCONSISTENCY_FACTOR: f64 = 100.0;

fn swap_marks(marks: &str) -> String {
    marks
        .chars()
        .map(|c| if c == 'L' { 'R' } else { 'L' })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PotentialCheck {
    pub passed: bool,
    pub residual: f64,
    pub tol: f64,
}

/// First-order condition: all `2n` first partials vanish on the diagonal.
pub fn check_potential(
    s: &dyn TwoPointFunction,
    q: &[f64],
    tol: f64,
    cfg: &DiffConfig,
) -> Result<PotentialCheck> {
    let grad = diagonal_gradient(s, q, cfg)?;
    let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(PotentialCheck {
        passed: residual <= tol,
        residual,
        tol,
    })
}

/// An extracted tensor with its sign residual and the bound it was judged by.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extracted {
    pub tensor: SymTensor,
    pub residual: f64,
    pub bound: f64,
}

impl Extracted {
    fn into_checked(self, what: &'static str) -> Result<Extracted> {
        if self.residual > self.bound {
            Err(Error::Inconsistent {
                what,
                residual: self.residual,
                bound: self.bound,
            })
        } else {
            Ok(self)
        }
    }
}

fn bound_for(table: &DerivativeTable, order: usize, cfg: &DiffConfig) -> f64 {
    INCONSISTENCY_FACTOR * cfg.tolerance(order) * table.max_abs_of_order(order).max(1.0)
}

fn raw(table: &DerivativeTable, marks: &str, idx: &[usize]) -> f64 {
    table.value(marks, idx)
}

/// Metric and its order-2 sign residual from a precomputed table.
pub fn metric_from_table(table: &DerivativeTable, cfg: &DiffConfig) -> Extracted {
    let n = table.dim();
    let g = SymTensor::from_fn(n, 2, |ix| {
        -0.5 * (raw(table, "LR", &[ix[0], ix[1]]) + raw(table, "LR", &[ix[1], ix[0]]))
    });
    let mut residual = 0.0f64;
    for idx in all_multi_indices(n, 2) {
        let reference = g.at(&idx);
        for (marks, sign) in ORDER2_SIGNS {
            residual = residual.max((sign * raw(table, marks, &idx) - reference).abs());
        }
    }
    Extracted {
        tensor: g,
        residual,
        bound: bound_for(table, 2, cfg),
    }
}

/// `P(idx) - P̄(idx)` for a pattern given as marks.
fn antisym(table: &DerivativeTable, marks: &str, idx: &[usize]) -> f64 {
    raw(table, marks, idx) - raw(table, &swap_marks(marks), idx)
}

/// Skewness and its order-3 sign residual from a precomputed table.
pub fn skewness_from_table(table: &DerivativeTable, cfg: &DiffConfig) -> Extracted {
    let n = table.dim();
    let dense = DenseTensor::from_fn(n, 3, |ix| antisym(table, "LLR", ix));
    let t = symmetrize(&dense).expect("rank 3");
    let mut residual = 0.0f64;
    for idx in all_multi_indices(n, 3) {
        let reference = t.at(&idx);
        for (marks, sign) in ORDER3_SIGNS {
            residual = residual.max((antisym(table, marks, &idx) - sign * reference).abs());
        }
    }
    Extracted {
        tensor: t,
        residual,
        bound: bound_for(table, 3, cfg),
    }
}

fn scaled(value: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        value / scale
    } else {
        value
    }
}

/// The two rank-4 candidates and the largest order-4 derivative magnitude.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rank4 {
    pub q1: SymTensor,
    pub q2: SymTensor,
    pub derivative_scale: f64,
}

impl Rank4 {
    /// `max(|Q1|, |Q2|)` relative to the largest order-4 derivative.
    pub fn scaled_residual(&self) -> f64 {
        scaled(self.q1.max_abs().max(self.q2.max_abs()), self.derivative_scale)
    }
}

pub fn rank4_from_table(table: &DerivativeTable) -> Rank4 {
    let n = table.dim();
    let combine = |terms: &[(&str, &str); 4]| {
        let dense = DenseTensor::from_fn(n, 4, |ix| {
            terms
                .iter()
                .map(|(a, b)| raw(table, a, ix) - raw(table, b, ix))
                .sum()
        });
        symmetrize(&dense).expect("rank 4")
    };
    Rank4 {
        q1: combine(&Q1_TERMS),
        q2: combine(&Q2_TERMS),
        derivative_scale: table.max_abs_of_order(4),
    }
}

pub fn extract_metric(s: &dyn TwoPointFunction, q: &[f64], cfg: &DiffConfig) -> Result<Extracted> {
    let table = derivative_table(s, q, 2, cfg)?;
    metric_from_table(&table, cfg).into_checked("metric sign identities")
}

pub fn extract_skewness(s: &dyn TwoPointFunction, q: &[f64], cfg: &DiffConfig) -> Result<Extracted> {
    let table = derivative_table(s, q, 3, cfg)?;
    skewness_from_table(&table, cfg).into_checked("skewness sign identities")
}

pub fn extract_rank4(s: &dyn TwoPointFunction, q: &[f64], cfg: &DiffConfig) -> Result<Rank4> {
    let table = derivative_table(s, q, 4, cfg)?;
    Ok(rank4_from_table(&table))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignEntry {
    pub pattern: String,
    /// Sign listed in the constants table.
    pub pinned: f64,
    /// Sign fitted from the data; `None` when the reference tensor is too
    /// small to determine it.
    pub observed: Option<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignTable {
    pub order2: Vec<SignEntry>,
    pub order3: Vec<SignEntry>,
    pub order2_residual: f64,
    pub order3_residual: f64,
    pub order2_bound: f64,
    pub order3_bound: f64,
}

impl SignTable {
    pub fn matches(&self) -> bool {
        let agree = |e: &SignEntry| e.observed.is_none_or(|o| o == e.pinned);
        self.order2_residual <= self.order2_bound
            && self.order3_residual <= self.order3_bound
            && self.order2.iter().all(agree)
            && self.order3.iter().all(agree)
    }
}

fn fit_sign(pairs: &[(f64, f64)], bound: f64) -> Option<f64> {
    // pairs: (combination value, reference value)
    let reference_max = pairs.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    if reference_max <= bound {
        return None;
    }
    let dot: f64 = pairs.iter().map(|(c, r)| c * r).sum();
    Some(if dot >= 0.0 { 1.0 } else { -1.0 })
}

pub fn sign_table_from_table(table: &DerivativeTable, cfg: &DiffConfig) -> SignTable {
    let n = table.dim();
    let metric = metric_from_table(table, cfg);
    let skew = skewness_from_table(table, cfg);

    let mut order2 = Vec::new();
    for (marks, pinned) in ORDER2_SIGNS {
        let pairs: Vec<(f64, f64)> = all_multi_indices(n, 2)
            .map(|idx| (raw(table, marks, &idx), metric.tensor.at(&idx)))
            .collect();
        let residual = pairs
            .iter()
            .fold(0.0f64, |m, (c, r)| m.max((c - pinned * r).abs()));
        order2.push(SignEntry {
            pattern: marks.to_string(),
            pinned,
            observed: fit_sign(&pairs, metric.bound),
            residual,
        });
    }
    let mut order3 = Vec::new();
    for (marks, pinned) in ORDER3_SIGNS {
        let pairs: Vec<(f64, f64)> = all_multi_indices(n, 3)
            .map(|idx| (antisym(table, marks, &idx), skew.tensor.at(&idx)))
            .collect();
        let residual = pairs
            .iter()
            .fold(0.0f64, |m, (c, r)| m.max((c - pinned * r).abs()));
        order3.push(SignEntry {
            pattern: marks.to_string(),
            pinned,
            observed: fit_sign(&pairs, skew.bound),
            residual,
        });
    }
    SignTable {
        order2,
        order3,
        order2_residual: metric.residual,
        order3_residual: skew.residual,
        order2_bound: metric.bound,
        order3_bound: skew.bound,
    }
}

pub fn sign_table(s: &dyn TwoPointFunction, q: &[f64], cfg: &DiffConfig) -> Result<SignTable> {
    let table = derivative_table(s, q, 3, cfg)?;
    Ok(sign_table_from_table(&table, cfg))
}

/// Everything extracted at one point, from a single order-4 table.
#[derive(Clone, Debug, Serialize)]
pub struct ExtractionReport {
    pub point: Point,
    pub metric: SymTensor,
    pub skewness: SymTensor,
    pub q1: SymTensor,
    pub q2: SymTensor,
    pub gradient_residual: f64,
    pub sign_residuals: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, f64>,
    pub metric_eigenvalues: Vec<f64>,
    pub rank4_scale: f64,
    pub warnings: Vec<String>,
    pub config: DiffConfig,
}

impl ExtractionReport {
    pub fn rank4_scaled_residual(&self) -> f64 {
        scaled(self.q1.max_abs().max(self.q2.max_abs()), self.rank4_scale)
    }
}

pub fn analyze(s: &dyn TwoPointFunction, q: &[f64], cfg: &DiffConfig) -> Result<ExtractionReport> {
    let point = Point::new(q.to_vec())?;
    let table = derivative_table(s, q, 4, cfg)?;
    let gradient_residual = (0..2 * s.dim() as u8).fold(0.0f64, |m, v| {
        let n = s.dim();
        let (marks, i) = if (v as usize) < n {
            ("L", v as usize)
        } else {
            ("R", v as usize - n)
        };
        m.max(table.value(marks, &[i]).abs())
    });
    let metric = metric_from_table(&table, cfg);
    let skew = skewness_from_table(&table, cfg);
    let rank4 = rank4_from_table(&table);
    let signs = sign_table_from_table(&table, cfg);

    let mut sign_residuals = BTreeMap::new();
    sign_residuals.insert("order2".to_string(), metric.residual);
    sign_residuals.insert("order3".to_string(), skew.residual);
    for e in signs.order2.iter().chain(&signs.order3) {
        sign_residuals.insert(e.pattern.clone(), e.residual);
    }
    let mut bounds = BTreeMap::new();
    bounds.insert("order2".to_string(), metric.bound);
    bounds.insert("order3".to_string(), skew.bound);
    bounds.insert(
        "rank4".to_string(),
        INCONSISTENCY_FACTOR * cfg.tolerance(4),
    );

    let metric_eigenvalues = metric.tensor.to_matrix().symmetric_eigenvalues();
    Ok(ExtractionReport {
        point,
        metric: metric.tensor,
        skewness: skew.tensor,
        q1: rank4.q1,
        q2: rank4.q2,
        gradient_residual,
        sign_residuals,
        bounds,
        metric_eigenvalues,
        rank4_scale: rank4.derivative_scale,
        warnings: table.warnings(),
        config: cfg.clone(),
    })
}
