//! `extract`, `invert` and `verify`.

use rayon::prelude::*;
use serde::Serialize;

use twopoint_core::diff::{derivative_table, gradient_at, DiffMethod};
use twopoint_core::geometry::Lagrangian;
use twopoint_core::hj::{boundary_momenta, shoot, PrincipalFunction};
use twopoint_core::models::{reference_fields, ModelDescriptor};
use twopoint_core::potential::{analyze, metric_from_table, skewness_from_table, ExtractionReport, INCONSISTENCY_FACTOR};
use twopoint_core::{DiffConfig, Matrix, SymTensor, TwoPointFunction};

use crate::config::{resolve_points, RunConfig, INVERT_CHECKS};
use twopoint_criteria::{Context, Outcome, Tolerances};
use crate::error::{CliError, CliResult};
use crate::report::{Check, Row, Summary};

/// A finished command: serializable results, CSV rows and the summary.
pub struct Output<R> {
    pub results: Vec<R>,
    pub rows: Vec<Row>,
    pub summary: Summary,
}

fn finish<R>(results: Vec<R>, rows: Vec<Row>) -> Output<R> {
    let summary = Summary::from_rows(results.len(), &rows);
    Output { results, rows, summary }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReferenceComparison {
    pub metric: Matrix,
    pub max_abs_diff: f64,
    pub relative: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtractResult {
    pub index: usize,
    pub point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ExtractionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceComparison>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn relative(diff: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn extract_point(
    model: &ModelDescriptor,
    s: &dyn TwoPointFunction,
    q: &[f64],
    cfg: &RunConfig,
) -> twopoint_core::Result<(ExtractionReport, Option<ReferenceComparison>, Vec<Check>)> {
    let report = analyze(s, q, &cfg.diff)?;
    let b = |k: &str| report.bounds[k];
    let mut checks = vec![
        Check::at_most(
            "extract.gradient",
            report.gradient_residual,
            cfg.tolerance("extract.gradient", INCONSISTENCY_FACTOR * cfg.diff.tolerance(1)),
        ),
        Check::at_most("extract.order2", report.sign_residuals["order2"], cfg.tolerance("extract.order2", b("order2"))),
        Check::at_most("extract.order3", report.sign_residuals["order3"], cfg.tolerance("extract.order3", b("order3"))),
        Check::at_most("extract.rank4", report.rank4_scaled_residual(), cfg.tolerance("extract.rank4", 1e-3)),
    ];
    let reference = match &model.metric {
        Some(g) => {
            let metric = g.metric(q)?;
            let max_abs_diff = report.metric.to_matrix().max_abs_diff(&metric);
            let rel = relative(max_abs_diff, metric.max_abs());
            checks.push(Check::at_most("extract.reference", rel, cfg.tolerance("extract.reference", 1e-4)));
            Some(ReferenceComparison {
                metric,
                max_abs_diff,
                relative: rel,
            })
        }
        None => None,
    };
    Ok((report, reference, checks))
}

pub fn extract(cfg: &RunConfig) -> CliResult<Output<ExtractResult>> {
    let model = cfg.resolve_model()?;
    let points = resolve_points(&cfg.points, &model, cfg.seed)?;
    let s = model.potential()?.clone();
    let results: Vec<ExtractResult> = points
        .par_iter()
        .enumerate()
        .map(|(index, q)| match extract_point(&model, s.as_ref(), q, cfg) {
            Ok((report, reference, checks)) => ExtractResult {
                index,
                point: q.clone(),
                report: Some(report),
                reference,
                checks,
                error: None,
            },
            Err(e) => ExtractResult {
                index,
                point: q.clone(),
                report: None,
                reference: None,
                checks: Vec::new(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    let rows = results
        .iter()
        .flat_map(|r| match &r.error {
            Some(e) => vec![Row::error(r.index, &r.point, e)],
            None => r.checks.iter().map(|c| Row::from_check(r.index, &r.point, c)).collect(),
        })
        .collect();
    Ok(finish(results, rows))
}

#[derive(Clone, Debug, Serialize)]
pub struct Recovered {
    pub g_input: Matrix,
    pub t_input: SymTensor,
    pub g_recovered: Matrix,
    pub t_recovered: SymTensor,
    /// `2 alpha T_input`, what the skewness extraction should return.
    pub t_expected: SymTensor,
    pub g_rel_error: f64,
    pub t_rel_error: f64,
    pub momenta_pair: Vec<f64>,
    pub momenta_residual: f64,
    pub shooting_iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvertResult {
    pub index: usize,
    pub point: Vec<f64>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub recovered: Option<Recovered>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Finite differences with the configured step and Richardson settings.
fn black_box_diff(cfg: &DiffConfig) -> DiffConfig {
    DiffConfig {
        method: DiffMethod::FiniteDifference,
        ..cfg.clone()
    }
}

/// Partner point for the momenta check: `q + 0.02 u` with `u` the normalized
/// all-ones direction, flipped if that leaves the domain.
fn momenta_partner(model: &ModelDescriptor, q: &[f64]) -> Vec<f64> {
    let step = 0.02 / (q.len() as f64).sqrt();
    let up: Vec<f64> = q.iter().map(|c| c + step).collect();
    if model.domain.contains(&up) {
        up
    } else {
        q.iter().map(|c| c - step).collect()
    }
}

fn invert_point(
    model: &ModelDescriptor,
    pf: &PrincipalFunction,
    q: &[f64],
    cfg: &RunConfig,
) -> twopoint_core::Result<(Recovered, Vec<Check>)> {
    let l = pf.lagrangian();
    let diff = black_box_diff(&cfg.diff);
    let g_input = l.g.metric(q)?;
    let t_input = l.t.skewness(q)?;
    let table = derivative_table(pf, q, 3, &diff)?;
    let g_recovered = metric_from_table(&table, &diff).tensor.to_matrix();
    let t_recovered = skewness_from_table(&table, &diff).tensor;
    let t_expected = SymTensor::from_values(
        t_input.dim(),
        3,
        t_input.values().iter().map(|v| 2.0 * l.alpha * v).collect(),
    )?;
    let g_rel_error = relative(g_recovered.max_abs_diff(&g_input), g_input.max_abs());
    let t_scale = if t_input.max_abs() > 0.0 { t_input.max_abs() } else { 1.0 };
    let t_rel_error = t_recovered.max_abs_diff(&t_expected) / t_scale;

    let y = momenta_partner(model, q);
    let (gx, gy) = gradient_at(pf, q, &y, &diff)?;
    let shot = shoot(l, q, &y, pf.settings())?;
    let (p0, p1) = boundary_momenta(l, &shot.trajectory)?;
    let momenta_residual = (0..q.len())
        .map(|i| (gx[i] + p0[i]).abs().max((gy[i] - p1[i]).abs()))
        .fold(0.0, f64::max);

    let tol = |k: &str| {
        let default = INVERT_CHECKS.iter().find(|(n, _)| *n == k).map(|(_, v)| *v).unwrap();
        cfg.tolerance(k, default)
    };
    let checks = vec![
        Check::at_most("invert.g", g_rel_error, tol("invert.g")),
        Check::at_most("invert.t", t_rel_error, tol("invert.t")),
        Check::at_most("invert.momenta", momenta_residual, tol("invert.momenta")),
    ];
    Ok((
        Recovered {
            g_input,
            t_input,
            g_recovered,
            t_recovered,
            t_expected,
            g_rel_error,
            t_rel_error,
            momenta_pair: y,
            momenta_residual,
            shooting_iterations: shot.newton_iterations,
        },
        checks,
    ))
}

pub fn invert(cfg: &RunConfig) -> CliResult<Output<InvertResult>> {
    let model = cfg.resolve_model()?;
    let points = resolve_points(&cfg.points, &model, cfg.seed)?;
    let (g, t) = reference_fields(&model)?;
    let l = Lagrangian::new(g, t)?.with_alpha(cfg.alpha)?;
    let pf = PrincipalFunction::new(l, cfg.solver.clone())?;
    let results: Vec<InvertResult> = points
        .par_iter()
        .enumerate()
        .map(|(index, q)| match invert_point(&model, &pf, q, cfg) {
            Ok((recovered, checks)) => InvertResult {
                index,
                point: q.clone(),
                recovered: Some(recovered),
                checks,
                error: None,
            },
            Err(e) => InvertResult {
                index,
                point: q.clone(),
                recovered: None,
                checks: Vec::new(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    let rows = results
        .iter()
        .flat_map(|r| match &r.error {
            Some(e) => vec![Row::error(r.index, &r.point, e)],
            None => r.checks.iter().map(|c| Row::from_check(r.index, &r.point, c)).collect(),
        })
        .collect();
    Ok(finish(results, rows))
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyResult {
    pub id: usize,
    pub title: &'static str,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl VerifyResult {
    pub fn line(&self) -> String {
        match (&self.outcome, &self.error) {
            (Some(o), _) => o.line(),
            (None, Some(e)) => format!("criterion {:>2} [FAIL] {}: error: {e}", self.id, self.title),
            (None, None) => unreachable!("a criterion yields an outcome or an error"),
        }
    }
}

/// Criterion tolerances after applying `all`, then specific overrides.
pub fn criteria_tolerances(cfg: &RunConfig) -> CliResult<Tolerances> {
    let mut t = Tolerances::default();
    if let Some(&v) = cfg.tolerances.get("all") {
        t.set("all", v).map_err(CliError::Config)?;
    }
    for (k, &v) in &cfg.tolerances {
        if t.as_map().contains_key(k) {
            t.set(k, v).map_err(CliError::Config)?;
        }
    }
    Ok(t)
}

pub fn verify(cfg: &RunConfig, mut progress: impl FnMut(&VerifyResult)) -> CliResult<Output<VerifyResult>> {
    let ctx = Context {
        tolerances: criteria_tolerances(cfg)?,
        solver: cfg.solver.clone(),
        seed: cfg.seed,
    };
    let ids: Vec<usize> = if cfg.criteria.is_empty() {
        (1..=10).collect()
    } else {
        cfg.criteria.clone()
    };
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for id in ids {
        let title = twopoint_criteria::TITLES[id - 1];
        let r = match twopoint_criteria::run(id, &ctx) {
            Ok(o) => {
                rows.push(Row {
                    index: id,
                    point: String::new(),
                    check: format!("criterion.{id}"),
                    value: Some(o.measured),
                    bound: None,
                    passed: o.passed,
                    note: o.bound.clone(),
                });
                VerifyResult { id, title, outcome: Some(o), error: None }
            }
            Err(e) => {
                rows.push(Row::error(id, &[], &e.to_string()));
                VerifyResult { id, title, outcome: None, error: Some(e.to_string()) }
            }
        };
        progress(&r);
        results.push(r);
    }
    Ok(finish(results, rows))
}
