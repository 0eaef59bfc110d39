//! Run configuration: a JSON document plus flag overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use twopoint_core::hj::SolverSettings;
use twopoint_core::models::{by_name, check_point, ModelDescriptor};
use twopoint_core::sampling::{grid_domain, sample_domain};
use twopoint_core::DiffConfig;

use twopoint_criteria::DEFAULT_TOLERANCES;
use crate::error::{CliError, CliResult};

/// Per-point checks of `extract`. Unset ones fall back to bounds derived from
/// the differentiation method.
pub const EXTRACT_CHECKS: &[&str] = &[
    "extract.gradient",
    "extract.order2",
    "extract.order3",
    "extract.rank4",
    "extract.reference",
];

pub const INVERT_CHECKS: &[(&str, f64)] = &[
    ("invert.g", 1e-3),
    ("invert.t", 5e-3),
    ("invert.momenta", 1e-4),
];

pub const DEFAULT_SEED: u64 = 20240611;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format {s:?}; expected json or csv")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Either explicit coordinates or a sampler string, see [`resolve_points`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    List(Vec<Vec<f64>>),
    Spec(String),
}

impl Default for PointSpec {
    fn default() -> Self {
        PointSpec::Spec("center".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub points: PointSpec,
    pub diff: DiffConfig,
    pub solver: SolverSettings,
    pub alpha: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub output: OutputSpec,
    pub seed: u64,
    /// Criteria run by `verify`; empty means all.
    pub criteria: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: None,
            points: PointSpec::default(),
            diff: DiffConfig::default(),
            solver: SolverSettings::default(),
            alpha: 0.5,
            tolerances: BTreeMap::new(),
            output: OutputSpec::default(),
            seed: DEFAULT_SEED,
            criteria: Vec::new(),
        }
    }
}

pub fn tolerance_names() -> Vec<&'static str> {
    std::iter::once("all")
        .chain(EXTRACT_CHECKS.iter().copied())
        .chain(INVERT_CHECKS.iter().map(|(k, _)| *k))
        .chain(DEFAULT_TOLERANCES.iter().map(|(k, _)| *k))
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        if !self.alpha.is_finite() {
            return Err(CliError::Config(format!("alpha must be finite, got {}", self.alpha)));
        }
        for (name, v) in &self.tolerances {
            if !tolerance_names().contains(&name.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown tolerance {name:?}; known: {}",
                    tolerance_names().join(", ")
                )));
            }
            if !(*v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if let Some(c) = self.criteria.iter().find(|&&c| !(1..=10).contains(&c)) {
            return Err(CliError::Config(format!("no criterion {c}; valid ids are 1..=10")));
        }
        self.diff.validate()?;
        self.solver.validate()?;
        Ok(())
    }

    /// Explicit tolerance, then `all`, then `default`.
    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances
            .get(name)
            .or_else(|| self.tolerances.get("all"))
            .copied()
            .unwrap_or(default)
    }

    pub fn resolve_model(&self) -> CliResult<ModelDescriptor> {
        let name = self
            .model
            .as_deref()
            .ok_or_else(|| CliError::Config("no model given; pass --model <name> or set \"model\" in the config".into()))?;
        Ok(by_name(name)?)
    }
}

fn numbers(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("cannot parse {t:?} in point list")))
        })
        .collect()
}

fn count(s: &str, what: &str) -> CliResult<usize> {
    s.parse::<usize>()
        .ok()
        .filter(|&k| k > 0)
        .ok_or_else(|| CliError::Config(format!("{what}: expected a positive integer, got {s:?}")))
}

/// Expands a point spec for `model` and checks every point against its domain.
///
/// Sampler strings: `origin`, `center`, `grid:K` (K cell midpoints per axis),
/// `halton:K[:seed]`, or coordinates with `;` between points and `,` between
/// components. For one-dimensional models commas also separate points.
pub fn resolve_points(spec: &PointSpec, model: &ModelDescriptor, seed: u64) -> CliResult<Vec<Vec<f64>>> {
    let n = model.dim;
    let points = match spec {
        PointSpec::List(list) => list.clone(),
        PointSpec::Spec(s) => {
            let s = s.trim();
            let parts: Vec<&str> = s.split(':').collect();
            match parts.as_slice() {
                ["origin"] => vec![vec![0.0; n]],
                ["center"] => vec![model.domain.center()],
                ["grid", k] => grid_domain(&model.domain, count(k, "grid")?),
                ["halton", k] => sample_domain(&model.domain, count(k, "halton")?, seed),
                ["halton", k, sd] => {
                    let sd = sd
                        .parse::<u64>()
                        .map_err(|_| CliError::Config(format!("halton seed {sd:?} is not an integer")))?;
                    sample_domain(&model.domain, count(k, "halton")?, sd)
                }
                _ if s.contains(';') => s
                    .split(';')
                    .filter(|p| !p.trim().is_empty())
                    .map(numbers)
                    .collect::<CliResult<_>>()?,
                _ => {
                    let v = numbers(s)?;
                    if n == 1 {
                        v.into_iter().map(|c| vec![c]).collect()
                    } else {
                        vec![v]
                    }
                }
            }
        }
    };
    if points.is_empty() {
        return Err(CliError::Config("point list is empty".into()));
    }
    for p in &points {
        check_point(model, p)?;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use twopoint_core::models::{cantoni_overlap, kl_bernoulli, synthetic_2d};

    fn spec(s: &str) -> PointSpec {
        PointSpec::Spec(s.into())
    }

    #[test]
    fn one_dimensional_commas_separate_points() {
        let pts = resolve_points(&spec("0.2,0.5,0.8"), &kl_bernoulli(), 1).unwrap();
        assert_eq!(pts, vec![vec![0.2], vec![0.5], vec![0.8]]);
    }

    #[test]
    fn semicolons_separate_points() {
        let pts = resolve_points(&spec("0.2,0.3; 0.1,0.1"), &synthetic_2d(), 1).unwrap();
        assert_eq!(pts, vec![vec![0.2, 0.3], vec![0.1, 0.1]]);
    }

    #[test]
    fn samplers() {
        let m = synthetic_2d();
        assert_eq!(resolve_points(&spec("grid:3"), &m, 1).unwrap().len(), 9);
        let a = resolve_points(&spec("halton:4"), &m, 5).unwrap();
        assert_eq!(a, resolve_points(&spec("halton:4:5"), &m, 99).unwrap());
        assert_eq!(resolve_points(&spec("center"), &cantoni_overlap(2).unwrap(), 1).unwrap()[0][0], 1.0);
    }

    #[test]
    fn bad_points_are_rejected() {
        let m = kl_bernoulli();
        assert!(matches!(resolve_points(&spec("1.5"), &m, 1), Err(CliError::Model(_))));
        assert!(matches!(resolve_points(&spec("0.2;0.3,0.4"), &m, 1), Err(CliError::Config(_))));
        assert!(matches!(resolve_points(&spec("abc"), &m, 1), Err(CliError::Config(_))));
        assert!(matches!(resolve_points(&spec("grid:0"), &m, 1), Err(CliError::Config(_))));
        assert!(matches!(resolve_points(&spec("origin"), &m, 1), Err(CliError::Model(_))));
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_fields() {
        let mut c = RunConfig::default();
        c.model = Some("kl-bernoulli".into());
        c.points = PointSpec::List(vec![vec![0.3]]);
        c.tolerances.insert("rank4".into(), 1e-4);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        assert!(serde_json::from_str::<RunConfig>(r#"{"modle": "x"}"#).is_err());
        let p: RunConfig = serde_json::from_str(r#"{"points": "halton:3"}"#).unwrap();
        assert_eq!(p.points, spec("halton:3"));
    }

    #[test]
    fn tolerance_lookup_and_validation() {
        let mut c = RunConfig::default();
        assert_eq!(c.tolerance("invert.g", 1e-3), 1e-3);
        c.tolerances.insert("all".into(), 1e-15);
        assert_eq!(c.tolerance("invert.g", 1e-3), 1e-15);
        c.tolerances.insert("invert.g".into(), 0.5);
        assert_eq!(c.tolerance("invert.g", 1e-3), 0.5);
        c.validate().unwrap();
        c.tolerances.insert("bogus".into(), 1.0);
        assert!(c.validate().is_err());
        c.tolerances.remove("bogus");
        c.tolerances.insert("rank4".into(), -1.0);
        assert!(c.validate().is_err());
    }
}
