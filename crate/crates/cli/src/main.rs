use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use twopoint_cli::commands::{self, Output};
use twopoint_cli::config::{Format, PointSpec, RunConfig};
use twopoint_cli::report::{emit, timestamp, Report};
use twopoint_cli::{CliError, CliResult};
use twopoint_core::models::REGISTRY;
use twopoint_core::DiffConfig;

const WORKERS_VAR: &str = "TWOPOINT_WORKERS";

#[derive(Parser)]
#[command(
    name = "twopoint",
    version,
    about = "Extract metric, skewness and rank-4 tensors from two-point functions",
    after_help = "Tolerances are set with --tol.<name>=<value>; --tol.all=<value> sets every one.\n\
                  Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 model, domain or solver error.\n\
                  TWOPOINT_WORKERS sets the worker pool size (default: available processors)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract g, T, Q1 and Q2 of a model's potential at each point.
    Extract(Common),
    /// Rebuild a principal function from a model's (g, T) and re-extract them.
    Invert(Common),
    /// Run the acceptance criteria.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated criterion ids (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// List model names understood by --model.
    Models,
}

#[derive(Args, Default)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model name, see `twopoint models`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// origin, center, grid:K, halton:K[:seed], or coordinates (`;` between points).
    #[arg(long, allow_hyphen_values = true)]
    points: Option<String>,
    /// Report file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Differentiation method: taylor-jet or finite-difference.
    #[arg(long, value_parser = parse_method)]
    method: Option<DiffConfig>,
    /// Shooting grid size.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_method(s: &str) -> Result<DiffConfig, String> {
    match s {
        "taylor-jet" | "jet" => Ok(DiffConfig::taylor_jet()),
        "finite-difference" | "fd" => Ok(DiffConfig::finite_difference()),
        _ => Err(format!("unknown method {s:?}; expected taylor-jet or finite-difference")),
    }
}

type Overrides = Vec<(String, f64)>;

/// Pulls `--tol.<name>=<v>` and `--tol.<name> <v>` out of the argument list.
fn split_tolerances(args: Vec<String>) -> CliResult<(Vec<String>, Overrides)> {
    let mut rest = Vec::new();
    let mut tols = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(spec) = a.strip_prefix("--tol.") else {
            rest.push(a);
            continue;
        };
        let (name, value) = match spec.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Config(format!("--tol.{spec} needs a value")))?;
                (spec.to_string(), v)
            }
        };
        let v = value
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("--tol.{name}: cannot parse {value:?}")))?;
        tols.push((name, v));
    }
    Ok((rest, tols))
}

fn build_config(c: &Common, tols: &[(String, f64)], only: &[usize]) -> CliResult<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &c.model {
        cfg.model = Some(m.clone());
    }
    if let Some(a) = c.alpha {
        cfg.alpha = a;
    }
    if let Some(p) = &c.points {
        cfg.points = PointSpec::Spec(p.clone());
    }
    if let Some(o) = &c.out {
        cfg.output.path = Some(o.clone());
    }
    if let Some(f) = c.format {
        cfg.output.format = f;
    }
    if let Some(d) = &c.method {
        cfg.diff = DiffConfig {
            base_step: cfg.diff.base_step,
            richardson_levels: cfg.diff.richardson_levels,
            ..d.clone()
        };
    }
    if let Some(n) = c.grid {
        cfg.solver.grid = n;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    for (k, v) in tols {
        cfg.tolerances.insert(k.clone(), *v);
    }
    if !only.is_empty() {
        cfg.criteria = only.to_vec();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_pool() -> CliResult<()> {
    let Ok(raw) = std::env::var(WORKERS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{WORKERS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn write<R: serde::Serialize>(command: &str, cfg: &RunConfig, out: &Output<R>) -> CliResult<i32> {
    let report = Report {
        schema_version: twopoint_cli::report::SCHEMA_VERSION,
        command,
        generated_at: timestamp(),
        config_echo: cfg,
        results: &out.results,
        summary: &out.summary,
    };
    emit(&report, &out.rows, cfg.output.format, cfg.output.path.as_deref())?;
    Ok(out.summary.exit_code())
}

fn run(cli: Cli, tols: &[(String, f64)]) -> CliResult<i32> {
    init_pool()?;
    match &cli.command {
        Command::Models => {
            for name in REGISTRY {
                println!("{name}");
            }
            if !tols.is_empty() {
                return Err(CliError::Config("models takes no tolerances".into()));
            }
            Ok(0)
        }
        Command::Extract(c) => {
            let cfg = build_config(c, tols, &[])?;
            write("extract", &cfg, &commands::extract(&cfg)?)
        }
        Command::Invert(c) => {
            let cfg = build_config(c, tols, &[])?;
            write("invert", &cfg, &commands::invert(&cfg)?)
        }
        Command::Verify { common, only } => {
            let cfg = build_config(common, tols, only)?;
            let out = commands::verify(&cfg, |r| {
                println!("{}", r.line());
                if let Some(o) = &r.outcome {
                    for d in &o.details {
                        println!("    {d}");
                    }
                }
            })?;
            let s = &out.summary;
            println!(
                "{} of {} criteria passed",
                out.results.iter().filter(|r| r.outcome.as_ref().is_some_and(|o| o.passed)).count(),
                s.items
            );
            if cfg.output.path.is_some() {
                write("verify", &cfg, &out)
            } else {
                Ok(s.exit_code())
            }
        }
    }
}

fn usage_for(cli_args: &[String]) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let sub = cli_args.get(1).cloned().unwrap_or_default();
    match cmd.find_subcommand_mut(&sub) {
        Some(s) => s.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let (rest, tols) = match split_tolerances(args) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("twopoint: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&rest) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli, &tols) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("twopoint: {e}");
            if matches!(e, CliError::Config(_)) {
                eprintln!("{}", usage_for(&rest));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tolerance_flags_are_split_out() {
        let (rest, tols) =
            split_tolerances(strs(&["twopoint", "verify", "--tol.rank4=1e-4", "--only", "8", "--tol.all", "0.5"])).unwrap();
        assert_eq!(rest, strs(&["twopoint", "verify", "--only", "8"]));
        assert_eq!(tols, vec![("rank4".to_string(), 1e-4), ("all".to_string(), 0.5)]);
        assert!(split_tolerances(strs(&["x", "--tol.rank4"])).is_err());
        assert!(split_tolerances(strs(&["x", "--tol.rank4=abc"])).is_err());
    }

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"model": "kl-bernoulli", "alpha": 0.25, "points": [[0.3]]}"#).unwrap();
        let c = Common {
            config: Some(path),
            alpha: Some(0.0),
            method: Some(DiffConfig::finite_difference()),
            ..Common::default()
        };
        let cfg = build_config(&c, &[("invert.g".into(), 1e-2)], &[]).unwrap();
        assert_eq!(cfg.model.as_deref(), Some("kl-bernoulli"));
        assert_eq!(cfg.alpha, 0.0);
        assert_eq!(cfg.points, PointSpec::List(vec![vec![0.3]]));
        assert_eq!(cfg.tolerances["invert.g"], 1e-2);
        assert_eq!(cfg.diff, DiffConfig::finite_difference());
    }
}
