//! Report envelopes and their JSON / CSV encodings.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliResult;

pub const SCHEMA_VERSION: u32 = 1;

/// One named comparison against a bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            bound,
            passed: value <= bound,
        }
    }
}

/// A CSV line: one per (point, check).
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub index: usize,
    pub point: String,
    pub check: String,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub passed: bool,
    pub note: String,
}

impl Row {
    pub fn from_check(index: usize, point: &[f64], c: &Check) -> Self {
        Row {
            index,
            point: join(point),
            check: c.name.clone(),
            value: Some(c.value),
            bound: Some(c.bound),
            passed: c.passed,
            note: String::new(),
        }
    }

    pub fn error(index: usize, point: &[f64], message: &str) -> Self {
        Row {
            index,
            point: join(point),
            check: "error".into(),
            value: None,
            bound: None,
            passed: false,
            note: message.to_string(),
        }
    }
}

fn join(point: &[f64]) -> String {
    point.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub items: usize,
    pub checks: usize,
    pub failed_checks: usize,
    pub errors: usize,
    pub passed: bool,
}

impl Summary {
    pub fn from_rows(items: usize, rows: &[Row]) -> Self {
        let errors = rows.iter().filter(|r| r.check == "error").count();
        let checks = rows.len() - errors;
        let failed_checks = rows.iter().filter(|r| r.check != "error" && !r.passed).count();
        Summary {
            items,
            checks,
            failed_checks,
            errors,
            passed: errors == 0 && failed_checks == 0,
        }
    }

    /// 0 all pass, 1 a check failed, 3 an evaluation error occurred.
    pub fn exit_code(&self) -> i32 {
        if self.errors > 0 {
            3
        } else if self.failed_checks > 0 {
            1
        } else {
            0
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub generated_at: u64,
    pub config_echo: &'a RunConfig,
    pub results: &'a [R],
    pub summary: &'a Summary,
}

pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

pub fn write_json<R: Serialize, W: Write>(report: &Report<'_, R>, mut w: W) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_csv<W: Write>(rows: &[Row], w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes in `format` to `path`, or to stdout when no path is given.
pub fn emit<R: Serialize>(report: &Report<'_, R>, rows: &[Row], format: Format, path: Option<&Path>) -> CliResult<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Json => write_json(report, sink),
        Format::Csv => write_csv(rows, sink),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_exit_codes() {
        let ok = Row::from_check(0, &[0.5], &Check::at_most("a", 1.0, 2.0));
        let bad = Row::from_check(0, &[0.5], &Check::at_most("b", 3.0, 2.0));
        let err = Row::error(1, &[0.7], "boom");
        assert_eq!(Summary::from_rows(1, &[ok.clone()]).exit_code(), 0);
        assert_eq!(Summary::from_rows(1, &[ok.clone(), bad.clone()]).exit_code(), 1);
        let s = Summary::from_rows(2, &[ok, bad, err]);
        assert_eq!((s.checks, s.failed_checks, s.errors, s.exit_code()), (2, 1, 1, 3));
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let rows = vec![
            Row::from_check(0, &[0.2, 0.3], &Check::at_most("x", 1e-9, 1e-6)),
            Row::error(1, &[0.4, 0.1], "failed"),
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,point,check,value,bound,passed,note");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,0.4 0.1,error,,,false,failed"));
    }
}
