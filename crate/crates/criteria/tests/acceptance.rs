//! Runs the ten acceptance criteria at their default tolerances and prints
//! one line per criterion. Numeric arguments select a subset.

use std::process::ExitCode;
use std::time::Instant;

use twopoint_criteria::{run, Context, TITLES};

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .filter(|id| (1..=10).contains(id))
        .collect();
    let ids: Vec<usize> = if selected.is_empty() { (1..=10).collect() } else { selected };
    let ctx = Context::default();
    let mut failed = Vec::new();
    println!("running {} acceptance criteria", ids.len());
    for id in ids {
        let start = Instant::now();
        let (passed, line, details) = match run(id, &ctx) {
            Ok(o) => (o.passed, o.line(), o.details),
            Err(e) => (false, format!("criterion {id:>2} [FAIL] {}: error: {e}", TITLES[id - 1]), Vec::new()),
        };
        println!("{line} ({:.1}s)", start.elapsed().as_secs_f64());
        for d in details {
            println!("    {d}");
        }
        if !passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
