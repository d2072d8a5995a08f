//! Acceptance criteria 1–11 on the default seed, plus the fusion ablation.
//!
//! Runs without the libtest harness so that the per-criterion lines are
//! always printed, not only when a check fails. The suite runs once (twice,
//! counting the determinism rerun); the process exits non-zero if any
//! criterion or the ablation fails.

use std::process::ExitCode;

use multiloc::repro::{repro_suite, SuiteConfig};

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let summary = match repro_suite(&SuiteConfig::default(), dir.path(), true) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("acceptance suite could not run: {e}");
            return ExitCode::FAILURE;
        }
    };

    println!("acceptance_criteria:");
    for c in &summary.criteria {
        println!("{}", c.line());
    }
    let complete = summary.criteria.len() == 11;
    if !complete {
        println!("expected 11 criteria, got {}", summary.criteria.len());
    }
    println!("fusion_ablation_on_grid_split:");
    println!("{}", summary.ablation.line());

    let failed: Vec<&str> = summary
        .criteria
        .iter()
        .chain(std::iter::once(&summary.ablation))
        .filter(|c| !c.passed)
        .map(|c| c.id.as_str())
        .collect();
    if complete && failed.is_empty() {
        println!("acceptance: all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing checks: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
