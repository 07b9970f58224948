//! Acceptance criteria: one PASS/FAIL line per criterion, then the
//! determinism and runtime check of the full suite.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use singular_elliptic::config::DEFAULT_SEED;
use singular_elliptic::verify::run_suite;

fn main() -> ExitCode {
    let start = Instant::now();
    let first = run_suite("full", DEFAULT_SEED).expect("full suite exists");
    let once = start.elapsed();
    let second = run_suite("full", DEFAULT_SEED).expect("full suite exists");
    for c in &first.checks {
        println!("{}", c.line());
    }
    let identical = first.render() == second.render();
    let fast = once < Duration::from_secs(300);
    let c11 = identical && fast;
    println!(
        "{} [C11] full suite deterministic and fast: rerun byte-identical: {identical}, runtime under 5 min: {fast}",
        if c11 { "PASS" } else { "FAIL" }
    );
    if first.all_passed() && c11 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failures present");
        ExitCode::FAILURE
    }
}
