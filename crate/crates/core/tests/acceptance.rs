//! Acceptance criteria. Prints one PASS/FAIL line per check and exits non-zero
//! if any check fails. Runs without the libtest harness so every line is shown.

use std::process::ExitCode;

use zoomcons::verify;

fn main() -> ExitCode {
    let outcomes = verify::run_all();
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    println!("acceptance: {}/{} passed", outcomes.len() - failed.len(), outcomes.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing checks: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
