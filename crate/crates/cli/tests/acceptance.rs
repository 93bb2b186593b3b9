//! Acceptance criteria 1–11, one pass/fail line each.
//!
//! A single test runs them in sequence so that the runtime limits are not
//! distorted by sibling tests competing for cores.

use std::io::Write;

use mdingarch_cli::acceptance::{format_line, run_selected};

#[test]
fn acceptance_criteria() {
    let results = run_selected(&[]);
    // written to the handle directly so the lines survive output capture
    let mut out = std::io::stdout().lock();
    for r in &results {
        writeln!(out, "{}", format_line(r)).unwrap();
    }
    out.flush().unwrap();
    let failed: Vec<usize> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert_eq!(results.len(), 11);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
