//! The acceptance gate: every reproduction criterion runs at its stated
//! tolerance and prints one pass/fail line.

use bforge_core::report::run_all;

#[test]
fn acceptance_criteria() {
    let results = run_all();
    let budgets = [
        (1usize, 1.0f64),
        (2, 60.0),
        (3, 5.0),
        (4, 120.0),
        (5, 60.0),
        (6, 30.0),
        (7, 60.0),
    ];
    let mut failed = Vec::new();
    for r in &results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!("[{status}] criterion {}: {} ({:.2}s) — {}", r.id, r.name, r.seconds, r.detail);
        if !r.pass {
            failed.push(format!("criterion {}: {}", r.id, r.detail));
        }
        if let Some(&(_, budget)) = budgets.iter().find(|(id, _)| *id == r.id) {
            if r.seconds > budget {
                failed.push(format!("criterion {} exceeded its {budget}s budget ({:.2}s)", r.id, r.seconds));
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
