//! The `report` subcommand: run every reproduction criterion and print one
//! pass/fail line each.

use crate::emit::emit_json;
use crate::Cli;
use bforge_core::error::Error;
use serde_json::json;

pub fn cmd_report(cli: &Cli) -> Result<i32, Error> {
    let results = bforge_core::report::run_all();
    let mut all_pass = true;
    for r in &results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!("[{status}] criterion {}: {} ({:.2}s) — {}", r.id, r.name, r.seconds, r.detail);
        all_pass &= r.pass;
    }
    if let Some(path) = &cli.out {
        let v = json!({
            "criteria": results.iter().map(|r| json!({
                "id": r.id,
                "name": r.name,
                "pass": r.pass,
                "detail": r.detail,
                "seconds": r.seconds,
            })).collect::<Vec<_>>(),
            "all_pass": all_pass,
        });
        std::fs::write(path, emit_json(&v))
            .map_err(|e| Error::BadInput(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(if all_pass { 0 } else { 2 })
}
