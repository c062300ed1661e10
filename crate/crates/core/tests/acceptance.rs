//! Runs the eleven acceptance criteria, printing one line per criterion and
//! holding each to its wall-clock budget.

use std::io::Write;
use std::time::Instant;

use massflow::experiments::criteria::ALL;

/// Written straight to the process stdout so the table shows without
/// `--nocapture`.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

/// Budget in seconds per criterion, in order.
const BUDGET: [f64; 11] = [3.0, 10.0, 240.0, 300.0, 120.0, 300.0, 300.0, 10.0, 60.0, 5.0, 300.0];

#[test]
fn acceptance() {
    emit("");
    let total = Instant::now();
    let mut failed = Vec::new();
    let mut lines = Vec::new();
    for (criterion, budget) in ALL.into_iter().zip(BUDGET) {
        let start = Instant::now();
        let o = criterion();
        let secs = start.elapsed().as_secs_f64();
        let in_time = secs < budget;
        let status = if o.passed && in_time { "PASS" } else { "FAIL" };
        let timing = if in_time {
            String::new()
        } else {
            format!(" (over {budget} s budget)")
        };
        let line = format!(
            "{status} criterion {:>2} {:<30} {secs:>7.2}s{timing}  {}",
            o.id, o.name, o.detail
        );
        emit(&line);
        lines.push(line);
        if status == "FAIL" {
            failed.push(o.id);
        }
    }
    let secs = total.elapsed().as_secs_f64();
    emit(&format!("total {secs:.2}s"));
    assert!(secs < 300.0, "suite took {secs:.1} s");
    assert!(failed.is_empty(), "failed criteria: {failed:?}\n{}", lines.join("\n"));
}
