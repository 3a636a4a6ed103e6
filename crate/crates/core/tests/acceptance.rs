//! Runs the full criteria battery, printing one line per criterion, and
//! enforces the runtime budgets. Built without the libtest harness so the
//! lines show in a plain `cargo test`; the process exits 1 on any failure.

use starcoal::verify::{run_criterion, run_suite, Report, Suite, CRITERIA};
use std::time::{Duration, Instant};

const SEED: u64 = 42;

fn budget(id: u32) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(10)),
        3 => Some(Duration::from_secs(60)),
        9 => Some(Duration::from_secs(120)),
        _ => None,
    }
}

fn main() {
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for id in 1..CRITERIA {
        let start = Instant::now();
        let r = run_criterion(id, SEED);
        let took = start.elapsed();
        let late = budget(id).is_some_and(|b| took > b);
        println!("{}  [{:.2}s{}]", r.headline(), took.as_secs_f64(), if late { ", over budget" } else { "" });
        if !r.passed() || late {
            failures.push(id);
        }
        reports.push(r);
    }

    // criterion 14: the same report twice, byte for byte
    let first = Report {
        seed: SEED,
        criteria: reports,
    }
    .render();
    let second = Report {
        seed: SEED,
        criteria: (1..CRITERIA).map(|id| run_criterion(id, SEED)).collect(),
    }
    .render();
    let rerun = run_suite(Suite::Determinism, SEED);
    let same = first == second && rerun.passed();
    println!(
        "[{}] 14 {:<28} identical reports: {same}; {}",
        if same { "PASS" } else { "FAIL" },
        "determinism",
        rerun.criteria[0].checks[0].render()
    );
    if !same {
        failures.push(14);
    }
    if failures.is_empty() {
        println!("acceptance: all {CRITERIA} criteria passed");
    } else {
        eprintln!("failed criteria: {failures:?}\n{first}");
        std::process::exit(1);
    }
}
