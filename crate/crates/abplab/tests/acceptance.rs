use std::io::Write;

use abplab::acceptance::run_acceptance;

#[test]
fn acceptance_criteria() {
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let report = run_acceptance(0, jobs).expect("acceptance run");
    // Straight to the stdout handle so the lines survive test output capture.
    let mut out = std::io::stdout().lock();
    for line in report.lines() {
        writeln!(out, "{line}").unwrap();
    }
    drop(out);
    assert_eq!(report.criteria.len(), 13);
    let failed: Vec<u32> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
    assert!(report.passed);
}
