//! Runs every acceptance criterion at its stated tolerance and prints one
//! PASS/FAIL line per criterion.

use adaptsense::harness::validate::run_criteria;

#[test]
fn acceptance_criteria() {
    let scratch = tempfile::tempdir().unwrap();
    let ids: Vec<u8> = match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').filter_map(|t| t.trim().parse().ok()).collect(),
        Err(_) => (1..=8).collect(),
    };
    let reports = run_criteria(&ids, scratch.path());
    for r in &reports {
        println!("{}", r.line());
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
