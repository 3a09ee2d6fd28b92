mod support;

use support::isolation::{run_suite, BUDGET, MIN_EFFECTIVE, SEQUENCES};

#[test]
fn element_isolation_suite() {
    let report = run_suite(SEQUENCES).unwrap();
    assert!(report.elapsed < BUDGET, "suite took {:?}", report.elapsed);
    assert!(
        report.effective.iter().all(|&n| n >= MIN_EFFECTIVE),
        "too few effective operations: {:?}",
        report.effective
    );
}
