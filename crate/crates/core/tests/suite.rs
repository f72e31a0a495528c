use reusealloc::suite::{run_suite, DualityAudit, Level, SuiteOptions, DUALITY_TOL};

#[test]
fn quick_suite_correctness_checks_pass() {
    let report = run_suite(&SuiteOptions::new(Level::Quick), |_| {}).unwrap();
    assert_eq!(report.checks.len(), 11);
    for name in ["gap instance", "strong duality", "column generation", "hard feasibility"] {
        let c = report.get(name).unwrap();
        assert!(c.passed, "{c}");
    }
}

#[test]
fn tampered_multipliers_fail_strong_duality() {
    let opts = SuiteOptions {
        dual_tamper: 1e-3,
        ..SuiteOptions::new(Level::Quick)
    };
    let report = run_suite(&opts, |_| {}).unwrap();
    let c = report.get("strong duality").unwrap();
    assert!(!c.passed, "{c}");
    assert!(!report.all_passed());
}

#[test]
fn audit_records_worst_gap() {
    let mut a = DualityAudit::default();
    a.record("x", 0.0);
    a.record("y", 0.5);
    a.record("z", 1e-9);
    assert_eq!(a.solves, 3);
    assert_eq!((a.max_gap, a.worst.as_str()), (0.5, "y"));
    assert!(!a.holds(DUALITY_TOL));
}
