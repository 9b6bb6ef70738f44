use leadopt_core::steps::set_pull_sign_fault;
use leadopt_core::theory::{run_all, Status, VERIFY_SEED};

#[test]
fn every_applicable_check_passes() {
    let reports = run_all(None, VERIFY_SEED).unwrap();
    let failed: Vec<_> = reports
        .iter()
        .filter(|r| r.status == Status::Fail)
        .map(|r| &r.name)
        .collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
    let applicable = reports.iter().filter(|r| r.status == Status::Pass).count();
    assert!(
        applicable * 2 > reports.len(),
        "{applicable} of {} applicable",
        reports.len()
    );
}

#[test]
fn checks_are_reproducible_and_filter_independent() {
    let all = run_all(None, VERIFY_SEED).unwrap();
    let some = run_all(Some("psi_minimizer"), VERIFY_SEED).unwrap();
    assert!(!some.is_empty());
    for r in &some {
        assert!(r.name.contains("psi_minimizer"));
        let same = all.iter().find(|a| a.name == r.name).unwrap();
        assert_eq!(same.csv_line(), r.csv_line());
    }
}

#[test]
fn flipped_pull_sign_is_caught() {
    set_pull_sign_fault(true);
    let reports = run_all(Some("one_step_descent"), VERIFY_SEED);
    set_pull_sign_fault(false);
    let reports = reports.unwrap();
    assert!(
        reports.iter().any(|r| r.status == Status::Fail),
        "{reports:#?}"
    );
    let clean = run_all(Some("one_step_descent"), VERIFY_SEED).unwrap();
    assert!(clean.iter().all(|r| r.status != Status::Fail));
}
