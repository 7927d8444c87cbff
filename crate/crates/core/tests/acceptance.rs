//! Acceptance suite: runs every numbered criterion at its stated tolerance
//! and prints one pass/fail line each. `cargo test --test acceptance`
//! (release profile recommended for the heavier criteria).

use granuflow_core::suites;

fn assert_criteria(results: &[suites::CriterionResult]) {
    let mut all_ok = true;
    for r in results {
        println!("{}", r.line());
        all_ok &= r.passed;
    }
    assert!(all_ok, "at least one acceptance criterion failed (see lines above)");
}

#[test]
fn criteria_ot_oracle() {
    assert_criteria(&suites::run_suite("ot-oracle").unwrap());
}

#[test]
fn criteria_energy_convexity() {
    assert_criteria(&suites::run_suite("energy-convexity").unwrap());
}

#[test]
fn criteria_jko_descent() {
    assert_criteria(&suites::run_suite("jko-descent").unwrap());
}

#[test]
fn criteria_contraction() {
    assert_criteria(&suites::run_suite("contraction").unwrap());
}

#[test]
fn criteria_cross_validation() {
    assert_criteria(&suites::run_suite("cross-validation").unwrap());
}

#[test]
fn criteria_shock_bound() {
    assert_criteria(&suites::run_suite("shock-bound").unwrap());
}

#[test]
fn unknown_suite_is_rejected() {
    assert!(suites::run_suite("no-such-suite").is_err());
}
