//! Acceptance suite: one test per criterion, each printing its pass/fail
//! line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Criteria 8 and 10 share the trained-network bundle; it is computed once.

use std::sync::OnceLock;

use marginlab::harness::acceptance::{
    criterion_1, criterion_10, criterion_11, criterion_12, criterion_2, criterion_3, criterion_4,
    criterion_5, criterion_6, criterion_7, criterion_8, criterion_9, xor_gen_bundle,
    CriterionResult, XorGenBundle,
};

fn bundle() -> &'static XorGenBundle {
    static BUNDLE: OnceLock<XorGenBundle> = OnceLock::new();
    BUNDLE.get_or_init(xor_gen_bundle)
}

fn check(result: CriterionResult) {
    println!("{}", result.line());
    assert!(result.pass, "{}", result.line());
}

#[test]
fn criterion_01_opt5_closed_form() {
    check(criterion_1());
}

#[test]
fn criterion_02_thresholds() {
    check(criterion_2());
}

#[test]
fn criterion_03_linear_solver_soundness() {
    check(criterion_3());
}

#[test]
fn criterion_04_linear_generalization() {
    check(criterion_4());
}

#[test]
fn criterion_05_linear_no_signal_baseline() {
    check(criterion_5());
}

#[test]
fn criterion_06_linear_uc_failure_witness() {
    check(criterion_6());
}

#[test]
fn criterion_07_margin_vacuity() {
    check(criterion_7());
}

#[test]
fn criterion_08_xor_generalization() {
    check(criterion_8(bundle()));
}

#[test]
fn criterion_09_xor_no_generalization() {
    check(criterion_9());
}

#[test]
fn criterion_10_xor_uc_failure() {
    check(criterion_10(bundle()));
}

#[test]
fn criterion_11_kernel_properties() {
    check(criterion_11());
}

#[test]
fn criterion_12_determinism() {
    check(criterion_12());
}
