//! One test per acceptance criterion. Each prints its pass/fail line to
//! stderr directly so the line shows up without `--nocapture`.

use std::io::Write;

use stein_audit::acceptance::{self, CriterionOutcome};

fn check(o: CriterionOutcome) {
    let _ = writeln!(std::io::stderr(), "{o}");
    assert!(o.passed, "{o}");
}

#[test]
fn criterion_01() {
    check(acceptance::criterion_01());
}

#[test]
fn criterion_02() {
    check(acceptance::criterion_02());
}

#[test]
fn criterion_03() {
    check(acceptance::criterion_03());
}

#[test]
fn criterion_04() {
    check(acceptance::criterion_04());
}

#[test]
fn criterion_05() {
    check(acceptance::criterion_05());
}

#[test]
fn criterion_06() {
    check(acceptance::criterion_06());
}

#[test]
fn criterion_07() {
    check(acceptance::criterion_07());
}

#[test]
fn criterion_08() {
    check(acceptance::criterion_08());
}

#[test]
fn criterion_09a() {
    check(acceptance::criterion_09a());
}

#[test]
fn criterion_09b() {
    check(acceptance::criterion_09b());
}

#[test]
fn criterion_10() {
    check(acceptance::criterion_10());
}

#[test]
fn criterion_11() {
    check(acceptance::criterion_11());
}
