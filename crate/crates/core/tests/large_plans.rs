use std::time::Instant;

use regcube::constructions::{build, plan, ConstructionStep, PlanOutcome};
use regcube::hypercube::{Membership, Verdict, VerifyMode};

#[test]
fn fifty_nine_five_passes_sampled_verification() {
    let start = Instant::now();
    let oracle = build(59, 5).unwrap().expect("(59,5) has a plan");
    assert_eq!((oracle.dim(), oracle.d1(), oracle.d2()), (59, 5, 59));
    let report = oracle.verify(VerifyMode::Sampled { count: 10_000, seed: 0 }).unwrap();
    assert_eq!(report.verdict, Verdict::Valid, "{report:?}");
    assert_eq!(report.vertices_checked, 10_000);
    eprintln!("(59,5) built and sampled in {:?}", start.elapsed());
}

#[test]
fn twenty_eight_five_intermediate_is_regular() {
    let PlanOutcome::Feasible { plan } = plan(59, 5).unwrap() else { panic!() };
    assert!(matches!(plan.steps[0], ConstructionStep::Base { s: 3, t: 5, .. }));
    let mut prefix = plan.clone();
    prefix.steps.truncate(3);
    prefix.target_n = 28;
    prefix.target_d2 = 27;
    let oracle = regcube::constructions::execute(&prefix).unwrap();
    let report = oracle.verify(VerifyMode::Sampled { count: 20_000, seed: 7 }).unwrap();
    assert_eq!(report.verdict, Verdict::Valid);
}

#[test]
fn blown_up_thirteen_three_is_sampled_regular() {
    let oracle = build(26, 6).unwrap().unwrap();
    let report = oracle.verify(VerifyMode::Sampled { count: 10_000, seed: 3 }).unwrap();
    assert_eq!(report.verdict, Verdict::Valid);
}
