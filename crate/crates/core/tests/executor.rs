mod common;

use dpaudit_core::executor::{execute, laplace_moments, sample_laplace_batch, ExecError, ExecOptions, Value};
use dpaudit_core::Strategy;

fn opts(seed: u64, noise: bool) -> ExecOptions {
    ExecOptions { seed, noise, ..ExecOptions::default() }
}

#[test]
fn same_seed_same_release() {
    let plan = common::plan("telemetry-zscore-repaired");
    let ds = common::dataset(&plan, "telemetry.csv");
    let a = execute(&plan, &ds, &opts(11, true)).unwrap();
    let b = execute(&plan, &ds, &opts(11, true)).unwrap();
    let c = execute(&plan, &ds, &opts(12, true)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_ne!(a.releases, c.releases);
}

#[test]
fn noise_scale_is_sensitivity_over_epsilon() {
    let plan = common::plan("telemetry-average-repaired");
    let ds = common::dataset(&plan, "telemetry.csv");
    let result = execute(&plan, &ds, &opts(0, true)).unwrap();
    assert_eq!(result.noise_applied.len(), 14);
    for rec in &result.noise_applied {
        let expected = if rec.node.starts_with("dp_events") { 5.0 * 14.0 } else { 14.0 };
        assert!((rec.scale - expected).abs() < 1e-9, "{}: {}", rec.node, rec.scale);
        assert_eq!(rec.epsilon, "1/14");
    }
}

#[test]
fn automatic_sensitivity_uses_the_derived_bound() {
    let plan = common::plan("telemetry-histogram");
    let ds = common::dataset(&plan, "telemetry.csv");
    let result = execute(&plan, &ds, &opts(0, true)).unwrap();
    assert_eq!(result.noise_applied[0].sensitivity, 25.0);
    match &result.releases["out_histogram"] {
        Value::Cells(cells) => assert_eq!(cells.len(), 5),
        other => panic!("expected one value per event type, got {other:?}"),
    }
}

#[test]
fn invalid_plans_are_refused_unless_allowed() {
    let plan = common::plan("unclipped-count");
    let ds = common::dataset(&plan, "restaurant.csv");
    match execute(&plan, &ds, &opts(0, true)) {
        Err(ExecError::Refused(report)) => assert_eq!(report.violation_count(), 1),
        other => panic!("expected a refusal, got {other:?}"),
    }
    let allowed = ExecOptions { allow_invalid: true, ..opts(0, false) };
    let result = execute(&plan, &ds, &allowed).unwrap();
    assert_eq!(result.releases["out_visits"], Value::Scalar(ds.len() as f64));
}

#[test]
fn partition_constraints_are_checked_against_the_data() {
    let plan = common::plan("per-day-split");
    let mut text = std::fs::read_to_string(common::fixtures().join("data/restaurant.csv")).unwrap();
    text.push_str("v001,Mon,short,20\nv001,Mon,long,90\n");
    let ds = dpaudit_core::executor::Dataset::from_csv_reader(text.as_bytes(), &plan.schema, "VisitorId").unwrap();
    assert!(matches!(execute(&plan, &ds, &opts(0, true)), Err(ExecError::Data(_))));
}

#[test]
fn laplace_moments_match_the_distribution() {
    let m = laplace_moments(2.0, 1_000_000, 7, Strategy::Parallel).unwrap();
    assert!(m.mean.abs() < 0.02, "{}", m.mean);
    assert!((m.mean_abs - 2.0).abs() < 0.02, "{}", m.mean_abs);
    assert_eq!(m, laplace_moments(2.0, 1_000_000, 7, Strategy::Sequential).unwrap());
}

#[test]
fn laplace_rejects_bad_scales() {
    for scale in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(sample_laplace_batch(scale, 3, 0).is_err(), "{scale}");
    }
}
