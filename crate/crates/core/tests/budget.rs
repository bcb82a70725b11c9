mod common;

use dpaudit_core::budget::{allocate_equal, compose, BudgetError};
use dpaudit_core::exact::Rational;
use num::{BigInt, One, Zero};

fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

#[test]
fn fourteen_equal_shares_sum_to_the_total_exactly() {
    let ledger = compose(&common::plan("telemetry-zscore-repaired")).unwrap();
    assert_eq!(ledger.entries.len(), 14);
    for e in &ledger.entries {
        assert_eq!(e.epsilon, q(1, 14), "{}", e.node);
    }
    assert_eq!(ledger.worst_case_total, Rational::one());
    assert!(!ledger.exceeded());
}

#[test]
fn per_day_budgets_add_across_days_but_not_within_one() {
    let naive = compose(&common::plan("per-day-full-epsilon")).unwrap();
    assert_eq!(naive.entries.len(), 10);
    assert_eq!(naive.worst_case_total, q(5, 1));
    assert!(naive.exceeded());

    let fixed = compose(&common::plan("per-day-split")).unwrap();
    assert_eq!(fixed.worst_case_total, Rational::one());
    assert!(!fixed.exceeded());
}

#[test]
fn sequential_products_add_up() {
    let ledger = compose(&common::plan("zscore-per-product-full-epsilon")).unwrap();
    assert_eq!(ledger.worst_case_total, q(7, 1));
    assert_eq!(ledger.limit, Rational::one());
}

#[test]
fn decimal_epsilons_are_exact() {
    let mut plan = common::plan("clipped-count");
    plan.privacy.epsilon_total = 0.3;
    let dp = plan.nodes.iter_mut().find(|n| n.id == "dp_visits").unwrap();
    if let dpaudit_core::plan::NodeKind::Noise(spec) = &mut dp.kind {
        spec.epsilon = dpaudit_core::plan::EpsilonSpec::symbolic("epsilon_total / 3").unwrap();
    }
    let ledger = compose(&plan).unwrap();
    assert_eq!(ledger.worst_case_total, q(1, 10));
    assert_eq!(ledger.limit, q(3, 10));
}

#[test]
fn equal_allocation() {
    assert_eq!(allocate_equal(&q(3, 2), 6).unwrap(), q(1, 4));
    let parts: Rational = (0..7).map(|_| allocate_equal(&Rational::one(), 7).unwrap()).sum();
    assert_eq!(parts, Rational::one());
    assert!(matches!(allocate_equal(&Rational::one(), 0), Err(BudgetError::ZeroQueries)));
    assert!(allocate_equal(&Rational::zero(), 3).is_err());
}
