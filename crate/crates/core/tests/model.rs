use approx::assert_relative_eq;
use gridtrade::checks::{derivative_checks, fuzz_vectors};
use gridtrade::model::*;
use gridtrade::GridError;
use proptest::prelude::*;

#[test]
fn utility_derivatives_match_finite_differences() {
    let (first, second, signs) = derivative_checks(5, 100);
    assert!(first <= 1e-6, "{first}");
    assert!(second <= 1e-4, "{second}");
    assert!(signs);
}

#[test]
fn vector_producers_respect_invariants() {
    let failures = fuzz_vectors(17, 10_000);
    assert!(
        failures.is_empty(),
        "{} failures, first: {:?}",
        failures.len(),
        failures.first()
    );
}

#[test]
fn general_cost_identities() {
    let mut cfg = GridConfig::standard(3);
    let prices = [50.0, 60.0, 75.0];
    let energies = [100.0, 200.0, 150.0];
    assert_eq!(
        general_cost(&prices, &energies, &cfg).unwrap(),
        total_cost(&prices, &energies, &cfg).unwrap()
    );

    let idle = [0.0; 3];
    cfg.shortfall_weight = 2.5;
    let expected = prices.iter().map(|p| p + 1.0).sum::<f64>() + 2.5 * 700.0;
    assert_relative_eq!(
        general_cost(&prices, &idle, &cfg).unwrap(),
        expected,
        max_relative = 1e-15
    );

    // with beta_n = alpha the shortfall and transmission terms add up to alpha E_def
    cfg.transmission_weight = vec![2.5; 3];
    assert_relative_eq!(
        general_cost(&prices, &energies, &cfg).unwrap(),
        total_cost(&prices, &energies, &cfg).unwrap() + 2.5 * 700.0,
        max_relative = 1e-14
    );
}

#[test]
fn single_consumer_cost_is_individual_cost() {
    let cfg = GridConfig::standard(1);
    assert_eq!(
        total_cost(&[185.0], &[300.0], &cfg).unwrap(),
        individual_cost(185.0, 300.0, 2.0, 1.0, 1.0)
    );
}

#[test]
fn floor_precedence_raises_the_budget() {
    let strict = GridConfig::standard(25);
    assert!(matches!(
        strict.validate(),
        Err(GridError::InfeasibleBudget { n: 25, .. })
    ));
    let floor = strict.clone().with_policy(BudgetPolicy::FloorPrecedence);
    floor.validate().unwrap();
    assert_relative_eq!(floor.effective_budget(), 25.0 * 8.45, max_relative = 1e-15);
    let uniform = PriceVector::uniform(&floor).unwrap();
    assert!(uniform.iter().all(|&p| p == 8.45));
    assert_eq!(
        GridConfig::standard(5)
            .with_policy(BudgetPolicy::FloorPrecedence)
            .effective_budget(),
        185.0
    );
}

#[test]
fn vectors_reject_violations() {
    let params = consumers(&[100.0, 200.0], 0.5).unwrap();
    assert!(EnergyVector::new(vec![100.0, 200.0], &params, 700.0).is_ok());
    assert!(EnergyVector::new(vec![100.5, 0.0], &params, 700.0).is_err());
    assert!(EnergyVector::new(vec![-1e-12, 0.0], &params, 700.0).is_err());
    assert!(EnergyVector::new(vec![100.0, 200.0], &params, 250.0).is_err());
    assert!(EnergyVector::new(vec![f64::NAN, 0.0], &params, 700.0).is_err());
    assert!(matches!(
        EnergyVector::new(vec![1.0], &params, 700.0),
        Err(GridError::Dimension { expected: 2, found: 1 })
    ));

    let cfg = GridConfig::standard(2);
    assert!(PriceVector::new(vec![92.5, 92.5], &cfg).is_ok());
    assert!(PriceVector::new(vec![100.0, 80.0], &cfg).is_err());
    assert!(PriceVector::new(vec![180.0, 5.0], &cfg).is_err());
    assert!(EcParams::new(0, 0.0, 0.5).is_err());
    assert!(EcParams::new(0, 10.0, -0.5).is_err());
}

proptest! {
    #[test]
    fn utility_is_concave_in_energy(
        cap in 64.0..240.0f64,
        c in 0.1..2.0f64,
        p in 0.0..200.0f64,
        a in 0.0..240.0f64,
        b in 0.0..240.0f64,
        t in 0.0..1.0f64,
    ) {
        let (a, b) = (a.min(cap), b.min(cap));
        let mid = t * a + (1.0 - t) * b;
        let chord = t * utility(a, cap, p, c) + (1.0 - t) * utility(b, cap, p, c);
        prop_assert!(utility(mid, cap, p, c) >= chord - 1e-9 * chord.abs().max(1.0));
        prop_assert_eq!(utility_dee(c), -2.0 * c);
    }

    #[test]
    fn cost_is_convex_in_price(
        e in 0.1..240.0f64,
        r in 1.05..4.0f64,
        p in 0.1..185.0f64,
        q in 0.1..185.0f64,
    ) {
        prop_assume!((p - q).abs() > 1e-3);
        let mid = 0.5 * (p + q);
        let chord = 0.5 * (individual_cost(p, e, r, 1.0, 1.0) + individual_cost(q, e, r, 1.0, 1.0));
        prop_assert!(individual_cost(mid, e, r, 1.0, 1.0) < chord);
    }

    #[test]
    fn total_utility_is_the_sum(caps in prop::collection::vec(64.0..240.0f64, 1..12), share in 0.0..1.0f64, p in 0.0..100.0f64) {
        let params = consumers(&caps, 0.5).unwrap();
        let energies: Vec<f64> = caps.iter().map(|c| c * share).collect();
        let prices = vec![p; caps.len()];
        let each = utilities(&energies, &params, &prices).unwrap();
        prop_assert_eq!(total_utility(&energies, &params, &prices).unwrap(), each.iter().sum::<f64>());
    }
}
