use gridtrade::checks::{oracle_equivalence, social_optimality};
use gridtrade::gnep::*;
use gridtrade::model::{consumers, GridConfig, PriceVector};
use proptest::prelude::*;

#[test]
fn solver_matches_the_oracle() {
    let check = oracle_equivalence(21, 200).unwrap();
    assert!(check.passed, "{}", check.detail);
}

#[test]
fn equilibrium_maximises_total_utility() {
    let check = social_optimality(21, 20).unwrap();
    assert!(check.passed, "{}", check.detail);
}

#[test]
fn interior_slacks_equal_the_shared_multiplier() {
    let params = consumers(&[64.0, 100.0, 180.0, 240.0, 220.0, 150.0], 0.5).unwrap();
    let cfg = GridConfig::uniform(6, 500.0, 185.0, 8.45, 2.0, 1.0, 1.0);
    let prices = PriceVector::new(vec![40.0, 35.0, 30.0, 25.0, 25.0, 30.0], &cfg).unwrap();
    let (e, _) = sshpm_solve(&prices, &params, 500.0, &SshpmConfig::for_instance(&params, 500.0)).unwrap();
    let (oracle, xi) = ve_oracle_with_multiplier(&prices, &params, 500.0).unwrap();
    let slacks = slack_vector(&e, &params, &prices).unwrap();
    for n in 0..6 {
        if e[n] > 1e-6 && e[n] < params[n].available_energy - 1e-6 {
            assert!((slacks[n] - xi).abs() < 1e-4, "{n}: {} vs {xi}", slacks[n]);
        }
        assert!((e[n] - oracle[n]).abs() <= 1e-5 * 500.0);
    }
    // with c = 1/2 the slack reduces to E - e + p
    for n in 0..6 {
        let direct = params[n].available_energy - e[n] + prices[n];
        assert!((slacks[n] - direct).abs() < 1e-12);
    }
}

#[test]
fn slack_budget_needs_no_multiplier() {
    let params = consumers(&[64.0, 80.0], 0.5).unwrap();
    let prices = [30.0, 30.0];
    let (e, xi) = ve_oracle_with_multiplier(&prices, &params, 700.0).unwrap();
    assert_eq!(xi, 0.0);
    assert_eq!(&e[..], &[64.0, 80.0]);
}

#[test]
fn non_convergence_carries_the_trace() {
    let params = consumers(&[200.0, 210.0, 220.0], 0.5).unwrap();
    let cfg = SshpmConfig {
        max_iterations: 1,
        tolerance: 1e-14,
        ..SshpmConfig::for_instance(&params, 100.0)
    };
    let prices = [60.0, 60.0, 65.0];
    match solve_at(&prices, &params, 100.0, &cfg) {
        Err(gridtrade::GridError::SolverNonConvergence { iterations, trace, .. }) => {
            assert_eq!(iterations, 1);
            assert_eq!(trace.iterations(), 2);
        }
        Ok(_) => {}
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #[test]
    fn operator_is_strongly_monotone(
        caps in prop::collection::vec(64.0..240.0f64, 2..8),
        c in 0.1..1.5f64,
        x in prop::collection::vec(0.0..240.0f64, 8),
        y in prop::collection::vec(0.0..240.0f64, 8),
    ) {
        let n = caps.len();
        let params = consumers(&caps, c).unwrap();
        let prices = vec![20.0; n];
        let op = ViOperator::new(&params, &prices).unwrap();
        let (x, y) = (&x[..n], &y[..n]);
        let fx = op.eval(x).unwrap();
        let fy = op.eval(y).unwrap();
        let inner: f64 = (0..n).map(|k| (fx[k] - fy[k]) * (x[k] - y[k])).sum();
        let dist: f64 = (0..n).map(|k| (x[k] - y[k]).powi(2)).sum();
        prop_assert!(inner >= op.modulus() * dist * (1.0 - 1e-12) - 1e-9);
    }

    #[test]
    fn feasible_projection_lands_in_the_set(raw in prop::collection::vec(-100.0..400.0f64, 1..12), deficiency in 50.0..900.0f64) {
        let caps: Vec<f64> = (0..raw.len()).map(|k| 64.0 + 16.0 * k as f64).collect();
        let params = consumers(&caps, 0.5).unwrap();
        let e = project_feasible(&raw, &params, deficiency).unwrap();
        prop_assert!(e.iter().sum::<f64>() <= deficiency * (1.0 + 1e-12));
        // projecting again changes nothing
        let again = project_feasible(&e, &params, deficiency).unwrap();
        for (a, b) in e.iter().zip(again.iter()) {
            prop_assert!((a - b).abs() <= 1e-9 * deficiency);
        }
    }
}
