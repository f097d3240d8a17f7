use gridtrade::checks::reverse_ranked;
use gridtrade::engine::protocol::{gnep_mediated, Bus, Message, Party};
use gridtrade::engine::trace::{write_trace, TRACE_HEADER};
use gridtrade::engine::{run_emes, run_emes_with, verify_emes, EmesResult, EngineConfig, Transport};
use gridtrade::experiments::{reference_spec, replicate_consumers};
use gridtrade::gnep::{slack_vector, sshpm_solve, SshpmConfig};
use gridtrade::model::{consumers, total_cost, utilities, BudgetPolicy, EcParams, GridConfig, PriceVector};
use gridtrade::pricing::optimal_prices;
use gridtrade::GridError;

fn instance(seed: u64, n: usize) -> (Vec<EcParams>, GridConfig, SshpmConfig) {
    let spec = reference_spec(seed, 1, vec![n]);
    let params = replicate_consumers(&spec, 0, n).unwrap();
    let cfg = GridConfig::standard(n).with_policy(BudgetPolicy::FloorPrecedence);
    let solver = SshpmConfig::for_instance(&params, cfg.deficiency);
    (params, cfg, solver)
}

fn direct() -> EngineConfig {
    EngineConfig {
        transport: Transport::Direct,
        ..EngineConfig::default()
    }
}

#[test]
fn mediated_and_direct_runs_are_bit_identical() {
    for seed in 0..50 {
        let n = 2 + (seed % 9) as usize;
        let (params, cfg, solver) = instance(seed, n);
        let mediated = run_emes(&params, &cfg, &solver).unwrap();
        let local = run_emes_with(&params, &cfg, &solver, &direct()).unwrap();
        assert_eq!(mediated.prices, local.prices, "seed {seed}");
        assert_eq!(mediated.energies, local.energies, "seed {seed}");
        assert_eq!(mediated.rounds, local.rounds, "seed {seed}");
        assert!(mediated.message_count > 0);
        assert_eq!(local.message_count, 0);
    }
}

#[test]
fn mediated_solve_matches_sshpm_and_counts_messages() {
    for seed in 0..50 {
        let n = 2 + (seed % 9) as usize;
        let (params, cfg, solver) = instance(seed, n);
        let raw: Vec<f64> = (0..n)
            .map(|k| 10.0 + 7.0 * ((seed as usize + 3 * k) % 11) as f64)
            .collect();
        let prices = PriceVector::new(gridtrade::pricing::project_prices(&raw, &cfg), &cfg).unwrap();
        let (expected, expected_trace) = sshpm_solve(&prices, &params, cfg.deficiency, &solver).unwrap();

        let mut bus = Bus::new(&params).unwrap();
        bus.announce(cfg.deficiency, cfg.price_budget).unwrap();
        assert_eq!(bus.message_count(), 1 + n);
        let (energies, trace) = gnep_mediated(&prices, &mut bus, &params, cfg.deficiency, &solver).unwrap();
        assert_eq!(energies, expected);
        assert_eq!(trace, expected_trace);

        // N price updates, a commit broadcast with 2N replies per record, a
        // probe broadcast with N replies per line-search trial, one Converged
        let commits = trace.iterations();
        let rest = bus.message_count() - (1 + n) - n - commits * (1 + 2 * n) - 1;
        assert_eq!(rest % (n + 1), 0, "seed {seed}");
        assert!(rest / (n + 1) >= commits - 1, "seed {seed}");
        assert!(bus.privacy_audit());
    }
}

#[test]
fn consumers_only_hear_from_the_station_about_themselves() {
    let (params, cfg, solver) = instance(3, 6);
    let mut bus = Bus::new(&params).unwrap();
    bus.announce(cfg.deficiency, cfg.price_budget).unwrap();
    let prices = PriceVector::uniform(&cfg).unwrap();
    gnep_mediated(&prices, &mut bus, &params, cfg.deficiency, &solver).unwrap();
    for agent in bus.agents() {
        assert!(!agent.inbox().is_empty());
        for envelope in agent.inbox() {
            assert_eq!(envelope.from, Party::Station);
            assert!(matches!(envelope.to, Party::Broadcast) || envelope.to == Party::Consumer(agent.id()));
            match envelope.message {
                Message::PriceUpdate { ec_id, .. }
                | Message::Offer { ec_id, .. }
                | Message::SlackReport { ec_id, .. } => {
                    assert_eq!(ec_id, agent.id())
                }
                _ => {}
            }
        }
    }
    assert!(bus.privacy_audit());
    bus.clear_logs();
    assert!(bus.agents().iter().all(|a| a.inbox().is_empty()));
}

#[test]
fn bus_rejects_unordered_ids() {
    let mut params = consumers(&[100.0, 120.0], 0.5).unwrap();
    params.swap(0, 1);
    assert!(matches!(Bus::new(&params), Err(GridError::InvalidParameter(_))));
}

#[test]
fn single_consumer_gets_the_whole_budget() {
    for (cap, c) in [(200.0, 0.5), (800.0, 0.5), (200.0, 2.0)] {
        let params = consumers(&[cap], c).unwrap();
        let cfg = GridConfig::standard(1);
        let solver = SshpmConfig::for_instance(&params, cfg.deficiency);
        let result = run_emes(&params, &cfg, &solver).unwrap();
        assert_eq!(result.prices[0], 185.0);
        let expected = cap.min((cap + 185.0) / (2.0 * c)).min(700.0);
        assert!(
            (result.energies[0] - expected).abs() <= 1e-6 * 700.0,
            "{cap} {c}: {:?}",
            result.energies
        );
        assert!(result.is_fixed_point());
    }
}

#[test]
fn symmetric_consumers_share_equally() {
    let params = consumers(&[150.0; 4], 0.5).unwrap();
    let cfg = GridConfig::standard(4);
    let result = run_emes(&params, &cfg, &SshpmConfig::for_instance(&params, 700.0)).unwrap();
    for n in 0..4 {
        assert!((result.prices[n] - 185.0 / 4.0).abs() < 1e-9);
        assert!((result.energies[n] - result.energies[0]).abs() < 1e-9);
    }
    let report = verify_emes(&result.energies, &result.prices, &params, &cfg).unwrap();
    assert!(report.passed(), "{report:?}");

    let mut shifted = result.energies.to_vec();
    shifted[0] -= 10.0;
    let report = verify_emes(&shifted, &result.prices, &params, &cfg).unwrap();
    assert!(!report.follower_ok);
    assert!(!report.violations.is_empty());

    let mut skewed = result.prices.to_vec();
    skewed[0] += 5.0;
    skewed[1] -= 5.0;
    let report = verify_emes(&result.energies, &skewed, &params, &cfg).unwrap();
    assert!(!report.leader_ok);
}

#[test]
fn equilibria_are_stable_on_reference_instances() {
    for seed in 0..100 {
        let (params, cfg, solver) = instance(seed, 5);
        let result = run_emes_with(&params, &cfg, &solver, &direct()).unwrap();
        assert!(result.is_fixed_point(), "seed {seed}");
        let report = verify_emes(&result.energies, &result.prices, &params, &cfg).unwrap();
        assert!(report.passed(), "seed {seed}: {:?}", report.violations);
        assert!(reverse_ranked(&result.energies, &result.prices, &cfg), "seed {seed}");
    }
}

#[test]
fn runs_are_deterministic() {
    let (params, cfg, solver) = instance(11, 8);
    let a = run_emes(&params, &cfg, &solver).unwrap();
    let b = run_emes(&params, &cfg, &solver).unwrap();
    assert_eq!(a, b);
}

#[test]
fn equal_prices_reward_capacity() {
    for seed in 0..20 {
        let (params, cfg, solver) = instance(seed, 10);
        let prices = PriceVector::uniform(&cfg).unwrap();
        let (energies, _) = sshpm_solve(&prices, &params, cfg.deficiency, &solver).unwrap();
        let mut order: Vec<usize> = (0..params.len()).collect();
        order.sort_by(|&a, &b| params[a].available_energy.total_cmp(&params[b].available_energy));
        for w in order.windows(2) {
            assert!(energies[w[1]] >= energies[w[0]] - 1e-6, "seed {seed}");
        }
    }
}

fn check_bookkeeping(result: &EmesResult, params: &[EcParams], cfg: &GridConfig) {
    assert_eq!(result.outer_iterations, result.rounds.len());
    assert_eq!(
        result.utilities,
        utilities(&result.energies, params, &result.prices).unwrap()
    );
    assert_eq!(
        result.total_cost,
        total_cost(&result.prices, &result.energies, cfg).unwrap()
    );
    let answer = optimal_prices(&result.energies, cfg).unwrap();
    let residual = answer
        .iter()
        .zip(result.prices.iter())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert_eq!(result.fixed_point_residual, residual);
    assert_eq!(result.price_tolerance, 1e-6 * cfg.effective_budget());
    let first = &result.rounds[0];
    assert_eq!(first.relaxation, 1.0);
    assert_eq!(first.prices, PriceVector::uniform(cfg).unwrap().into_inner());
    for (k, round) in result.rounds.iter().enumerate() {
        assert_eq!(round.iteration, k);
        assert_eq!(
            round.slacks,
            slack_vector(&round.energies, params, &round.prices).unwrap().0
        );
        assert_eq!(
            round.best_response,
            optimal_prices(&round.energies, cfg).unwrap().into_inner()
        );
    }
    // the last announced prices moved by at most the tolerance
    let last = result.rounds.last().unwrap();
    let change = last
        .prices
        .iter()
        .zip(result.prices.iter())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(change <= result.price_tolerance);
}

#[test]
fn result_fields_can_be_recomputed() {
    for (seed, n) in [(1, 5), (2, 10), (3, 15), (4, 20), (5, 25)] {
        let (params, cfg, solver) = instance(seed, n);
        let result = run_emes_with(&params, &cfg, &solver, &direct()).unwrap();
        check_bookkeeping(&result, &params, &cfg);
    }
}

#[test]
fn trace_has_one_row_per_round_and_consumer() {
    let (params, cfg, solver) = instance(7, 5);
    let result = run_emes(&params, &cfg, &solver).unwrap();
    let mut out = Vec::new();
    write_trace(&result, &params, &mut out).unwrap();
    let mut reader = csv::Reader::from_reader(out.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, TRACE_HEADER);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), (result.rounds.len() + 1) * params.len());
    let last = &rows[rows.len() - 1];
    assert_eq!(last[0].parse::<usize>().unwrap(), result.rounds.len());
    assert_eq!(last[1].parse::<usize>().unwrap(), params[4].id);
    assert_eq!(last[2].parse::<f64>().unwrap(), result.energies[4]);
    assert_eq!(last[3].parse::<f64>().unwrap(), result.prices[4]);
    assert_eq!(last[5].parse::<f64>().unwrap(), result.utilities[4]);
    assert_eq!(last[6].parse::<f64>().unwrap(), result.total_cost);
}

#[test]
fn round_cap_reports_the_price_history() {
    let (params, cfg, solver) = instance(0, 10);
    let engine = EngineConfig {
        max_rounds: 1,
        ..direct()
    };
    match run_emes_with(&params, &cfg, &solver, &engine) {
        Err(GridError::FixedPoint {
            iterations,
            price_history,
            ..
        }) => {
            assert_eq!(iterations, 1);
            assert_eq!(price_history.len(), 1);
        }
        other => panic!("expected a fixed-point error, got {other:?}"),
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let (params, cfg, solver) = instance(0, 5);
    assert!(matches!(
        run_emes(&params[..4], &cfg, &solver),
        Err(GridError::Dimension { expected: 5, found: 4 })
    ));
    let strict = GridConfig::standard(25);
    let many = consumers(&[100.0; 25], 0.5).unwrap();
    assert!(matches!(
        run_emes(&many, &strict, &solver),
        Err(GridError::InfeasibleBudget { .. })
    ));
    let engine = EngineConfig {
        relaxation: 0.0,
        ..EngineConfig::default()
    };
    assert!(run_emes_with(&params, &cfg, &solver, &engine).is_err());
}
