//! Oracle and property checks over seeded random instances. The `verify`
//! command and the acceptance suite both run these.
//!
//! Instance `i` of a check seeded with `s` draws from the replicate stream
//! `s ^ i` (see [`crate::experiments`]).

use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::engine::{run_emes_with, EmesResult, EngineConfig, Transport};
use crate::error::{GridError, Result};
use crate::experiments::{
    reference_spec, replicate_consumers, replicate_rng, run_replicate, unit_draw, AggregateStats,
};
use crate::gnep::{project_feasible, sshpm_solve, ve_oracle, SshpmConfig};
use crate::model::{
    consumers, individual_cost, total_utility, utilities, utility, utility_de, utility_dee, utility_dp, BudgetPolicy,
    EcParams, GridConfig, PriceVector, ENERGY_BUDGET_TOLERANCE, PRICE_BUDGET_TOLERANCE,
};
use crate::pricing::{closed_form_prices, numeric_prices, price_product_check, project_prices};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String, started: Instant) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
            elapsed: started.elapsed(),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    low + (high - low) * unit_draw(rng)
}

pub fn below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    rng.next_u64() % bound
}

pub fn random_consumers(rng: &mut ChaCha8Rng, n: usize) -> Result<Vec<EcParams>> {
    let caps: Vec<f64> = (0..n).map(|_| uniform(rng, 64.0, 240.0)).collect();
    consumers(&caps, 0.5)
}

pub fn random_prices(rng: &mut ChaCha8Rng, cfg: &GridConfig) -> Result<PriceVector> {
    let raw: Vec<f64> = (0..cfg.len())
        .map(|_| uniform(rng, cfg.price_min, cfg.price_max))
        .collect();
    PriceVector::new(project_prices(&raw, cfg), cfg)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Hyperplane projection against the multiplier-bisection oracle on
/// `instances` random reference-setup instances with 2 to 10 consumers.
pub fn oracle_equivalence(seed: u64, instances: u64) -> Result<Check> {
    let started = Instant::now();
    let tolerance = 1e-5 * 700.0;
    let mut worst = 0.0_f64;
    for i in 0..instances {
        let mut rng = replicate_rng(seed, i);
        let n = 2 + below(&mut rng, 9) as usize;
        let params = random_consumers(&mut rng, n)?;
        let cfg = GridConfig::standard(n);
        let prices = random_prices(&mut rng, &cfg)?;
        let (solved, _) = sshpm_solve(
            &prices,
            &params,
            cfg.deficiency,
            &SshpmConfig::for_instance(&params, cfg.deficiency),
        )?;
        let oracle = ve_oracle(&prices, &params, cfg.deficiency)?;
        worst = worst.max(max_abs_diff(&solved, &oracle));
    }
    let runtime = started.elapsed();
    Ok(Check::new(
        "oracle equivalence",
        worst <= tolerance && runtime < Duration::from_secs(10),
        format!("{instances} instances, max |sshpm - oracle| = {worst:.3e} kWh (limit {tolerance:e}), {runtime:.2?} (limit 10 s)"),
        started,
    ))
}

/// Largest total utility over the grid `step * k` inside the feasible set.
fn grid_maximum(params: &[EcParams], prices: &[f64], deficiency: f64, step: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn walk(
        n: usize,
        used: f64,
        point: &mut Vec<f64>,
        params: &[EcParams],
        prices: &[f64],
        deficiency: f64,
        step: f64,
        best: &mut f64,
    ) {
        if n == params.len() {
            let value: f64 = point
                .iter()
                .zip(params)
                .zip(prices)
                .map(|((&e, ec), &p)| utility(e, ec.available_energy, p, ec.preference))
                .sum();
            *best = best.max(value);
            return;
        }
        let mut k = 0.0;
        while k * step <= params[n].available_energy && used + k * step <= deficiency {
            point.push(k * step);
            walk(n + 1, used + k * step, point, params, prices, deficiency, step, best);
            point.pop();
            k += 1.0;
        }
    }
    let mut best = f64::NEG_INFINITY;
    walk(0, 0.0, &mut Vec::new(), params, prices, deficiency, step, &mut best);
    best
}

/// Compares the equilibrium's total utility with a grid search at step
/// `E_def / 200` on instances of 1 to 3 consumers. Rounding the equilibrium
/// down to the grid loses at most `step * sum |dU/de_n| + step^2 sum c_n`, so
/// the grid optimum must lie within that of the equilibrium value and never
/// above it.
pub fn social_optimality(seed: u64, instances: u64) -> Result<Check> {
    let started = Instant::now();
    let mut worst_margin = f64::NEG_INFINITY;
    let mut failures = 0;
    for i in 0..instances {
        let mut rng = replicate_rng(seed, i);
        let n = 1 + (i % 3) as usize;
        let params = random_consumers(&mut rng, n)?;
        let cfg = GridConfig::standard(n);
        let prices = random_prices(&mut rng, &cfg)?;
        let (e, _) = sshpm_solve(
            &prices,
            &params,
            cfg.deficiency,
            &SshpmConfig::for_instance(&params, cfg.deficiency),
        )?;
        let value = total_utility(&e, &params, &prices)?;
        let step = cfg.deficiency / 200.0;
        let cell: f64 = e
            .iter()
            .zip(&params)
            .zip(prices.iter())
            .map(|((&x, ec), &p)| {
                step * utility_de(x, ec.available_energy, p, ec.preference).abs() + step * step * ec.preference
            })
            .sum();
        let grid = grid_maximum(&params, &prices, cfg.deficiency, step);
        let above = grid - value;
        if above > 1e-9 * value.abs() || value - grid > cell {
            failures += 1;
        }
        worst_margin = worst_margin.max((value - grid) / cell);
    }
    let runtime = started.elapsed();
    Ok(Check::new(
        "social optimality",
        failures == 0 && runtime < Duration::from_secs(30),
        format!(
            "{instances} instances, {failures} outside one grid cell, largest gap {worst_margin:.3} cells, {runtime:.2?} (limit 30 s)"
        ),
        started,
    ))
}

fn is_clamped(prices: &[f64], cfg: &GridConfig) -> bool {
    prices.iter().any(|&p| p <= cfg.price_min || p >= cfg.price_max)
}

/// Closed-form prices against projected gradient, half of the instances with
/// tight bounds, plus the equal-product property for unclamped `r = 2`.
pub fn pricing_kkt(seed: u64, instances: u64) -> Result<Check> {
    let started = Instant::now();
    let budget = 185.0;
    let mut worst = 0.0_f64;
    let mut worst_product = 0.0_f64;
    let (mut clamped, mut interior) = (0, 0);
    for i in 0..instances {
        let mut rng = replicate_rng(seed, i);
        let n = 2 + below(&mut rng, 9) as usize;
        let share = budget / n as f64;
        let tight = i % 2 == 0;
        let energies: Vec<f64> = (0..n)
            .map(|_| {
                let e = uniform(&mut rng, 1.0, 240.0);
                if tight && below(&mut rng, 10) == 0 {
                    0.0
                } else {
                    e
                }
            })
            .collect();
        let mut cfg = GridConfig::uniform(n, 700.0, budget, 0.0, 2.0, 1.0, 1.0);
        if tight {
            cfg.price_min = share * uniform(&mut rng, 0.3, 0.9);
            cfg.price_max = share + (budget - share) * uniform(&mut rng, 0.05, 0.4);
        }
        let closed = closed_form_prices(&energies, &cfg)?;
        let numeric = numeric_prices(&energies, &cfg, 1e-10 * budget)?;
        worst = worst.max(max_abs_diff(&closed, &numeric));
        if is_clamped(&closed, &cfg) {
            clamped += 1;
        } else {
            interior += 1;
            worst_product = worst_product.max(price_product_check(&closed, &energies, cfg.cost_exponent)?);
        }
    }
    let limit = 1e-5 * budget;
    Ok(Check::new(
        "pricing KKT",
        worst <= limit && worst_product <= 1e-9 && clamped > 0 && interior > 0,
        format!(
            "{instances} instances ({clamped} clamped), max |closed - numeric| = {worst:.3e} (limit {limit:e}); \
             {interior} unclamped, max relative spread of p e = {worst_product:.3e} (limit 1e-9)"
        ),
        started,
    ))
}

/// `values` never decreases by more than rounding.
fn non_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0))
}

/// Among consumers whose price is strictly inside the bounds, a smaller
/// offer earns a strictly higher price.
pub fn reverse_ranked(energies: &[f64], prices: &[f64], cfg: &GridConfig) -> bool {
    let margin = 1e-9 * cfg.effective_budget();
    let free: Vec<usize> = (0..prices.len())
        .filter(|&n| prices[n] > cfg.price_min + margin && prices[n] < cfg.price_max - margin)
        .collect();
    free.iter().all(|&i| {
        free.iter()
            .all(|&j| energies[i] >= energies[j] || prices[i] > prices[j])
    })
}

/// Per-seed results of the alternation at the reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub runs: u64,
    pub n: usize,
    /// Runs whose alternation stopped within 20 rounds.
    pub within_twenty: u64,
    pub fixed_points: u64,
    /// Runs where every consumer's utility is non-decreasing from round to
    /// round, the final re-solve included.
    pub monotone_rounds: u64,
    /// Runs where every consumer's utility is non-decreasing along the
    /// follower iterates of the final re-solve.
    pub monotone_rerun: u64,
    /// Runs where the consumers' total utility is non-decreasing along the
    /// final re-solve.
    pub monotone_rerun_total: u64,
    /// Fixed-point runs whose unclamped prices are in reverse order of the
    /// offers.
    pub discriminating: u64,
    pub emes_verified: u64,
    pub elapsed: Duration,
}

fn rerun_utilities(result: &EmesResult, params: &[EcParams]) -> Result<Vec<Vec<f64>>> {
    result
        .final_trace
        .records
        .iter()
        .map(|rec| utilities(&rec.energies, params, &result.prices))
        .collect()
}

fn per_consumer_monotone(series: &[Vec<f64>]) -> bool {
    let n = series.first().map_or(0, Vec::len);
    (0..n).all(|k| non_decreasing(&series.iter().map(|u| u[k]).collect::<Vec<f64>>()))
}

/// Runs `runs` replicates of the reference setup with `n` consumers.
/// `verify_every` > 0 also checks equilibrium stability on every that-many-th
/// run.
pub fn convergence_study(seed: u64, runs: u64, n: usize, verify_every: u64) -> Result<ConvergenceStudy> {
    let started = Instant::now();
    let spec = reference_spec(seed, runs, vec![n]);
    let point = spec.points()[0];
    let cfg = spec.grid_config(&point);
    let engine = EngineConfig {
        transport: Transport::Direct,
        ..EngineConfig::default()
    };
    let mut study = ConvergenceStudy {
        runs,
        n,
        within_twenty: 0,
        fixed_points: 0,
        monotone_rounds: 0,
        monotone_rerun: 0,
        monotone_rerun_total: 0,
        discriminating: 0,
        emes_verified: 0,
        elapsed: Duration::ZERO,
    };
    for replicate in 0..runs {
        let params = replicate_consumers(&spec, replicate, n)?;
        let (result, _) = run_replicate(&spec, &point, &params, &engine)?;
        study.within_twenty += u64::from(result.outer_iterations <= 20);
        let mut rounds: Vec<Vec<f64>> = result.rounds.iter().map(|r| r.utilities.clone()).collect();
        rounds.push(result.utilities.clone());
        study.monotone_rounds += u64::from(per_consumer_monotone(&rounds));
        let rerun = rerun_utilities(&result, &params)?;
        study.monotone_rerun += u64::from(per_consumer_monotone(&rerun));
        let totals: Vec<f64> = rerun.iter().map(|u| u.iter().sum()).collect();
        study.monotone_rerun_total += u64::from(non_decreasing(&totals));
        if result.is_fixed_point() {
            study.fixed_points += 1;
            study.discriminating += u64::from(reverse_ranked(&result.energies, &result.prices, &cfg));
        }
        if verify_every > 0 && replicate % verify_every == 0 {
            let report = crate::engine::verify_emes(&result.energies, &result.prices, &params, &cfg)?;
            study.emes_verified += u64::from(report.passed());
        }
    }
    study.elapsed = started.elapsed();
    Ok(study)
}

/// Criterion-style verdict on a [`ConvergenceStudy`]: at least 95% of runs
/// within 20 rounds, per-consumer utilities non-decreasing along every final
/// re-solve, and under a minute.
pub fn convergence_check(study: &ConvergenceStudy) -> Check {
    let fast = study.within_twenty as f64 >= 0.95 * study.runs as f64;
    let monotone = study.monotone_rerun == study.runs;
    let quick = study.elapsed < Duration::from_secs(60);
    Check {
        name: "convergence speed".into(),
        passed: fast && monotone && quick,
        detail: format!(
            "N = {}: {}/{} runs within 20 rounds (need 95%); per-consumer utility non-decreasing along the final \
             re-solve in {}/{} runs (total utility in {}/{}), across rounds in {}/{}; {:.2?} (limit 60 s)",
            study.n,
            study.within_twenty,
            study.runs,
            study.monotone_rerun,
            study.runs,
            study.monotone_rerun_total,
            study.runs,
            study.monotone_rounds,
            study.runs,
            study.elapsed
        ),
        elapsed: study.elapsed,
    }
}

pub fn discrimination_check(study: &ConvergenceStudy) -> Check {
    Check {
        name: "discriminate pricing".into(),
        passed: study.fixed_points > 0 && study.discriminating == study.fixed_points,
        detail: format!(
            "{}/{} fixed-point runs have unclamped prices in reverse order of the offers ({} of {} runs reached a fixed point)",
            study.discriminating, study.fixed_points, study.fixed_points, study.runs
        ),
        elapsed: study.elapsed,
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1e-12)
}

/// Finite-difference checks of the utility and cost derivatives at `points`
/// random points. Returns the largest first- and second-order relative errors
/// and whether every sign and convexity property held.
pub fn derivative_checks(seed: u64, points: u64) -> (f64, f64, bool) {
    let mut rng = replicate_rng(seed, u64::MAX);
    let (mut first, mut second, mut signs) = (0.0_f64, 0.0_f64, true);
    for _ in 0..points {
        let cap = uniform(&mut rng, 64.0, 240.0);
        let c = uniform(&mut rng, 0.1, 1.0);
        let p = uniform(&mut rng, 1.0, 185.0);
        let e = uniform(&mut rng, 0.5, cap);
        let h = 1e-3;
        let de = (utility(e + h, cap, p, c) - utility(e - h, cap, p, c)) / (2.0 * h);
        let dp = (utility(e, cap, p + h, c) - utility(e, cap, p - h, c)) / (2.0 * h);
        first = first
            .max(relative_error(utility_de(e, cap, p, c), de))
            .max(relative_error(utility_dp(e), dp));
        let dee = utility(e + 1.0, cap, p, c) - 2.0 * utility(e, cap, p, c) + utility(e - 1.0, cap, p, c);
        second = second.max(relative_error(utility_dee(c), dee));
        signs &= utility_dp(e) > 0.0 && utility_dee(c) == -2.0 * c && utility_dee(c) < 0.0;
        if e < (cap + p) / (2.0 * c) {
            signs &= utility_de(e, cap, p, c) > 0.0;
        }

        let r = uniform(&mut rng, 1.1, 3.0);
        let hp = 1e-4 * p;
        let cost = |q: f64| individual_cost(q, e, r, 1.0, 1.0);
        let gradient = r * e * p.powf(r - 1.0) + 1.0;
        first = first.max(relative_error(gradient, (cost(p + hp) - cost(p - hp)) / (2.0 * hp)));
        let curvature = r * (r - 1.0) * e * p.powf(r - 2.0);
        let hc = 1e-2 * p;
        let numeric = (cost(p + hc) - 2.0 * cost(p) + cost(p - hc)) / (hc * hc);
        second = second.max(relative_error(curvature, numeric));
        signs &= numeric > 0.0;
    }
    (first, second, signs)
}

fn check_energies(e: &[f64], params: &[EcParams], deficiency: f64) -> Result<()> {
    let inside = e
        .iter()
        .zip(params)
        .all(|(&x, ec)| x >= 0.0 && x <= ec.available_energy);
    let total: f64 = e.iter().sum();
    if !inside || total > deficiency * (1.0 + ENERGY_BUDGET_TOLERANCE) {
        return Err(GridError::Invariant(format!("energy vector {e:?} is infeasible")));
    }
    Ok(())
}

fn check_prices(p: &[f64], cfg: &GridConfig) -> Result<()> {
    let inside = p.iter().all(|&x| x >= cfg.price_min && x <= cfg.price_max);
    let budget = cfg.effective_budget();
    let total: f64 = p.iter().sum();
    if !inside || (total - budget).abs() > PRICE_BUDGET_TOLERANCE * budget {
        return Err(GridError::Invariant(format!("price vector {p:?} is infeasible")));
    }
    Ok(())
}

/// A random configuration with `n` consumers; tight price bounds one time in
/// three, floor precedence whenever the floor exceeds the budget.
pub fn random_config(rng: &mut ChaCha8Rng, n: usize) -> GridConfig {
    let budget = uniform(rng, 50.0, 300.0);
    let share = budget / n as f64;
    let mut cfg = GridConfig::uniform(
        n,
        uniform(rng, 200.0, 1000.0),
        budget,
        0.0,
        uniform(rng, 1.2, 3.0),
        1.0,
        1.0,
    )
    .with_policy(BudgetPolicy::FloorPrecedence);
    match below(rng, 3) {
        0 => {
            cfg.price_min = share * uniform(rng, 0.2, 0.95);
            cfg.price_max = share + (budget - share) * uniform(rng, 0.01, 0.5);
        }
        // above the equal share the floor takes precedence
        1 => cfg.price_min = uniform(rng, 0.0, (2.0 * share).min(budget)),
        _ => {}
    }
    cfg
}

/// Runs `operations` randomly chosen producers of energy and price vectors
/// and checks every vector they return against its invariants. Returns a
/// description of every operation that failed.
pub fn fuzz_vectors(seed: u64, operations: u64) -> Vec<String> {
    let mut failures = Vec::new();
    let engine = EngineConfig {
        transport: Transport::Direct,
        ..EngineConfig::default()
    };
    for op in 0..operations {
        let mut rng = replicate_rng(seed, op);
        let kind = below(&mut rng, 8);
        let outcome = (|| -> Result<()> {
            let n = 1 + below(&mut rng, if kind == 7 { 8 } else { 30 }) as usize;
            let params = random_consumers(&mut rng, n)?;
            let cfg = random_config(&mut rng, n);
            let energies: Vec<f64> = params
                .iter()
                .map(|ec| ec.available_energy * unit_draw(&mut rng))
                .collect();
            let solver = SshpmConfig::for_instance(&params, cfg.deficiency);
            match kind {
                0 => {
                    let raw: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -300.0, 300.0)).collect();
                    check_energies(
                        &project_feasible(&raw, &params, cfg.deficiency)?,
                        &params,
                        cfg.deficiency,
                    )
                }
                1 => check_prices(&closed_form_prices(&energies, &cfg)?, &cfg),
                2 => {
                    let raw: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -100.0, 400.0)).collect();
                    check_prices(&PriceVector::new(project_prices(&raw, &cfg), &cfg)?, &cfg)
                }
                3 => {
                    let prices = random_prices(&mut rng, &cfg)?;
                    check_energies(&ve_oracle(&prices, &params, cfg.deficiency)?, &params, cfg.deficiency)
                }
                4 => {
                    let prices = random_prices(&mut rng, &cfg)?;
                    let (e, trace) = sshpm_solve(&prices, &params, cfg.deficiency, &solver)?;
                    for rec in &trace.records {
                        check_energies(&rec.energies, &params, cfg.deficiency)?;
                    }
                    check_energies(&e, &params, cfg.deficiency)
                }
                5 => check_prices(&PriceVector::uniform(&cfg)?, &cfg),
                6 => {
                    let mut cfg = cfg;
                    if cfg.cost_exponent < 2.0 && cfg.price_min == 0.0 {
                        // keep the curvature bounded, as the solver requires
                        cfg.price_min = 0.01 * cfg.effective_budget() / n as f64;
                    }
                    check_prices(&numeric_prices(&energies, &cfg, 1e-9 * cfg.effective_budget())?, &cfg)
                }
                _ => {
                    let result = run_emes_with(&params, &cfg, &solver, &engine)?;
                    for round in &result.rounds {
                        check_prices(&round.prices, &cfg)?;
                        check_prices(&round.best_response, &cfg)?;
                        check_energies(&round.energies, &params, cfg.deficiency)?;
                    }
                    check_prices(&result.prices, &cfg)?;
                    check_energies(&result.energies, &params, cfg.deficiency)
                }
            }
        })();
        if let Err(e) = outcome {
            failures.push(format!("operation {op} (kind {kind}): {e}"));
        }
    }
    failures
}

pub fn hygiene_check(seed: u64, operations: u64) -> Check {
    let started = Instant::now();
    let (first, second, signs) = derivative_checks(seed, 100);
    let failures = fuzz_vectors(seed, operations);
    Check::new(
        "numerical hygiene",
        first <= 1e-6 && second <= 1e-4 && signs && failures.is_empty(),
        format!(
            "max relative error {first:.2e} first order (limit 1e-6), {second:.2e} second order (limit 1e-4), \
             signs and convexity {}; {}/{operations} fuzz operations failed{}",
            if signs { "hold" } else { "violated" },
            failures.len(),
            failures.first().map(|e| format!(" (first: {e})")).unwrap_or_default()
        ),
        started,
    )
}

fn at(stats: &AggregateStats, n: usize) -> Option<&crate::experiments::PointStats> {
    stats.points.iter().find(|s| s.point.n == n)
}

/// Mean over populations of the per-consumer utility ratio game / FIT.
pub fn fit_utility_ratio(stats: &AggregateStats) -> Check {
    let started = Instant::now();
    let ratios: Vec<(usize, f64)> = stats
        .points
        .iter()
        .map(|s| (s.point.n, s.utility.mean / s.fit_utility.mean))
        .collect();
    let mean = ratios.iter().map(|r| r.1).sum::<f64>() / ratios.len() as f64;
    let listed: Vec<String> = ratios.iter().map(|(n, r)| format!("N={n}: {r:.3}")).collect();
    Check::new(
        "FIT utility ratio",
        (1.2..=1.8).contains(&mean),
        format!("mean ratio {mean:.3} (need [1.2, 1.8]); {}", listed.join(", ")),
        started,
    )
}

/// Cost at 15 consumers below cost at 5, and cost at 25 above cost at 20, by
/// more than two pooled standard errors.
pub fn cost_versus_population(stats: &AggregateStats) -> Check {
    let started = Instant::now();
    let gap = |lower: usize, upper: usize| -> Option<(f64, f64)> {
        let (lo, hi) = (at(stats, lower)?, at(stats, upper)?);
        let se = lo
            .cost
            .standard_error(lo.replicates)
            .hypot(hi.cost.standard_error(hi.replicates));
        Some((hi.cost.mean - lo.cost.mean, se))
    };
    match (gap(5, 15), gap(20, 25)) {
        (Some((drop, se_a)), Some((rise, se_b))) => Check::new(
            "cost versus N",
            -drop > 2.0 * se_a && rise > 2.0 * se_b,
            format!(
                "cost(15) - cost(5) = {drop:.1} (need < -{:.1}); cost(25) - cost(20) = {rise:.1} (need > {:.1})",
                2.0 * se_a,
                2.0 * se_b
            ),
            started,
        ),
        _ => Check::new("cost versus N", false, "needs N = 5, 15, 20 and 25".into(), started),
    }
}

/// Cost non-increasing in `p_max` for every `P`, flat (< 0.1%) over the last
/// five sweep points, and ordered by `P` at every point.
pub fn cost_versus_price_cap(stats: &AggregateStats) -> Check {
    let started = Instant::now();
    let mut budgets: Vec<f64> = stats.points.iter().map(|s| s.point.p).collect();
    budgets.sort_by(f64::total_cmp);
    budgets.dedup();
    let curves: Vec<Vec<f64>> = budgets
        .iter()
        .map(|&p| {
            stats
                .points
                .iter()
                .filter(|s| s.point.p == p)
                .map(|s| s.cost.mean)
                .collect()
        })
        .collect();
    let mut notes = Vec::new();
    let mut monotone = true;
    let mut flat = true;
    for (p, curve) in budgets.iter().zip(&curves) {
        let worst_rise = curve
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let tail = &curve[curve.len().saturating_sub(5)..];
        let (lo, hi) = tail
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
        monotone &= worst_rise <= 1e-12;
        flat &= (hi - lo) / lo < 1e-3;
        notes.push(format!(
            "P={p}: largest rise {:.3}%, tail spread {:.4}%",
            100.0 * worst_rise.max(0.0),
            100.0 * (hi - lo) / lo
        ));
    }
    let ordered = curves.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a < b));
    Check::new(
        "cost versus p_max",
        monotone && flat && ordered && !curves.is_empty(),
        format!(
            "non-increasing {monotone}, flat tail {flat}, ordered by P {ordered}; {}",
            notes.join("; ")
        ),
        started,
    )
}

/// Game cost below the equal-budget FIT cost at every `P`, with a gap that
/// does not shrink as `P` grows.
pub fn fit_cost_comparison(stats: &AggregateStats) -> Check {
    let started = Instant::now();
    let mut points: Vec<_> = stats.points.iter().collect();
    points.sort_by(|a, b| a.point.p.total_cmp(&b.point.p));
    let gaps: Vec<f64> = points
        .iter()
        .map(|s| s.fit_cost_equal_budget.mean - s.cost.mean)
        .collect();
    let cheaper = gaps.iter().all(|&g| g > 0.0);
    let widening = gaps.windows(2).all(|w| w[1] >= w[0]);
    let listed: Vec<String> = points
        .iter()
        .zip(&gaps)
        .map(|(s, g)| format!("P={}: {g:.1}", s.point.p))
        .collect();
    Check::new(
        "FIT cost comparison",
        cheaper && widening && !gaps.is_empty(),
        format!(
            "cheaper at every P {cheaper}, gap non-decreasing {widening}; gaps {}",
            listed.join(", ")
        ),
        started,
    )
}
