//! Seeded Monte Carlo studies over random consumer populations.
//!
//! Replicate `i` of a scenario with seed `s` draws from a ChaCha8 stream seeded
//! with `s ^ i` (`rand_chacha::ChaCha8Rng::seed_from_u64`). A uniform variate is
//! `(next_u64 >> 11) * 2^-53`, and capacities are `low + (high - low) * u`, drawn
//! in consumer order. Every sweep point replays the same streams, so points
//! are compared on common random numbers.

pub mod fit;
pub mod output;
pub mod scenario;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::engine::{run_emes_with, EmesResult, EngineConfig, Transport};
use crate::error::{GridError, Result};
use crate::gnep::SshpmConfig;
use crate::model::{consumers, EcParams};
pub use fit::{fit_baseline, FitDispatch, FitOutcome};
pub use scenario::{figure_scenarios, reference_spec, PMaxRule, ScenarioSpec, SweepPoint, UniformRange, Values};

pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    seed ^ replicate
}

pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replicate_seed(seed, replicate))
}

/// Uniform on `[0, 1)` with 53 random bits.
pub fn unit_draw<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn draw_capacities<R: RngCore>(rng: &mut R, n: usize, range: &UniformRange) -> Vec<f64> {
    (0..n)
        .map(|_| range.low + (range.high - range.low) * unit_draw(rng))
        .collect()
}

/// Consumers of replicate `replicate` at a point with `n` of them.
pub fn replicate_consumers(spec: &ScenarioSpec, replicate: u64, n: usize) -> Result<Vec<EcParams>> {
    let mut rng = replicate_rng(spec.seed, replicate);
    consumers(&draw_capacities(&mut rng, n, &spec.e_n), spec.c_n)
}

/// Sum by recursive halving; the result depends only on the order of
/// `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

/// Sample mean and standard deviation (`n - 1` denominator, 0 for one sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = pairwise_sum(values) / n as f64;
        let std = if n > 1 {
            let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
            (pairwise_sum(&squares) / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }

    /// Standard error of the mean over `n` samples.
    pub fn standard_error(&self, n: u64) -> f64 {
        self.std / (n as f64).sqrt()
    }
}

/// Everything recorded from one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    /// Mean utility per consumer at the equilibrium.
    pub utility: f64,
    pub cost: f64,
    pub outer_iterations: usize,
    /// `max p_n - min p_n`.
    pub price_spread: f64,
    pub fixed_point: bool,
    /// Mean utility per consumer under the FIT tariff.
    pub fit_utility: f64,
    /// Station cost under the FIT tariff.
    pub fit_cost: f64,
    /// Station cost when the FIT pays everyone `P/N`, the same total unit
    /// price as the game.
    pub fit_cost_equal_budget: f64,
    pub fit_shortfall: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub point: SweepPoint,
    pub replicates: u64,
    pub utility: Summary,
    pub cost: Summary,
    pub outer_iterations: Summary,
    pub price_spread: Summary,
    pub fit_utility: Summary,
    pub fit_cost: Summary,
    pub fit_cost_equal_budget: Summary,
    /// Replicates whose final prices are an exact best response.
    pub fixed_points: u64,
    pub fit_shortfalls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub points: Vec<PointStats>,
}

fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Runs the game and the FIT baseline on one population.
pub fn run_replicate(
    spec: &ScenarioSpec,
    point: &SweepPoint,
    params: &[EcParams],
    engine: &EngineConfig,
) -> Result<(EmesResult, ReplicateOutcome)> {
    let cfg = spec.grid_config(point);
    let solver = SshpmConfig::for_instance(params, point.e_def);
    let result = run_emes_with(params, &cfg, &solver, engine)?;
    let fit = fit_baseline(params, &cfg, spec.fit_tariff, spec.fit_dispatch)?;
    let equal = fit_baseline(params, &cfg, cfg.effective_budget() / point.n as f64, spec.fit_dispatch)?;
    let (lowest, highest) = result
        .prices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });
    let outcome = ReplicateOutcome {
        utility: mean(&result.utilities),
        cost: result.total_cost,
        outer_iterations: result.outer_iterations,
        price_spread: highest - lowest,
        fixed_point: result.is_fixed_point(),
        fit_utility: mean(&fit.utilities),
        fit_cost: fit.cost,
        fit_cost_equal_budget: equal.cost,
        fit_shortfall: fit.shortfall,
    };
    Ok((result, outcome))
}

/// Monte Carlo over every sweep point with in-process follower solves, which
/// give the same numbers as the message protocol without its bookkeeping.
pub fn monte_carlo(spec: &ScenarioSpec) -> Result<AggregateStats> {
    let engine = EngineConfig {
        transport: Transport::Direct,
        ..EngineConfig::default()
    };
    monte_carlo_with(spec, &engine, |_, _| {})
}

/// [`monte_carlo`] with an explicit engine configuration; `progress` is called
/// after each finished point with its index and the number of points.
pub fn monte_carlo_with(
    spec: &ScenarioSpec,
    engine: &EngineConfig,
    mut progress: impl FnMut(usize, usize),
) -> Result<AggregateStats> {
    spec.validate()?;
    let points = spec.points();
    let mut stats = Vec::with_capacity(points.len());
    for point in &points {
        let mut outcomes = Vec::with_capacity(spec.replicates as usize);
        for replicate in 0..spec.replicates {
            let wrap = |source: GridError| GridError::Replicate {
                point: point.index,
                replicate,
                stream_seed: replicate_seed(spec.seed, replicate),
                source: Box::new(source),
            };
            let params = replicate_consumers(spec, replicate, point.n).map_err(wrap)?;
            let (_, outcome) = run_replicate(spec, point, &params, engine).map_err(wrap)?;
            outcomes.push(outcome);
        }
        stats.push(summarise(*point, &outcomes));
        progress(point.index + 1, points.len());
    }
    Ok(AggregateStats { points: stats })
}

/// Overrides applied to every built-in figure scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FigureOptions {
    pub seed: Option<u64>,
    /// Replicates for the three averaged figures; the convergence figure is
    /// always a single run.
    pub replicates: Option<u64>,
}

/// Runs the four figure studies. `progress` receives a label, the finished
/// point count and the total for each averaged study.
pub fn compute_figures(
    options: FigureOptions,
    mut progress: impl FnMut(&str, usize, usize),
) -> Result<output::FigureData> {
    let mut specs = figure_scenarios();
    for (k, spec) in specs.iter_mut().enumerate() {
        if let Some(seed) = options.seed {
            spec.seed = seed;
        }
        if let (Some(r), true) = (options.replicates, k > 0) {
            spec.replicates = r;
        }
    }
    let [convergence, population, threshold, comparison] = specs;
    let point = convergence.points()[0];
    let params = replicate_consumers(&convergence, 0, point.n)?;
    let (result, _) = run_replicate(&convergence, &point, &params, &EngineConfig::default())?;
    let engine = EngineConfig {
        transport: Transport::Direct,
        ..EngineConfig::default()
    };
    let mut study =
        |label: &str, spec: &ScenarioSpec| monte_carlo_with(spec, &engine, |done, total| progress(label, done, total));
    Ok(output::FigureData {
        convergence_params: params,
        convergence: result,
        population: study("fig2", &population)?,
        threshold: study("fig3", &threshold)?,
        comparison: study("fig4", &comparison)?,
    })
}

fn summarise(point: SweepPoint, outcomes: &[ReplicateOutcome]) -> PointStats {
    let column = |f: fn(&ReplicateOutcome) -> f64| Summary::of(&outcomes.iter().map(f).collect::<Vec<f64>>());
    PointStats {
        point,
        replicates: outcomes.len() as u64,
        utility: column(|o| o.utility),
        cost: column(|o| o.cost),
        outer_iterations: column(|o| o.outer_iterations as f64),
        price_spread: column(|o| o.price_spread),
        fit_utility: column(|o| o.fit_utility),
        fit_cost: column(|o| o.fit_cost),
        fit_cost_equal_budget: column(|o| o.fit_cost_equal_budget),
        fixed_points: outcomes.iter().filter(|o| o.fixed_point).count() as u64,
        fit_shortfalls: outcomes.iter().filter(|o| o.fit_shortfall).count() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_one_sample() {
        let s = Summary::of(&[3.5]);
        assert_eq!((s.mean, s.std), (3.5, 0.0));
        let s = Summary::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pairwise_sum_matches_plain_sum_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }

    #[test]
    fn draws_follow_the_documented_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(42 ^ 3);
        let expected = 64.0 + 176.0 * ((rng.next_u64() >> 11) as f64 / 9_007_199_254_740_992.0);
        let caps = draw_capacities(&mut replicate_rng(42, 3), 2, &UniformRange { low: 64.0, high: 240.0 });
        assert_eq!(caps[0], expected);
        assert!(caps.iter().all(|&c| (64.0..240.0).contains(&c)));
    }
}
