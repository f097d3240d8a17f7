//! Leader/follower alternation between the station and the consumers.
//!
//! Each round the consumers settle on a variational equilibrium at the
//! current prices (through the message protocol in [`protocol`]) and the
//! station answers with its cost-minimising prices for those offers. Rounds
//! repeat until the station's answer reproduces the prices it announced; the
//! consumers then re-solve at the final prices.
//!
//! The first round applies the station's answer as is. Later rounds move only
//! part of the way towards it: the best-response map oscillates around its
//! fixed point, and plain alternation can cycle. The step fraction is halved
//! whenever the best-response residual fails to improve on the best residual
//! seen so far and regrown when it does.

pub mod protocol;
pub mod trace;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};
use crate::gnep::{interior_slack_spread, slack_vector, solve_at, GnepTrace, SshpmConfig};
use crate::model::{total_cost, total_utility, utilities, EcParams, EnergyVector, GridConfig, PriceVector};
use crate::pricing::optimal_prices;
use protocol::{gnep_mediated, Bus};

/// How follower solves are carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// Through the message bus, with per-consumer agents.
    #[default]
    Mediated,
    /// In-process; bit-identical results, no message accounting.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Cap on leader/follower rounds.
    pub max_rounds: usize,
    /// Rounds stop once the announced prices move by at most
    /// `price_tolerance * P` in the infinity norm.
    pub price_tolerance: f64,
    /// Largest step fraction from the second round on; 1 is plain alternation.
    pub relaxation: f64,
    /// Lower limit for the adaptive step fraction.
    pub min_relaxation: f64,
    pub transport: Transport,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_rounds: 100,
            price_tolerance: 1e-6,
            relaxation: 0.7,
            min_relaxation: 1e-12,
            transport: Transport::Mediated,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0
            || !(self.price_tolerance > 0.0)
            || !(self.relaxation > 0.0 && self.relaxation <= 1.0)
            || !(self.min_relaxation > 0.0 && self.min_relaxation <= self.relaxation)
        {
            return Err(GridError::InvalidParameter(format!(
                "invalid engine configuration: {self:?}"
            )));
        }
        Ok(())
    }
}

/// One leader/follower round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub iteration: usize,
    /// Prices the consumers played against.
    pub prices: Vec<f64>,
    /// Their equilibrium offers.
    pub energies: Vec<f64>,
    pub slacks: Vec<f64>,
    pub utilities: Vec<f64>,
    /// Station cost at `(prices, energies)`.
    pub cost: f64,
    /// The station's cost-minimising answer to `energies`.
    pub best_response: Vec<f64>,
    /// Step fraction that produced `prices` (1 for the opening round).
    pub relaxation: f64,
    pub gnep: GnepTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmesResult {
    pub energies: EnergyVector,
    pub prices: PriceVector,
    pub utilities: Vec<f64>,
    pub total_cost: f64,
    /// Leader/follower rounds until the price fixed point, excluding the
    /// final re-solve.
    pub outer_iterations: usize,
    pub rounds: Vec<Round>,
    /// Follower solve at the final prices.
    pub final_trace: GnepTrace,
    /// `|p*(e*) - p*|_inf`: how far the station's best response to the final
    /// offers is from the final prices.
    pub fixed_point_residual: f64,
    /// Absolute price tolerance the run was held to.
    pub price_tolerance: f64,
    /// Largest deviation of an interior consumer's slack from the mean.
    pub slack_spread: f64,
    /// Messages exchanged; zero for [`Transport::Direct`].
    pub message_count: usize,
}

impl EmesResult {
    /// Whether the final prices are the station's best response to the final
    /// offers. Some instances have none: a consumer on the edge of supplying
    /// is priced high when idle and low when active, and the alternation
    /// settles on that edge instead.
    pub fn is_fixed_point(&self) -> bool {
        self.fixed_point_residual <= self.price_tolerance
    }
}

struct Followers<'a> {
    params: &'a [EcParams],
    deficiency: f64,
    solver: &'a SshpmConfig,
    bus: Option<Bus>,
}

impl Followers<'_> {
    fn solve(&mut self, prices: &[f64]) -> Result<(EnergyVector, GnepTrace)> {
        match &mut self.bus {
            Some(bus) => gnep_mediated(prices, bus, self.params, self.deficiency, self.solver),
            None => solve_at(prices, self.params, self.deficiency, self.solver),
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs the alternation with [`EngineConfig::default`].
pub fn run_emes(params: &[EcParams], cfg: &GridConfig, solver: &SshpmConfig) -> Result<EmesResult> {
    run_emes_with(params, cfg, solver, &EngineConfig::default())
}

pub fn run_emes_with(
    params: &[EcParams],
    cfg: &GridConfig,
    solver: &SshpmConfig,
    engine: &EngineConfig,
) -> Result<EmesResult> {
    cfg.validate()?;
    engine.validate()?;
    solver.validate()?;
    if params.len() != cfg.len() {
        return Err(GridError::Dimension {
            expected: cfg.len(),
            found: params.len(),
        });
    }
    for p in params {
        p.validate()?;
    }
    let bus = match engine.transport {
        Transport::Mediated => {
            let mut bus = Bus::new(params)?;
            bus.announce(cfg.deficiency, cfg.price_budget)?;
            Some(bus)
        }
        Transport::Direct => None,
    };
    let mut followers = Followers {
        params,
        deficiency: cfg.deficiency,
        solver,
        bus,
    };
    let tolerance = engine.price_tolerance * cfg.effective_budget();

    let mut prices = PriceVector::uniform(cfg)?.into_inner();
    let mut relaxation = 1.0;
    let mut step = engine.relaxation;
    let mut rounds: Vec<Round> = Vec::new();
    let mut best_residual = f64::INFINITY;
    loop {
        let (energies, gnep) = followers.solve(&prices)?;
        let answer = optimal_prices(&energies, cfg)?.into_inner();
        let residual = max_abs_diff(&answer, &prices);
        if !rounds.is_empty() {
            // shrink the step unless the residual improves on the best so far
            if residual > (1.0 - 0.5 * step) * best_residual {
                step = (0.5 * step).max(engine.min_relaxation);
            } else {
                step = (1.5 * step).min(engine.relaxation);
            }
        }
        let next_relaxation = if rounds.is_empty() { 1.0 } else { step };
        let next: Vec<f64> = prices
            .iter()
            .zip(&answer)
            .map(|(&p, &q)| (p + next_relaxation * (q - p)).clamp(cfg.price_min, cfg.price_max))
            .collect();
        let change = max_abs_diff(&next, &prices);
        rounds.push(Round {
            iteration: rounds.len(),
            utilities: utilities(&energies, params, &prices)?,
            cost: total_cost(&prices, &energies, cfg)?,
            slacks: slack_vector(&energies, params, &prices)?.0,
            prices,
            energies: energies.into_inner(),
            best_response: answer,
            relaxation,
            gnep,
        });
        prices = next;
        relaxation = next_relaxation;
        best_residual = best_residual.min(residual);
        if change <= tolerance {
            break;
        }
        if rounds.len() >= engine.max_rounds {
            return Err(GridError::FixedPoint {
                iterations: rounds.len(),
                residual: change,
                price_history: rounds.into_iter().map(|r| r.prices).collect(),
            });
        }
    }

    let outer_iterations = rounds.len();
    let prices = PriceVector::new(prices, cfg)?;
    let (energies, final_trace) = followers.solve(&prices)?;
    let fixed_point_residual = max_abs_diff(&optimal_prices(&energies, cfg)?, &prices);
    let slacks = slack_vector(&energies, params, &prices)?;
    let capacities: Vec<f64> = params.iter().map(|p| p.available_energy).collect();
    let (slack_spread, _) = interior_slack_spread(&energies, &slacks, &capacities);
    let message_count = match &mut followers.bus {
        Some(bus) => {
            bus.send(protocol::Party::Broadcast, protocol::Message::Converged)?;
            bus.message_count()
        }
        None => 0,
    };
    Ok(EmesResult {
        utilities: utilities(&energies, params, &prices)?,
        total_cost: total_cost(&prices, &energies, cfg)?,
        energies,
        prices,
        outer_iterations,
        rounds,
        final_trace,
        fixed_point_residual,
        price_tolerance: tolerance,
        slack_spread,
        message_count,
    })
}

/// Outcome of checking the two equilibrium inequalities at a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmesReport {
    /// Largest relative gain in total utility from a unilateral deviation.
    pub follower_gain: f64,
    /// Largest relative cost reduction along a feasible price direction.
    pub leader_drop: f64,
    pub follower_ok: bool,
    pub leader_ok: bool,
    pub violations: Vec<String>,
}

impl EmesReport {
    pub fn passed(&self) -> bool {
        self.follower_ok && self.leader_ok
    }
}

const STABILITY_TOLERANCE: f64 = 1e-6;
const DEVIATION_GRID: usize = 101;
const PRICE_DIRECTIONS: usize = 100;
const DIRECTION_SEED: u64 = 0x6d65_7365;

/// Checks `(e*, p*)` against unilateral energy deviations on a 101-point grid
/// per consumer and against 100 random feasible price perturbations.
pub fn verify_emes(energies: &[f64], prices: &[f64], params: &[EcParams], cfg: &GridConfig) -> Result<EmesReport> {
    let mut violations = Vec::new();
    let base_utility = total_utility(energies, params, prices)?;
    let scale = base_utility.abs().max(f64::MIN_POSITIVE);
    let total: f64 = energies.iter().sum();
    let mut follower_gain = 0.0_f64;
    let mut trial = energies.to_vec();
    for (n, ec) in params.iter().enumerate() {
        let others = total - energies[n];
        let upper = ec.available_energy.min(cfg.deficiency - others).max(0.0);
        for k in 0..DEVIATION_GRID {
            trial[n] = upper * k as f64 / (DEVIATION_GRID - 1) as f64;
            let gain = (total_utility(&trial, params, prices)? - base_utility) / scale;
            if gain > follower_gain {
                follower_gain = gain;
            }
            if gain > STABILITY_TOLERANCE {
                violations.push(format!("consumer {} gains {gain:e} at e = {}", ec.id, trial[n]));
            }
        }
        trial[n] = energies[n];
    }

    let base_cost = total_cost(prices, energies, cfg)?;
    let cost_scale = base_cost.abs().max(f64::MIN_POSITIVE);
    let mut leader_drop = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(DIRECTION_SEED);
    let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let n = prices.len();
    for k in 0..PRICE_DIRECTIONS {
        let Some(direction) = feasible_direction(prices, cfg, (0..n).map(|_| 2.0 * unit() - 1.0).collect()) else {
            continue;
        };
        let reach = max_step(prices, &direction, cfg).min(0.05 * cfg.effective_budget());
        let t = reach * (0.01 + 0.99 * unit());
        let moved: Vec<f64> = prices
            .iter()
            .zip(&direction)
            .map(|(&p, &d)| (p + t * d).clamp(cfg.price_min, cfg.price_max))
            .collect();
        let drop = (base_cost - total_cost(&moved, energies, cfg)?) / cost_scale;
        if drop > leader_drop {
            leader_drop = drop;
        }
        if drop > STABILITY_TOLERANCE {
            violations.push(format!("price direction {k} lowers cost by {drop:e}"));
        }
    }
    Ok(EmesReport {
        follower_gain,
        leader_drop,
        follower_ok: follower_gain <= STABILITY_TOLERANCE,
        leader_ok: leader_drop <= STABILITY_TOLERANCE,
        violations,
    })
}

/// Restricts `raw` to the tangent cone of the price set at `prices`: zero sum,
/// and no component pushing a price past a bound it sits on. Normalised to
/// unit infinity norm; `None` if nothing is left.
fn feasible_direction(prices: &[f64], cfg: &GridConfig, mut raw: Vec<f64>) -> Option<Vec<f64>> {
    let mut active = vec![true; raw.len()];
    for _ in 0..=raw.len() {
        let free: Vec<usize> = (0..raw.len()).filter(|&i| active[i]).collect();
        if free.len() < 2 {
            return None;
        }
        let mean = free.iter().map(|&i| raw[i]).sum::<f64>() / free.len() as f64;
        for (i, v) in raw.iter_mut().enumerate() {
            *v = if active[i] { *v - mean } else { 0.0 };
        }
        let mut changed = false;
        for i in free {
            let at_min = prices[i] <= cfg.price_min && raw[i] < 0.0;
            let at_max = prices[i] >= cfg.price_max && raw[i] > 0.0;
            if at_min || at_max {
                active[i] = false;
                changed = true;
            }
        }
        if !changed {
            let norm = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            return (norm > 0.0).then(|| raw.iter().map(|v| v / norm).collect());
        }
    }
    None
}

fn max_step(prices: &[f64], direction: &[f64], cfg: &GridConfig) -> f64 {
    prices
        .iter()
        .zip(direction)
        .map(|(&p, &d)| {
            if d > 0.0 {
                (cfg.price_max - p) / d
            } else if d < 0.0 {
                (cfg.price_min - p) / d
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}
