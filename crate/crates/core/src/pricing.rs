//! The leader's move: split the unit-price budget across consumers so that the
//! purchase cost `sum_n e_n p_n^r + a_n p_n + b_n` is minimal subject to
//! `sum p = P` and `p_min <= p_n <= p_max`.
//!
//! Stationarity gives `r e_n p_n^(r-1) + a_n = nu`; with a common `a_n` the
//! optimal prices are proportional to `e_n^(1/(1-r))` until a bound binds.
//! [`closed_form_prices`] evaluates that and repairs bound violations by
//! clamp-and-redistribute. [`numeric_prices`] is a projected-gradient
//! minimiser that makes no use of the structure and serves as its oracle.

use crate::error::{check_len, GridError, Result};
use crate::model::{GridConfig, PriceVector};

/// Energies below this floor (kWh) are raised to it before weighting, so an
/// idle consumer receives the largest weight instead of a division by zero.
pub const ENERGY_FLOOR: f64 = 1e-9;

const MAX_GRADIENT_STEPS: usize = 100_000;
const MAX_BISECTIONS: usize = 400;

fn check_energies(energies: &[f64], cfg: &GridConfig) -> Result<()> {
    check_len(cfg.len(), energies.len())?;
    if energies.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(GridError::InvalidParameter(
            "energies must be finite and non-negative".into(),
        ));
    }
    cfg.validate()
}

fn floor_only(cfg: &GridConfig) -> bool {
    cfg.effective_budget() <= cfg.len() as f64 * cfg.price_min
}

/// Bound-respecting minimiser of the purchase cost for a common `a_n`.
///
/// Unclamped consumers receive `p_n = B w_n / sum w` with
/// `w_n = max(e_n, ENERGY_FLOOR)^(1/(1-r))` and `B` the budget left after the
/// clamped ones. Each round computes those prices over the free set and looks
/// at the excess `h` the box would add: for `h > 0` the free share has to fall,
/// so consumers below `p_min` stay there and are fixed; for `h < 0` consumers
/// above `p_max` are fixed; for `h = 0` both. Every round fixes at least one
/// consumer, so at most `N` rounds are needed.
pub fn closed_form_prices(energies: &[f64], cfg: &GridConfig) -> Result<PriceVector> {
    check_energies(energies, cfg)?;
    let n = cfg.len();
    if floor_only(cfg) {
        return PriceVector::new(vec![cfg.price_min; n], cfg);
    }
    let exponent = 1.0 / (1.0 - cfg.cost_exponent);
    let weights: Vec<f64> = energies.iter().map(|&e| e.max(ENERGY_FLOOR).powf(exponent)).collect();

    let mut prices = vec![0.0; n];
    let mut fixed = vec![false; n];
    let mut remaining = cfg.effective_budget();
    for _ in 0..=n {
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        if free.is_empty() {
            break;
        }
        let total_weight: f64 = free.iter().map(|&i| weights[i]).sum();
        for &i in &free {
            prices[i] = remaining * weights[i] / total_weight;
        }
        let excess: f64 = free
            .iter()
            .map(|&i| prices[i].clamp(cfg.price_min, cfg.price_max) - prices[i])
            .sum();
        let mut changed = false;
        for &i in &free {
            let low = prices[i] < cfg.price_min && excess >= 0.0;
            let high = prices[i] > cfg.price_max && excess <= 0.0;
            if low || high {
                prices[i] = if low { cfg.price_min } else { cfg.price_max };
                remaining -= prices[i];
                fixed[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // rounding can leave a free price a hair outside its box
    for p in &mut prices {
        *p = p.clamp(cfg.price_min, cfg.price_max);
    }
    PriceVector::new(prices, cfg)
}

/// Euclidean projection onto `{sum p = B, p_min <= p_n <= p_max}`:
/// `p_n = clamp(q_n - tau)` with `tau` found by bisection.
pub fn project_prices(raw: &[f64], cfg: &GridConfig) -> Vec<f64> {
    let budget = cfg.effective_budget();
    let (lo_bound, hi_bound) = (cfg.price_min, cfg.price_max);
    let total = |tau: f64| -> f64 { raw.iter().map(|&q| (q - tau).clamp(lo_bound, hi_bound)).sum() };
    let mut lo = raw.iter().copied().fold(f64::INFINITY, f64::min) - hi_bound;
    let mut hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max) - lo_bound;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the end of the bracket whose sum is closer to the budget
    let tau = if (total(lo) - budget).abs() < (total(hi) - budget).abs() {
        lo
    } else {
        hi
    };
    raw.iter().map(|&q| (q - tau).clamp(lo_bound, hi_bound)).collect()
}

/// `cost(to) - cost(from)` term by term, without forming either total: near
/// the optimum the change is far below the rounding of the cost itself.
fn cost_change(from: &[f64], to: &[f64], energies: &[f64], cfg: &GridConfig) -> f64 {
    let r = cfg.cost_exponent;
    from.iter()
        .zip(to)
        .zip(energies.iter().zip(&cfg.linear_price_cost))
        .map(|((&p, &q), (&e, &a))| {
            let power = if p > 0.0 {
                p.powf(r) * (r * ((q - p) / p).ln_1p()).exp_m1()
            } else {
                q.powf(r)
            };
            e * power + a * (q - p)
        })
        .sum()
}

fn cost_gradient(prices: &[f64], energies: &[f64], cfg: &GridConfig) -> Vec<f64> {
    let r = cfg.cost_exponent;
    prices
        .iter()
        .zip(energies)
        .zip(&cfg.linear_price_cost)
        .map(|((&p, &e), &a)| r * e * p.powf(r - 1.0) + a)
        .collect()
}

/// Projected-gradient minimiser of the purchase cost.
///
/// The base step is `1 / L` with `L = r (r-1) max e_n max(p_min^(r-2), p_max^(r-2))`,
/// capped so one step cannot move further than the budget. Each iteration
/// tries twice the previous step and halves it until the sufficient-decrease
/// test holds. Stops once `|p - Proj(p - t grad)|_inf` at the base step is at
/// most `tolerance` (cents/kWh).
///
/// With `r < 2` and `p_min = 0` the curvature is unbounded near zero and the
/// iteration may not reach a tight tolerance within its step cap.
pub fn numeric_prices(energies: &[f64], cfg: &GridConfig, tolerance: f64) -> Result<PriceVector> {
    check_energies(energies, cfg)?;
    if !(tolerance > 0.0) {
        return Err(GridError::InvalidParameter(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let n = cfg.len();
    if floor_only(cfg) {
        return PriceVector::new(vec![cfg.price_min; n], cfg);
    }
    let r = cfg.cost_exponent;
    let emax = energies.iter().copied().fold(0.0, f64::max);
    let curvature = [cfg.price_min, cfg.price_max]
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p.powf(r - 2.0))
        .fold(0.0, f64::max);
    let lipschitz = r * (r - 1.0) * emax * curvature;
    let mut prices = project_prices(&vec![cfg.effective_budget() / n as f64; n], cfg);
    // a nearly linear objective would otherwise take steps far beyond the box
    let gmax = cost_gradient(&prices, energies, cfg)
        .iter()
        .fold(0.0_f64, |m, g| m.max(g.abs()));
    let reach = if gmax > 0.0 { cfg.effective_budget() / gmax } else { 1.0 };
    let base_step = if lipschitz > 0.0 {
        (1.0 / lipschitz).min(reach)
    } else {
        reach
    };

    let mut residual = f64::INFINITY;
    let mut step = base_step;
    for _ in 0..MAX_GRADIENT_STEPS {
        let grad = cost_gradient(&prices, energies, cfg);
        let raw: Vec<f64> = prices.iter().zip(&grad).map(|(p, g)| p - base_step * g).collect();
        residual = project_prices(&raw, cfg)
            .iter()
            .zip(&prices)
            .fold(0.0_f64, |m, (c, p)| m.max((c - p).abs()));
        if residual <= tolerance {
            return PriceVector::new(prices, cfg);
        }
        // curvature differs by orders of magnitude across the box when r < 2,
        // so the step may grow past 1 / L between iterations
        step *= 2.0;
        let candidate = loop {
            let raw: Vec<f64> = prices.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let candidate = project_prices(&raw, cfg);
            let moved: f64 = candidate
                .iter()
                .zip(&prices)
                .zip(&grad)
                .map(|((c, p), g)| g * (c - p) + (c - p).powi(2) / (2.0 * step))
                .sum();
            if cost_change(&prices, &candidate, energies, cfg) <= moved || step < 1e-30 {
                break candidate;
            }
            step *= 0.5;
        };
        prices = candidate;
    }
    Err(GridError::PricingNonConvergence {
        iterations: MAX_GRADIENT_STEPS,
        residual,
    })
}

/// The leader's optimal prices: the closed form when every consumer has the
/// same linear price cost `a_n` (where it is exact), projected gradient
/// otherwise.
pub fn optimal_prices(energies: &[f64], cfg: &GridConfig) -> Result<PriceVector> {
    let first = cfg.linear_price_cost.first().copied().unwrap_or(0.0);
    if cfg.linear_price_cost.iter().all(|&a| a == first) {
        closed_form_prices(energies, cfg)
    } else {
        numeric_prices(energies, cfg, 1e-10 * cfg.effective_budget())
    }
}

/// Largest relative deviation of `r e_n p_n^(r-1)` from its mean. Zero at an
/// interior optimum.
pub fn price_product_check(prices: &[f64], energies: &[f64], exponent: f64) -> Result<f64> {
    check_len(prices.len(), energies.len())?;
    if prices.is_empty() {
        return Ok(0.0);
    }
    let products: Vec<f64> = prices
        .iter()
        .zip(energies)
        .map(|(&p, &e)| exponent * e * p.powf(exponent - 1.0))
        .collect();
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    let spread = products.iter().fold(0.0_f64, |m, &x| m.max((x - mean).abs()));
    if mean == 0.0 {
        return Ok(if spread == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(spread / mean.abs())
}
