//! Domain types shared by the follower game, the pricing step and the engine.
//!
//! Units: energies in kWh, prices in US cents/kWh. Utility and cost values are
//! left in the mixed units the formulas produce (cents·kWh plus kWh² for the
//! quadratic loss term); the preference constant `c_n` is treated as
//! dimensionless.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, GridError, Result};

/// Relative tolerance on `sum(p) == P` for every price vector.
pub const PRICE_BUDGET_TOLERANCE: f64 = 1e-9;

/// Relative slack allowed on `sum(e) <= E_def` to absorb summation-order
/// rounding between producers and checkers of an energy vector.
pub const ENERGY_BUDGET_TOLERANCE: f64 = 1e-12;

/// Private parameters of one energy consumer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcParams {
    pub id: usize,
    /// Energy available for sale `E_n` (kWh).
    pub available_energy: f64,
    /// Preference constant `c_n` of the quadratic loss term.
    pub preference: f64,
}

impl EcParams {
    pub fn new(id: usize, available_energy: f64, preference: f64) -> Result<Self> {
        let params = Self {
            id,
            available_energy,
            preference,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.available_energy > 0.0 && self.available_energy.is_finite()) {
            return Err(GridError::InvalidParameter(format!(
                "consumer {}: available energy must be positive, got {}",
                self.id, self.available_energy
            )));
        }
        if !(self.preference > 0.0 && self.preference.is_finite()) {
            return Err(GridError::InvalidParameter(format!(
                "consumer {}: preference must be positive, got {}",
                self.id, self.preference
            )));
        }
        Ok(())
    }
}

/// Builds consumers with ids `0..n` from capacities and a shared preference.
pub fn consumers(capacities: &[f64], preference: f64) -> Result<Vec<EcParams>> {
    capacities
        .iter()
        .enumerate()
        .map(|(id, &cap)| EcParams::new(id, cap, preference))
        .collect()
}

/// How the leader treats a price floor that cannot be met within the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetPolicy {
    /// `N * p_min > P` is a configuration error.
    #[default]
    Strict,
    /// The floor wins: when `N * p_min > P` every consumer is paid `p_min` and
    /// the effective budget becomes `N * p_min`.
    FloorPrecedence,
}

/// Leader-side and global parameters of one time slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Energy deficiency `E_def` (kWh).
    pub deficiency: f64,
    /// Total unit-price budget `P` (cents/kWh).
    pub price_budget: f64,
    pub price_min: f64,
    pub price_max: f64,
    /// Cost exponent `r > 1`.
    pub cost_exponent: f64,
    /// Per-consumer linear price cost `a_n`.
    pub linear_price_cost: Vec<f64>,
    /// Per-consumer fixed cost `b_n`.
    pub fixed_cost: Vec<f64>,
    /// Shortfall weight `alpha`, only used by [`general_cost`].
    pub shortfall_weight: f64,
    /// Transmission weights `beta_n`, only used by [`general_cost`].
    pub transmission_weight: Vec<f64>,
    #[serde(default)]
    pub budget_policy: BudgetPolicy,
}

impl GridConfig {
    /// Uniform configuration for `n` consumers with `a_n = a`, `b_n = b`,
    /// `alpha = beta_n = 0` and `p_max = P`.
    pub fn uniform(
        n: usize,
        deficiency: f64,
        price_budget: f64,
        price_min: f64,
        cost_exponent: f64,
        a: f64,
        b: f64,
    ) -> Self {
        Self {
            deficiency,
            price_budget,
            price_min,
            price_max: price_budget,
            cost_exponent,
            linear_price_cost: vec![a; n],
            fixed_cost: vec![b; n],
            shortfall_weight: 0.0,
            transmission_weight: vec![0.0; n],
            budget_policy: BudgetPolicy::Strict,
        }
    }

    /// The reference setup: `E_def = 700`, `P = 185`, `p_min = 8.45`,
    /// `p_max = P`, `r = 2`, `a_n = b_n = 1`.
    pub fn standard(n: usize) -> Self {
        Self::uniform(n, 700.0, 185.0, 8.45, 2.0, 1.0, 1.0)
    }

    pub fn with_price_max(mut self, price_max: f64) -> Self {
        self.price_max = price_max;
        self
    }

    pub fn with_policy(mut self, policy: BudgetPolicy) -> Self {
        self.budget_policy = policy;
        self
    }

    pub fn len(&self) -> usize {
        self.linear_price_cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear_price_cost.is_empty()
    }

    /// The budget the price vector must sum to. Equal to `P` unless the floor
    /// takes precedence and `N * p_min` exceeds it.
    pub fn effective_budget(&self) -> f64 {
        let floor_total = self.len() as f64 * self.price_min;
        match self.budget_policy {
            BudgetPolicy::FloorPrecedence if floor_total > self.price_budget => floor_total,
            _ => self.price_budget,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        check_len(n, self.fixed_cost.len())?;
        check_len(n, self.transmission_weight.len())?;
        if n == 0 {
            return Err(GridError::InvalidParameter("at least one consumer is required".into()));
        }
        let finite = [
            self.deficiency,
            self.price_budget,
            self.price_min,
            self.price_max,
            self.cost_exponent,
            self.shortfall_weight,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(GridError::InvalidParameter("non-finite grid parameter".into()));
        }
        if self.deficiency <= 0.0 {
            return Err(GridError::InvalidParameter(format!(
                "deficiency must be positive, got {}",
                self.deficiency
            )));
        }
        if self.cost_exponent <= 1.0 {
            return Err(GridError::InvalidParameter(format!(
                "cost exponent must exceed 1, got {}",
                self.cost_exponent
            )));
        }
        if !(0.0 <= self.price_min && self.price_min <= self.price_max && self.price_max <= self.price_budget) {
            return Err(GridError::InvalidParameter(format!(
                "price bounds must satisfy 0 <= p_min ({}) <= p_max ({}) <= P ({})",
                self.price_min, self.price_max, self.price_budget
            )));
        }
        let weights_ok = self
            .linear_price_cost
            .iter()
            .chain(&self.fixed_cost)
            .chain(&self.transmission_weight)
            .chain(std::iter::once(&self.shortfall_weight))
            .all(|&w| w >= 0.0 && w.is_finite());
        if !weights_ok {
            return Err(GridError::InvalidParameter(
                "cost weights a_n, b_n, beta_n and alpha must be non-negative".into(),
            ));
        }
        let budget = self.effective_budget();
        let nf = n as f64;
        let slack = PRICE_BUDGET_TOLERANCE * budget;
        if nf * self.price_min > budget + slack || nf * self.price_max < budget - slack {
            return Err(GridError::InfeasibleBudget {
                n,
                price_min: self.price_min,
                price_max: self.price_max,
                budget,
            });
        }
        Ok(())
    }
}

/// Offered energies `e_n` (kWh).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyVector(Vec<f64>);

impl EnergyVector {
    /// Checks `0 <= e_n <= E_n` and `sum(e) <= E_def`.
    pub fn new(entries: Vec<f64>, params: &[EcParams], deficiency: f64) -> Result<Self> {
        check_len(params.len(), entries.len())?;
        for (e, p) in entries.iter().zip(params) {
            if !(*e >= 0.0 && *e <= p.available_energy) {
                return Err(GridError::Invariant(format!(
                    "energy {e} of consumer {} outside [0, {}]",
                    p.id, p.available_energy
                )));
            }
        }
        let total: f64 = entries.iter().sum();
        if total > deficiency * (1.0 + ENERGY_BUDGET_TOLERANCE) {
            return Err(GridError::Invariant(format!(
                "total energy {total} exceeds deficiency {deficiency}"
            )));
        }
        Ok(Self(entries))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for EnergyVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Unit prices `p_n` (cents/kWh).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceVector(Vec<f64>);

impl PriceVector {
    /// Checks `p_min <= p_n <= p_max` and `|sum(p) - P| <= 1e-9 P` against the
    /// effective budget of `cfg`.
    pub fn new(entries: Vec<f64>, cfg: &GridConfig) -> Result<Self> {
        check_len(cfg.len(), entries.len())?;
        for (n, &p) in entries.iter().enumerate() {
            if !(p >= cfg.price_min && p <= cfg.price_max) {
                return Err(GridError::Invariant(format!(
                    "price {p} of consumer {n} outside [{}, {}]",
                    cfg.price_min, cfg.price_max
                )));
            }
        }
        let budget = cfg.effective_budget();
        let total: f64 = entries.iter().sum();
        if (total - budget).abs() > PRICE_BUDGET_TOLERANCE * budget {
            return Err(GridError::Invariant(format!(
                "prices sum to {total}, budget is {budget}"
            )));
        }
        Ok(Self(entries))
    }

    /// Equal split of the effective budget, the leader's opening announcement.
    pub fn uniform(cfg: &GridConfig) -> Result<Self> {
        let n = cfg.len();
        // under floor precedence the quotient can round just below p_min
        let share = (cfg.effective_budget() / n as f64).clamp(cfg.price_min, cfg.price_max);
        Self::new(vec![share; n], cfg)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PriceVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// KKT slack values `xi_n = E_n - 2 c_n e_n + p_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackVector(pub Vec<f64>);

impl Deref for SlackVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Consumer utility `p e + (E - c e) e`.
#[inline]
pub fn utility(energy: f64, available: f64, price: f64, preference: f64) -> f64 {
    price * energy + (available - preference * energy) * energy
}

/// `dU/de = p + E - 2 c e`.
#[inline]
pub fn utility_de(energy: f64, available: f64, price: f64, preference: f64) -> f64 {
    price + available - 2.0 * preference * energy
}

/// `dU/dp = e`.
#[inline]
pub fn utility_dp(energy: f64) -> f64 {
    energy
}

/// `d2U/de2 = -2 c`, independent of the point.
#[inline]
pub fn utility_dee(preference: f64) -> f64 {
    -2.0 * preference
}

pub fn utilities(energies: &[f64], params: &[EcParams], prices: &[f64]) -> Result<Vec<f64>> {
    check_len(params.len(), energies.len())?;
    check_len(params.len(), prices.len())?;
    Ok(energies
        .iter()
        .zip(params)
        .zip(prices)
        .map(|((&e, ec), &p)| utility(e, ec.available_energy, p, ec.preference))
        .collect())
}

/// Sum of consumer utilities, the followers' common objective.
pub fn total_utility(energies: &[f64], params: &[EcParams], prices: &[f64]) -> Result<f64> {
    Ok(utilities(energies, params, prices)?.iter().sum())
}

/// Leader cost for one consumer: `e p^r + a p + b`.
#[inline]
pub fn individual_cost(price: f64, energy: f64, exponent: f64, a: f64, b: f64) -> f64 {
    energy * price.powf(exponent) + a * price + b
}

/// Simplified total cost `sum_n (e_n p_n^r + a_n p_n + b_n)`; this is what the
/// leader minimises.
pub fn total_cost(prices: &[f64], energies: &[f64], cfg: &GridConfig) -> Result<f64> {
    check_len(cfg.len(), prices.len())?;
    check_len(cfg.len(), energies.len())?;
    Ok(prices
        .iter()
        .zip(energies)
        .zip(cfg.linear_price_cost.iter().zip(&cfg.fixed_cost))
        .map(|((&p, &e), (&a, &b))| individual_cost(p, e, cfg.cost_exponent, a, b))
        .sum())
}

/// Full cost including transmission weights and the shortfall penalty:
/// `sum_n (e_n p_n^r + a_n p_n + beta_n e_n + b_n) + alpha (E_def - sum e)`.
/// Diagnostic only; nothing in the crate optimises it.
pub fn general_cost(prices: &[f64], energies: &[f64], cfg: &GridConfig) -> Result<f64> {
    let base = total_cost(prices, energies, cfg)?;
    let transmission: f64 = energies
        .iter()
        .zip(&cfg.transmission_weight)
        .map(|(&e, &beta)| beta * e)
        .sum();
    let supplied: f64 = energies.iter().sum();
    Ok(base + transmission + cfg.shortfall_weight * (cfg.deficiency - supplied))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn utility_examples() {
        assert_eq!(utility(0.0, 100.0, 50.0, 0.5), 0.0);
        assert_eq!(utility(100.0, 100.0, 37.0, 0.5), 8700.0);
        // stationary point of the concave utility
        let (avail, price, c) = (100.0, 37.0, 0.5);
        let peak = (avail + price) / (2.0 * c);
        assert_eq!(utility_de(peak, avail, price, c), 0.0);
    }

    #[test]
    fn cost_examples() {
        assert_eq!(individual_cost(0.0, 5.0, 2.0, 1.0, 1.0), 1.0);
        assert_eq!(individual_cost(10.0, 2.0, 2.0, 1.0, 1.0), 211.0);
        assert_relative_eq!(individual_cost(10.0, 2.0, 3.0, 0.0, 0.0), 2000.0, max_relative = 1e-12);
    }

    #[test]
    fn total_utility_sums_scalar_evaluations() {
        let params = consumers(&[64.0, 64.0], 0.5).unwrap();
        let e = [10.0, 20.0];
        let p = [37.0, 37.0];
        let direct = utility(10.0, 64.0, 37.0, 0.5) + utility(20.0, 64.0, 37.0, 0.5);
        assert_eq!(total_utility(&e, &params, &p).unwrap(), direct);
        assert_eq!(total_utility(&[0.0, 0.0], &params, &p).unwrap(), 0.0);
        assert!(matches!(
            total_utility(&[1.0], &params, &p),
            Err(GridError::Dimension { .. })
        ));
    }

    #[test]
    fn total_cost_edge_cases() {
        let cfg = GridConfig::standard(1);
        assert_eq!(
            total_cost(&[185.0], &[3.0], &cfg).unwrap(),
            individual_cost(185.0, 3.0, 2.0, 1.0, 1.0)
        );
        let mut empty = GridConfig::standard(0);
        empty.price_min = 0.0;
        assert_eq!(total_cost(&[], &[], &empty).unwrap(), 0.0);
    }

    #[test]
    fn general_cost_reduces_to_total_cost() {
        let cfg = GridConfig::standard(3);
        let p = [100.0, 50.0, 35.0];
        let e = [120.0, 200.0, 180.0];
        assert_eq!(general_cost(&p, &e, &cfg).unwrap(), total_cost(&p, &e, &cfg).unwrap());

        let mut weighted = cfg.clone();
        weighted.shortfall_weight = 2.5;
        let zero = [0.0; 3];
        let expected: f64 = p.iter().map(|&pn| pn + 1.0).sum::<f64>() + 2.5 * weighted.deficiency;
        assert_relative_eq!(
            general_cost(&p, &zero, &weighted).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn config_validation() {
        assert!(GridConfig::standard(5).validate().is_ok());
        // 25 * 8.45 > 185
        assert!(matches!(
            GridConfig::standard(25).validate(),
            Err(GridError::InfeasibleBudget { .. })
        ));
        let floor = GridConfig::standard(25).with_policy(BudgetPolicy::FloorPrecedence);
        assert!(floor.validate().is_ok());
        assert!((floor.effective_budget() - 25.0 * 8.45).abs() < 1e-12);
        // p_max too small for the budget
        assert!(GridConfig::standard(5).with_price_max(30.0).validate().is_err());
        let mut bad = GridConfig::standard(2);
        bad.cost_exponent = 1.0;
        assert!(bad.validate().is_err());
        assert!(EcParams::new(0, 10.0, 0.0).is_err());
        assert!(EcParams::new(0, 0.0, 0.5).is_err());
    }

    #[test]
    fn vector_invariants() {
        let params = consumers(&[10.0, 10.0], 0.5).unwrap();
        assert!(EnergyVector::new(vec![5.0, 5.0], &params, 10.0).is_ok());
        assert!(EnergyVector::new(vec![10.0, 10.0], &params, 10.0).is_err());
        assert!(EnergyVector::new(vec![-1.0, 0.0], &params, 10.0).is_err());

        let cfg = GridConfig::standard(2);
        assert!(PriceVector::new(vec![100.0, 85.0], &cfg).is_ok());
        assert!(PriceVector::new(vec![100.0, 80.0], &cfg).is_err());
        assert!(PriceVector::new(vec![180.0, 5.0], &cfg).is_err());
        assert_eq!(&*PriceVector::uniform(&cfg).unwrap(), &[92.5, 92.5]);
    }
}
