//! Scenario files and the sweep they describe.
//!
//! A scenario is a TOML document whose keys are the [`ScenarioSpec`] field
//! names; unknown keys are rejected. Every combination of `n_values`, `e_def`,
//! `p_values` and the `p_max` rule is one sweep point, visited in that nesting
//! order.
//!
//! ```toml
//! seed = 7
//! replicates = 1000
//! n_values = [5, 10, 15, 20, 25]
//! e_def = 700.0
//! p_values = [185.0]
//! p_min = 8.45
//! p_max = { fraction = 1.0 }
//! r = 2.0
//! c_n = 0.5
//! a_n = 1.0
//! b_n = 1.0
//! e_n = { low = 64.0, high = 240.0 }
//! fit_tariff = 60.0
//! budget_policy = "floor_precedence"
//! ```

use serde::{Deserialize, Serialize};

use super::fit::FitDispatch;
use crate::error::{GridError, Result};
use crate::model::{BudgetPolicy, GridConfig};

/// Upper price bound for each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMaxRule {
    /// A fixed bound in cents/kWh.
    Absolute(f64),
    /// A fraction of `P`.
    Fraction(f64),
    /// This many evenly spaced bounds from `P/N` to `P`, both included.
    Sweep(usize),
}

/// `E_n ~ U[low, high]` (kWh).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformRange {
    pub low: f64,
    pub high: f64,
}

/// A scalar or a list in the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    One(f64),
    Many(Vec<f64>),
}

impl Values {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Values::One(v) => vec![*v],
            Values::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub replicates: u64,
    pub n_values: Vec<usize>,
    /// Energy deficiency, one value or a list to sweep.
    pub e_def: Values,
    pub p_values: Vec<f64>,
    pub p_min: f64,
    pub p_max: PMaxRule,
    pub r: f64,
    pub c_n: f64,
    pub a_n: f64,
    pub b_n: f64,
    pub e_n: UniformRange,
    pub fit_tariff: f64,
    #[serde(default)]
    pub budget_policy: BudgetPolicy,
    #[serde(default)]
    pub fit_dispatch: FitDispatch,
}

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub n: usize,
    pub e_def: f64,
    pub p: f64,
    pub p_max: f64,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| GridError::Scenario(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| GridError::Scenario(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(GridError::Scenario(msg));
        if self.replicates == 0 {
            return fail("replicates must be at least 1".into());
        }
        if self.n_values.is_empty() || self.p_values.is_empty() || self.e_def.to_vec().is_empty() {
            return fail("n_values, e_def and p_values must not be empty".into());
        }
        if self.n_values.contains(&0) {
            return fail("every entry of n_values must be at least 1".into());
        }
        let range = self.e_n;
        if !(range.low.is_finite() && range.high.is_finite() && 0.0 < range.low && range.low < range.high) {
            return fail(format!("e_n needs 0 < low < high, got [{}, {}]", range.low, range.high));
        }
        if !(self.c_n > 0.0 && self.c_n.is_finite()) {
            return fail(format!("c_n must be positive, got {}", self.c_n));
        }
        if !(self.fit_tariff >= 0.0 && self.fit_tariff.is_finite()) {
            return fail(format!("fit_tariff must be non-negative, got {}", self.fit_tariff));
        }
        match self.p_max {
            PMaxRule::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
                return fail(format!("p_max fraction must lie in (0, 1], got {f}"))
            }
            PMaxRule::Sweep(points) if points < 2 => {
                return fail(format!("a p_max sweep needs at least 2 points, got {points}"))
            }
            _ => {}
        }
        for point in self.points() {
            self.grid_config(&point)
                .validate()
                .map_err(|e| GridError::Scenario(format!("sweep point {point:?}: {e}")))?;
        }
        Ok(())
    }

    /// All sweep points, `n` outermost and `p_max` innermost.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut points = Vec::new();
        for &n in &self.n_values {
            for e_def in self.e_def.to_vec() {
                for &p in &self.p_values {
                    for p_max in self.p_max_values(n, p) {
                        points.push(SweepPoint {
                            index: points.len(),
                            n,
                            e_def,
                            p,
                            p_max,
                        });
                    }
                }
            }
        }
        points
    }

    fn p_max_values(&self, n: usize, p: f64) -> Vec<f64> {
        match self.p_max {
            PMaxRule::Absolute(v) => vec![v],
            PMaxRule::Fraction(f) => vec![f * p],
            PMaxRule::Sweep(count) => {
                let low = p / n as f64;
                (0..count)
                    .map(|k| {
                        if k + 1 == count {
                            p
                        } else {
                            low + (p - low) * k as f64 / (count - 1) as f64
                        }
                    })
                    .collect()
            }
        }
    }

    pub fn grid_config(&self, point: &SweepPoint) -> GridConfig {
        GridConfig::uniform(point.n, point.e_def, point.p, self.p_min, self.r, self.a_n, self.b_n)
            .with_price_max(point.p_max)
            .with_policy(self.budget_policy)
    }
}

/// The reference parameter set: `E_def = 700`, `P = 185`, `p_min = 8.45`,
/// `p_max = P`, `r = 2`, `c_n = 0.5`, `a_n = b_n = 1`, `E_n ~ U[64, 240]`, FIT
/// tariff 60.
pub fn reference_spec(seed: u64, replicates: u64, n_values: Vec<usize>) -> ScenarioSpec {
    ScenarioSpec {
        seed,
        replicates,
        n_values,
        e_def: Values::One(700.0),
        p_values: vec![185.0],
        p_min: 8.45,
        p_max: PMaxRule::Fraction(1.0),
        r: 2.0,
        c_n: 0.5,
        a_n: 1.0,
        b_n: 1.0,
        e_n: UniformRange { low: 64.0, high: 240.0 },
        fit_tariff: 60.0,
        budget_policy: BudgetPolicy::FloorPrecedence,
        fit_dispatch: FitDispatch::Ascending,
    }
}

pub const FIGURE_SEED: u64 = 2014;

/// The four figure studies:
///
/// 1. a single N = 5 run whose trace is the convergence plot;
/// 2. N from 5 to 25 against `E_def` from 500 to 900 kWh;
/// 3. `p_max` swept over 20 points from `P/N` to `P` for N = 5 and three budgets;
/// 4. the FIT comparison over N and `P`.
pub fn figure_scenarios() -> [ScenarioSpec; 4] {
    let all_n = vec![5, 10, 15, 20, 25];
    let convergence = reference_spec(FIGURE_SEED, 1, vec![5]);
    let mut population = reference_spec(FIGURE_SEED, 1000, all_n.clone());
    population.e_def = Values::Many(vec![500.0, 600.0, 700.0, 800.0, 900.0]);
    let mut threshold = reference_spec(FIGURE_SEED, 1000, vec![5]);
    threshold.p_values = vec![150.0, 185.0, 220.0];
    threshold.p_max = PMaxRule::Sweep(20);
    let mut comparison = reference_spec(FIGURE_SEED, 1000, all_n);
    comparison.p_values = vec![100.0, 150.0, 185.0, 200.0, 250.0, 300.0];
    [convergence, population, threshold, comparison]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_defaults() {
        let [one, two, three, four] = figure_scenarios();
        assert_eq!(one.e_def.to_vec(), vec![700.0]);
        assert_eq!(one.replicates, 1);
        assert!(two.e_def.to_vec().contains(&700.0));
        let sweep: Vec<f64> = three
            .points()
            .iter()
            .filter(|p| p.p == 185.0)
            .map(|p| p.p_max)
            .collect();
        assert_eq!(sweep.len(), 20);
        assert_eq!(sweep[0], 37.0);
        assert_eq!(sweep[19], 185.0);
        assert_eq!(four.fit_tariff, 60.0);
        for spec in [one, two, three, four] {
            spec.validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip() {
        let spec = figure_scenarios()[2].clone();
        let text = spec.to_toml().unwrap();
        assert_eq!(ScenarioSpec::from_toml(&text).unwrap(), spec);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = reference_spec(1, 1, vec![5]).to_toml().unwrap();
        text.insert_str(0, "colour = \"blue\"\n");
        let err = ScenarioSpec::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn scalar_or_list() {
        let base = reference_spec(1, 1, vec![5]).to_toml().unwrap();
        let listed = base.replace("e_def = 700.0", "e_def = [600.0, 700.0]");
        assert_ne!(base, listed);
        assert_eq!(ScenarioSpec::from_toml(&listed).unwrap().points().len(), 2);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = reference_spec(1, 1, vec![5]);
        spec.e_n = UniformRange { low: 240.0, high: 64.0 };
        assert!(spec.validate().is_err());
        let mut spec = reference_spec(1, 0, vec![5]);
        assert!(spec.validate().is_err());
        spec.replicates = 1;
        spec.budget_policy = BudgetPolicy::Strict;
        spec.n_values = vec![25];
        assert!(matches!(spec.validate(), Err(GridError::Scenario(_))));
    }
}
