//! The followers' jointly convex game for a fixed price vector.
//!
//! The consumers share the coupling constraint `sum e <= E_def`, so the game is
//! solved through its variational inequality `VI(E, F)` with
//! `F_n(e) = 2 c_n e_n - E_n - p_n`. [`sshpm_solve`] runs the hyperplane
//! projection method; [`ve_oracle`] solves the same problem independently by
//! bisection on the shared multiplier and exists for verification.

mod projection;
pub mod sshpm;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, GridError, Result};
use crate::model::{EcParams, EnergyVector, PriceVector, SlackVector};

pub use sshpm::{drive, interior_slack_spread, CommitStep, FollowerNetwork, FollowerState, LocalFollowers, ProbeStep};

/// `F_n(e) = 2 c_n e_n - E_n - p_n`.
#[inline]
pub fn operator_component(energy: f64, available: f64, preference: f64, price: f64) -> f64 {
    2.0 * preference * energy - available - price
}

/// The affine, strongly monotone operator `F = -grad_e U` for fixed prices.
#[derive(Debug, Clone)]
pub struct ViOperator<'a> {
    params: &'a [EcParams],
    prices: &'a [f64],
}

impl<'a> ViOperator<'a> {
    pub fn new(params: &'a [EcParams], prices: &'a [f64]) -> Result<Self> {
        check_len(params.len(), prices.len())?;
        Ok(Self { params, prices })
    }

    pub fn eval(&self, energies: &[f64]) -> Result<Vec<f64>> {
        check_len(self.params.len(), energies.len())?;
        Ok(energies
            .iter()
            .zip(self.params)
            .zip(self.prices)
            .map(|((&e, ec), &p)| operator_component(e, ec.available_energy, ec.preference, p))
            .collect())
    }

    /// Strong monotonicity modulus `2 min c_n`.
    pub fn modulus(&self) -> f64 {
        2.0 * self.params.iter().map(|p| p.preference).fold(f64::INFINITY, f64::min)
    }

    /// Lipschitz constant `2 max c_n`.
    pub fn lipschitz(&self) -> f64 {
        2.0 * self.params.iter().map(|p| p.preference).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SshpmConfig {
    pub max_iterations: usize,
    /// Bound on `|e - Proj_E[e - F(e)]|_inf` (kWh).
    pub tolerance: f64,
    /// Back-tracking factor `sigma` in (0, 1).
    pub line_search_shrink: f64,
    /// Acceptance fraction `theta` in (0, 1).
    pub line_search_target: f64,
    /// Step `gamma` of the natural map.
    pub step_scale: f64,
    /// Relative bound on the interior slack spread.
    pub slack_tolerance: f64,
}

impl SshpmConfig {
    /// `gamma = 1 / (2 max c_n)`, `sigma = theta = 0.5`,
    /// `tolerance = 1e-8 E_def`, at most 10 000 iterations.
    pub fn for_instance(params: &[EcParams], deficiency: f64) -> Self {
        let cmax = params.iter().map(|p| p.preference).fold(0.0, f64::max);
        Self {
            max_iterations: 10_000,
            tolerance: 1e-8 * deficiency,
            line_search_shrink: 0.5,
            line_search_target: 0.5,
            step_scale: if cmax > 0.0 { 1.0 / (2.0 * cmax) } else { 1.0 },
            slack_tolerance: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if self.max_iterations == 0
            || !(self.tolerance > 0.0)
            || !unit(self.line_search_shrink)
            || !unit(self.line_search_target)
            || !(self.step_scale > 0.0 && self.step_scale.is_finite())
            || !(self.slack_tolerance > 0.0)
        {
            return Err(GridError::InvalidParameter(format!(
                "invalid solver configuration: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnepIterate {
    pub iteration: usize,
    pub energies: Vec<f64>,
    /// Unit-step natural residual at this iterate.
    pub residual: f64,
    /// Largest interior deviation from the mean slack.
    pub slack_spread: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GnepTrace {
    pub records: Vec<GnepIterate>,
}

impl GnepTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Euclidean projection onto `{e : 0 <= e_n <= E_n, sum e <= E_def}`.
pub fn project_feasible(raw: &[f64], params: &[EcParams], deficiency: f64) -> Result<EnergyVector> {
    check_len(params.len(), raw.len())?;
    if params.is_empty() {
        return Err(GridError::InvalidParameter("no consumers".into()));
    }
    let upper: Vec<f64> = params.iter().map(|p| p.available_energy).collect();
    EnergyVector::new(
        projection::project_box_budget(raw, &upper, deficiency),
        params,
        deficiency,
    )
}

fn check_instance(prices: &[f64], params: &[EcParams], deficiency: f64) -> Result<()> {
    check_len(params.len(), prices.len())?;
    if params.is_empty() {
        return Err(GridError::InvalidParameter("no consumers".into()));
    }
    for p in params {
        p.validate()?;
    }
    if !(deficiency > 0.0 && deficiency.is_finite()) {
        return Err(GridError::InvalidParameter(format!(
            "deficiency must be positive, got {deficiency}"
        )));
    }
    if prices.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(GridError::InvalidParameter(
            "prices must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

/// Solves the followers' game at `prices` with the hyperplane projection
/// method, starting from zero supply.
pub fn sshpm_solve(
    prices: &PriceVector,
    params: &[EcParams],
    deficiency: f64,
    cfg: &SshpmConfig,
) -> Result<(EnergyVector, GnepTrace)> {
    solve_at(prices, params, deficiency, cfg)
}

/// [`sshpm_solve`] for any non-negative price slice; the engine uses it for
/// prices that are not bound to a particular [`GridConfig`](crate::model::GridConfig).
pub fn solve_at(
    prices: &[f64],
    params: &[EcParams],
    deficiency: f64,
    cfg: &SshpmConfig,
) -> Result<(EnergyVector, GnepTrace)> {
    check_instance(prices, params, deficiency)?;
    cfg.validate()?;
    let mut network = LocalFollowers {
        states: params
            .iter()
            .zip(prices)
            .map(|(ec, &p)| FollowerState::new(ec.available_energy, ec.preference, p))
            .collect(),
    };
    let (energies, trace) = drive(&mut network, deficiency, cfg)?;
    Ok((EnergyVector::new(energies, params, deficiency)?, trace))
}

/// Independent reference solution by bisection on the shared multiplier.
///
/// `e_n(xi) = clamp((E_n + p_n - xi) / (2 c_n), 0, E_n)`; if the budget is slack
/// at `xi = 0` that is the answer, otherwise `xi` is bisected until the budget
/// binds to within `1e-10 E_def`. Returns the energies and the multiplier.
pub fn ve_oracle_with_multiplier(prices: &[f64], params: &[EcParams], deficiency: f64) -> Result<(EnergyVector, f64)> {
    check_instance(prices, params, deficiency)?;
    let response = |xi: f64| -> Vec<f64> {
        params
            .iter()
            .zip(prices)
            .map(|(ec, &p)| ((ec.available_energy + p - xi) / (2.0 * ec.preference)).clamp(0.0, ec.available_energy))
            .collect()
    };
    let at_zero = response(0.0);
    if at_zero.iter().sum::<f64>() <= deficiency {
        return Ok((EnergyVector::new(at_zero, params, deficiency)?, 0.0));
    }
    let mut lo = 0.0_f64;
    let mut hi = params
        .iter()
        .zip(prices)
        .map(|(ec, &p)| ec.available_energy + p)
        .fold(0.0, f64::max);
    let mut best = response(hi);
    for _ in 0..4_000 {
        let total: f64 = best.iter().sum();
        if deficiency - total <= 1e-10 * deficiency {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let candidate = response(mid);
        if candidate.iter().sum::<f64>() > deficiency {
            lo = mid;
        } else {
            hi = mid;
            best = candidate;
        }
    }
    Ok((EnergyVector::new(best, params, deficiency)?, hi))
}

pub fn ve_oracle(prices: &[f64], params: &[EcParams], deficiency: f64) -> Result<EnergyVector> {
    Ok(ve_oracle_with_multiplier(prices, params, deficiency)?.0)
}

/// `xi_n = E_n - 2 c_n e_n + p_n`, the negated operator.
pub fn slack_vector(energies: &[f64], params: &[EcParams], prices: &[f64]) -> Result<SlackVector> {
    check_len(params.len(), energies.len())?;
    check_len(params.len(), prices.len())?;
    Ok(SlackVector(
        energies
            .iter()
            .zip(params)
            .zip(prices)
            .map(|((&e, ec), &p)| -operator_component(e, ec.available_energy, ec.preference, p))
            .collect(),
    ))
}
