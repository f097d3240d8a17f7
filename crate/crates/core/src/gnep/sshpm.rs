//! Hyperplane projection iteration for the followers' variational inequality.
//!
//! The iteration is written against [`FollowerNetwork`], which hides where the
//! per-consumer arithmetic happens. [`LocalFollowers`] evaluates every consumer
//! in-process; the engine's message protocol implements the same trait with
//! isolated agents. Consumers only ever apply broadcast scalars to their own
//! state, and the mediator only combines the values they report, so both
//! realisations perform identical floating-point operations.

use serde::{Deserialize, Serialize};

use super::projection::{budget_shift, halfspace_coordinate, halfspace_shifts, project_coordinate};
use super::{GnepIterate, GnepTrace, SshpmConfig};
use crate::error::{GridError, Result};

const MAX_LINE_SEARCH_STEPS: usize = 64;

/// Scalars broadcast for a line-search probe. A consumer moves to
/// `z_n = e_n - eta (e_n - y_n)` where `y_n` is its coordinate of the
/// projected natural step `Proj_E[e - gamma F(e)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeStep {
    pub gamma: f64,
    pub lambda: f64,
    pub eta: f64,
}

/// How a consumer forms its next iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CommitStep {
    /// Start from zero supply.
    Start,
    /// Project the current iterate onto `E ∩ H` using the multipliers of the
    /// budget (`lambda`) and of the separating half-space (`mu`).
    Halfspace { lambda: f64, mu: f64 },
    /// Adopt the last probe point (used when `F` vanishes there).
    AdoptProbe,
}

#[inline]
pub(crate) fn natural_step(energy: f64, operator: f64, gamma: f64) -> f64 {
    energy - gamma * operator
}

#[inline]
pub(crate) fn line_point(energy: f64, projected: f64, eta: f64) -> f64 {
    energy - eta * (energy - projected)
}

/// One consumer's private solver state.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerState {
    capacity: f64,
    preference: f64,
    price: f64,
    energy: f64,
    operator_at_energy: f64,
    probe: f64,
    operator_at_probe: f64,
}

impl FollowerState {
    pub fn new(capacity: f64, preference: f64, price: f64) -> Self {
        Self {
            capacity,
            preference,
            price,
            energy: 0.0,
            operator_at_energy: 0.0,
            probe: 0.0,
            operator_at_probe: 0.0,
        }
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `F_n(e) = 2 c_n e - E_n - p_n`, the negated marginal utility.
    #[inline]
    pub fn operator(&self, energy: f64) -> f64 {
        super::operator_component(energy, self.capacity, self.preference, self.price)
    }

    /// Moves to the probe point and returns the slack `-F_n` there.
    pub fn probe(&mut self, step: &ProbeStep) -> f64 {
        let w = natural_step(self.energy, self.operator_at_energy, step.gamma);
        let y = project_coordinate(w, step.lambda, self.capacity);
        self.probe = line_point(self.energy, y, step.eta);
        self.operator_at_probe = self.operator(self.probe);
        -self.operator_at_probe
    }

    /// Forms the next iterate; returns it with its slack `-F_n`.
    pub fn commit(&mut self, step: &CommitStep) -> (f64, f64) {
        self.energy = match *step {
            CommitStep::Start => 0.0,
            CommitStep::Halfspace { lambda, mu } => {
                halfspace_coordinate(self.energy, self.operator_at_probe, mu, lambda, self.capacity)
            }
            CommitStep::AdoptProbe => self.probe,
        };
        self.operator_at_energy = self.operator(self.energy);
        (self.energy, -self.operator_at_energy)
    }
}

/// The consumers as seen by the mediator of the iteration.
pub trait FollowerNetwork {
    /// Box bounds `E_n`, in consumer order.
    fn capacities(&self) -> Vec<f64>;
    /// Apply a commit step everywhere; returns `(energies, slacks)`.
    fn commit(&mut self, step: &CommitStep) -> Result<(Vec<f64>, Vec<f64>)>;
    /// Apply a probe everywhere; returns the slacks at the probe points.
    fn probe(&mut self, step: &ProbeStep) -> Result<Vec<f64>>;
    /// Called once the mediator declares convergence.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// All consumers evaluated in-process.
#[derive(Debug, Clone)]
pub struct LocalFollowers {
    pub states: Vec<FollowerState>,
}

impl FollowerNetwork for LocalFollowers {
    fn capacities(&self) -> Vec<f64> {
        self.states.iter().map(FollowerState::capacity).collect()
    }

    fn commit(&mut self, step: &CommitStep) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(self.states.iter_mut().map(|s| s.commit(step)).unzip())
    }

    fn probe(&mut self, step: &ProbeStep) -> Result<Vec<f64>> {
        Ok(self.states.iter_mut().map(|s| s.probe(step)).collect())
    }
}

/// Largest deviation from the mean slack over consumers strictly inside their
/// box, with that mean. Clamped consumers carry their own bound multipliers
/// and are excluded.
pub fn interior_slack_spread(energies: &[f64], slacks: &[f64], capacities: &[f64]) -> (f64, f64) {
    let interior: Vec<f64> = energies
        .iter()
        .zip(slacks)
        .zip(capacities)
        .filter(|((&e, _), &cap)| {
            let margin = 1e-9 * cap.max(1.0);
            e > margin && e < cap - margin
        })
        .map(|((_, &xi), _)| xi)
        .collect();
    if interior.is_empty() {
        return (0.0, 0.0);
    }
    let mean = interior.iter().sum::<f64>() / interior.len() as f64;
    let spread = interior.iter().fold(0.0_f64, |m, &xi| m.max((xi - mean).abs()));
    (spread, mean)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs the iteration from `e = 0` until the natural residual and the interior
/// slack spread are both within tolerance.
pub fn drive<N: FollowerNetwork>(network: &mut N, budget: f64, cfg: &SshpmConfig) -> Result<(Vec<f64>, GnepTrace)> {
    let capacities = network.capacities();
    let gamma = cfg.step_scale;
    let (mut energies, mut slacks) = network.commit(&CommitStep::Start)?;
    let mut trace = GnepTrace::default();
    let mut plain_step = false;

    for iteration in 0..=cfg.max_iterations {
        let operator: Vec<f64> = slacks.iter().map(|xi| -xi).collect();

        let natural: Vec<f64> = energies
            .iter()
            .zip(&operator)
            .map(|(&e, &f)| natural_step(e, f, gamma))
            .collect();
        let lambda = budget_shift(&natural, &capacities, budget);
        let projected: Vec<f64> = natural
            .iter()
            .zip(&capacities)
            .map(|(&w, &cap)| project_coordinate(w, lambda, cap))
            .collect();
        let step_residual: Vec<f64> = energies.iter().zip(&projected).map(|(e, y)| e - y).collect();

        // Convergence is judged on the unit-step natural residual.
        let unit_residual = if gamma == 1.0 {
            step_residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
        } else {
            let unit: Vec<f64> = energies
                .iter()
                .zip(&operator)
                .map(|(&e, &f)| natural_step(e, f, 1.0))
                .collect();
            let unit_lambda = budget_shift(&unit, &capacities, budget);
            energies
                .iter()
                .zip(&unit)
                .zip(&capacities)
                .map(|((&e, &w), &cap)| (e - project_coordinate(w, unit_lambda, cap)).abs())
                .fold(0.0, f64::max)
        };
        let (spread, mean_slack) = interior_slack_spread(&energies, &slacks, &capacities);
        trace.records.push(GnepIterate {
            iteration,
            energies: energies.clone(),
            residual: unit_residual,
            slack_spread: spread,
        });

        let slack_ok = spread <= cfg.slack_tolerance * (1.0 + mean_slack.abs());
        let step_norm_sq = dot(&step_residual, &step_residual);
        if (unit_residual <= cfg.tolerance && slack_ok) || step_norm_sq == 0.0 {
            network.finish()?;
            return Ok((energies, trace));
        }
        if iteration == cfg.max_iterations {
            break;
        }

        if plain_step {
            plain_step = false;
            network.probe(&ProbeStep {
                gamma,
                lambda,
                eta: 1.0,
            })?;
            (energies, slacks) = network.commit(&CommitStep::AdoptProbe)?;
            continue;
        }

        let target = cfg.line_search_target / gamma * step_norm_sq;
        let mut eta = 1.0;
        let mut probe_operator;
        let mut alignment;
        let mut trials = 0;
        loop {
            let step = ProbeStep { gamma, lambda, eta };
            probe_operator = network.probe(&step)?.iter().map(|xi| -xi).collect::<Vec<f64>>();
            alignment = dot(&probe_operator, &step_residual);
            trials += 1;
            if alignment >= target || trials >= MAX_LINE_SEARCH_STEPS {
                break;
            }
            eta *= cfg.line_search_shrink;
        }

        if alignment < target {
            // Only rounding in the projection defeats the search, near the
            // solution. The plain projection step contracts for this diagonal
            // operator at the configured step scale, so take it instead.
            network.probe(&ProbeStep {
                gamma,
                lambda,
                eta: 1.0,
            })?;
            (energies, slacks) = network.commit(&CommitStep::AdoptProbe)?;
            continue;
        }

        let step = if probe_operator.iter().all(|&g| g == 0.0) {
            CommitStep::AdoptProbe
        } else {
            // <F(z), e - z> = eta <F(z), r>
            let (lambda, mu) = halfspace_shifts(&energies, &probe_operator, eta * alignment, &capacities, budget);
            CommitStep::Halfspace { lambda, mu }
        };
        let previous = std::mem::take(&mut energies);
        (energies, slacks) = network.commit(&step)?;
        // A cut almost parallel to the budget face moves the iterate by
        // rounding only; follow up with a projection step.
        let moved = previous
            .iter()
            .zip(&energies)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = step_residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        plain_step = moved < 1e-3 * scale;
    }

    let residual = trace.records.last().map_or(f64::INFINITY, |r| r.residual);
    Err(GridError::SolverNonConvergence {
        iterations: cfg.max_iterations,
        residual,
        trace: Box::new(trace),
    })
}
