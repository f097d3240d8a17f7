//! Feed-in tariff baseline: a fixed contract price and a dispatch rule that
//! fills the deficiency without any game.

use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};
use crate::model::{total_cost, utilities, EcParams, GridConfig};

/// How contracted supply is split among the consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitDispatch {
    /// Consumers in ascending id order each supply all they can until the
    /// deficiency is met.
    #[default]
    Ascending,
    /// Every consumer supplies the same fraction of its capacity.
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub energies: Vec<f64>,
    pub utilities: Vec<f64>,
    /// Station cost with every price equal to the tariff.
    pub cost: f64,
    /// The consumers together hold less than the deficiency.
    pub shortfall: bool,
}

pub fn fit_baseline(params: &[EcParams], cfg: &GridConfig, tariff: f64, dispatch: FitDispatch) -> Result<FitOutcome> {
    if !(tariff >= 0.0 && tariff.is_finite()) {
        return Err(GridError::InvalidParameter(format!(
            "tariff must be non-negative, got {tariff}"
        )));
    }
    let available: f64 = params.iter().map(|p| p.available_energy).sum();
    let energies: Vec<f64> = match dispatch {
        FitDispatch::Ascending => {
            let mut remaining = cfg.deficiency;
            params
                .iter()
                .map(|p| {
                    let e = p.available_energy.min(remaining);
                    remaining -= e;
                    e
                })
                .collect()
        }
        FitDispatch::Proportional => {
            let share = (cfg.deficiency / available).min(1.0);
            params.iter().map(|p| share * p.available_energy).collect()
        }
    };
    let prices = vec![tariff; params.len()];
    Ok(FitOutcome {
        utilities: utilities(&energies, params, &prices)?,
        cost: total_cost(&prices, &energies, cfg)?,
        energies,
        shortfall: available < cfg.deficiency,
    })
}
