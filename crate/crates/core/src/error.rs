use thiserror::Error;

use crate::gnep::GnepTrace;

pub type Result<T, E = GridError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("dimension mismatch: expected {expected} entries, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "infeasible price budget: {n} consumers with bounds [{price_min}, {price_max}] cannot share a budget of {budget}"
    )]
    InfeasibleBudget {
        n: usize,
        price_min: f64,
        price_max: f64,
        budget: f64,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("hyperplane projection solver did not converge in {iterations} iterations (residual {residual:e})")]
    SolverNonConvergence {
        iterations: usize,
        residual: f64,
        trace: Box<GnepTrace>,
    },

    #[error("price optimisation did not converge in {iterations} iterations (residual {residual:e})")]
    PricingNonConvergence { iterations: usize, residual: f64 },

    #[error("leader/follower alternation found no fixed point in {iterations} rounds (price change {residual:e})")]
    FixedPoint {
        iterations: usize,
        residual: f64,
        price_history: Vec<Vec<f64>>,
    },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("replicate {replicate} at sweep point {point} (stream seed {stream_seed:#x}) failed: {source}")]
    Replicate {
        point: usize,
        replicate: u64,
        stream_seed: u64,
        #[source]
        source: Box<GridError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(GridError::Dimension { expected, found });
    }
    Ok(())
}
