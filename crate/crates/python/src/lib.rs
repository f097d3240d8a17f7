//! Python bindings: consumers, grid configuration, the follower and leader
//! solvers, the full leader/follower run and scenario sweeps.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use gridtrade_core::engine::{self, EngineConfig, Transport};
use gridtrade_core::experiments::output::write_stats;
use gridtrade_core::experiments::{self, ScenarioSpec};
use gridtrade_core::gnep::{self, SshpmConfig};
use gridtrade_core::model::{self, BudgetPolicy, PriceVector};
use gridtrade_core::{pricing, GridError};

fn value_error(e: GridError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A consumer: `id`, energy available for sale and preference constant.
#[pyclass(frozen, from_py_object, name = "EcParams", module = "gridtrade")]
#[derive(Clone)]
struct PyEcParams(model::EcParams);

#[pymethods]
impl PyEcParams {
    #[new]
    #[pyo3(signature = (id, available_energy, preference = 0.5))]
    fn new(id: usize, available_energy: f64, preference: f64) -> PyResult<Self> {
        model::EcParams::new(id, available_energy, preference)
            .map(Self)
            .map_err(value_error)
    }

    #[getter]
    fn id(&self) -> usize {
        self.0.id
    }

    #[getter]
    fn available_energy(&self) -> f64 {
        self.0.available_energy
    }

    #[getter]
    fn preference(&self) -> f64 {
        self.0.preference
    }

    fn __repr__(&self) -> String {
        format!(
            "EcParams(id={}, available_energy={}, preference={})",
            self.0.id, self.0.available_energy, self.0.preference
        )
    }
}

fn unwrap_params(params: &[PyEcParams]) -> Vec<model::EcParams> {
    params.iter().map(|p| p.0).collect()
}

/// Station configuration with uniform cost coefficients.
#[pyclass(frozen, from_py_object, name = "GridConfig", module = "gridtrade")]
#[derive(Clone)]
struct PyGridConfig(model::GridConfig);

#[pymethods]
impl PyGridConfig {
    #[new]
    #[pyo3(signature = (
        n,
        deficiency = 700.0,
        price_budget = 185.0,
        price_min = 8.45,
        price_max = None,
        cost_exponent = 2.0,
        a = 1.0,
        b = 1.0,
        floor_precedence = false,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        deficiency: f64,
        price_budget: f64,
        price_min: f64,
        price_max: Option<f64>,
        cost_exponent: f64,
        a: f64,
        b: f64,
        floor_precedence: bool,
    ) -> PyResult<Self> {
        let mut cfg = model::GridConfig::uniform(n, deficiency, price_budget, price_min, cost_exponent, a, b);
        if let Some(cap) = price_max {
            cfg = cfg.with_price_max(cap);
        }
        if floor_precedence {
            cfg = cfg.with_policy(BudgetPolicy::FloorPrecedence);
        }
        cfg.validate().map_err(value_error)?;
        Ok(Self(cfg))
    }

    #[getter]
    fn deficiency(&self) -> f64 {
        self.0.deficiency
    }

    #[getter]
    fn price_budget(&self) -> f64 {
        self.0.price_budget
    }

    #[getter]
    fn price_min(&self) -> f64 {
        self.0.price_min
    }

    #[getter]
    fn price_max(&self) -> f64 {
        self.0.price_max
    }

    #[getter]
    fn cost_exponent(&self) -> f64 {
        self.0.cost_exponent
    }

    fn effective_budget(&self) -> f64 {
        self.0.effective_budget()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

type RoundRow = (Vec<f64>, Vec<f64>, Vec<f64>, f64);

/// Outcome of a leader/follower run.
#[pyclass(frozen, name = "EmesResult", module = "gridtrade")]
struct PyEmesResult(engine::EmesResult);

#[pymethods]
impl PyEmesResult {
    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.0.energies.to_vec()
    }

    #[getter]
    fn prices(&self) -> Vec<f64> {
        self.0.prices.to_vec()
    }

    #[getter]
    fn utilities(&self) -> Vec<f64> {
        self.0.utilities.clone()
    }

    #[getter]
    fn total_cost(&self) -> f64 {
        self.0.total_cost
    }

    #[getter]
    fn outer_iterations(&self) -> usize {
        self.0.outer_iterations
    }

    #[getter]
    fn message_count(&self) -> usize {
        self.0.message_count
    }

    #[getter]
    fn fixed_point_residual(&self) -> f64 {
        self.0.fixed_point_residual
    }

    fn is_fixed_point(&self) -> bool {
        self.0.is_fixed_point()
    }

    /// Per-round `(energies, prices, utilities, cost)`.
    fn rounds(&self) -> Vec<RoundRow> {
        self.0
            .rounds
            .iter()
            .map(|r| (r.energies.clone(), r.prices.clone(), r.utilities.clone(), r.cost))
            .collect()
    }
}

/// Consumers with ids `0..len(capacities)` and a shared preference.
#[pyfunction]
#[pyo3(signature = (capacities, preference = 0.5))]
fn consumers(capacities: Vec<f64>, preference: f64) -> PyResult<Vec<PyEcParams>> {
    let params = model::consumers(&capacities, preference).map_err(value_error)?;
    Ok(params.into_iter().map(PyEcParams).collect())
}

/// Followers' equilibrium by the hyperplane projection method; returns the
/// energies and the iteration count.
#[pyfunction]
fn sshpm_solve(prices: Vec<f64>, params: Vec<PyEcParams>, deficiency: f64) -> PyResult<(Vec<f64>, usize)> {
    let params = unwrap_params(&params);
    let solver = SshpmConfig::for_instance(&params, deficiency);
    let (energies, trace) = gnep::solve_at(&prices, &params, deficiency, &solver).map_err(value_error)?;
    Ok((energies.into_inner(), trace.iterations()))
}

/// Followers' equilibrium by bisection on the shared multiplier.
#[pyfunction]
fn ve_oracle(prices: Vec<f64>, params: Vec<PyEcParams>, deficiency: f64) -> PyResult<Vec<f64>> {
    let params = unwrap_params(&params);
    let energies = gnep::ve_oracle(&prices, &params, deficiency).map_err(value_error)?;
    Ok(energies.into_inner())
}

/// The station's cost-minimising prices for the given offers.
#[pyfunction]
fn closed_form_prices(energies: Vec<f64>, cfg: PyGridConfig) -> PyResult<Vec<f64>> {
    let prices = pricing::closed_form_prices(&energies, &cfg.0).map_err(value_error)?;
    Ok(prices.into_inner())
}

#[pyfunction]
#[pyo3(signature = (energies, cfg, tolerance = 1e-10))]
fn numeric_prices(energies: Vec<f64>, cfg: PyGridConfig, tolerance: f64) -> PyResult<Vec<f64>> {
    let tolerance = tolerance * cfg.0.effective_budget();
    let prices = pricing::numeric_prices(&energies, &cfg.0, tolerance).map_err(value_error)?;
    Ok(prices.into_inner())
}

#[pyfunction]
fn uniform_prices(cfg: PyGridConfig) -> PyResult<Vec<f64>> {
    Ok(PriceVector::uniform(&cfg.0).map_err(value_error)?.into_inner())
}

/// Alternates station pricing and follower solves until the prices settle.
/// `mediated` routes follower solves through the message protocol.
#[pyfunction]
#[pyo3(signature = (params, cfg, mediated = true))]
fn run_emes(params: Vec<PyEcParams>, cfg: PyGridConfig, mediated: bool) -> PyResult<PyEmesResult> {
    let params = unwrap_params(&params);
    let solver = SshpmConfig::for_instance(&params, cfg.0.deficiency);
    let engine = EngineConfig {
        transport: if mediated {
            Transport::Mediated
        } else {
            Transport::Direct
        },
        ..EngineConfig::default()
    };
    let result = engine::run_emes_with(&params, &cfg.0, &solver, &engine).map_err(value_error)?;
    Ok(PyEmesResult(result))
}

/// Checks both equilibrium conditions; returns
/// `(passed, follower_gain, leader_drop)`.
#[pyfunction]
fn verify_emes(
    energies: Vec<f64>,
    prices: Vec<f64>,
    params: Vec<PyEcParams>,
    cfg: PyGridConfig,
) -> PyResult<(bool, f64, f64)> {
    let params = unwrap_params(&params);
    let report = engine::verify_emes(&energies, &prices, &params, &cfg.0).map_err(value_error)?;
    Ok((report.passed(), report.follower_gain, report.leader_drop))
}

/// The reference scenario as TOML.
#[pyfunction]
#[pyo3(signature = (seed = 0, replicates = 1, n_values = vec![5]))]
fn reference_scenario(seed: u64, replicates: u64, n_values: Vec<usize>) -> PyResult<String> {
    experiments::reference_spec(seed, replicates, n_values)
        .to_toml()
        .map_err(value_error)
}

/// Runs the Monte Carlo sweep of a TOML scenario and returns the statistics
/// table as CSV text.
#[pyfunction]
fn sweep(py: Python<'_>, scenario: &str) -> PyResult<String> {
    let spec = ScenarioSpec::from_toml(scenario).map_err(value_error)?;
    let stats = py.detach(|| experiments::monte_carlo(&spec)).map_err(value_error)?;
    let mut out = Vec::new();
    write_stats(&stats, &mut out).map_err(value_error)?;
    String::from_utf8(out).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn gridtrade(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEcParams>()?;
    m.add_class::<PyGridConfig>()?;
    m.add_class::<PyEmesResult>()?;
    m.add_function(wrap_pyfunction!(consumers, m)?)?;
    m.add_function(wrap_pyfunction!(sshpm_solve, m)?)?;
    m.add_function(wrap_pyfunction!(ve_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_prices, m)?)?;
    m.add_function(wrap_pyfunction!(numeric_prices, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_prices, m)?)?;
    m.add_function(wrap_pyfunction!(run_emes, m)?)?;
    m.add_function(wrap_pyfunction!(verify_emes, m)?)?;
    m.add_function(wrap_pyfunction!(reference_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
