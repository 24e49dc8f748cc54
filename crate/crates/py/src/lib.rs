//! Python bindings. Structured results are returned as plain dicts and lists.

use liquar_core::analytic::{gim1_steady_state, pk_mean_workload as pk, solve_optimal as solve};
use liquar_core::harness::{preset as lookup, preset_names as names, regret_curve, replicate as rep, replicate_pto};
use liquar_core::pto::{run_ppto as ppto, sensitivity_misspecification, PtoParams};
use liquar_core::{Error, ExperimentConfig, FeasibleBox, UnitDist};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Fit(_) | Error::Replication { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// A validated experiment configuration.
#[pyclass(name = "Config", module = "liquar", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig(ExperimentConfig);

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ExperimentConfig::from_toml_str(text).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ExperimentConfig::load(path).map(Self).map_err(err)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.0.to_toml_string().map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.0.name
    }

    #[getter]
    fn total_time(&self) -> f64 {
        self.0.schedule.total_time()
    }

    fn __repr__(&self) -> String {
        format!("Config({:?})", self.0.name)
    }
}

#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    names().to_vec()
}

/// All configurations of a named preset.
#[pyfunction]
fn preset(name: &str) -> PyResult<Vec<PyConfig>> {
    Ok(lookup(name).map_err(err)?.configs.into_iter().map(PyConfig).collect())
}

/// Mean stationary workload of an M/G/1 queue in work units.
#[pyfunction]
#[pyo3(signature = (lam, mu, scv = 1.0))]
fn pk_mean_workload(lam: f64, mu: f64, scv: f64) -> PyResult<f64> {
    pk(lam, mu, scv).map_err(err)
}

/// GI/M/1 stationary quantities; `interarrival` is a dict such as `{"family": "erlang", "k": 2}`.
#[pyfunction]
fn gim1<'py>(py: Python<'py>, interarrival: &Bound<'py, PyAny>, lam: f64, mu: f64) -> PyResult<Bound<'py, PyAny>> {
    let dist: UnitDist = from_py(interarrival)?;
    to_py(py, &gim1_steady_state(&dist, lam, mu).map_err(err)?)
}

#[pyfunction]
fn solve_optimal<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let m = &config.0.model;
    to_py(py, &solve(&m.objective(), &m.bounds).map_err(err)?)
}

/// One LiQUAR run; returns the summary plus the per-iteration trajectory.
#[pyfunction]
#[pyo3(signature = (config, seed = 0))]
fn run_liquar<'py>(py: Python<'py>, config: &PyConfig, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = &config.0;
    let opt = solve(&cfg.model.objective(), &cfg.model.bounds).map_err(err)?;
    let run = py
        .detach(|| liquar_core::run_liquar(&cfg.model, &cfg.schedule, cfg.initial, cfg.w0, seed))
        .map_err(err)?;
    let report = regret_curve(&run, opt.f);
    let out = serde_json::json!({
        "seed": seed,
        "optimum": opt,
        "final_policy": run.final_policy,
        "trajectory": run.trajectory(),
        "final_regret": report.final_regret(),
        "final_relative_regret": report.final_relative(),
        "time": report.time,
        "regret": report.regret,
    });
    to_py(py, &out)
}

/// One predict-then-optimize run over the configured horizon.
#[pyfunction]
#[pyo3(signature = (config, theta, seed = 0, m = None))]
fn run_ppto<'py>(py: Python<'py>, config: &PyConfig, theta: f64, seed: u64, m: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = &config.0;
    let settings = cfg.pto.as_ref();
    let params = PtoParams {
        explore_mu: settings.and_then(|s| s.explore_mu),
        ..PtoParams::new(
            settings.map(|s| s.family).unwrap_or(cfg.model.demand.family()),
            theta,
            m.or(settings.map(|s| s.m)).unwrap_or(3),
            cfg.schedule.total_time(),
        )
    };
    let opt = solve(&cfg.model.objective(), &cfg.model.bounds).map_err(err)?;
    let res = py.detach(|| ppto(&cfg.model, &params, seed)).map_err(err)?;
    let report = regret_curve(&res, opt.f);
    let mut out = res.summary_json();
    out["optimum"] = serde_json::to_value(opt).unwrap_or_default();
    out["final_regret"] = report.final_regret().into();
    out["final_relative_regret"] = report.final_relative().into();
    to_py(py, &out)
}

/// Replicated LiQUAR runs, or pPTO runs when `theta` is given.
#[pyfunction]
#[pyo3(signature = (config, runs, seed0 = 0, jobs = 0, theta = None))]
fn replicate<'py>(py: Python<'py>, config: &PyConfig, runs: usize, seed0: u64, jobs: usize, theta: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = &config.0;
    let report = py
        .detach(|| match theta {
            Some(t) => replicate_pto(cfg, t, runs, seed0, jobs),
            None => rep(cfg, runs, seed0, jobs),
        })
        .map_err(err)?;
    to_py(py, &report.summary_json())
}

/// Profit loss from planning with demand deflated by `epsilon`.
#[pyfunction]
#[pyo3(signature = (config, epsilon, h0_list, search_box = None))]
fn sensitivity<'py>(
    py: Python<'py>,
    config: &PyConfig,
    epsilon: f64,
    h0_list: Vec<f64>,
    search_box: Option<[f64; 4]>,
) -> PyResult<Bound<'py, PyAny>> {
    let search = match search_box {
        Some([a, b, c, d]) => FeasibleBox::new(a, b, c, d).map_err(err)?,
        None => config.0.model.bounds,
    };
    let rows = sensitivity_misspecification(&config.0.model.objective(), &search, epsilon, &h0_list).map_err(err)?;
    to_py(py, &rows)
}

#[pymodule]
fn liquar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(pk_mean_workload, m)?)?;
    m.add_function(wrap_pyfunction!(gim1, m)?)?;
    m.add_function(wrap_pyfunction!(solve_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(run_liquar, m)?)?;
    m.add_function(wrap_pyfunction!(run_ppto, m)?)?;
    m.add_function(wrap_pyfunction!(replicate, m)?)?;
    m.add_function(wrap_pyfunction!(sensitivity, m)?)?;
    Ok(())
}
