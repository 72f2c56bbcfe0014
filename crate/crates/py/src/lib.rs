//! Python bindings for the hosting-capacity toolkit.
//!
//! Structured values (scenarios, verdicts, reports) cross the boundary as
//! plain dicts and lists: inputs may be a JSON string or any object the
//! standard `json` module can serialize.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use hostcap::active::{
    binary_entropy as entropy, hosting_capacity, Budget, EpisodeConfig, PoolItem, QueryStrategy,
    StrategyKind,
};
use hostcap::commands::{solve_kw, write_run};
use hostcap::experiment::{
    build_profiles, label_exhaustive, labeled_entries, run_experiment, run_strategy, Experiment,
    ExperimentConfig, ProfileSpec, SyntheticProfiles,
};
use hostcap::generate::{generate_pool_seeded, Cluster, PoolConfig};
use hostcap::grid::{validate_network, DistFlowSolver, Network, SolverOptions};
use hostcap::learner::Hyper;
use hostcap::oracle::{FeasibilityOracle, OracleConfig};
use hostcap::profiles::{ProfileLibrary, ProfileSet};
use hostcap::scenario::{DerKind, DerTotals, Scenario};

create_exception!(hostcap_py, HostcapError, PyException, "Base class for toolkit errors.");
create_exception!(hostcap_py, DivergedError, HostcapError, "The power flow did not converge.");
create_exception!(hostcap_py, NoFeasibleScenarioError, HostcapError, "No labelled scenario is feasible.");

fn to_pyerr(e: hostcap::Error) -> PyErr {
    use hostcap::Error as E;
    let msg = e.to_string();
    match e {
        E::Diverged(_) => DivergedError::new_err(msg),
        E::NoFeasibleScenario => NoFeasibleScenarioError::new_err(msg),
        E::Io(_) => PyOSError::new_err(msg),
        E::ConfigInvalid(_) | E::InvalidInput(_) | E::DimensionMismatch(_) | E::NotRadial(_) | E::Json(_) | E::Csv(_) => {
            PyValueError::new_err(msg)
        }
        _ => HostcapError::new_err(msg),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| HostcapError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn der_kind(kind: &str) -> PyResult<DerKind> {
    match kind {
        "ev" => Ok(DerKind::Ev),
        "pv" => Ok(DerKind::Pv),
        other => Err(PyValueError::new_err(format!("unknown DER kind `{other}` (expected ev or pv)"))),
    }
}

/// Radial feeder with per-unit line data and a baseline load profile.
#[pyclass(name = "Network", module = "hostcap_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNetwork {
    inner: Network,
}

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyNetwork { inner: Network::load(path).map_err(to_pyerr)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyNetwork { inner: Network::from_json_str(text).map_err(to_pyerr)? })
    }

    #[getter]
    fn buses(&self) -> Vec<u32> {
        self.inner.buses.clone()
    }

    #[getter]
    fn n_buses(&self) -> usize {
        self.inner.n_buses()
    }

    #[getter]
    fn n_lines(&self) -> usize {
        self.inner.lines.len()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    #[getter]
    fn base_kva(&self) -> f64 {
        self.inner.base_kva
    }

    /// Problems found in the network data; empty when valid.
    fn validate(&self) -> Vec<String> {
        validate_network(&self.inner).messages()
    }

    /// Solves one snapshot for per-bus injections in kW / kvar (bus order,
    /// generation positive). `linear=True` drops the loss terms.
    #[pyo3(signature = (p_kw, q_kvar, linear = false))]
    fn solve(&self, py: Python<'_>, p_kw: Vec<f64>, q_kvar: Vec<f64>, linear: bool) -> PyResult<Py<PyAny>> {
        let net = &self.inner;
        let sol = if linear {
            let p: Vec<f64> = p_kw.iter().map(|&x| net.to_pu(x)).collect();
            let q: Vec<f64> = q_kvar.iter().map(|&x| net.to_pu(x)).collect();
            DistFlowSolver::new(net).and_then(|s| s.solve_linear(&p, &q))
        } else {
            solve_kw(net, &p_kw, &q_kvar, SolverOptions::default())
        }
        .map_err(to_pyerr)?;
        let mut value = serde_json::to_value(&sol).map_err(|e| HostcapError::new_err(e.to_string()))?;
        value["v_pu"] = serde_json::json!(sol.voltage_magnitudes());
        to_py(py, &value)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(buses={}, lines={}, steps={})",
            self.inner.n_buses(),
            self.inner.lines.len(),
            self.inner.steps()
        )
    }
}

/// EV and PV behaviour profiles, one row per type.
#[pyclass(name = "Profiles", module = "hostcap_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProfiles {
    inner: ProfileLibrary,
}

#[pymethods]
impl PyProfiles {
    /// Synthetic charging windows and clear-sky PV shapes.
    #[staticmethod]
    #[pyo3(signature = (steps, n_ev_types = 20, n_pv_types = 20, seed = 0))]
    fn synthetic(steps: usize, n_ev_types: usize, n_pv_types: usize, seed: u64) -> PyResult<Self> {
        let spec = ProfileSpec::Synthetic(SyntheticProfiles {
            n_ev_types,
            n_pv_types,
            params: Default::default(),
            seed,
        });
        Ok(PyProfiles { inner: build_profiles(&spec, steps).map_err(to_pyerr)? })
    }

    /// Explicit shapes: `ev[type][t]` in [-1, 0], `pv[type][t]` in [0, 1].
    #[staticmethod]
    fn from_shapes(ev: Vec<Vec<f64>>, pv: Vec<Vec<f64>>) -> PyResult<Self> {
        let ev = ProfileSet::new(DerKind::Ev, ev).map_err(to_pyerr)?;
        let pv = ProfileSet::new(DerKind::Pv, pv).map_err(to_pyerr)?;
        Ok(PyProfiles { inner: ProfileLibrary::new(ev, pv).map_err(to_pyerr)? })
    }

    #[staticmethod]
    #[pyo3(signature = (ev, pv, negate_ev = false))]
    fn from_csv(ev: PathBuf, pv: PathBuf, negate_ev: bool) -> PyResult<Self> {
        let ev = ProfileSet::load_csv(DerKind::Ev, ev, negate_ev).map_err(to_pyerr)?;
        let pv = ProfileSet::load_csv(DerKind::Pv, pv, false).map_err(to_pyerr)?;
        Ok(PyProfiles { inner: ProfileLibrary::new(ev, pv).map_err(to_pyerr)? })
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    fn n_types(&self, kind: &str) -> PyResult<usize> {
        Ok(self.inner.get(der_kind(kind)?).n_types())
    }

    fn shape(&self, kind: &str, type_id: usize) -> PyResult<Vec<f64>> {
        self.inner
            .get(der_kind(kind)?)
            .shapes
            .get(type_id)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("no {kind} profile type {type_id}")))
    }
}

/// Time-series feasibility check of scenarios on one network.
#[pyclass(name = "Oracle", module = "hostcap_py", frozen)]
struct PyOracle {
    network: Network,
    profiles: ProfileLibrary,
    config: OracleConfig,
}

impl PyOracle {
    fn oracle(&self) -> PyResult<FeasibilityOracle<'_>> {
        FeasibilityOracle::new(&self.network, &self.profiles, self.config).map_err(to_pyerr)
    }
}

#[pymethods]
impl PyOracle {
    #[new]
    #[pyo3(signature = (network, profiles, eps_bar = 1.0, early_exit = false))]
    fn new(network: &PyNetwork, profiles: &PyProfiles, eps_bar: f64, early_exit: bool) -> PyResult<Self> {
        let out = PyOracle {
            network: network.inner.clone(),
            profiles: profiles.inner.clone(),
            config: OracleConfig { early_exit, ..OracleConfig::default().with_eps_bar(eps_bar) },
        };
        out.oracle()?;
        Ok(out)
    }

    #[getter]
    fn eps_bar(&self) -> f64 {
        self.config.eps_bar
    }

    /// Verdict dict: `label`, `pass_fraction`, `per_step`, `worst_violations`.
    fn evaluate(&self, py: Python<'_>, scenario: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let scenario: Scenario = from_py(scenario)?;
        scenario.validate(&self.network, &self.profiles).map_err(to_pyerr)?;
        let oracle = self.oracle()?;
        let verdict = py.detach(|| oracle.evaluate(&scenario)).map_err(to_pyerr)?;
        to_py(py, &verdict)
    }

    /// Labels of a list of scenarios, evaluated in parallel.
    fn labels(&self, py: Python<'_>, scenarios: &Bound<'_, PyAny>) -> PyResult<Vec<u8>> {
        let scenarios: Vec<Scenario> = from_py(scenarios)?;
        for s in &scenarios {
            s.validate(&self.network, &self.profiles).map_err(to_pyerr)?;
        }
        let oracle = self.oracle()?;
        let refs: Vec<&Scenario> = scenarios.iter().collect();
        let verdicts = py.detach(|| oracle.evaluate_batch(&refs)).map_err(to_pyerr)?;
        Ok(verdicts.iter().map(|v| v.label).collect())
    }
}

/// A network, profile library and scenario pool described by a config file.
#[pyclass(name = "Experiment", module = "hostcap_py", frozen)]
struct PyExperiment {
    inner: Experiment,
}

#[pymethods]
impl PyExperiment {
    /// Loads a config file; `seed` and `eps_bar` override its values.
    #[staticmethod]
    #[pyo3(signature = (path, seed = None, eps_bar = None))]
    fn load(path: PathBuf, seed: Option<u64>, eps_bar: Option<f64>) -> PyResult<Self> {
        let mut cfg = ExperimentConfig::load(path).map_err(to_pyerr)?;
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        if let Some(eps) = eps_bar {
            cfg.eps_bar = eps;
        }
        Ok(PyExperiment { inner: Experiment::from_config(cfg).map_err(to_pyerr)? })
    }

    #[getter]
    fn n_scenarios(&self) -> usize {
        self.inner.pool.len()
    }

    #[getter]
    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.config)
    }

    #[getter]
    fn network(&self) -> PyNetwork {
        PyNetwork { inner: self.inner.network.clone() }
    }

    #[getter]
    fn profiles(&self) -> PyProfiles {
        PyProfiles { inner: self.inner.profiles.clone() }
    }

    fn pool(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.pool)
    }

    /// Labels the whole pool: `labels`, `pass_fractions`, `feasible_fraction`,
    /// `hc` (None if nothing is feasible) and `violations`.
    fn evaluate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let exp = &self.inner;
        let (ex, hc) = py
            .detach(|| {
                let ex = label_exhaustive(&exp.oracle()?, &exp.pool)?;
                let hc = hosting_capacity(&labeled_entries(&exp.items(), &ex.labels)).ok();
                Ok((ex, hc))
            })
            .map_err(to_pyerr)?;
        let value = serde_json::json!({
            "eps_bar": exp.config.eps_bar,
            "n_scenarios": exp.pool.len(),
            "feasible_fraction": ex.feasible_fraction(),
            "labels": ex.labels,
            "pass_fractions": ex.pass_fractions,
            "hc": hc,
            "violations": ex.violations,
        });
        to_py(py, &value)
    }

    /// One active-learning episode with the oracle as labeller.
    #[pyo3(signature = (strategy = None, beta = 1.0))]
    fn learn(&self, py: Python<'_>, strategy: Option<&str>, beta: f64) -> PyResult<Py<PyAny>> {
        let strategy = match strategy {
            Some(s) => QueryStrategy { kind: s.parse::<StrategyKind>().map_err(to_pyerr)?, beta },
            None => self.inner.config.strategies[0],
        };
        let single = Experiment {
            config: ExperimentConfig { episodes: 1, ..self.inner.config.clone() },
            ..self.inner.clone()
        };
        let res = py
            .detach(|| run_strategy(&single, &single.items(), strategy, None))
            .map_err(to_pyerr)?
            .remove(0);
        let value = serde_json::json!({
            "history": res.history,
            "queried": res.labeled.entries.iter().map(|e| e.scenario_id).collect::<Vec<_>>(),
            "labels": res.labeled.labels(),
            "hc": hosting_capacity(&res.labeled.entries).ok(),
            "theta": res.theta,
        });
        to_py(py, &value)
    }

    /// Full run over every configured strategy; writes the report files
    /// too when `out_dir` is given.
    #[pyo3(signature = (out_dir = None))]
    fn report(&self, py: Python<'_>, out_dir: Option<PathBuf>) -> PyResult<Py<PyAny>> {
        let exp = &self.inner;
        let out = py
            .detach(|| {
                let out = run_experiment(exp)?;
                if let Some(dir) = &out_dir {
                    write_run(&out, dir)?;
                }
                Ok(out)
            })
            .map_err(to_pyerr)?;
        to_py(py, &out.report)
    }
}

/// Generates a scenario pool from a pool config (dict or JSON string).
#[pyfunction]
#[pyo3(signature = (config, network, clusters = None, seed = None))]
fn generate_pool(
    py: Python<'_>,
    config: &Bound<'_, PyAny>,
    network: &PyNetwork,
    clusters: Option<&Bound<'_, PyAny>>,
    seed: Option<u64>,
) -> PyResult<Py<PyAny>> {
    let mut cfg: PoolConfig = from_py(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let clusters: Vec<Cluster> = match clusters {
        Some(c) => from_py(c)?,
        None => Vec::new(),
    };
    let pool = generate_pool_seeded(&cfg, &network.inner, &clusters).map_err(to_pyerr)?;
    to_py(py, &pool)
}

/// Binary entropy (nats) after clipping `p` to [0.01, 0.99].
#[pyfunction]
fn binary_entropy(p: f64) -> f64 {
    entropy(p)
}

/// Runs an active-learning episode over raw feature vectors. `oracle` is
/// called with a pool position and must return 0 or 1; it may be called
/// from several threads.
#[pyfunction]
#[pyo3(signature = (features, oracle, strategy = "entropy", query_size = 10, rounds = 10, seed = 0, beta = 1.0, epochs = 500))]
#[allow(clippy::too_many_arguments)]
fn run_episode(
    py: Python<'_>,
    features: Vec<Vec<f64>>,
    oracle: Py<PyAny>,
    strategy: &str,
    query_size: usize,
    rounds: usize,
    seed: u64,
    beta: f64,
    epochs: usize,
) -> PyResult<Py<PyAny>> {
    let items: Vec<PoolItem> = features
        .into_iter()
        .enumerate()
        .map(|(i, features)| PoolItem { id: i as u64, features, totals: DerTotals::default() })
        .collect();
    let config = EpisodeConfig {
        strategy: QueryStrategy { kind: strategy.parse().map_err(to_pyerr)?, beta },
        budget: Budget::new(query_size, rounds),
        hyper: Hyper { epochs, ..Hyper::default() },
        seed,
    };
    let label = |k: usize| -> hostcap::Result<u8> {
        Python::attach(|py| {
            let v: u8 = oracle
                .call1(py, (k,))
                .and_then(|r| r.extract(py))
                .map_err(|e| hostcap::Error::InvalidInput(format!("oracle callback: {e}")))?;
            if v > 1 {
                return Err(hostcap::Error::InvalidInput(format!("oracle returned {v}, expected 0 or 1")));
            }
            Ok(v)
        })
    };
    let res = py
        .detach(|| hostcap::active::run_episode(&items, label, &config))
        .map_err(to_pyerr)?;
    let value = serde_json::json!({
        "history": res.history,
        "queried": res.labeled.entries.iter().map(|e| e.pool_index).collect::<Vec<_>>(),
        "labels": res.labeled.labels(),
        "theta": res.theta,
    });
    to_py(py, &value)
}

#[pymodule]
fn hostcap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyProfiles>()?;
    m.add_class::<PyOracle>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(generate_pool, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add("HostcapError", m.py().get_type::<HostcapError>())?;
    m.add("DivergedError", m.py().get_type::<DivergedError>())?;
    m.add("NoFeasibleScenarioError", m.py().get_type::<NoFeasibleScenarioError>())?;
    Ok(())
}
