//! Python bindings: instances, exact solving, labels, features, the oracle
//! and the tabu search.

use std::path::PathBuf;
use std::time::Duration;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use jspq_core::exact::{brute_force_optimal, solve_optimal, ExactConfig, DEFAULT_ENUMERATION_CAP};
use jspq_core::features::{build_input, compute_features};
use jspq_core::instances::{generate, parse_standard, read_standard, write_standard, GenSpec};
use jspq_core::labeling::{build_dataset, quality as label_quality, LabelConfig};
use jspq_core::oracle::{self as core_oracle, OracleConfig, OracleModel};
use jspq_core::tabu::{self, OracleScorer, PermutationScorer, SearchConfig};
use jspq_core::{evaluate, Error, OpId, Operation, Time};
use rand::SeedableRng;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

type Perm = Vec<(usize, usize)>;

fn ops(perm: &[(usize, usize)]) -> Vec<OpId> {
    perm.iter().map(|&(j, s)| OpId::new(j, s)).collect()
}

fn pairs(perm: &[OpId]) -> Perm {
    perm.iter().map(|o| (o.job, o.step)).collect()
}

/// A job-shop instance. Operations are addressed as `(job, step)` pairs.
#[pyclass(frozen)]
struct Instance {
    inner: jspq_core::Instance,
}

#[pymethods]
impl Instance {
    /// Build from rows of `(machine, duration)` pairs, one row per job.
    #[new]
    #[pyo3(signature = (rows, n_machines=None, id="instance"))]
    fn new(rows: Vec<Vec<(usize, Time)>>, n_machines: Option<usize>, id: &str) -> PyResult<Self> {
        let m = n_machines.unwrap_or_else(|| rows.iter().flatten().map(|&(m, _)| m + 1).max().unwrap_or(0));
        let routes =
            rows.into_iter().map(|r| r.into_iter().map(|(machine, duration)| Operation { machine, duration }).collect()).collect();
        let inner = jspq_core::Instance::new(id, m, routes).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Parse the standard text format.
    #[staticmethod]
    #[pyo3(signature = (text, id="instance"))]
    fn parse(text: &str, id: &str) -> PyResult<Self> {
        Ok(Self { inner: parse_standard(text, id).map_err(to_py)? })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: read_standard(&path).map_err(to_py)? })
    }

    /// Random instance with every job visiting all machines.
    #[staticmethod]
    #[pyo3(signature = (jobs, machines, p_min=1, p_max=99, seed=0))]
    fn generate(jobs: usize, machines: usize, p_min: Time, p_max: Time, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: generate(&GenSpec::new(jobs, machines, p_min, p_max, seed)).map_err(to_py)? })
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn n_jobs(&self) -> usize {
        self.inner.n_jobs()
    }

    #[getter]
    fn n_machines(&self) -> usize {
        self.inner.n_machines()
    }

    fn to_text(&self) -> String {
        write_standard(&self.inner)
    }

    /// Operations of `machine` in job order.
    fn machine_ops(&self, machine: usize) -> PyResult<Perm> {
        if machine >= self.inner.n_machines() {
            return Err(PyValueError::new_err(format!("no machine {machine}")));
        }
        Ok(pairs(self.inner.machine_ops(machine)))
    }

    /// Makespan of one permutation per machine; raises on a cyclic order.
    fn makespan(&self, perms: Vec<Perm>) -> PyResult<Time> {
        let perms: Vec<Vec<OpId>> = perms.iter().map(|p| ops(p)).collect();
        Ok(evaluate(&self.inner, &perms).map_err(to_py)?.makespan())
    }

    /// The 18-column feature table in `(job, step)` order.
    fn features(&self) -> Vec<Vec<f64>> {
        let table = compute_features(&self.inner);
        table.matrix().iter_rows().map(<[f64]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!("Instance(id={:?}, jobs={}, machines={})", self.inner.id(), self.inner.n_jobs(), self.inner.n_machines())
    }
}

/// Exact solve. Returns `(status, makespan, perms)`.
#[pyfunction]
#[pyo3(signature = (instance, time_limit=60.0))]
fn solve(py: Python<'_>, instance: &Instance, time_limit: f64) -> PyResult<(String, Time, Vec<Perm>)> {
    if !(time_limit > 0.0) {
        return Err(PyValueError::new_err("time_limit must be positive"));
    }
    let cfg = ExactConfig::default().with_time_limit(Duration::from_secs_f64(time_limit));
    let r = py.detach(|| solve_optimal(&instance.inner, &cfg)).map_err(to_py)?;
    let status = if r.status.is_optimal() { "optimal".to_string() } else { r.status.to_string() };
    Ok((status, r.makespan, r.solution.perms().iter().map(|p| pairs(p)).collect()))
}

/// Optimum by full enumeration, or `None` if nothing is feasible.
#[pyfunction]
fn brute_force(instance: &Instance) -> PyResult<Option<Time>> {
    Ok(brute_force_optimal(&instance.inner, DEFAULT_ENUMERATION_CAP).map_err(to_py)?.makespan)
}

/// `1 - tanh(c / c_opt - 1)`.
#[pyfunction]
fn quality(c_max: Time, c_max_opt: Time) -> PyResult<f64> {
    if c_max_opt == 0 {
        return Err(PyValueError::new_err("c_max_opt must be positive"));
    }
    Ok(label_quality(c_max, c_max_opt))
}

/// Labeled samples as dicts with `instance_id, machine, perm, kind,
/// c_max_pi, c_max_opt, y`.
#[pyfunction]
#[pyo3(signature = (instances, random=128, seed=0, time_limit=60.0))]
fn label<'py>(
    py: Python<'py>,
    instances: Vec<PyRef<'py, Instance>>,
    random: usize,
    seed: u64,
    time_limit: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    if !(time_limit > 0.0) {
        return Err(PyValueError::new_err("time_limit must be positive"));
    }
    let insts: Vec<jspq_core::Instance> = instances.iter().map(|i| i.inner.clone()).collect();
    let cfg = LabelConfig {
        per_machine_random: random,
        seed,
        solver: ExactConfig::default().with_time_limit(Duration::from_secs_f64(time_limit)),
    };
    let dataset = py.detach(|| build_dataset(&insts, &cfg));
    dataset
        .samples
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("instance_id", &s.instance_id)?;
            d.set_item("machine", s.machine)?;
            d.set_item("perm", pairs(&s.perm))?;
            d.set_item("kind", format!("{:?}", s.kind).to_lowercase())?;
            d.set_item("c_max_pi", s.c_max_pi)?;
            d.set_item("c_max_opt", s.c_max_opt)?;
            d.set_item("y", s.y)?;
            Ok(d)
        })
        .collect()
}

/// The recurrent permutation-quality oracle.
#[pyclass(frozen)]
struct Oracle {
    inner: OracleModel,
}

#[pymethods]
impl Oracle {
    /// A freshly initialized, untrained model.
    #[new]
    #[pyo3(signature = (hidden=32, dropout=0.3, seed=0))]
    fn new(hidden: usize, dropout: f64, seed: u64) -> PyResult<Self> {
        let cfg = OracleConfig { hidden, dropout, ..OracleConfig::default() };
        let inner = OracleModel::new(cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: core_oracle::load_weights(&path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        core_oracle::save_weights(&path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    /// Predicted quality of `perm` on `machine` of `instance`.
    fn predict(&self, instance: &Instance, machine: usize, perm: Perm) -> PyResult<f64> {
        let perm = ops(&perm);
        instance.inner.check_machine_perm(machine, &perm).map_err(to_py)?;
        let x = build_input(&compute_features(&instance.inner), &perm);
        Ok(self.inner.forward(&x).map_err(to_py)?.y_hat())
    }
}

/// Tabu search from a seeded random schedule; pass an oracle for the
/// filtered variant. Returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (instance, max_iter=500, restarts=1, tenure=10, seed=0, oracle=None, reference=None, time_limit=None))]
#[allow(clippy::too_many_arguments)]
fn search<'py>(
    py: Python<'py>,
    instance: &Instance,
    max_iter: usize,
    restarts: usize,
    tenure: usize,
    seed: u64,
    oracle: Option<&Oracle>,
    reference: Option<Time>,
    time_limit: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = SearchConfig {
        max_nonimproving: max_iter,
        restarts,
        tabu_tenure: tenure,
        seed,
        time_limit: time_limit.map(Duration::from_secs_f64),
        strict_filter: false,
    };
    let scorer = oracle.map(|o| OracleScorer::new(&o.inner, &instance.inner)).transpose().map_err(to_py)?;
    let report = py
        .detach(|| tabu::run(&instance.inner, &cfg, scorer.as_ref().map(|s| s as &dyn PermutationScorer), reference))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("initial_makespan", report.initial_makespan)?;
    d.set_item("best_makespan", report.best_makespan)?;
    d.set_item("best_perms", report.best_perms.iter().map(|p| pairs(p)).collect::<Vec<_>>())?;
    d.set_item("gap", report.gap)?;
    d.set_item("iterations", report.iterations)?;
    d.set_item("restarts_used", report.restarts_used)?;
    d.set_item("oracle_calls", report.oracle_calls)?;
    d.set_item("filter_fallbacks", report.filter_fallbacks)?;
    d.set_item("elapsed_ms", report.elapsed_ms)?;
    Ok(d)
}

#[pymodule]
fn jspq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Oracle>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(quality, m)?)?;
    m.add_function(wrap_pyfunction!(label, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    Ok(())
}
