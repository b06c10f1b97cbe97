//! Python bindings for the reslab library: problem construction, single
//! steps, full iterations, companion-field evaluation, spectral
//! classification, hyperparameter bounds, and consistency fits. Everything
//! crosses the boundary as plain Python types (floats, lists, dicts).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::str::FromStr;

use reslab::{
    classify_equilibrium, consistency_exponent, dta_map, field_jacobian_at, iterate,
    map_jacobian_at, parse_objective, random_quadratic, resolution_field, step, step_bounds,
    AlgorithmId, BoundsOptions, HyperParams, Kind, Point, ProblemSpec, ResolutionOrder,
    SpectrumSpec, StopRule,
};

fn py_err(e: reslab::Error) -> PyErr {
    match &e {
        reslab::Error::Dimension { .. }
        | reslab::Error::Domain(_)
        | reslab::Error::NotFound(_)
        | reslab::Error::Unsupported(_)
        | reslab::Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_alg(name: &str) -> PyResult<AlgorithmId> {
    AlgorithmId::from_str(name).map_err(py_err)
}

fn parse_order(name: &str) -> PyResult<ResolutionOrder> {
    match name.to_ascii_lowercase().as_str() {
        "o1" => Ok(ResolutionOrder::O1),
        "os" => Ok(ResolutionOrder::Os),
        other => Err(PyValueError::new_err(format!("order must be 'o1' or 'os', got {other:?}"))),
    }
}

fn params(s: f64, tau: f64, gamma: f64, phi: f64) -> PyResult<HyperParams> {
    HyperParams::new(s, tau, gamma, phi).map_err(py_err)
}

fn point(z: &[f64]) -> PyResult<Point> {
    Point::from_slice(z).map_err(py_err)
}

/// A min-max objective plus metadata (known saddles, invariant ball).
#[pyclass]
struct Problem {
    spec: ProblemSpec,
}

#[pymethods]
impl Problem {
    /// Built-in benchmark problem by id (e.g. "bilinear", "quad_saddle").
    #[staticmethod]
    fn builtin(id: &str) -> PyResult<Self> {
        Ok(Self { spec: reslab::builtin(id).map_err(py_err)? })
    }

    /// 2-D objective from a formula in x and y, e.g. "x^2 - y^4 + x*y".
    #[staticmethod]
    fn expression(src: &str) -> PyResult<Self> {
        let objective = parse_objective(src).map_err(py_err)?;
        Ok(Self {
            spec: ProblemSpec {
                id: format!("expr:{src}"),
                objective,
                known_saddles: vec![],
                invariant_ball: None,
                notes: "user-supplied 2-D expression".into(),
            },
        })
    }

    /// Seeded random quadratic with an n+m dimensional saddle at the origin.
    #[staticmethod]
    fn random_quadratic(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        Ok(Self { spec: random_quadratic(n, m, seed, &SpectrumSpec::default()).map_err(py_err)? })
    }

    #[getter]
    fn id(&self) -> String {
        self.spec.id.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.objective.dim()
    }

    fn value(&self, z: Vec<f64>) -> PyResult<f64> {
        let p = point(&z)?;
        self.spec.objective.value(p.coords()).map_err(py_err)
    }

    /// Gradient of the objective.
    fn grad(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = point(&z)?;
        Ok(self.spec.objective.grad(p.coords()).map_err(py_err)?.iter().cloned().collect())
    }

    /// Saddle-point field F(z) = [grad_x f; -grad_y f].
    fn saddle_field(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = point(&z)?;
        Ok(reslab::eval_f(&self.spec.objective, &p).map_err(py_err)?.iter().cloned().collect())
    }

    fn __repr__(&self) -> String {
        format!("Problem(id={:?}, dim={})", self.spec.id, self.spec.objective.dim())
    }
}

/// One algorithm step from z. Returns the next iterate as a list.
#[pyfunction]
#[pyo3(signature = (problem, algorithm, z, s=0.1, tau=1.0, gamma=1.0, phi=1.0))]
fn step_once(
    problem: &Problem,
    algorithm: &str,
    z: Vec<f64>,
    s: f64,
    tau: f64,
    gamma: f64,
    phi: f64,
) -> PyResult<Vec<f64>> {
    let alg = parse_alg(algorithm)?;
    let p = params(s, tau, gamma, phi)?;
    let out = step(alg, &problem.spec.objective, &p, &point(&z)?).map_err(py_err)?;
    Ok(out.z_next.coords().iter().cloned().collect())
}

/// Iterate an algorithm until the gradient tolerance, iteration budget, or
/// divergence guard triggers. Returns a dict with stamps, states, and the
/// termination reason.
#[pyfunction]
#[pyo3(signature = (problem, algorithm, z0, s=0.1, tau=1.0, gamma=1.0, phi=1.0,
                    max_iters=10_000, tol=1e-10, stride=1))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    problem: &Problem,
    algorithm: &str,
    z0: Vec<f64>,
    s: f64,
    tau: f64,
    gamma: f64,
    phi: f64,
    max_iters: usize,
    tol: f64,
    stride: usize,
) -> PyResult<Py<PyDict>> {
    let alg = parse_alg(algorithm)?;
    let p = params(s, tau, gamma, phi)?;
    let stop = StopRule {
        max_iters,
        tol_f: Some(tol),
        target_point: None,
        target_set: None,
        divergence_radius: Some(1e6),
        stride,
    };
    let traj = iterate(alg, &problem.spec.objective, &p, &point(&z0)?, &stop).map_err(py_err)?;

    let states: Vec<Vec<f64>> =
        traj.states.iter().map(|z| z.iter().cloned().collect()).collect();
    let d = PyDict::new(py);
    d.set_item("stamps", traj.stamps)?;
    d.set_item("states", states)?;
    d.set_item("termination", format!("{:?}", traj.termination))?;
    Ok(d.into())
}

/// Evaluate an algorithm's companion vector field ("o1" or "os") at z.
#[pyfunction]
#[pyo3(signature = (problem, algorithm, order, z, s=0.1, tau=1.0, gamma=1.0, phi=1.0))]
fn field_eval(
    problem: &Problem,
    algorithm: &str,
    order: &str,
    z: Vec<f64>,
    s: f64,
    tau: f64,
    gamma: f64,
    phi: f64,
) -> PyResult<Vec<f64>> {
    let alg = parse_alg(algorithm)?;
    let p = params(s, tau, gamma, phi)?;
    let field = resolution_field(alg, parse_order(order)?, &problem.spec.objective, &p)
        .map_err(py_err)?;
    Ok(field.eval(point(&z)?.coords()).map_err(py_err)?.iter().cloned().collect())
}

/// Classify an equilibrium of the step map ("dta") or a companion field
/// ("o1"/"os"). Returns verdict, margin, and the eigenvalues.
#[pyfunction]
#[pyo3(signature = (problem, algorithm, order, at, s=0.1, tau=1.0, gamma=1.0, phi=1.0))]
fn classify(
    py: Python<'_>,
    problem: &Problem,
    algorithm: &str,
    order: &str,
    at: Vec<f64>,
    s: f64,
    tau: f64,
    gamma: f64,
    phi: f64,
) -> PyResult<Py<PyDict>> {
    let alg = parse_alg(algorithm)?;
    let p = params(s, tau, gamma, phi)?;
    let obj = &problem.spec.objective;
    let z = point(&at)?;
    let report = if order.eq_ignore_ascii_case("dta") {
        let map = dta_map(alg, obj, &p);
        classify_equilibrium(Kind::Discrete, &map_jacobian_at(map, &z).map_err(py_err)?)
    } else {
        let field = resolution_field(alg, parse_order(order)?, obj, &p).map_err(py_err)?;
        classify_equilibrium(Kind::Continuous, &field_jacobian_at(&field, &z).map_err(py_err)?)
    }
    .map_err(py_err)?;

    let eigs: Vec<(f64, f64)> = report.eigenvalues.iter().map(|l| (l.re, l.im)).collect();
    let d = PyDict::new(py);
    d.set_item("verdict", format!("{:?}", report.verdict))?;
    d.set_item("margin", report.margin)?;
    d.set_item("kind", format!("{:?}", report.kind))?;
    d.set_item("eigenvalues", eigs)?;
    Ok(d.into())
}

/// Hyperparameter bounds at a saddle. Infinite bounds come back as
/// float('inf'); absent ones as None.
#[pyfunction]
#[pyo3(signature = (problem, algorithm, at, s=0.1, tau=1.0, gamma=1.0, phi=1.0, samples=10_000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn bounds(
    py: Python<'_>,
    problem: &Problem,
    algorithm: &str,
    at: Vec<f64>,
    s: f64,
    tau: f64,
    gamma: f64,
    phi: f64,
    samples: usize,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let alg = parse_alg(algorithm)?;
    let p = params(s, tau, gamma, phi)?;
    let opts = BoundsOptions { samples, seed, ..Default::default() };
    let report =
        step_bounds(alg, &problem.spec.objective, &point(&at)?, &p, &opts).map_err(py_err)?;

    let d = PyDict::new(py);
    d.set_item("algorithm", alg.to_string())?;
    d.set_item("s_max_stability", report.s_max_stability)?;
    d.set_item("s_max_escape", report.s_max_escape)?;
    d.set_item("gamma_range", report.gamma_range)?;
    d.set_item("phi_min", report.phi_min)?;
    d.set_item("lipschitz_l", report.lipschitz_l)?;
    d.set_item("effective_s_max", report.effective_s_max())?;
    d.set_item("provenance", report.provenance)?;
    Ok(d.into())
}

/// Fitted slope of |one step - time-s flow| vs s on a log-log grid, plus the
/// raw (s, error) pairs.
#[pyfunction]
#[pyo3(signature = (problem, algorithm, order, z0, s_grid=None, tau=1.0, gamma=1.0, phi=1.0))]
fn consistency_slope(
    py: Python<'_>,
    problem: &Problem,
    algorithm: &str,
    order: &str,
    z0: Vec<f64>,
    s_grid: Option<Vec<f64>>,
    tau: f64,
    gamma: f64,
    phi: f64,
) -> PyResult<Py<PyDict>> {
    let alg = parse_alg(algorithm)?;
    let p = params(0.1, tau, gamma, phi)?;
    let grid = s_grid.unwrap_or_else(reslab::odes::default_s_grid);
    let report = consistency_exponent(
        alg,
        parse_order(order)?,
        &problem.spec.objective,
        &p,
        &point(&z0)?,
        &grid,
    )
    .map_err(py_err)?;

    let d = PyDict::new(py);
    d.set_item("slope", report.slope)?;
    d.set_item("errors", report.errors)?;
    Ok(d.into())
}

#[pymodule]
fn reslab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_function(wrap_pyfunction!(step_once, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(field_eval, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(consistency_slope, m)?)?;
    Ok(())
}
