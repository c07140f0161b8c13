//! Python bindings: parameters, censuses, limit cycles and bifurcation scans.
//!
//! Structured results come back as small read-only classes; anything with a
//! serde representation also offers `to_json()`.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use qbl_core::bifurcation::{self, BifurcationEvent, StepPolicy};
use qbl_core::dynamics::{self, CycleSearch, LimitCycle, ReturnOptions};
use qbl_core::equilibria::{self, Verdict};
use qbl_core::integrate::IntegratorOptions;
use qbl_core::model;
use qbl_core::{fixtures, scenario, Error, Parameter, PhasePoint};

create_exception!(qbl, NumericalError, PyException, "Root finding or integration failed.");
create_exception!(qbl, VerificationError, PyException, "An internal consistency check failed.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParams(_) | Error::Config(_) | Error::Pole(_) | Error::Io(_) => PyValueError::new_err(e.to_string()),
        Error::Assertion(_) | Error::InconsistentStability { .. } => VerificationError::new_err(e.to_string()),
        _ => NumericalError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_param(name: &str) -> PyResult<Parameter> {
    name.parse().map_err(to_py)
}

fn kebab<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

#[pyclass(name = "ModelParams", module = "qbl", frozen, skip_from_py_object, eq)]
#[derive(Clone, Copy, PartialEq)]
pub struct PyParams(model::ModelParams);

#[pymethods]
impl PyParams {
    /// `polynomial=True` accepts any real beta (the response may then have
    /// poles).
    #[new]
    #[pyo3(signature = (alpha, beta, delta, lambda_, mu, gamma = 0.0, polynomial = false))]
    fn new(alpha: f64, beta: f64, delta: f64, lambda_: f64, mu: f64, gamma: f64, polynomial: bool) -> PyResult<Self> {
        let p = if polynomial {
            model::ModelParams::polynomial(alpha, beta, delta, lambda_, mu)
        } else {
            model::ModelParams::new(alpha, beta, delta, lambda_, mu)
        };
        Ok(PyParams(p.and_then(|p| p.with_gamma(gamma)).map_err(to_py)?))
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta()
    }
    #[getter(lambda_)]
    fn lambda(&self) -> f64 {
        self.0.lambda()
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu()
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    /// "quadratic", "cubic" or "quartic".
    #[getter]
    fn stage(&self) -> String {
        kebab(&self.0.stage())
    }

    fn with_gamma(&self, gamma: f64) -> PyResult<Self> {
        Ok(PyParams(self.0.with_gamma(gamma).map_err(to_py)?))
    }

    /// Copy with `param` ("alpha", "beta" or "gamma") set to `value`.
    fn with_value(&self, param: &str, value: f64) -> PyResult<Self> {
        Ok(PyParams(self.0.with(parse_param(param)?, value).map_err(to_py)?))
    }

    #[pyo3(signature = (x, y, rotated = true))]
    fn field(&self, x: f64, y: f64, rotated: bool) -> (f64, f64) {
        let f = model::field(&self.0, PhasePoint::new(x, y), rotated);
        (f.dx, f.dy)
    }

    /// `((Px, Py), (Qx, Qy))`.
    #[pyo3(signature = (x, y, rotated = true))]
    fn jacobian(&self, x: f64, y: f64, rotated: bool) -> ((f64, f64), (f64, f64)) {
        let j = model::eval_jacobian(&self.0, PhasePoint::new(x, y), rotated);
        ((j.pxx, j.pxy), (j.qyx, j.qyy))
    }

    /// `(d_alpha, d_beta, d_gamma)`.
    fn rotation_determinants(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let r = model::rotation_determinants(&self.0, PhasePoint::new(x, y));
        (r.d_alpha, r.d_beta, r.d_gamma)
    }

    fn ellipse_residual(&self, x: f64, y: f64) -> f64 {
        model::ellipse_residual(&self.0, PhasePoint::new(x, y))
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "ModelParams(alpha={}, beta={}, delta={}, lambda_={}, mu={}, gamma={})",
            p.alpha(),
            p.beta(),
            p.delta(),
            p.lambda(),
            p.mu(),
            p.gamma()
        )
    }
}

#[pyclass(name = "Equilibrium", module = "qbl", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyEquilibrium(equilibria::Equilibrium);

#[pymethods]
impl PyEquilibrium {
    #[getter]
    fn x(&self) -> f64 {
        self.0.location.x
    }
    #[getter]
    fn y(&self) -> f64 {
        self.0.location.y
    }
    #[getter]
    fn kind(&self) -> String {
        kebab(&self.0.kind)
    }
    #[getter]
    fn index(&self) -> i32 {
        self.0.index
    }
    #[getter]
    fn contour_index(&self) -> Option<i32> {
        self.0.contour_index
    }
    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }
    #[getter]
    fn eigenvalues(&self) -> ((f64, f64), (f64, f64)) {
        let [a, b] = self.0.eigenvalues;
        ((a.re, a.im), (b.re, b.im))
    }
    fn __repr__(&self) -> String {
        format!("Equilibrium({}, {}, {})", self.0.location.x, self.0.location.y, self.kind())
    }
}

#[pyclass(name = "InfiniteSingularity", module = "qbl", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyInfinite(qbl_core::compactification::InfiniteSingularity);

#[pymethods]
impl PyInfinite {
    #[getter]
    fn chart(&self) -> String {
        self.0.chart.to_string()
    }
    #[getter]
    fn coordinate(&self) -> f64 {
        self.0.coordinate
    }
    #[getter]
    fn kind(&self) -> String {
        kebab(&self.0.kind)
    }
    #[getter]
    fn multiplicity(&self) -> usize {
        self.0.multiplicity
    }
    fn __repr__(&self) -> String {
        format!("InfiniteSingularity({}, {}, {})", self.chart(), self.0.coordinate, self.kind())
    }
}

#[pyclass(name = "Census", module = "qbl", frozen, skip_from_py_object)]
pub struct PyCensus(equilibria::Census);

fn verdict_pair(v: &Verdict) -> (String, String) {
    match v {
        Verdict::Pass(d) => ("pass".into(), d.clone()),
        Verdict::Fail(d) => ("fail".into(), d.clone()),
        Verdict::Inapplicable(d) => ("inapplicable".into(), d.clone()),
    }
}

#[pymethods]
impl PyCensus {
    #[getter]
    fn params(&self) -> PyParams {
        PyParams(self.0.params)
    }
    #[getter]
    fn finite(&self) -> Vec<PyEquilibrium> {
        self.0.finite.iter().cloned().map(PyEquilibrium).collect()
    }
    #[getter]
    fn infinite(&self) -> Vec<PyInfinite> {
        self.0.infinite.iter().cloned().map(PyInfinite).collect()
    }
    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.clone()
    }

    /// Verdicts of the index identity, the saddle/antisaddle alternation
    /// and the Berlinskii check: `{name: (verdict, detail)}`.
    fn verify(&self) -> BTreeMap<String, (String, String)> {
        let r = equilibria::verify_configuration(&self.0);
        BTreeMap::from([
            ("index_identity".to_string(), verdict_pair(&r.index_identity)),
            ("alternation".to_string(), verdict_pair(&r.alternation)),
            ("berlinskii".to_string(), verdict_pair(&r.berlinskii)),
        ])
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }

    fn __len__(&self) -> usize {
        self.0.finite.len() + self.0.infinite.len()
    }
}

#[pyclass(name = "LimitCycle", module = "qbl", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyCycle(LimitCycle);

#[pymethods]
impl PyCycle {
    #[getter]
    fn s_star(&self) -> f64 {
        self.0.s_star
    }
    #[getter]
    fn period(&self) -> f64 {
        self.0.period
    }
    #[getter]
    fn derivative(&self) -> f64 {
        self.0.derivative
    }
    #[getter]
    fn divergence_multiplier(&self) -> f64 {
        self.0.divergence_multiplier
    }
    #[getter]
    fn stability(&self) -> String {
        self.0.stability.to_string()
    }
    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }
    #[getter]
    fn amplitude(&self) -> f64 {
        self.0.amplitude()
    }
    /// Section anchor `(x, y)`.
    #[getter]
    fn anchor(&self) -> (f64, f64) {
        (self.0.section.anchor.x, self.0.section.anchor.y)
    }
    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        self.0.loop_points.iter().map(|q| (q.x, q.y)).collect()
    }
    fn encloses(&self, x: f64, y: f64) -> bool {
        self.0.encloses(PhasePoint::new(x, y))
    }
    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
    fn __repr__(&self) -> String {
        format!("LimitCycle(s_star={}, period={}, {})", self.0.s_star, self.0.period, self.0.stability)
    }
}

#[pyclass(name = "BifurcationEvent", module = "qbl", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyEvent(BifurcationEvent);

#[pymethods]
impl PyEvent {
    #[getter]
    fn kind(&self) -> String {
        kebab(&self.0.kind)
    }
    #[getter]
    fn parameter(&self) -> String {
        self.0.parameter.to_string()
    }
    #[getter]
    fn value(&self) -> f64 {
        self.0.value
    }
    #[getter]
    fn subject(&self) -> String {
        self.0.subject.clone()
    }
    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }
    #[getter]
    fn diagnostics(&self) -> BTreeMap<String, f64> {
        self.0.diagnostics.clone()
    }
    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
    fn __repr__(&self) -> String {
        format!("BifurcationEvent({}, {}={})", self.kind(), self.0.parameter, self.0.value)
    }
}

#[pyfunction]
fn census(p: &PyParams) -> PyResult<PyCensus> {
    Ok(PyCensus(equilibria::full_census(&p.0).map_err(to_py)?))
}

fn search(grid: usize, t_limit: f64) -> CycleSearch {
    CycleSearch { grid, returns: ReturnOptions { t_limit, ..Default::default() }, ..Default::default() }
}

/// Distinct limit cycles around the finite antisaddles, each with its
/// stability checked two ways.
#[pyfunction]
#[pyo3(signature = (p, section_length = 3.0, grid = 32, t_limit = 400.0))]
fn find_cycles(p: &PyParams, section_length: f64, grid: usize, t_limit: f64) -> PyResult<Vec<PyCycle>> {
    let c = equilibria::full_census(&p.0).map_err(to_py)?;
    let (cycles, _) = scenario::limit_cycles(&p.0, &c, true, section_length, &search(grid, t_limit));
    Ok(cycles.into_iter().map(PyCycle).collect())
}

/// Orbit samples `(t, x, y)` of the (rotated) field.
#[pyfunction]
#[pyo3(signature = (p, x, y, t, rotated = true, rtol = 1e-10, atol = 1e-12))]
fn integrate(p: &PyParams, x: f64, y: f64, t: f64, rotated: bool, rtol: f64, atol: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let opts = IntegratorOptions::default().with_tolerances(rtol, atol);
    let o = dynamics::integrate(&p.0, PhasePoint::new(x, y), t, rotated, &opts).map_err(to_py)?;
    Ok(o.states.iter().map(|(t, q)| (*t, q.x, q.y)).collect())
}

#[pyfunction]
fn hopf_gamma(p: &PyParams, x: f64, y: f64) -> Option<f64> {
    bifurcation::hopf_gamma_closed_form(&p.0, PhasePoint::new(x, y))
}

/// Hopf points of every finite antisaddle for `param` in `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (p, lo, hi, param = "gamma"))]
fn hopf_scan(p: &PyParams, lo: f64, hi: f64, param: &str) -> PyResult<Vec<PyEvent>> {
    let param = parse_param(param)?;
    let c = equilibria::full_census(&p.0).map_err(to_py)?;
    let mut out = Vec::new();
    for e in c.antisaddles() {
        out.extend(bifurcation::hopf_detect(&p.0, e, param, (lo, hi)).map_err(to_py)?.into_iter().map(PyEvent));
    }
    Ok(out)
}

/// Follows `cycle` in `param` toward `bound`. Returns the samples
/// `(value, cycle)` and the termination reason.
#[pyfunction]
#[pyo3(signature = (p, cycle, bound, param = "gamma", period_cap = None))]
fn continue_cycle(
    p: &PyParams,
    cycle: &PyCycle,
    bound: f64,
    param: &str,
    period_cap: Option<f64>,
) -> PyResult<(Vec<(f64, PyCycle)>, String)> {
    let param = parse_param(param)?;
    let c = equilibria::full_census(&p.0).map_err(to_py)?;
    let saddles: Vec<PhasePoint> = c.saddles().map(|e| e.location).collect();
    let mut policy = StepPolicy::toward(p.0.get(param), bound);
    if let Some(cap) = period_cap {
        policy.period_cap = cap;
    }
    let b = bifurcation::continue_cycle(&p.0, &cycle.0, param, &policy, true, &saddles).map_err(to_py)?;
    Ok((b.samples.into_iter().map(|(v, c)| (v, PyCycle(c))).collect(), kebab(&b.termination)))
}

/// Separatrix-loop events of every first-quadrant saddle for `param` in
/// `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (p, lo, hi, samples = 121, param = "gamma"))]
fn homoclinic_scan(p: &PyParams, lo: f64, hi: f64, samples: usize, param: &str) -> PyResult<Vec<PyEvent>> {
    let param = parse_param(param)?;
    let c = equilibria::full_census(&p.0).map_err(to_py)?;
    let anti: Vec<PhasePoint> = c.antisaddles().map(|e| e.location).collect();
    let mut out = Vec::new();
    for s in c.saddles().filter(|e| e.location.x > 0.0 && e.location.y > 0.0) {
        let ev = bifurcation::homoclinic_scan(&p.0, s, &anti, param, (lo, hi), samples, true).map_err(to_py)?;
        out.extend(ev.into_iter().map(PyEvent));
    }
    Ok(out)
}

/// Runs the staged scenario of the built-in fixtures, optionally with
/// fewer samples per stage, and returns the log as JSON.
#[pyfunction]
#[pyo3(signature = (cubic_samples = None, quartic_samples = None, alpha_samples = None, gamma_samples = None))]
fn run_scenario(
    cubic_samples: Option<usize>,
    quartic_samples: Option<usize>,
    alpha_samples: Option<usize>,
    gamma_samples: Option<usize>,
) -> PyResult<String> {
    let mut cfg = fixtures::regimes().map_err(to_py)?.scenario;
    cfg.cubic_samples = cubic_samples.unwrap_or(cfg.cubic_samples);
    cfg.quartic_samples = quartic_samples.unwrap_or(cfg.quartic_samples);
    cfg.rotated_alpha_samples = alpha_samples.unwrap_or(cfg.rotated_alpha_samples);
    cfg.gamma_samples = gamma_samples.unwrap_or(cfg.gamma_samples);
    json(&scenario::run_scenario(&cfg).map_err(to_py)?)
}

#[pymodule]
pub fn qbl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("VerificationError", m.py().get_type::<VerificationError>())?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyEquilibrium>()?;
    m.add_class::<PyInfinite>()?;
    m.add_class::<PyCensus>()?;
    m.add_class::<PyCycle>()?;
    m.add_class::<PyEvent>()?;
    m.add_function(wrap_pyfunction!(census, m)?)?;
    m.add_function(wrap_pyfunction!(find_cycles, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(hopf_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(hopf_scan, m)?)?;
    m.add_function(wrap_pyfunction!(continue_cycle, m)?)?;
    m.add_function(wrap_pyfunction!(homoclinic_scan, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
