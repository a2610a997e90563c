//! Python module `sntail`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use sntail::classify::{self, Boundary};
use sntail::conditional::{self, CondQuery};
use sntail::{cli, sn_special, tail_order, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Precondition(_) | Error::Unsupported(_) | Error::Contract(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn boundary(flags: Option<Vec<String>>) -> PyResult<Boundary> {
    let mut b = Boundary::default();
    for f in flags.unwrap_or_default() {
        match f.as_str() {
            "lambda1" => b.lambda1 = true,
            "lambda2" => b.lambda2 = true,
            "beta1" => b.beta1 = true,
            "beta2" => b.beta2 = true,
            "discriminant" => b.discriminant = true,
            _ => return Err(PyValueError::new_err(format!("unknown boundary flag {f:?}"))),
        }
    }
    Ok(b)
}

/// Skewness vector and correlation of a bivariate skew-normal.
#[pyclass(name = "Parameters", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyParameters(classify::Parameters);

#[pymethods]
impl PyParameters {
    #[new]
    fn new(alpha1: f64, alpha2: f64, rho: f64) -> PyResult<Self> {
        classify::Parameters::new(alpha1, alpha2, rho).map(Self).map_err(to_py)
    }

    #[getter]
    fn alpha1(&self) -> f64 {
        self.0.alpha1
    }

    #[getter]
    fn alpha2(&self) -> f64 {
        self.0.alpha2
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.0.rho
    }

    fn lambda1(&self) -> f64 {
        self.0.lambda1()
    }

    fn lambda2(&self) -> f64 {
        self.0.lambda2()
    }

    fn swapped(&self) -> Self {
        Self(self.0.swapped())
    }

    fn __repr__(&self) -> String {
        format!("Parameters(alpha1={}, alpha2={}, rho={})", self.0.alpha1, self.0.alpha2, self.0.rho)
    }
}

/// `tau1 * u**theta * (-log u)**tau2`.
#[pyclass(name = "RvForm", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyRvForm(tail_order::RvForm);

#[pymethods]
impl PyRvForm {
    #[new]
    fn new(theta: f64, log_tau1: f64, tau2: f64) -> Self {
        Self(tail_order::RvForm { theta, log_tau1, tau2 })
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta
    }

    #[getter]
    fn log_tau1(&self) -> f64 {
        self.0.log_tau1
    }

    #[getter]
    fn tau2(&self) -> f64 {
        self.0.tau2
    }

    #[getter]
    fn tau1(&self) -> f64 {
        self.0.tau1()
    }

    /// Log of the form at `log u = u_log`.
    fn eval(&self, u_log: f64) -> f64 {
        self.0.eval(u_log)
    }

    fn __mul__(&self, o: &Self) -> Self {
        Self(self.0 * o.0)
    }

    fn __truediv__(&self, o: &Self) -> Self {
        Self(self.0 / o.0)
    }

    fn __repr__(&self) -> String {
        format!("RvForm(theta={}, log_tau1={}, tau2={})", self.0.theta, self.0.log_tau1, self.0.tau2)
    }
}

#[pyclass(name = "TailOrder", frozen)]
pub struct PyTailOrder(tail_order::TailOrderResult);

#[pymethods]
impl PyTailOrder {
    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa
    }

    #[getter]
    fn dcdu(&self) -> PyRvForm {
        PyRvForm(self.0.dcdu)
    }

    #[getter]
    fn lambda_l(&self) -> PyRvForm {
        PyRvForm(self.0.lambda_l)
    }

    /// Case label, `None` for the bivariate normal.
    #[getter]
    fn case(&self) -> Option<String> {
        self.0.case.map(|c| c.label())
    }

    #[getter]
    fn extrapolated(&self) -> bool {
        self.0.extrapolated
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.clone()
    }

    fn __repr__(&self) -> String {
        format!("TailOrder(case={:?}, kappa={})", self.case(), self.0.kappa)
    }
}

#[pyfunction]
#[pyo3(signature = (params, boundary=None))]
fn tail_dependence(params: PyParameters, boundary: Option<Vec<String>>) -> PyResult<PyTailOrder> {
    let b = self::boundary(boundary)?;
    tail_order::tail_dependence_asym_with(&params.0, b).map(PyTailOrder).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (params, boundary=None))]
fn dcopula_rv(params: PyParameters, boundary: Option<Vec<String>>) -> PyResult<PyRvForm> {
    let b = self::boundary(boundary)?;
    Ok(PyRvForm(tail_order::dcopula_rv_with(&params.0, b).map_err(to_py)?.total))
}

#[pyfunction]
#[pyo3(signature = (params, boundary=None))]
fn classify_case(params: PyParameters, boundary: Option<Vec<String>>) -> PyResult<String> {
    let b = self::boundary(boundary)?;
    let d = classify::derive_with(&params.0, b).map_err(to_py)?;
    Ok(classify::thm3_case(&d, &params.0).map_err(to_py)?.label())
}

/// `(total, summand1, summand2)` of `log dC(u,u)/du`.
#[pyfunction]
fn log_dcdu_exact(params: PyParameters, u_log: f64) -> PyResult<(f64, f64, f64)> {
    let d = conditional::log_dcdu_exact(u_log, &params.0).map_err(to_py)?;
    Ok((d.total, d.summand1, d.summand2))
}

#[pyfunction]
fn cond_prob_exact(params: PyParameters, u_log: f64, which: usize) -> PyResult<f64> {
    let q = CondQuery::new(u_log, which, params.0).map_err(to_py)?;
    Ok(conditional::cond_prob_exact(&q).map_err(to_py)?.log_v)
}

/// `(theta_hat, tau2_hat, log_tau1_hat, resid)`.
#[pyfunction]
fn empirical_exponent_fit(params: PyParameters, grid: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
    let f = tail_order::empirical_exponent_fit(&params.0, &grid).map_err(to_py)?;
    Ok((f.theta_hat, f.tau2_hat, f.log_tau1_hat, f.resid))
}

#[pyfunction]
fn sn_log_cdf(x: f64, lam: f64) -> PyResult<f64> {
    sn_special::sn_log_cdf(x, lam).map_err(to_py)
}

#[pyfunction]
fn sn_quantile(log_u: f64, lam: f64) -> PyResult<f64> {
    sn_special::sn_quantile(log_u, lam).map_err(to_py)
}

/// The `analyze` report as a JSON string.
#[pyfunction]
#[pyo3(signature = (params, boundary=None, u_log=None))]
fn analyze_json(params: PyParameters, boundary: Option<Vec<String>>, u_log: Option<f64>) -> PyResult<String> {
    let b = self::boundary(boundary)?;
    let r = cli::analyze(&params.0, b, u_log).map_err(to_py)?;
    serde_json::to_string(&r).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "sntail")]
pub fn sntail_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParameters>()?;
    m.add_class::<PyRvForm>()?;
    m.add_class::<PyTailOrder>()?;
    m.add_function(wrap_pyfunction!(tail_dependence, m)?)?;
    m.add_function(wrap_pyfunction!(dcopula_rv, m)?)?;
    m.add_function(wrap_pyfunction!(classify_case, m)?)?;
    m.add_function(wrap_pyfunction!(log_dcdu_exact, m)?)?;
    m.add_function(wrap_pyfunction!(cond_prob_exact, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_exponent_fit, m)?)?;
    m.add_function(wrap_pyfunction!(sn_log_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(sn_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_json, m)?)?;
    Ok(())
}
