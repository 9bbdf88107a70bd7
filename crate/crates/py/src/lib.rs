//! Python bindings for the `qseries` core crate.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use qs_core::error::QError;
use qs_core::qcore::QContext;
use qs_core::verify::{Suite, SuiteConfig};
use qs_core::{classical, elliptic, factorize, qcore, series, verify, vwp, wronskian};

create_exception!(qseries, QSeriesError, PyException);

fn err(e: QError) -> PyErr {
    QSeriesError::new_err(e.to_string())
}

/// Base `q` with the truncation policy used by every evaluation.
#[pyclass(name = "QContext", frozen)]
struct PyContext {
    inner: QContext,
}

#[pymethods]
impl PyContext {
    #[new]
    #[pyo3(signature = (q, max_terms=None))]
    fn new(q: Complex64, max_terms: Option<usize>) -> PyResult<Self> {
        let mut inner = QContext::new(q).map_err(err)?;
        if let Some(m) = max_terms {
            inner = inner.with_max_terms(m).map_err(err)?;
        }
        Ok(PyContext { inner })
    }

    #[getter]
    fn q(&self) -> Complex64 {
        self.inner.q()
    }

    #[getter]
    fn max_terms(&self) -> usize {
        self.inner.max_terms()
    }

    fn __repr__(&self) -> String {
        format!("QContext(q={})", verify::fmt_complex(self.inner.q()))
    }
}

/// Parameters `a_1..a_r`, `b_1..b_r` of a bilateral `_rψ_r`.
#[pyclass(name = "SeriesSpec", frozen)]
struct PySpec {
    inner: series::SeriesSpec,
}

#[pymethods]
impl PySpec {
    #[new]
    fn new(a: Vec<Complex64>, b: Vec<Complex64>) -> PyResult<Self> {
        Ok(PySpec {
            inner: series::SeriesSpec::new(a, b).map_err(err)?,
        })
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }

    #[getter]
    fn a(&self) -> Vec<Complex64> {
        self.inner.a().to_vec()
    }

    #[getter]
    fn b(&self) -> Vec<Complex64> {
        self.inner.b().to_vec()
    }

    /// Convergence annulus `(inner, outer)` in `|x|`.
    fn annulus(&self, ctx: &PyContext) -> (f64, f64) {
        let a = series::psi_annulus(&self.inner, &ctx.inner);
        (a.inner, a.outer)
    }

    fn __repr__(&self) -> String {
        format!("SeriesSpec(a={:?}, b={:?})", self.a(), self.b())
    }
}

/// Parameters `a_1..a_{r-2}` of a VWP-balanced `_rW_r`.
#[pyclass(name = "WSpec", frozen)]
struct PyWSpec {
    inner: series::WSpec,
}

#[pymethods]
impl PyWSpec {
    #[new]
    fn new(a: Vec<Complex64>) -> PyResult<Self> {
        Ok(PyWSpec {
            inner: series::WSpec::new(a).map_err(err)?,
        })
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }
}

#[pyclass(name = "Factorization", frozen, get_all)]
struct PyFactorization {
    a: Complex64,
    rhos: Vec<Complex64>,
    residual: f64,
    x: Complex64,
}

#[pymethods]
impl PyFactorization {
    fn __repr__(&self) -> String {
        format!(
            "Factorization(A={}, rhos=[{}], residual={:e})",
            verify::fmt_complex(self.a),
            self.rhos
                .iter()
                .map(|&z| verify::fmt_complex(z))
                .collect::<Vec<_>>()
                .join(", "),
            self.residual
        )
    }
}

#[pyclass(name = "Report", frozen)]
struct PyReport {
    inner: verify::Report,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn summary(&self) -> String {
        self.inner.summary()
    }

    #[getter]
    fn all_pass(&self) -> bool {
        self.inner.all_pass()
    }

    #[getter]
    fn identity_ids(&self) -> Vec<String> {
        self.inner.ids().into_iter().map(String::from).collect()
    }

    /// `(identity_id, residual, tolerance, pass)` per record.
    fn records(&self) -> Vec<(String, Option<f64>, f64, bool)> {
        self.inner
            .records
            .iter()
            .map(|r| (r.identity_id.clone(), r.residual, r.tolerance, r.pass))
            .collect()
    }

    fn to_ndjson(&self) -> String {
        self.inner.to_ndjson()
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }
}

#[pyfunction]
fn theta(x: Complex64, ctx: &PyContext) -> PyResult<Complex64> {
    qcore::theta(x, &ctx.inner).map_err(err)
}

#[pyfunction]
fn qpoch(x: Complex64, n: i64, ctx: &PyContext) -> PyResult<Complex64> {
    qcore::qpoch(x, n, &ctx.inner).map_err(err)
}

#[pyfunction]
fn qpoch_inf(x: Complex64, ctx: &PyContext) -> PyResult<Complex64> {
    qcore::qpoch_inf(x, &ctx.inner).map_err(err)
}

#[pyfunction]
fn psi(spec: &PySpec, x: Complex64, y: Complex64, ctx: &PyContext) -> PyResult<Complex64> {
    series::psi(&spec.inner, x, y, &ctx.inner).map_err(err)
}

/// The entire numerator `ψ*(x, y)`, also for `x` outside the annulus.
#[pyfunction]
fn psi_star(spec: &PySpec, x: Complex64, y: Complex64, ctx: &PyContext) -> PyResult<Complex64> {
    series::psi_star_extended(&spec.inner, x, y, &ctx.inner).map_err(err)
}

#[pyfunction]
fn w_star(wspec: &PyWSpec, y: Complex64, ctx: &PyContext) -> PyResult<Complex64> {
    series::w_star(&wspec.inner, y, &ctx.inner).map_err(err)
}

#[pyfunction]
fn w6_closed_form(wspec: &PyWSpec, y: Complex64, ctx: &PyContext) -> PyResult<Complex64> {
    vwp::w6_closed_form(&wspec.inner, y, &ctx.inner).map_err(err)
}

/// `(lhs, rhs)` of the 1ψ1 summation.
#[pyfunction]
fn one_psi_one(a: Complex64, b: Complex64, x: Complex64, ctx: &PyContext) -> PyResult<(Complex64, Complex64)> {
    let p = classical::one_psi_one(a, b, x, &ctx.inner).map_err(err)?;
    Ok((p.lhs, p.rhs))
}

#[pyfunction]
fn theta_quotient(x: Complex64, ctx: &PyContext) -> PyResult<Complex64> {
    elliptic::theta_quotient(x, &ctx.inner).map_err(err)
}

#[pyfunction]
fn jacobi_inverse(y: Complex64, ctx: &PyContext) -> PyResult<Complex64> {
    elliptic::jacobi_inverse(y, &ctx.inner).map_err(err)
}

#[pyfunction]
fn wronskian2(spec: &PySpec, x: Complex64, y: Complex64, z: Complex64, ctx: &PyContext) -> PyResult<Complex64> {
    wronskian::wronskian2(&spec.inner, x, y, z, &ctx.inner).map_err(err)
}

#[pyfunction]
fn wronskian2_closed_form(
    spec: &PySpec,
    x: Complex64,
    y: Complex64,
    z: Complex64,
    ctx: &PyContext,
) -> PyResult<Complex64> {
    wronskian::wronskian2_closed_form(&spec.inner, x, y, z, &ctx.inner).map_err(err)
}

#[pyfunction(name = "factorize")]
fn factorize_py(spec: &PySpec, x: Complex64, ctx: &PyContext) -> PyResult<PyFactorization> {
    let f = factorize::factorize(&spec.inner, x, &ctx.inner).map_err(err)?;
    Ok(PyFactorization {
        a: f.a,
        rhos: f.rhos.iter().map(|c| c.rep).collect(),
        residual: f.residual,
        x: f.x,
    })
}

/// Runs a named verification suite; releases the GIL while it works.
#[pyfunction]
#[pyo3(signature = (suite, q, seed=7, samples=10, tolerance_scale=1.0))]
fn run_suite(
    py: Python<'_>,
    suite: &str,
    q: Complex64,
    seed: u64,
    samples: usize,
    tolerance_scale: f64,
) -> PyResult<PyReport> {
    let suite: Suite = suite.parse().map_err(err)?;
    let config = SuiteConfig::new(suite, q, seed, samples)
        .and_then(|c| c.with_tolerance_scale(tolerance_scale))
        .map_err(err)?;
    let report = py.detach(|| verify::run_suite(&config, false)).map_err(err)?;
    Ok(PyReport { inner: report })
}

#[pymodule]
fn qseries(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QSeriesError", m.py().get_type::<QSeriesError>())?;
    m.add_class::<PyContext>()?;
    m.add_class::<PySpec>()?;
    m.add_class::<PyWSpec>()?;
    m.add_class::<PyFactorization>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(qpoch, m)?)?;
    m.add_function(wrap_pyfunction!(qpoch_inf, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(psi_star, m)?)?;
    m.add_function(wrap_pyfunction!(w_star, m)?)?;
    m.add_function(wrap_pyfunction!(w6_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(one_psi_one, m)?)?;
    m.add_function(wrap_pyfunction!(theta_quotient, m)?)?;
    m.add_function(wrap_pyfunction!(jacobi_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(wronskian2, m)?)?;
    m.add_function(wrap_pyfunction!(wronskian2_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(factorize_py, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
