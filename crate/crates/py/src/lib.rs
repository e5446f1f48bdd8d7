//! Python bindings. Reals cross the boundary as decimal strings so nothing
//! is lost to binary64; `float(...)` on the Python side gives a quick value.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;

use qorth::families::{eval_c, eval_d_series, eval_h_recurrence, eval_h_series, eval_h_tilde, FamilySpec, MuPoint};
use qorth::identities::{run_suite, IdentityId, SuiteConfig};
use qorth::measures::{gram_matrix, DiscreteMeasure, Parity};
use qorth::report::{decimal, digits_for_bits, identity_reports_json, GramReportJson};
use qorth::sweep::{a_grid, sweep_hermite_extremal};
use qorth::{PrecisionContext, QParam, QReal};

create_exception!(pyqorth, QorthError, PyRuntimeError);

fn to_py(e: qorth::Error) -> PyErr {
    match e {
        qorth::Error::InvalidParameter(_) | qorth::Error::IncompatiblePair(_) => PyValueError::new_err(e.to_string()),
        _ => QorthError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Working precision, tolerance and base `q`.
#[pyclass(module = "pyqorth", frozen)]
pub struct Context {
    ctx: PrecisionContext,
    q: QParam,
}

impl Context {
    fn num(&self, text: &str) -> PyResult<QReal> {
        self.ctx.parse(text).map_err(to_py)
    }

    fn out(&self, x: &QReal) -> String {
        decimal(x, digits_for_bits(self.ctx.bits()))
    }

    fn s_value(&self, s: &str) -> PyResult<QReal> {
        match s {
            "qinv" => Ok(self.q.pow(-1, &self.ctx)),
            "q" => Ok(self.q.at(&self.ctx)),
            _ => self.num(s),
        }
    }
}

#[pymethods]
impl Context {
    #[new]
    #[pyo3(signature = (q = "0.5", bits = 256, tol_exp = 200))]
    fn new(q: &str, bits: u32, tol_exp: u32) -> PyResult<Self> {
        let ctx = PrecisionContext::new(bits, tol_exp, PrecisionContext::DEFAULT_MAX_TERMS).map_err(to_py)?;
        let q = QParam::parse(q, &ctx).map_err(to_py)?;
        Ok(Self { ctx, q })
    }

    #[getter]
    fn bits(&self) -> u32 {
        self.ctx.bits()
    }

    #[getter]
    fn q(&self) -> String {
        self.out(self.q.value())
    }

    /// `h_n(x|q)` from the recurrence, or from the closed sum at `x = sinh(phi)`.
    #[pyo3(signature = (n, x = None, phi = None))]
    fn h(&self, n: usize, x: Option<&str>, phi: Option<&str>) -> PyResult<String> {
        let v = match (x, phi) {
            (Some(x), None) => eval_h_recurrence(n, &self.num(x)?, &self.q, &self.ctx),
            (None, Some(phi)) => eval_h_series(n, &self.num(phi)?, &self.q, &self.ctx),
            _ => return Err(PyValueError::new_err("give exactly one of x, phi")),
        };
        Ok(self.out(&v))
    }

    /// `h~_2k(x)`.
    fn htilde(&self, k: usize, x: &str) -> PyResult<String> {
        Ok(self.out(&eval_h_tilde(k, &self.num(x)?, &self.q, &self.ctx)))
    }

    /// `C_n^(s)(x;q)`. `s` is a decimal, `"qinv"` or `"q"`.
    fn c(&self, n: usize, s: &str, x: &str) -> PyResult<String> {
        let spec = FamilySpec::discrete_ultra(self.q.clone(), self.s_value(s)?).map_err(to_py)?;
        Ok(self.out(&eval_c(n, &self.num(x)?, &spec, &self.ctx).map_err(to_py)?))
    }

    /// `D_n^(s)(mu|q)` at `mu`, or at `mu(x;s)` through the series.
    /// Requires `0 < s < q^-2`.
    #[pyo3(signature = (n, s, mu = None, x = None))]
    fn d(&self, n: usize, s: &str, mu: Option<&str>, x: Option<&str>) -> PyResult<String> {
        let s = self.s_value(s)?;
        let spec = FamilySpec::dual_discrete_ultra(self.q.clone(), s.clone()).map_err(to_py)?;
        spec.require_base_range(&self.ctx).map_err(to_py)?;
        let v = match (mu, x) {
            (Some(mu), None) => spec.eval(n, &self.num(mu)?, &self.ctx),
            (None, Some(x)) => {
                let x = self.num(x)?;
                let point = if x.is_integer() && x.clone().abs() < 1e15 {
                    MuPoint::on_grid(x.to_f64() as i64, &s, &self.q, &self.ctx)
                } else {
                    MuPoint::off_grid(&x, &s, &self.q, &self.ctx)
                };
                eval_d_series(n, &point, &spec, &self.ctx)
            }
            _ => return Err(PyValueError::new_err("give exactly one of mu, x")),
        };
        Ok(self.out(&v.map_err(to_py)?))
    }

    /// Gram matrix report as a dict. `measure` is one of `hermite-extremal`,
    /// `dual-base`, `dual-qinv-extremal`, `dual-q-extremal`; `a` defaults to
    /// `q`. `family` (`h` or `D`) defaults to the measure's own family.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (measure = "hermite-extremal", n_max = 8, a = None, s = None, parity = "even", family = None))]
    fn gram<'py>(
        &self,
        py: Python<'py>,
        measure: &str,
        n_max: usize,
        a: Option<&str>,
        s: Option<&str>,
        parity: &str,
        family: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let (ctx, q) = (&self.ctx, &self.q);
        let a = || a.map_or_else(|| Ok(q.at(ctx)), |a| self.num(a));
        let need_s = || s.ok_or_else(|| PyValueError::new_err("this measure needs s")).and_then(|s| self.s_value(s));
        let meas = match measure {
            "hermite-extremal" => DiscreteMeasure::hermite_extremal(a()?, q.clone(), ctx),
            "dual-base" => {
                let parity = match parity {
                    "even" => Parity::Even,
                    "odd" => Parity::Odd,
                    _ => return Err(PyValueError::new_err("parity must be even or odd")),
                };
                let s = need_s()?;
                FamilySpec::dual_discrete_ultra(q.clone(), s.clone())
                    .and_then(|f| f.require_base_range(ctx))
                    .map_err(to_py)?;
                DiscreteMeasure::dual_ultra_base(s, parity, q.clone(), ctx)
            }
            "dual-qinv-extremal" => DiscreteMeasure::dual_qinv_extremal(a()?, q.clone(), ctx),
            "dual-q-extremal" => DiscreteMeasure::dual_q_extremal(a()?, q.clone(), ctx),
            other => return Err(PyValueError::new_err(format!("unknown measure {other}"))),
        }
        .map_err(to_py)?;
        let fam = match (family, measure) {
            (Some("h"), _) | (None, "hermite-extremal") => FamilySpec::q_inv_hermite(q.clone()),
            (None, "dual-qinv-extremal") => FamilySpec::dual_q_inv(q.clone(), ctx),
            (None, "dual-q-extremal") => FamilySpec::dual_q(q.clone(), ctx),
            (Some("D"), _) | (None, _) => FamilySpec::dual_discrete_ultra(q.clone(), need_s()?).map_err(to_py)?,
            (Some(other), _) => return Err(PyValueError::new_err(format!("unsupported family {other}"))),
        };
        let report = gram_matrix(&fam, &meas, n_max, ctx).map_err(to_py)?;
        json_to_py(py, &GramReportJson::from_report(&report, ctx.tol()).to_json())
    }

    /// Runs the identity suite; one dict per check.
    #[pyo3(signature = (k_max = 6, n_max = 8))]
    fn verify<'py>(&self, py: Python<'py>, k_max: usize, n_max: usize) -> PyResult<Bound<'py, PyAny>> {
        let mut suite = SuiteConfig::new(self.q.clone(), &self.ctx);
        suite.k_max = k_max;
        suite.lattice_n = n_max;
        let reports = py.detach(|| run_suite(&suite, &self.ctx));
        json_to_py(py, &identity_reports_json(&reports))
    }

    /// Gram residuals and node fingerprints over `steps` values of `a`.
    /// `a_from` may be `"q"`.
    #[pyo3(signature = (a_from = "q", a_to = "0.95", steps = 10, n_max = 8))]
    fn sweep<'py>(&self, py: Python<'py>, a_from: &str, a_to: &str, steps: usize, n_max: usize) -> PyResult<Bound<'py, PyList>> {
        let from = if a_from == "q" { self.q.at(&self.ctx) } else { self.num(a_from)? };
        let grid = a_grid(&self.q, &from, &self.num(a_to)?, steps, &self.ctx).map_err(to_py)?;
        let rows = py.detach(|| sweep_hermite_extremal(&self.q, &grid, n_max, &self.ctx)).map_err(to_py)?;
        let out = PyList::empty(py);
        for r in rows {
            let item = pyo3::types::PyDict::new(py);
            item.set_item("a", self.out(&r.a))?;
            item.set_item("off_diag_max", decimal(&r.report.off_diag_max, 12))?;
            item.set_item("diag_rel_err_max", decimal(&r.report.diag_rel_err_max, 12))?;
            item.set_item("node_hash", r.node_hash)?;
            item.set_item("pass", r.report.passes(self.ctx.tol()))?;
            out.append(item)?;
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Context(q={}, bits={})", decimal(self.q.value(), 12), self.ctx.bits())
    }
}

/// `(id, description)` for every check in the identity suite, in run order.
#[pyfunction]
fn identity_ids() -> Vec<(&'static str, &'static str)> {
    IdentityId::ALL.iter().map(|id| (id.as_str(), id.description())).collect()
}

/// `(a;q)_n` as a decimal.
#[pyfunction]
#[pyo3(signature = (a, q, n, bits = 256))]
fn qpoch(a: &str, q: &str, n: usize, bits: u32) -> PyResult<String> {
    let ctx = PrecisionContext::new(bits, 200, PrecisionContext::DEFAULT_MAX_TERMS).map_err(to_py)?;
    let q = QParam::parse(q, &ctx).map_err(to_py)?;
    let a = ctx.parse(a).map_err(to_py)?;
    Ok(decimal(&qorth::kernel::qpoch(&a, &q, n, &ctx), digits_for_bits(bits)))
}

#[pymodule]
pub fn pyqorth(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Context>()?;
    m.add_function(wrap_pyfunction!(identity_ids, m)?)?;
    m.add_function(wrap_pyfunction!(qpoch, m)?)?;
    m.add("QorthError", m.py().get_type::<QorthError>())?;
    Ok(())
}
