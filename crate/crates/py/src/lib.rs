//! Python bindings. Grid functions cross the boundary as flat lists of
//! `len(nodes) * dim` floats in node-major order.

use evoscope::catalog::{self, CATALOG_NAMES};
use evoscope::config::parse_config;
use evoscope::exponents::{self, Admissibility, ClassifyOptions};
use evoscope::generator::{self, Battery};
use evoscope::norm;
use evoscope::semigroup::SemigroupAction;
use evoscope::witness;
use evoscope::{
    Analysis, BuiltinMatrix, Error, EvolutionFamily, GridFunction, IntegratorConfig, SupSampling, Thresholds, TimeGrid,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(evoscope_py, NumericalError, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parse { .. } | Error::UnknownFamily(_) | Error::Domain(_) | Error::GridMismatch(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => NumericalError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for evoscope::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// An evolution family `U(t, s)`.
#[pyclass(name = "Family", frozen, module = "evoscope_py")]
struct PyFamily {
    inner: EvolutionFamily,
}

#[pymethods]
impl PyFamily {
    #[staticmethod]
    fn example1() -> Self {
        PyFamily { inner: EvolutionFamily::example1() }
    }

    #[staticmethod]
    fn example2() -> Self {
        PyFamily { inner: EvolutionFamily::example2() }
    }

    #[staticmethod]
    #[pyo3(signature = (rate, dim = 1))]
    fn constant_decay(rate: f64, dim: usize) -> PyResult<Self> {
        Ok(PyFamily { inner: EvolutionFamily::constant_decay(rate, dim).py()? })
    }

    /// Built-in matrix family by name: `rotation`, `shear`, ...
    #[staticmethod]
    #[pyo3(signature = (name, step = 0.01, horizon = 200.0, tolerance = 1e-8))]
    fn builtin(name: &str, step: f64, horizon: f64, tolerance: f64) -> PyResult<Self> {
        let m = BuiltinMatrix::parse(name).ok_or_else(|| py_err(Error::UnknownFamily(name.to_string())))?;
        Ok(PyFamily { inner: EvolutionFamily::builtin(m, IntegratorConfig { step, horizon, tolerance }) })
    }

    /// `e^{−λ(t−s)} U(t, s)`
    fn rescale(&self, shift: f64) -> PyResult<Self> {
        Ok(PyFamily { inner: self.inner.rescale(shift).py()? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `U(t, s)` as a list of rows.
    fn evaluate(&self, t: f64, s: f64) -> PyResult<Vec<Vec<f64>>> {
        let m = self.inner.evaluate(t, s).py()?;
        let d = m.dim();
        Ok((0..d).map(|r| (0..d).map(|c| m.get(r, c)).collect()).collect())
    }

    fn log_norm(&self, t: f64, s: f64) -> PyResult<f64> {
        self.inner.log_norm(t, s).py()
    }

    fn cocycle_residual(&self, t: f64, tau: f64, s: f64) -> PyResult<f64> {
        self.inner.cocycle_residual(t, tau, s).py()
    }

    fn __repr__(&self) -> String {
        format!("Family({})", self.inner.describe())
    }
}

#[pyclass(frozen, get_all, module = "evoscope_py")]
struct PhiProfile {
    alpha: f64,
    values: Vec<f64>,
    norm: f64,
    argmax_t: f64,
}

#[pyclass(frozen, get_all, module = "evoscope_py")]
struct ResolventEstimate {
    alpha: f64,
    c: f64,
    n_tests: usize,
    witness: String,
    per_n: Vec<(usize, f64)>,
    unbounded: bool,
}

#[pyclass(frozen, get_all, module = "evoscope_py")]
struct Certificate {
    certified: bool,
    reason: Option<String>,
    alpha: f64,
    c: f64,
    c_upper: f64,
    delta: f64,
    rate: f64,
    prefactor: f64,
    measured_margin: f64,
    /// `(delta, rate, prefactor, margin, certified)` per swept δ.
    sweep: Vec<(f64, f64, f64, f64, bool)>,
}

#[pyclass(frozen, get_all, module = "evoscope_py")]
struct QuasiNegativity {
    equivalent: bool,
    k_measured: f64,
    log_k: f64,
}

#[pyclass(frozen, get_all, module = "evoscope_py")]
struct ExponentReport {
    k_l: f64,
    k_b: f64,
    k_b_diverging: bool,
    inf_a: f64,
    uniform_exp_bounded: bool,
    uniform_exp_stable: bool,
    nonuniform_exp_bounded: bool,
    nonuniform_exp_stable: bool,
}

/// A family on a uniform grid with its transition cache.
#[pyclass(name = "Analysis", frozen, module = "evoscope_py")]
struct PyAnalysis {
    inner: Analysis,
    th: Thresholds,
}

impl PyAnalysis {
    fn function(&self, values: Vec<f64>) -> PyResult<GridFunction> {
        GridFunction::new(self.inner.grid().clone(), self.inner.dim(), values).py()
    }
}

#[pymethods]
impl PyAnalysis {
    /// `sampling` is `"linear"` or `"log-augmented"`; `t_sup` defaults to
    /// `t_max`.
    #[new]
    #[pyo3(signature = (family, h, t_max, sampling = "linear", t_sup = None, per_efold = 1000))]
    fn new(
        py: Python<'_>,
        family: &PyFamily,
        h: f64,
        t_max: f64,
        sampling: &str,
        t_sup: Option<f64>,
        per_efold: usize,
    ) -> PyResult<Self> {
        let t_sup = t_sup.unwrap_or(t_max);
        let sampling = match sampling {
            "linear" => SupSampling::Linear { t_sup },
            "log-augmented" | "log" => SupSampling::LogAugmented { t_sup, per_efold },
            other => return Err(PyValueError::new_err(format!("unknown sampling `{other}`"))),
        };
        let family = family.inner.clone();
        let inner = py.detach(|| Analysis::new(family, TimeGrid::uniform(h, t_max)?, sampling)).py()?;
        Ok(PyAnalysis { inner, th: Thresholds::default() })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn t_max(&self) -> f64 {
        self.inner.t_max()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.grid().points().to_vec()
    }

    fn random_bumps(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        witness::random_bumps(&self.inner, count, seed).into_iter().map(|u| u.values().to_vec()).collect()
    }

    fn phi_profile(&self, py: Python<'_>, alpha: f64, values: Vec<f64>) -> PyResult<PhiProfile> {
        let u = self.function(values)?;
        let p = py.detach(|| norm::phi_profile(&self.inner, alpha, &u)).py()?;
        Ok(PhiProfile { alpha, values: p.phi_values, norm: p.norm, argmax_t: p.argmax_t })
    }

    fn admissible_norm(&self, py: Python<'_>, alpha: f64, values: Vec<f64>) -> PyResult<f64> {
        let u = self.function(values)?;
        py.detach(|| norm::admissible_norm(&self.inner, alpha, &u)).py()
    }

    /// `ln W_α(s)` per node.
    fn log_weights(&self, py: Python<'_>, alpha: f64) -> Vec<f64> {
        py.detach(|| norm::weight_profile(&self.inner, alpha).log_w)
    }

    fn is_member(&self, py: Python<'_>, alpha: f64, values: Vec<f64>) -> PyResult<bool> {
        let u = self.function(values)?;
        Ok(py.detach(|| norm::membership_c(&self.inner, alpha, &u, &self.th)).py()?.is_member())
    }

    fn is_admissible(&self, py: Python<'_>, alpha: f64) -> bool {
        matches!(py.detach(|| exponents::is_admissible(&self.inner, alpha, &self.th)), Admissibility::Admissible(_))
    }

    fn is_strict(&self, py: Python<'_>, alpha: f64) -> PyResult<bool> {
        py.detach(|| exponents::is_strict(&self.inner, alpha, &self.th)).py()
    }

    fn lyapunov_exponent(&self, py: Python<'_>) -> PyResult<f64> {
        py.detach(|| exponents::lyapunov_exponent(&self.inner)).py()
    }

    /// `+inf` when the estimate does not stabilize.
    fn bohl_exponent(&self, py: Python<'_>, t_gap: f64) -> PyResult<f64> {
        Ok(py.detach(|| exponents::bohl_exponent(&self.inner, t_gap, &self.th)).py()?.value)
    }

    #[pyo3(signature = (lo, hi, tol = 0.02))]
    fn inf_admissible(&self, py: Python<'_>, lo: f64, hi: f64, tol: f64) -> PyResult<f64> {
        py.detach(|| exponents::inf_admissible(&self.inner, lo, hi, tol, &self.th)).py()
    }

    #[pyo3(signature = (t_gap = None, bracket = None))]
    fn classify(&self, py: Python<'_>, t_gap: Option<f64>, bracket: Option<(f64, f64)>) -> PyResult<ExponentReport> {
        let opts = ClassifyOptions { t_gap, bracket, ..ClassifyOptions::default() };
        let r = py.detach(|| exponents::classify(&self.inner, &self.th, &opts)).py()?;
        let c = r.classification;
        Ok(ExponentReport {
            k_l: r.k_l,
            k_b: r.k_b.value,
            k_b_diverging: r.k_b.diverging,
            inf_a: r.inf_a,
            uniform_exp_bounded: c.uniform_exp_bounded,
            uniform_exp_stable: c.uniform_exp_stable,
            nonuniform_exp_bounded: c.nonuniform_exp_bounded,
            nonuniform_exp_stable: c.nonuniform_exp_stable,
        })
    }

    /// `(T_α(t) u)(s) = U(s, s − t) u(s − t)`, zero for `s < t`.
    fn shift(&self, alpha: f64, t: f64, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let u = self.function(values)?;
        let action = SemigroupAction::new(&self.inner, alpha, t).py()?;
        Ok(action.apply(&self.inner, &u).py()?.values().to_vec())
    }

    /// `u_f(t) = ∫₀ᵗ U(t, ξ) f(ξ) dξ`
    fn apply_inverse(&self, py: Python<'_>, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let f = self.function(values)?;
        Ok(py.detach(|| generator::apply_inverse(&self.inner, &f)).py()?.values().to_vec())
    }

    #[pyo3(signature = (alpha, n_bumps = 20, seed = 0x5EED))]
    fn estimate_resolvent_norm(&self, py: Python<'_>, alpha: f64, n_bumps: usize, seed: u64) -> PyResult<ResolventEstimate> {
        let e = py
            .detach(|| {
                let battery = Battery::standard(&self.inner, alpha, n_bumps, seed);
                generator::estimate_resolvent_norm(&self.inner, alpha, &battery)
            })
            .py()?;
        Ok(ResolventEstimate { alpha, c: e.c, n_tests: e.n_tests, witness: e.witness_f, per_n: e.per_n, unbounded: e.unbounded })
    }

    #[pyo3(signature = (alpha, delta = 0.5, n_bumps = 20, seed = 0x5EED))]
    fn certify(&self, py: Python<'_>, alpha: f64, delta: f64, n_bumps: usize, seed: u64) -> PyResult<Certificate> {
        let v = py
            .detach(|| {
                let battery = Battery::standard(&self.inner, alpha, n_bumps, seed);
                let est = generator::estimate_resolvent_norm(&self.inner, alpha, &battery)?;
                generator::certify_stability(&self.inner, alpha, &est, delta, &self.th)
            })
            .py()?;
        let reason = match &v.verdict {
            generator::Verdict::CertifiedStable => None,
            generator::Verdict::NotCertified(why) => Some(why.clone()),
        };
        Ok(Certificate {
            certified: reason.is_none(),
            reason,
            alpha,
            c: v.c,
            c_upper: v.c_upper,
            delta: v.delta,
            rate: v.rate,
            prefactor: v.prefactor,
            measured_margin: v.measured_margin,
            sweep: v.sweep.iter().map(|e| (e.delta, e.rate, e.prefactor, e.margin, e.certified)).collect(),
        })
    }

    #[pyo3(signature = (alpha, nu, n_dirs = 4, seed = 0x5EED))]
    fn quasi_negativity(&self, py: Python<'_>, alpha: f64, nu: f64, n_dirs: usize, seed: u64) -> PyResult<QuasiNegativity> {
        let r = py.detach(|| norm::quasi_negativity_test(&self.inner, alpha, nu, n_dirs, seed, &self.th)).py()?;
        Ok(QuasiNegativity { equivalent: r.is_equivalent(), k_measured: r.k_measured, log_k: r.log_k })
    }
}

#[pyfunction]
fn catalog_names() -> Vec<&'static str> {
    CATALOG_NAMES.to_vec()
}

/// Runs every known fact of a catalog entry on its recommended grid:
/// `(id, measured, expected, passed)` rows.
#[pyfunction]
#[pyo3(signature = (name, seed = 0x5EED))]
fn reproduce(py: Python<'_>, name: &str, seed: u64) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let entry = catalog::entry(name).py()?;
    let outcomes = py.detach(|| entry.check_all(&Thresholds::default(), seed)).py()?;
    Ok(outcomes.into_iter().map(|o| (o.fact.id.to_string(), o.measured, o.fact.expected, o.passed)).collect())
}

/// Validates a `key = value` configuration; returns `(family, t_max, h, alphas)`.
#[pyfunction]
fn check_config(text: &str) -> PyResult<(String, f64, f64, Vec<f64>)> {
    let cfg = parse_config(text).py()?;
    let family = cfg.build_family().py()?;
    Ok((family.describe(), cfg.t_max, cfg.h, cfg.alphas))
}

#[pymodule]
fn evoscope_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFamily>()?;
    m.add_class::<PyAnalysis>()?;
    m.add_class::<PhiProfile>()?;
    m.add_class::<ResolventEstimate>()?;
    m.add_class::<Certificate>()?;
    m.add_class::<QuasiNegativity>()?;
    m.add_class::<ExponentReport>()?;
    m.add_function(wrap_pyfunction!(catalog_names, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    m.add_function(wrap_pyfunction!(check_config, m)?)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    Ok(())
}
