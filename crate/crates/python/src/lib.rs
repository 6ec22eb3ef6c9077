//! Python bindings for the robust likelihood ratio test designer.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use robustlrt_core::evaluation::{self, EvalMethod};
use robustlrt_core::lfd::{self, SolverConfig};
use robustlrt_core::{limits, DensityModel, DivergenceSpec, Error, NominalPair, QuadratureGrid, RobustSolution};

create_exception!(robustlrt, RobustLrtError, PyValueError);
create_exception!(robustlrt, InfeasibleError, RobustLrtError);
create_exception!(robustlrt, NonConvergenceError, RobustLrtError);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Infeasible { .. } | Error::InfeasiblePair { .. } => InfeasibleError::new_err(err.to_string()),
        Error::NonConvergence { .. } => NonConvergenceError::new_err(err.to_string()),
        other => RobustLrtError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for robustlrt_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// A one-dimensional probability density.
#[pyclass(name = "Density", module = "robustlrt", frozen)]
struct PyDensity {
    inner: DensityModel,
}

#[pymethods]
impl PyDensity {
    /// Parses a spec such as `shift(mixture(0.5*gaussian(-2,1)+0.5*gaussian(2,1)),1)`.
    #[staticmethod]
    #[pyo3(signature = (spec, base_dir=None))]
    fn parse(spec: &str, base_dir: Option<std::path::PathBuf>) -> PyResult<Self> {
        let inner = DensityModel::parse(spec, base_dir.as_deref()).py_err()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn gaussian(mean: f64, stddev: f64) -> PyResult<Self> {
        Ok(Self { inner: DensityModel::gaussian(mean, stddev).py_err()? })
    }

    /// Mixture from `(weight, mean, stddev)` triples.
    #[staticmethod]
    fn mixture(components: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        Ok(Self { inner: DensityModel::mixture(&components).py_err()? })
    }

    #[staticmethod]
    fn tabulated(points: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: DensityModel::tabulated(points, values).py_err()? })
    }

    fn shifted(&self, shift: f64) -> PyResult<Self> {
        Ok(Self { inner: DensityModel::shifted(self.inner.clone(), shift).py_err()? })
    }

    fn __call__(&self, y: f64) -> f64 {
        self.inner.evaluate(y)
    }

    fn evaluate(&self, ys: Vec<f64>) -> Vec<f64> {
        ys.into_iter().map(|y| self.inner.evaluate(y)).collect()
    }

    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        self.inner.sample(n, seed)
    }

    fn __repr__(&self) -> String {
        format!("Density({:?})", self.inner)
    }
}

/// Error probabilities of a decision rule.
#[pyclass(name = "ErrorReport", module = "robustlrt", frozen, get_all)]
struct PyErrorReport {
    p_false_alarm: f64,
    p_miss: f64,
    p_error: f64,
    method: String,
    /// 95% half-widths, present for Monte Carlo estimates.
    half_widths: Option<(f64, f64, f64)>,
}

impl From<evaluation::ErrorReport> for PyErrorReport {
    fn from(r: evaluation::ErrorReport) -> Self {
        let (method, half_widths) = match r.method {
            EvalMethod::Quadrature => ("quadrature", None),
            EvalMethod::MonteCarlo {
                half_width_false_alarm,
                half_width_miss,
                half_width_error,
                ..
            } => ("monte_carlo", Some((half_width_false_alarm, half_width_miss, half_width_error))),
        };
        Self {
            p_false_alarm: r.p_false_alarm,
            p_miss: r.p_miss,
            p_error: r.p_error,
            method: method.into(),
            half_widths,
        }
    }
}

#[pymethods]
impl PyErrorReport {
    fn __repr__(&self) -> String {
        format!(
            "ErrorReport(p_false_alarm={}, p_miss={}, p_error={}, method='{}')",
            self.p_false_alarm, self.p_miss, self.p_error, self.method
        )
    }
}

/// Least favorable densities and the robust rule for one problem.
#[pyclass(name = "Solution", module = "robustlrt", frozen)]
struct PySolution {
    inner: RobustSolution,
    f0: DensityModel,
    f1: DensityModel,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn thresholds(&self) -> (f64, f64) {
        (self.inner.thresholds.lower, self.inner.thresholds.upper)
    }
    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }
    #[getter]
    fn z(&self) -> f64 {
        self.inner.z
    }
    #[getter]
    fn residual_norm(&self) -> f64 {
        self.inner.residual_norm
    }
    #[getter]
    fn achieved_eps(&self) -> (f64, f64) {
        (self.inner.achieved_eps0, self.inner.achieved_eps1)
    }
    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.nominals.grid().points().to_vec()
    }
    #[getter]
    fn f0(&self) -> Vec<f64> {
        self.inner.nominals.f0().to_vec()
    }
    #[getter]
    fn f1(&self) -> Vec<f64> {
        self.inner.nominals.f1().to_vec()
    }
    #[getter]
    fn g0_hat(&self) -> Vec<f64> {
        self.inner.g0_hat.clone()
    }
    #[getter]
    fn g1_hat(&self) -> Vec<f64> {
        self.inner.g1_hat.clone()
    }
    #[getter]
    fn delta_hat(&self) -> Vec<f64> {
        self.inner.delta_hat.clone()
    }
    #[getter]
    fn l_hat(&self) -> Vec<f64> {
        self.inner.l_hat.clone()
    }
    /// Region label per grid node: 1 lower, 2 middle, 3 upper.
    #[getter]
    fn regions(&self) -> Vec<u8> {
        self.inner.regions.iter().map(|r| r.label()).collect()
    }

    /// Robust decision rule at nominal likelihood ratio `l`.
    fn rule(&self, l: f64) -> f64 {
        self.inner.rule(l)
    }

    /// Robust likelihood ratio at nominal likelihood ratio `l`.
    fn lr(&self, l: f64) -> f64 {
        self.inner.lr(l)
    }

    /// Error probabilities under the least favorable densities.
    fn errors(&self) -> PyResult<PyErrorReport> {
        Ok(evaluation::solution_errors(&self.inner).py_err()?.into())
    }

    /// Monte Carlo error probabilities under the nominal densities.
    fn monte_carlo(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<PyErrorReport> {
        let report = py
            .detach(|| {
                let rule = evaluation::robust_rule_fn(&self.inner, &self.f0, &self.f1);
                evaluation::monte_carlo_errors(rule, &self.f0, &self.f1, self.inner.spec.rho, n, seed)
            })
            .py_err()?;
        Ok(report.into())
    }
}

fn tabulate(f0: &PyDensity, f1: &PyDensity, grid: (f64, f64, usize)) -> PyResult<NominalPair> {
    let g = QuadratureGrid::uniform(grid.0, grid.1, grid.2).py_err()?;
    Ok(NominalPair::tabulate(&f0.inner, &f1.inner, &g))
}

/// Designs the minimax robust test for the given nominals and radii.
#[pyfunction]
#[pyo3(signature = (f0, f1, alpha, eps0, eps1, rho=1.0, grid=(-8.0, 9.0, 4001), symmetric=false))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    f0: &PyDensity,
    f1: &PyDensity,
    alpha: f64,
    eps0: f64,
    eps1: f64,
    rho: f64,
    grid: (f64, f64, usize),
    symmetric: bool,
) -> PyResult<PySolution> {
    let pair = tabulate(f0, f1, grid)?;
    let config = SolverConfig::default();
    let inner = py
        .detach(|| {
            if symmetric {
                if eps0 != eps1 {
                    return Err(Error::Precondition("symmetric solve needs eps0 == eps1".into()));
                }
                lfd::solve_symmetric(eps0, alpha, rho, &pair, &config)
            } else {
                let spec = DivergenceSpec::new(alpha, rho, eps0, eps1)?;
                lfd::solve_thresholds(&spec, &pair, &config)
            }
        })
        .py_err()?;
    Ok(PySolution {
        inner,
        f0: f0.inner.clone(),
        f1: f1.inner.clone(),
    })
}

/// Checks whether `(eps0, eps1)` lies strictly inside the feasibility boundary.
/// Returns `(feasible, margin, boundary_point)`.
#[pyfunction]
#[pyo3(signature = (f0, f1, alpha, eps0, eps1, rho=1.0, grid=(-8.0, 9.0, 4001)))]
fn validate_eps(
    f0: &PyDensity,
    f1: &PyDensity,
    alpha: f64,
    eps0: f64,
    eps1: f64,
    rho: f64,
    grid: (f64, f64, usize),
) -> PyResult<(bool, f64, (f64, f64))> {
    let pair = tabulate(f0, f1, grid)?;
    let spec = DivergenceSpec::new(alpha, rho, eps0, eps1).py_err()?;
    let check = limits::validate_eps(&pair, &spec).py_err()?;
    Ok((check.feasible, check.margin, check.boundary))
}

/// α-divergence of `g` from `f` on a uniform grid.
#[pyfunction]
#[pyo3(signature = (g, f, alpha, grid=(-8.0, 9.0, 4001)))]
fn alpha_divergence(g: &PyDensity, f: &PyDensity, alpha: f64, grid: (f64, f64, usize)) -> PyResult<f64> {
    let q = QuadratureGrid::uniform(grid.0, grid.1, grid.2).py_err()?;
    robustlrt_core::alpha_divergence(&g.inner, &f.inner, alpha, &q).py_err()
}

/// Bhattacharyya coefficient consistent with the Hellinger pair `(eps0, eps1)`.
#[pyfunction]
fn hellinger_root_a(eps0: f64, eps1: f64) -> PyResult<f64> {
    limits::hellinger_root_a(eps0, eps1).py_err()
}

/// Largest equal Hellinger radius for Bhattacharyya coefficient `a`.
#[pyfunction]
fn hellinger_eps_max(a: f64) -> f64 {
    limits::hellinger_eps_max(a)
}

/// Limiting radius paired with `eps_fixed` for Bhattacharyya coefficient `a`.
#[pyfunction]
fn hellinger_other_eps(a: f64, eps_fixed: f64) -> PyResult<f64> {
    limits::hellinger_other_eps(a, eps_fixed).py_err()
}

/// Quadrature error probabilities of a tabulated rule on a uniform grid.
#[pyfunction]
#[pyo3(signature = (delta, g0, g1, grid, rho=1.0))]
fn error_probs(
    delta: Vec<f64>,
    g0: Vec<f64>,
    g1: Vec<f64>,
    grid: (f64, f64, usize),
    rho: f64,
) -> PyResult<PyErrorReport> {
    let q = QuadratureGrid::uniform(grid.0, grid.1, grid.2).py_err()?;
    Ok(evaluation::error_probs(&delta, &g0, &g1, rho, &q).py_err()?.into())
}

#[pymodule]
pub fn robustlrt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("RobustLrtError", py.get_type::<RobustLrtError>())?;
    m.add("InfeasibleError", py.get_type::<InfeasibleError>())?;
    m.add("NonConvergenceError", py.get_type::<NonConvergenceError>())?;
    m.add_class::<PyDensity>()?;
    m.add_class::<PyErrorReport>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(validate_eps, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger_root_a, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger_eps_max, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger_other_eps, m)?)?;
    m.add_function(wrap_pyfunction!(error_probs, m)?)?;
    Ok(())
}
