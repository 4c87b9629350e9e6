//! Python bindings. Points cross the boundary as lists of coordinate lists.

use std::path::PathBuf;
use std::sync::Arc;

use krigsearch as ks;
use krigsearch::rates::Problem;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(krigsearch, NumericalError, PyException);

fn to_py(e: ks::Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn points(dim: usize, rows: Vec<Vec<f64>>) -> PyResult<ks::PointSet> {
    ks::PointSet::from_rows(dim, &rows).map_err(to_py)
}

fn domain(lower: Vec<f64>, upper: Vec<f64>) -> PyResult<ks::Domain> {
    ks::Domain::new(lower, upper).map_err(to_py)
}

fn candidates(dim: usize, rows: Vec<Vec<f64>>) -> PyResult<ks::CandidateSet> {
    ks::CandidateSet::from_points(points(dim, rows)?).map_err(to_py)
}

fn design(dim: usize, rows: Vec<Vec<f64>>) -> PyResult<ks::Design> {
    Ok(ks::Design::new(points(dim, rows)?, "python"))
}

#[pyclass(name = "MaternKernel", frozen, from_py_object)]
#[derive(Clone)]
struct PyKernel(ks::MaternKernel);

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (variance=1.0, lengthscale=1.0, nu=1.5, dim=1))]
    fn new(variance: f64, lengthscale: f64, nu: f64, dim: usize) -> PyResult<Self> {
        ks::MaternKernel::new(variance, lengthscale, nu, dim)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance()
    }
    #[getter]
    fn lengthscale(&self) -> f64 {
        self.0.lengthscale()
    }
    #[getter]
    fn nu(&self) -> f64 {
        self.0.nu()
    }
    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }
    #[getter]
    fn sobolev_exponent(&self) -> f64 {
        self.0.sobolev_exponent()
    }

    fn __call__(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.0.dim() || y.len() != self.0.dim() {
            return Err(PyValueError::new_err("point dimension does not match kernel"));
        }
        Ok(self.0.eval(&x, &y))
    }

    fn eval_distance(&self, r: f64) -> f64 {
        self.0.eval_distance(r)
    }

    fn spectral_density(&self, radius: f64) -> f64 {
        self.0.spectral_density_radial(radius)
    }

    /// `(c1_hat, c2_hat, s)` over the given frequency radii.
    fn sandwich(&self, radii: Vec<f64>) -> PyResult<(f64, f64, f64)> {
        let b = self.0.spectral_sandwich_check(&radii).map_err(to_py)?;
        Ok((b.c1_hat, b.c2_hat, b.s))
    }

    #[pyo3(signature = (points, nugget=ks::kernel::DEFAULT_NUGGET))]
    fn gram(&self, points: Vec<Vec<f64>>, nugget: f64) -> PyResult<Vec<Vec<f64>>> {
        let pts = crate::points(self.0.dim(), points)?;
        let g = self.0.gram(&pts, nugget);
        Ok((0..g.size()).map(|i| g.row(i).to_vec()).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "MaternKernel(variance={}, lengthscale={}, nu={}, dim={})",
            self.0.variance(),
            self.0.lengthscale(),
            self.0.nu(),
            self.0.dim()
        )
    }
}

#[pyclass(name = "KrigingModel", frozen)]
struct PyModel(ks::KrigingModel);

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (kernel, points, values=None, nugget=ks::kernel::DEFAULT_NUGGET))]
    fn new(
        kernel: &PyKernel,
        points: Vec<Vec<f64>>,
        values: Option<Vec<f64>>,
        nugget: f64,
    ) -> PyResult<Self> {
        let pts = crate::points(kernel.0.dim(), points)?;
        ks::KrigingModel::fit(kernel.0, pts, values, nugget)
            .map(Self)
            .map_err(to_py)
    }

    #[pyo3(signature = (point, value=None))]
    fn extend(&self, point: Vec<f64>, value: Option<f64>) -> PyResult<Self> {
        self.0.extend(&point, value).map(Self).map_err(to_py)
    }

    fn predict_mean(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.predict_mean(&x).map_err(to_py)
    }

    fn predict_mse(&self, x: Vec<f64>) -> f64 {
        self.0.predict_mse(&x)
    }

    fn mse_via_rkhs(&self, x: Vec<f64>) -> f64 {
        self.0.mse_via_rkhs(&x)
    }

    fn weights(&self, x: Vec<f64>) -> Vec<f64> {
        self.0.weights(&x)
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.0.points().to_rows()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn tensor_grid(lower: Vec<f64>, upper: Vec<f64>, per_axis: usize) -> PyResult<Vec<Vec<f64>>> {
    let d = ks::tensor_grid(&domain(lower, upper)?, per_axis).map_err(to_py)?;
    Ok(d.points.to_rows())
}

#[pyfunction]
fn random_design(lower: Vec<f64>, upper: Vec<f64>, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let d = ks::random_design(&domain(lower, upper)?, n, seed).map_err(to_py)?;
    Ok(d.points.to_rows())
}

/// Sobol points (Joe–Kuo directions) scaled to the box.
#[pyfunction]
fn low_discrepancy(lower: Vec<f64>, upper: Vec<f64>, m: usize) -> PyResult<Vec<Vec<f64>>> {
    let c = ks::CandidateSet::low_discrepancy(&domain(lower, upper)?, m).map_err(to_py)?;
    Ok(c.points.to_rows())
}

#[pyfunction]
#[pyo3(signature = (kernel, lower, upper, n, x1, candidates, nugget=ks::kernel::DEFAULT_NUGGET))]
fn greedy_mmse(
    kernel: &PyKernel,
    lower: Vec<f64>,
    upper: Vec<f64>,
    n: usize,
    x1: Vec<f64>,
    candidates: Vec<Vec<f64>>,
    nugget: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let c = crate::candidates(kernel.0.dim(), candidates)?;
    let d = ks::greedy_mmse(&kernel.0, &domain(lower, upper)?, n, &x1, &c, nugget).map_err(to_py)?;
    Ok(d.points.to_rows())
}

#[pyfunction]
#[pyo3(signature = (kernel, design, candidates, nugget=ks::kernel::DEFAULT_NUGGET))]
fn mmse(kernel: &PyKernel, design: Vec<Vec<f64>>, candidates: Vec<Vec<f64>>, nugget: f64) -> PyResult<f64> {
    let d = kernel.0.dim();
    ks::mmse(&kernel.0, &crate::design(d, design)?, &crate::candidates(d, candidates)?, nugget)
        .map(|c| c.value)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (kernel, lower, upper, design, quadrature, nugget=ks::kernel::DEFAULT_NUGGET))]
fn imse(
    kernel: &PyKernel,
    lower: Vec<f64>,
    upper: Vec<f64>,
    design: Vec<Vec<f64>>,
    quadrature: Vec<Vec<f64>>,
    nugget: f64,
) -> PyResult<f64> {
    let d = kernel.0.dim();
    ks::imse(
        &kernel.0,
        &domain(lower, upper)?,
        &crate::design(d, design)?,
        &crate::candidates(d, quadrature)?,
        nugget,
    )
    .map(|c| c.value)
    .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (kernel, design, candidates, nugget=ks::kernel::DEFAULT_NUGGET))]
fn worst_case_linf_sq(
    kernel: &PyKernel,
    design: Vec<Vec<f64>>,
    candidates: Vec<Vec<f64>>,
    nugget: f64,
) -> PyResult<f64> {
    let d = kernel.0.dim();
    ks::worst_case_linf_sq(&kernel.0, &crate::design(d, design)?, &crate::candidates(d, candidates)?, nugget)
        .map_err(to_py)
}

#[pyfunction]
fn fill_distance(design: Vec<Vec<f64>>, candidates: Vec<Vec<f64>>) -> PyResult<f64> {
    let dim = design.first().map_or(1, Vec::len);
    Ok(ks::fill_distance(&crate::design(dim, design)?, &crate::candidates(dim, candidates)?))
}

/// Least-squares decay exponent; returns a dict with slope, stderr, intercept.
#[pyfunction]
#[pyo3(signature = (ns, errors, log_correction=false, min_n=0))]
fn fit_exponent<'py>(
    py: Python<'py>,
    ns: Vec<u64>,
    errors: Vec<f64>,
    log_correction: bool,
    min_n: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = ks::rates::fit_exponent_from(&ns, &errors, log_correction, min_n).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("slope", r.fitted_slope)?;
    out.set_item("stderr", r.slope_stderr)?;
    out.set_item("intercept", r.intercept)?;
    out.set_item("log_correction", r.log_correction)?;
    Ok(out)
}

#[pyfunction]
fn theory_slope(problem: &str, nu: f64, d: usize) -> PyResult<f64> {
    let p = match problem {
        "mmse" => Problem::Mmse,
        "imse" => Problem::Imse,
        "opt-matern-bound" => Problem::OptMaternBound,
        "opt-wiener" => Problem::OptWiener,
        other => return Err(PyValueError::new_err(format!("unknown problem `{other}`"))),
    };
    Ok(ks::theory_slope(p, nu, d))
}

/// `m` GP sample paths on a one-dimensional grid.
#[pyfunction]
#[pyo3(signature = (kernel, grid, m, seed, nugget=ks::kernel::DEFAULT_NUGGET))]
fn sample_gp_paths(
    kernel: &PyKernel,
    grid: Vec<f64>,
    m: usize,
    seed: u64,
    nugget: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let g = ks::CandidateSet::from_points(ks::PointSet::from_flat(1, grid).map_err(to_py)?).map_err(to_py)?;
    let paths = ks::simulate::sample_gp_paths(&kernel.0, Arc::new(g), m, seed, nugget).map_err(to_py)?;
    Ok(paths.into_iter().map(|p| p.values).collect())
}

/// `m` Brownian paths at `times`; returns `(values, continuous_sups)`.
#[pyfunction]
fn sample_wiener_paths(times: Vec<f64>, m: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let paths = ks::simulate::sample_wiener_paths(&times, m, seed).map_err(to_py)?;
    let sups = paths.iter().map(|p| p.continuous_sup.unwrap_or(f64::NAN)).collect();
    Ok((paths.into_iter().map(|p| p.values).collect(), sups))
}

#[pyfunction]
fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    ks::simulate::expected_improvement(mean, sd, best)
}

/// Runs a TOML experiment config; returns the summary lines.
#[pyfunction]
#[pyo3(signature = (config, output_dir=None))]
fn run_experiment(config: &str, output_dir: Option<PathBuf>) -> PyResult<Vec<String>> {
    let v = ks::experiments::load_config(config, output_dir.as_deref())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    ks::experiments::run_config(&v)
        .map(|o| o.summary)
        .map_err(|e| match e {
            ks::experiments::RunError::Numerical { .. } => NumericalError::new_err(e.to_string()),
            _ => PyValueError::new_err(e.to_string()),
        })
}

#[pymodule]
#[pyo3(name = "krigsearch")]
fn krigsearch_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", ks::VERSION)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(tensor_grid, m)?)?;
    m.add_function(wrap_pyfunction!(random_design, m)?)?;
    m.add_function(wrap_pyfunction!(low_discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_mmse, m)?)?;
    m.add_function(wrap_pyfunction!(mmse, m)?)?;
    m.add_function(wrap_pyfunction!(imse, m)?)?;
    m.add_function(wrap_pyfunction!(worst_case_linf_sq, m)?)?;
    m.add_function(wrap_pyfunction!(fill_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(theory_slope, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gp_paths, m)?)?;
    m.add_function(wrap_pyfunction!(sample_wiener_paths, m)?)?;
    m.add_function(wrap_pyfunction!(expected_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
