//! Python bindings for the `se3_observer` crate.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use se3_observer::dynamics::MeasurementFrame;
use se3_observer::geometry::{self, Mat3, RotationMatrix, Vec3, TOL_ORTH_MEASURED};
use se3_observer::observer::ObserverState;
use se3_observer::observer_const::{self, ConstGains, FeasibilityReport};
use se3_observer::observer_riccati::{self, RiccatiState};
use se3_observer::replay::{self, ReplayOptions};
use se3_observer::sim::{self, Estimator, ObserverKind, Scenario};
use se3_observer::trace::read_sensor_log_path;
use se3_observer::Error;

type Rows3 = [[f64; 3]; 3];

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn mat(rows: Rows3) -> Mat3 {
    Mat3::from_fn(|i, j| rows[i][j])
}

fn rows(m: &Mat3) -> Rows3 {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::from(v)
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn kind_from(name: &str) -> PyResult<ObserverKind> {
    match name {
        "constant" => Ok(ObserverKind::Constant),
        "riccati" => Ok(ObserverKind::Riccati),
        other => Err(PyValueError::new_err(format!("observer must be 'constant' or 'riccati', got {other:?}"))),
    }
}

#[pyfunction]
fn hat(v: [f64; 3]) -> Rows3 {
    rows(&geometry::hat(&vec3(v)))
}

/// Raises `ValueError` if `m` is not skew-symmetric.
#[pyfunction]
fn vee(m: Rows3) -> PyResult<[f64; 3]> {
    geometry::vee(&mat(m)).map(|v| arr(&v)).map_err(to_py_err)
}

#[pyfunction]
fn exp_so3(v: [f64; 3]) -> Rows3 {
    rows(geometry::exp_so3(&vec3(v)).matrix())
}

/// Nearest rotation in the Frobenius norm.
#[pyfunction]
fn project_so3(m: Rows3) -> PyResult<Rows3> {
    geometry::project_so3(&mat(m)).map(|r| rows(r.matrix())).map_err(to_py_err)
}

fn report_dict<'py>(py: Python<'py>, r: &FeasibilityReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("k3", r.k3)?;
    d.set_item("k4", r.k4)?;
    d.set_item("k5", r.k5)?;
    d.set_item("c", r.c)?;
    d.set_item("in_k", r.in_k)?;
    d.set_item("y_min_eig", r.y_min_eig)?;
    d.set_item("z_min_eig", r.z_min_eig)?;
    d.set_item("violated_conditions", r.violated_conditions.clone())?;
    Ok(d)
}

#[pyfunction]
fn check_gains<'py>(py: Python<'py>, k3: f64, k4: f64, k5: f64, c: f64) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, &observer_const::check_gains(k3, k4, k5, c))
}

#[pyfunction]
fn scale_gains(k3: f64, k4: f64, k5: f64, c: f64) -> PyResult<(f64, f64, f64)> {
    observer_const::scale_gains(k3, k4, k5, c).map_err(to_py_err)
}

/// `M Mᵀ` for the observability matrix at attitude `r`, as nested lists.
#[pyfunction]
fn observability_certificate(r: Rows3) -> Vec<Vec<f64>> {
    let m = observer_riccati::observability_certificate(&mat(r));
    (0..9).map(|i| (0..9).map(|j| m[(i, j)]).collect()).collect()
}

/// Runs the reference scenario and returns the final errors, bias estimates
/// and the sampled error norms.
#[pyfunction]
#[pyo3(signature = (observer = "riccati", t_end = 15.0, dt = 1e-3, noise = 0.01, seed = 0, gravity = None))]
fn simulate<'py>(
    py: Python<'py>,
    observer: &str,
    t_end: f64,
    dt: f64,
    noise: f64,
    seed: u64,
    gravity: Option<[f64; 3]>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = kind_from(observer)?;
    let mut s = Scenario::reference();
    s.t_end = t_end;
    s.dt = dt;
    s.sensor.noise = noise;
    s.sensor.seed = seed;
    if let Some(g) = gravity {
        s.gravity = vec3(g);
    }
    let run = py.detach(|| sim::simulate(&s, kind)).map_err(to_py_err)?;
    let series = run.error_series();
    let d = PyDict::new(py);
    let state = run.last.estimator.state();
    d.set_item("observer", kind.name())?;
    d.set_item("t", series.iter().map(|e| e.t).collect::<Vec<_>>())?;
    d.set_item("error_norms", series.iter().map(|e| e.norms()).collect::<Vec<_>>())?;
    d.set_item("final_errors", run.last.errors.norms())?;
    d.set_item("gyro_bias", arr(&state.gyro_bias))?;
    d.set_item("accel_bias", arr(&state.accel_bias))?;
    d.set_item("p_bounds", run.last.p_bounds)?;
    Ok(d)
}

/// Replays a sensor log (or simulation trace) and returns the bias summary.
#[pyfunction]
#[pyo3(signature = (log, observer = "riccati", add_bias = [0.0, 0.0, 0.0]))]
fn replay_log<'py>(py: Python<'py>, log: PathBuf, observer: &str, add_bias: [f64; 3]) -> PyResult<Bound<'py, PyDict>> {
    let kind = kind_from(observer)?;
    let rows = read_sensor_log_path(&log).map_err(to_py_err)?;
    let opts = ReplayOptions {
        add_bias: vec3(add_bias),
        ..ReplayOptions::default()
    };
    let run = py.detach(|| replay::run_replay(&rows, kind, &opts)).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("observer", kind.name())?;
    d.set_item("rows", rows.len())?;
    d.set_item("gyro_bias", run.summary.gyro_bias.mean)?;
    d.set_item("accel_bias", run.summary.accel_bias.mean)?;
    d.set_item("gyro_converged", run.summary.gyro_bias.converged)?;
    d.set_item("accel_converged", run.summary.accel_bias.converged)?;
    d.set_item("fitted_rate", run.summary.fitted_rate)?;
    Ok(d)
}

/// One observer stepped by hand with held measurements.
#[pyclass(name = "Observer")]
struct PyObserver {
    inner: Estimator,
    gravity: Vec3,
    t: f64,
}

#[pymethods]
impl PyObserver {
    /// `kind` is "constant" or "riccati". Gains default to the reference values.
    #[new]
    #[pyo3(signature = (kind = "riccati", gains = None, riccati_scales = None, gravity = [0.0, 0.0, -9.81]))]
    fn new(
        kind: &str,
        gains: Option<(f64, f64, f64, f64, f64)>,
        riccati_scales: Option<(f64, f64, f64)>,
        gravity: [f64; 3],
    ) -> PyResult<Self> {
        let kind = kind_from(kind)?;
        let mut const_gains = ConstGains::reference();
        if let Some((k1, k2, k3, k4, k5)) = gains {
            const_gains = ConstGains { k1, k2, k3, k4, k5, ..const_gains };
        }
        let riccati = match riccati_scales {
            Some((p0, q, v)) => RiccatiState::from_scales(p0, q, v, const_gains.k1, const_gains.k2).map_err(to_py_err)?,
            None => RiccatiState::reference(),
        };
        Ok(Self {
            inner: Estimator::new(kind, ObserverState::default(), const_gains, riccati),
            gravity: vec3(gravity),
            t: 0.0,
        })
    }

    /// Advances by `dt` holding `(rotation, position, angular_velocity, acceleration)`.
    fn step(&mut self, rotation: Rows3, position: [f64; 3], angular_velocity: [f64; 3], acceleration: [f64; 3], dt: f64) -> PyResult<()> {
        if dt.is_nan() || dt <= 0.0 {
            return Err(PyValueError::new_err(format!("dt must be positive, got {dt}")));
        }
        let rotation = RotationMatrix::with_tolerance(mat(rotation), TOL_ORTH_MEASURED).map_err(to_py_err)?;
        let frame = MeasurementFrame {
            t: self.t,
            rotation,
            position: vec3(position),
            angular_velocity: vec3(angular_velocity),
            acceleration: vec3(acceleration),
        };
        self.inner.step(&frame, &self.gravity, dt).map_err(to_py_err)?;
        self.t += dt;
        Ok(())
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn t(&self) -> f64 {
        self.t
    }

    #[getter]
    fn rotation(&self) -> Rows3 {
        rows(&self.inner.state().rotation)
    }

    #[getter]
    fn position(&self) -> [f64; 3] {
        arr(&self.inner.state().position)
    }

    #[getter]
    fn velocity(&self) -> [f64; 3] {
        arr(&self.inner.state().velocity)
    }

    #[getter]
    fn gyro_bias(&self) -> [f64; 3] {
        arr(&self.inner.state().gyro_bias)
    }

    #[getter]
    fn accel_bias(&self) -> [f64; 3] {
        arr(&self.inner.state().accel_bias)
    }

    /// `(λ_min, λ_max)` of the Riccati matrix, or `None` for the constant-gain observer.
    #[getter]
    fn p_bounds(&self) -> Option<(f64, f64)> {
        self.inner.riccati().map(RiccatiState::p_bounds)
    }

    fn __repr__(&self) -> String {
        format!("Observer(kind={:?}, t={})", self.kind(), self.t)
    }
}

#[pymodule]
fn se3_observer_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hat, m)?)?;
    m.add_function(wrap_pyfunction!(vee, m)?)?;
    m.add_function(wrap_pyfunction!(exp_so3, m)?)?;
    m.add_function(wrap_pyfunction!(project_so3, m)?)?;
    m.add_function(wrap_pyfunction!(check_gains, m)?)?;
    m.add_function(wrap_pyfunction!(scale_gains, m)?)?;
    m.add_function(wrap_pyfunction!(observability_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(replay_log, m)?)?;
    m.add_class::<PyObserver>()?;
    Ok(())
}
