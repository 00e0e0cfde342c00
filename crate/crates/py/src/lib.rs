//! Python bindings: segments, FVDM simulation, DIRECT, calibration, quality
//! summaries, synthetic fixtures and the threshold replay.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use tlssc_core::behavior::{decide_mode_with, BehaviorLabel, DEFAULT_FOLLOW_THRESHOLD_M};
use tlssc_core::calibration::{self, reference_fit, CalibrationProblem, ParamBounds};
use tlssc_core::direct::{self, OptimizerConfig};
use tlssc_core::fvdm::{self, LeaderSpec, SimState};
use tlssc_core::synth::{self, AcceleratingConfig, OscillationConfig, StoppingConfig};
use tlssc_core::threshold::{self, ThresholdConfig};
use tlssc_core::trajectory::{self, Schema, SegmentMeta};
use tlssc_core::{quality, report, units};

create_exception!(tlssc, TlsscError, PyException, "Raised for any toolkit error; the message starts with its kind.");

fn err(e: tlssc_core::Error) -> PyErr {
    TlsscError::new_err(format!("{}: {e}", e.kind()))
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| TlsscError::new_err(format!("json: {e}")))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "FvdmParams", module = "tlssc", from_py_object)]
#[derive(Clone)]
struct PyFvdmParams {
    inner: fvdm::FvdmParams,
}

#[pymethods]
impl PyFvdmParams {
    #[new]
    fn new(alpha: f64, beta: f64, s0: f64, delta_s: f64, v_max: f64) -> PyResult<Self> {
        let inner = fvdm::FvdmParams::new(alpha, beta, s0, delta_s, v_max);
        inner.validate().map_err(err)?;
        Ok(PyFvdmParams { inner })
    }

    /// Published fit of a calibration group, e.g. `"stopping"`.
    #[staticmethod]
    fn reference(group: &str, v_max: f64) -> PyResult<Self> {
        reference_fit(group)
            .map(|f| PyFvdmParams { inner: f.params(v_max) })
            .ok_or_else(|| TlsscError::new_err(format!("invalid_input: unknown group `{group}`")))
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }
    #[getter]
    fn s0(&self) -> f64 {
        self.inner.s0
    }
    #[getter]
    fn delta_s(&self) -> f64 {
        self.inner.delta_s
    }
    #[getter]
    fn v_max(&self) -> f64 {
        self.inner.v_max
    }

    fn optimal_velocity(&self, spacing: f64) -> f64 {
        fvdm::optimal_velocity(spacing, &self.inner)
    }

    fn acceleration(&self, v: f64, v_lead: f64, spacing: f64) -> f64 {
        fvdm::acceleration(v, v_lead, spacing, &self.inner)
    }

    fn equilibrium_spacing(&self, u: f64) -> f64 {
        self.inner.equilibrium_spacing(u)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "FvdmParams(alpha={}, beta={}, s0={}, delta_s={}, v_max={})",
            p.alpha, p.beta, p.s0, p.delta_s, p.v_max
        )
    }
}

/// One trajectory segment.
#[pyclass(name = "Segment", module = "tlssc", from_py_object)]
#[derive(Clone)]
struct PySegment {
    inner: trajectory::TrajectorySegment,
}

#[pymethods]
impl PySegment {
    /// Reads a segment file and its `.ann.json` sidecar when present.
    #[staticmethod]
    #[pyo3(signature = (path, dt=units::DT_NOMINAL))]
    fn read(path: PathBuf, dt: f64) -> PyResult<Self> {
        let defaults = SegmentMeta { dt_nominal: dt, ..SegmentMeta::default() };
        trajectory::read_segment_file(&path, &Schema::default(), &defaults)
            .map(|inner| PySegment { inner })
            .map_err(err)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(&path)?;
        trajectory::write_segment(file, &self.inner, None, &[]).map_err(err)?;
        if let Some(ann) = &self.inner.annotation {
            std::fs::write(path.with_extension("ann.json"), ann.to_json(self.inner.utc_offset_s).map_err(err)?)?;
        }
        Ok(())
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }
    /// Label slug, e.g. `stop-sign` or `standard-follow-4`.
    #[getter]
    fn behavior(&self) -> String {
        self.inner.behavior.slug()
    }
    #[getter]
    fn desired_speed(&self) -> Option<f64> {
        self.inner.desired_speed
    }
    #[getter]
    fn has_lead(&self) -> bool {
        self.inner.has_lead()
    }
    #[getter]
    fn has_smoothed(&self) -> bool {
        self.inner.has_smoothed()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.t).collect()
    }

    fn speeds(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.raw.speed).collect()
    }

    #[pyo3(signature = (max_gap=trajectory::DEFAULT_MAX_GAP_S))]
    fn fill_gaps(&self, max_gap: f64) -> PyResult<Self> {
        trajectory::interpolate_gaps(&self.inner, max_gap).map(|inner| PySegment { inner }).map_err(err)
    }

    #[pyo3(signature = (window_samples=trajectory::DEFAULT_WINDOW_SAMPLES))]
    fn smooth(&self, window_samples: usize) -> PyResult<Self> {
        trajectory::smooth_segment(&self.inner, window_samples).map(|inner| PySegment { inner }).map_err(err)
    }

    /// Longitudinal series as a dict of lists (`t`, `position`, `speed`,
    /// `accel`, `jerk`, `leader`, `spacing`, `source`).
    fn project<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &trajectory::project_to_path(&self.inner).map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("Segment(id={:?}, behavior={:?}, samples={})", self.inner.id, self.behavior(), self.inner.len())
    }
}

#[pyclass(name = "CalibrationResult", module = "tlssc", from_py_object)]
#[derive(Clone)]
struct PyCalibrationResult {
    inner: calibration::CalibrationResult,
}

#[pymethods]
impl PyCalibrationResult {
    #[getter]
    fn group(&self) -> String {
        self.inner.group.clone()
    }
    #[getter]
    fn params(&self) -> PyFvdmParams {
        PyFvdmParams { inner: self.inner.params }
    }
    #[getter]
    fn rmse(&self) -> f64 {
        self.inner.rmse
    }
    #[getter]
    fn evals(&self) -> usize {
        self.inner.evals
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("CalibrationResult(group={:?}, rmse={:.4}, evals={})", self.inner.group, self.inner.rmse, self.inner.evals)
    }
}

#[pyclass(name = "QualityReport", module = "tlssc", from_py_object)]
#[derive(Clone)]
struct PyQualityReport {
    inner: quality::QualityReport,
}

#[pymethods]
impl PyQualityReport {
    #[getter]
    fn category(&self) -> &'static str {
        self.inner.category.title()
    }
    #[getter]
    fn segment_count(&self) -> usize {
        self.inner.segment_count
    }
    #[getter]
    fn distance(&self) -> f64 {
        self.inner.distance
    }
    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }
}

#[pyfunction]
#[pyo3(signature = (path, dt=units::DT_NOMINAL))]
fn read_segments(path: PathBuf, dt: f64) -> PyResult<Vec<PySegment>> {
    let defaults = SegmentMeta { dt_nominal: dt, ..SegmentMeta::default() };
    let segs = trajectory::read_segment_dir(&path, &Schema::default(), &defaults).map_err(err)?;
    Ok(segs.into_iter().map(|inner| PySegment { inner }).collect())
}

#[pyfunction]
fn moving_average(series: Vec<f64>, window_samples: usize) -> PyResult<Vec<f64>> {
    trajectory::moving_average(&series, window_samples).map_err(err)
}

#[pyfunction]
fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    trajectory::haversine(lat1, lon1, lat2, lon2)
}

/// Simulates from `(x0, v0)`. `leader` is `"free"`, `"stop"` (with
/// `stop_line`) or `"recorded"` (with `leader_t`, `leader_x`, `leader_v`).
#[pyfunction]
#[pyo3(signature = (params, v0, horizon, leader="free", stop_line=None, leader_t=None, leader_x=None, leader_v=None, x0=0.0, dt=units::DT_NOMINAL))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    params: &PyFvdmParams,
    v0: f64,
    horizon: f64,
    leader: &str,
    stop_line: Option<f64>,
    leader_t: Option<Vec<f64>>,
    leader_x: Option<Vec<f64>>,
    leader_v: Option<Vec<f64>>,
    x0: f64,
    dt: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let bad = |m: &str| TlsscError::new_err(format!("invalid_input: {m}"));
    let spec = match leader {
        "free" => LeaderSpec::VirtualFree,
        "stop" => LeaderSpec::VirtualStopped(stop_line.ok_or_else(|| bad("leader='stop' needs stop_line"))?),
        "recorded" => match (leader_t, leader_x, leader_v) {
            (Some(t), Some(position), Some(speed)) if t.len() == position.len() && t.len() == speed.len() => {
                LeaderSpec::Recorded(trajectory::LeaderTrack { t, position, speed })
            }
            _ => return Err(bad("leader='recorded' needs leader_t, leader_x, leader_v of equal length")),
        },
        other => return Err(bad(&format!("unknown leader `{other}`"))),
    };
    let p = params.inner;
    let out = py
        .detach(|| fvdm::simulate(SimState { t: 0.0, x: x0, v: v0 }, &spec, &p, dt, horizon))
        .map_err(err)?;
    to_py(py, &out)
}

/// Minimizes a Python callable over a box. Returns `(x, f, evals)`.
#[pyfunction]
#[pyo3(signature = (objective, bounds, max_evals=2000, epsilon=1e-4))]
fn minimize(
    objective: &Bound<'_, PyAny>,
    bounds: Vec<(f64, f64)>,
    max_evals: usize,
    epsilon: f64,
) -> PyResult<(Vec<f64>, f64, usize)> {
    let mut failure: Option<PyErr> = None;
    let f = |x: &[f64]| -> f64 {
        if failure.is_some() {
            return f64::NAN;
        }
        match objective.call1((x.to_vec(),)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        }
    };
    let m = direct::minimize(f, &bounds, &OptimizerConfig { max_evals, epsilon }).map_err(err)?;
    match failure {
        Some(e) => Err(e),
        None => Ok((m.x, m.f, m.evals)),
    }
}

/// Fits one group of segments.
#[pyfunction]
#[pyo3(signature = (segments, max_evals=2000, epsilon=1e-4, bounds=None, dt=units::DT_NOMINAL))]
fn calibrate(
    py: Python<'_>,
    segments: Vec<PySegment>,
    max_evals: usize,
    epsilon: f64,
    bounds: Option<&str>,
    dt: f64,
) -> PyResult<PyCalibrationResult> {
    let bounds = match bounds {
        Some(b) => ParamBounds::parse(b).map_err(err)?,
        None => ParamBounds::default(),
    };
    let problem = CalibrationProblem {
        segments: segments.into_iter().map(|s| s.inner).collect(),
        bounds,
        optimizer: OptimizerConfig { max_evals, epsilon },
        dt,
    };
    let inner = py.detach(|| calibration::calibrate(&problem)).map_err(err)?;
    Ok(PyCalibrationResult { inner })
}

/// Category rows plus the pooled "All behaviors" row.
#[pyfunction]
#[pyo3(signature = (segments, window_samples=trajectory::DEFAULT_WINDOW_SAMPLES))]
fn assess(segments: Vec<PySegment>, window_samples: usize) -> PyResult<Vec<PyQualityReport>> {
    let segs: Vec<_> = segments.into_iter().map(|s| s.inner).collect();
    let rows = quality::summarize_by_category(&segs, window_samples).map_err(err)?;
    Ok(rows.into_iter().map(|inner| PyQualityReport { inner }).collect())
}

/// Calibration and quality tables as delimited text.
#[pyfunction]
#[pyo3(signature = (results, quality=Vec::new()))]
fn render_report(results: Vec<PyCalibrationResult>, quality: Vec<PyQualityReport>) -> String {
    let r: Vec<_> = results.into_iter().map(|x| x.inner).collect();
    let q: Vec<_> = quality.into_iter().map(|x| x.inner).collect();
    report::render(&r, &q)
}

/// `"Following"` or `"PermissionStopping"`.
#[pyfunction]
#[pyo3(signature = (lead_present, lead_distance, threshold=DEFAULT_FOLLOW_THRESHOLD_M, inclusive=true))]
fn decide_mode(lead_present: bool, lead_distance: f64, threshold: f64, inclusive: bool) -> String {
    decide_mode_with(lead_present, lead_distance, threshold, inclusive).mode.to_string()
}

#[pyfunction]
#[pyo3(signature = (activation_distance, threshold_m=DEFAULT_FOLLOW_THRESHOLD_M, inclusive=true))]
fn threshold_replay<'py>(
    py: Python<'py>,
    activation_distance: f64,
    threshold_m: f64,
    inclusive: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ThresholdConfig { threshold_m, inclusive, ..ThresholdConfig::at_distance(activation_distance) };
    to_py(py, &threshold::replay(&cfg).map_err(err)?)
}

/// Car-following fixture behind a 40-30-20-30-40 mph leader.
#[pyfunction]
#[pyo3(signature = (params, label="standard-follow-4", noise_std=0.0, seed=0))]
fn synth_oscillation(params: &PyFvdmParams, label: &str, noise_std: f64, seed: u64) -> PyResult<PySegment> {
    let label: BehaviorLabel = label.parse().map_err(err)?;
    let cfg = OscillationConfig { label, noise_std, seed, ..Default::default() };
    synth::synth_oscillation("oscillation", &params.inner, &cfg).map(|inner| PySegment { inner }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (params, initial_speed=units::mph_to_mps(35.0), stop_line_m=150.0, noise_std=0.0, seed=0))]
fn synth_stopping(
    params: &PyFvdmParams,
    initial_speed: f64,
    stop_line_m: f64,
    noise_std: f64,
    seed: u64,
) -> PyResult<PySegment> {
    let cfg = StoppingConfig { initial_speed, stop_line_m, noise_std, seed, ..Default::default() };
    synth::synth_stopping("stopping", &params.inner, &cfg).map(|inner| PySegment { inner }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (params, duration_s=20.0, noise_std=0.0, seed=0))]
fn synth_accelerating(params: &PyFvdmParams, duration_s: f64, noise_std: f64, seed: u64) -> PyResult<PySegment> {
    let cfg = AcceleratingConfig { duration_s, noise_std, seed, ..Default::default() };
    synth::synth_accelerating("accelerating", &params.inner, &cfg).map(|inner| PySegment { inner }).map_err(err)
}

#[pymodule]
fn tlssc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TlsscError", m.py().get_type::<TlsscError>())?;
    m.add("MPH_TO_MPS", units::MPH_TO_MPS)?;
    m.add("DT_NOMINAL", units::DT_NOMINAL)?;
    m.add_class::<PyFvdmParams>()?;
    m.add_class::<PySegment>()?;
    m.add_class::<PyCalibrationResult>()?;
    m.add_class::<PyQualityReport>()?;
    m.add_function(wrap_pyfunction!(read_segments, m)?)?;
    m.add_function(wrap_pyfunction!(moving_average, m)?)?;
    m.add_function(wrap_pyfunction!(haversine, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(assess, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    m.add_function(wrap_pyfunction!(decide_mode, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_replay, m)?)?;
    m.add_function(wrap_pyfunction!(synth_oscillation, m)?)?;
    m.add_function(wrap_pyfunction!(synth_stopping, m)?)?;
    m.add_function(wrap_pyfunction!(synth_accelerating, m)?)?;
    Ok(())
}
