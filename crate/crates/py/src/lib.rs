//! Python bindings. Structured values cross the boundary as plain lists or
//! JSON strings in the same formats the CLI writes.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use psyframe::command::{self, Move};
use psyframe::model::Posterior;
use psyframe::pipeline::{self, PipelineConfig};
use psyframe::robot::RobotState;
use psyframe::signal::{self, EegWindow};
use psyframe::synth::{self, ClassLabel};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn label(class_id: u8) -> PyResult<ClassLabel> {
    ClassLabel::new(class_id).map_err(err)
}

/// Snake-case name as used in the JSON formats, e.g. "heavy_punch".
fn wire_name(m: Move) -> String {
    serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn parse_move(name: &str) -> PyResult<Move> {
    serde_json::from_value(serde_json::Value::from(name)).map_err(|_| err(format!("unknown move {name:?}")))
}

fn config(toml: Option<&str>) -> PyResult<PipelineConfig> {
    match toml {
        Some(t) => PipelineConfig::from_toml(t).map_err(err),
        None => Ok(PipelineConfig::default()),
    }
}

/// One synthetic 14-channel window as a list of rows (microvolts).
#[pyfunction]
fn synth_window(class_id: u8, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let w = synth::synth_window(label(class_id)?, seed);
    Ok(w.rows().map(<[f64]>::to_vec).collect())
}

/// Preprocess a window and return its 182 feature values.
#[pyfunction]
fn window_features(rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let w = EegWindow::from_rows(&rows, 0).map_err(err)?;
    let f = psyframe::features::window_features(&w).map_err(err)?;
    Ok(f.values)
}

/// Band-pass design; returns expanded (b, a) coefficients.
#[pyfunction]
fn design_bandpass(lo: f64, hi: f64, fs: f64, order: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let f = signal::design_bandpass(lo, hi, fs, order).map_err(err)?;
    Ok((f.numerator(), f.denominator()))
}

/// Train with the given TOML config (defaults when omitted); returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (config_toml=None))]
fn train(config_toml: Option<&str>) -> PyResult<String> {
    let cfg = config(config_toml)?;
    let report = pipeline::run_train(&cfg, None).map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

/// Class posterior for a window under a saved model.
#[pyfunction]
fn predict(model_path: PathBuf, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let model = pipeline::load_model(&model_path).map_err(err)?;
    let w = EegWindow::from_rows(&rows, 0).map_err(err)?;
    let f = psyframe::features::window_features(&w).map_err(err)?;
    Ok(psyframe::model::predict(&model.weights, &f).map_err(err)?.probs.to_vec())
}

/// Run a logged session; returns the number of ticks.
#[pyfunction]
#[pyo3(signature = (log_path, config_toml=None))]
fn run_session(log_path: PathBuf, config_toml: Option<&str>) -> PyResult<u64> {
    let cfg = config(config_toml)?;
    let model = pipeline::load_model(&cfg.model_path).map_err(err)?;
    pipeline::run_session(&cfg, &model, Some(&log_path), |_| Ok(())).map_err(err)
}

/// Replay a session log; returns (ticks, mismatched tick indices).
#[pyfunction]
fn replay_session(log_path: PathBuf) -> PyResult<(u64, Vec<u64>)> {
    let s = pipeline::replay_session(&log_path).map_err(err)?;
    Ok((s.ticks, s.mismatched))
}

#[pyclass]
struct Integrator {
    inner: command::IntegratorState,
}

#[pymethods]
impl Integrator {
    #[new]
    #[pyo3(signature = (lambda_=command::DEFAULT_LAMBDA, theta=command::DEFAULT_THETA, refractory=command::DEFAULT_REFRACTORY))]
    fn new(lambda_: f64, theta: f64, refractory: u32) -> PyResult<Self> {
        let p = command::IntegratorParams { lambda: lambda_, theta, refractory, ..Default::default() };
        p.validate().map_err(err)?;
        Ok(Self { inner: command::IntegratorState::new(&p) })
    }

    /// Feed one posterior; returns the triggered move name, if any.
    fn integrate(&mut self, probs: [f64; 5]) -> Option<String> {
        self.inner.integrate(&Posterior { probs }).map(wire_name)
    }

    fn leak(&mut self) {
        self.inner.leak();
    }

    #[getter]
    fn accumulators(&self) -> Vec<f64> {
        self.inner.accumulators.to_vec()
    }
}

#[pyclass]
struct ComboResolver {
    inner: command::ComboResolver,
}

#[pymethods]
impl ComboResolver {
    #[new]
    #[pyo3(signature = (window=command::DEFAULT_COMBO_WINDOW))]
    fn new(window: u64) -> Self {
        Self { inner: command::ComboResolver::new(window) }
    }

    /// Advance to `tick` with an optional trigger; returns emitted move names.
    #[pyo3(signature = (tick, trigger=None))]
    fn step(&mut self, tick: u64, trigger: Option<&str>) -> PyResult<Vec<String>> {
        let t = trigger.map(parse_move).transpose()?;
        Ok(self.inner.step(tick, t).into_iter().map(|e| wire_name(e.mv)).collect())
    }

    fn flush(&mut self, tick: u64) -> Vec<String> {
        self.inner.flush(tick).into_iter().map(|e| wire_name(e.mv)).collect()
    }
}

#[pyclass]
struct Robot {
    inner: RobotState,
}

#[pymethods]
impl Robot {
    #[new]
    #[pyo3(signature = (servo_k=psyframe::robot::DEFAULT_SERVO_K))]
    fn new(servo_k: f64) -> Self {
        Self { inner: RobotState::new(servo_k) }
    }

    /// Queue a move; false when the queue was full and the move was dropped.
    fn dispatch(&mut self, name: &str) -> PyResult<bool> {
        Ok(self.inner.dispatch(parse_move(name)?))
    }

    fn step(&mut self, dt_ms: u64) {
        self.inner.step(dt_ms);
    }

    #[getter]
    fn angles(&self) -> Vec<f64> {
        self.inner.angles.to_vec()
    }

    #[getter]
    fn dropped_moves(&self) -> u64 {
        self.inner.dropped_moves
    }
}

#[pyclass]
struct Decoder {
    inner: pipeline::Decoder,
}

#[pymethods]
impl Decoder {
    #[new]
    #[pyo3(signature = (config_toml=None))]
    fn new(config_toml: Option<&str>) -> PyResult<Self> {
        let cfg = config(config_toml)?;
        let model = pipeline::load_model(&cfg.model_path).map_err(err)?;
        Ok(Self { inner: pipeline::Decoder::new(cfg, model.weights).map_err(err)? })
    }

    /// One hop; returns the tick record as a JSON line, or None when paused or exhausted.
    fn hop(&mut self) -> PyResult<Option<String>> {
        match self.inner.hop().map_err(err)? {
            Some(r) => Ok(Some(serde_json::to_string(&r).map_err(err)?)),
            None => Ok(None),
        }
    }

    /// Apply a control message given as JSON (the `msg` part of an inbound line).
    fn apply(&mut self, msg_json: &str) -> PyResult<()> {
        let msg: pipeline::Control = serde_json::from_str(msg_json).map_err(err)?;
        self.inner.apply(&msg).map_err(err)
    }

    #[getter]
    fn next_tick(&self) -> u64 {
        self.inner.next_tick()
    }
}

#[pymodule]
fn psyframe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(synth_window, m)?)?;
    m.add_function(wrap_pyfunction!(window_features, m)?)?;
    m.add_function(wrap_pyfunction!(design_bandpass, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(run_session, m)?)?;
    m.add_function(wrap_pyfunction!(replay_session, m)?)?;
    m.add_class::<Integrator>()?;
    m.add_class::<ComboResolver>()?;
    m.add_class::<Robot>()?;
    m.add_class::<Decoder>()?;
    Ok(())
}
