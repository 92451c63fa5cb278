//! Python bindings: run configs and backtests, metrics, and the classical
//! baselines on plain lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use panelcast::baselines::{fit_ets, fit_sarima, naive_forecast as naive, SarimaOrder, SeriesForecast};
use panelcast::harness::{self, EvaluationReport, RunConfig};
use panelcast::metrics::{self, MetricConfig};
use panelcast::panel::{generate_synthetic_panel, write_panel_csv, SyntheticConfig};
use panelcast::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Load { .. } => PyIOError::new_err(e.to_string()),
        Error::Config(_) | Error::Shape(_) | Error::InvalidData(_) | Error::InsufficientData(_) | Error::ZeroVariance(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

type Bounds = (Vec<f64>, Option<Vec<f64>>, Option<Vec<f64>>);

fn split(f: SeriesForecast) -> Bounds {
    (f.point, f.lower, f.upper)
}

/// A backtest configuration.
#[pyclass(name = "RunConfig", module = "panelcast", skip_from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    /// Parse TOML text.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyRunConfig { inner: RunConfig::parse(text).map_err(to_py)? })
    }

    /// Read a TOML file; relative paths resolve against its directory.
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(PyRunConfig { inner: RunConfig::from_file(&path).map_err(to_py)? })
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(to_py)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.inner.output_dir.clone()
    }

    #[setter]
    fn set_output_dir(&mut self, dir: PathBuf) {
        self.inner.output_dir = dir;
    }

    /// Display names of the configured models.
    #[getter]
    fn models(&self) -> Vec<String> {
        self.inner.models.iter().map(|m| m.display_name()).collect()
    }

    fn __repr__(&self) -> String {
        format!("RunConfig(seed={}, models={:?})", self.inner.seed, self.models())
    }
}

/// Result of a backtest.
#[pyclass(name = "Report", module = "panelcast")]
struct PyReport {
    inner: EvaluationReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn origins(&self) -> Vec<String> {
        self.inner.origins.iter().map(|d| d.to_string()).collect()
    }

    #[getter]
    fn groups(&self) -> Vec<String> {
        self.inner.groups.clone()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon
    }

    /// `{model: {"MAE": .., "RMSE": .., "MAPE": .., "MSE": .., "MIS": ..}}`
    /// for the models that succeeded.
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for m in &self.inner.models {
            if let Some(x) = &m.metrics {
                let d = PyDict::new(py);
                let o = &x.overall;
                d.set_item("MAE", o.mae)?;
                d.set_item("RMSE", o.rmse)?;
                d.set_item("MAPE", o.mape)?;
                d.set_item("MSE", o.mse)?;
                d.set_item("MIS", o.mis)?;
                d.set_item("weekly_MAPE", x.weekly.weeks.clone())?;
                out.set_item(&m.name, d)?;
            }
        }
        Ok(out)
    }

    /// Mean attention by relative position, when a TFT ran.
    fn attention_profile(&self) -> Option<Vec<(i64, f64)>> {
        let a = &self.inner.interpretation.as_ref()?.attention;
        Some(a.positions.iter().copied().zip(a.weights.iter().copied()).collect())
    }

    /// `report.json` content.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn summary(&self) -> String {
        self.inner.summary()
    }

    /// Write the report files; returns their paths.
    fn emit(&self, dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        harness::emit_report(&self.inner, &dir).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Report(models={}, origins={})", self.inner.models.len(), self.inner.origins.len())
    }
}

/// Run a backtest (the GIL is released while it runs).
#[pyfunction]
fn run_backtest(py: Python<'_>, config: &PyRunConfig) -> PyResult<PyReport> {
    let cfg = config.inner.clone();
    let inner = py.detach(move || harness::run_backtest(&cfg)).map_err(to_py)?;
    Ok(PyReport { inner })
}

/// Load a report directory.
#[pyfunction]
fn read_report(dir: PathBuf) -> PyResult<PyReport> {
    Ok(PyReport { inner: harness::read_report(&dir).map_err(to_py)? })
}

/// Write a synthetic panel CSV and its schema; `config` is generator TOML
/// (missing keys take their defaults). Returns the number of rows.
#[pyfunction]
#[pyo3(signature = (csv_path, schema_path, config = ""))]
fn write_synthetic_panel(csv_path: PathBuf, schema_path: PathBuf, config: &str) -> PyResult<usize> {
    let cfg: SyntheticConfig = toml_from(config)?;
    cfg.validate().map_err(to_py)?;
    let ds = generate_synthetic_panel(&cfg).map_err(to_py)?;
    write_panel_csv(&ds, &csv_path).map_err(to_py)?.write(&schema_path).map_err(to_py)?;
    Ok(ds.n_rows())
}

fn toml_from(text: &str) -> PyResult<SyntheticConfig> {
    let cfg = RunConfig::parse(&format!(
        "output_dir = \".\"\nmodels = []\n[split]\nval_start = \"2000-01-02\"\ntest_start = \"2000-01-03\"\n[data.synthetic]\n{text}"
    ))
    .map_err(to_py)?;
    Ok(cfg.data.synthetic.expect("synthetic table present"))
}

/// Point metrics averaged across groups: `actuals[g]` and `forecasts[g]`
/// are the pooled points of group `g`.
#[pyfunction]
#[pyo3(signature = (actuals, forecasts, mape_epsilon = 1.0))]
fn point_metrics<'py>(
    py: Python<'py>,
    actuals: Vec<Vec<f64>>,
    forecasts: Vec<Vec<f64>>,
    mape_epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = MetricConfig { mape_epsilon, ..MetricConfig::default() };
    let r = metrics::compute_point_metrics(&actuals, &forecasts, &cfg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("MAE", r.mae)?;
    d.set_item("RMSE", r.rmse)?;
    d.set_item("MAPE", r.mape)?;
    d.set_item("MSE", r.mse)?;
    d.set_item("mape_excluded", r.mape_excluded)?;
    Ok(d)
}

/// Mean interval score averaged across groups.
#[pyfunction]
#[pyo3(signature = (actuals, lower, upper, alpha = 0.95))]
fn interval_score(actuals: Vec<Vec<f64>>, lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>>, alpha: f64) -> PyResult<f64> {
    let cfg = MetricConfig { mis_alpha: alpha, ..MetricConfig::default() };
    metrics::mean_interval_score(&actuals, &lower, &upper, &cfg).map_err(to_py)
}

/// Pinball loss of one point.
#[pyfunction]
fn quantile_loss(y: f64, yhat: f64, q: f64) -> PyResult<f64> {
    metrics::quantile_loss(y, yhat, q).map_err(to_py)
}

/// Recompute `metrics.csv` from forecast and actual CSVs.
#[pyfunction]
#[pyo3(signature = (forecasts, actuals, week_len = 7))]
fn recompute_metrics(forecasts: PathBuf, actuals: PathBuf, week_len: usize) -> PyResult<String> {
    let rows = harness::recompute_metrics(&forecasts, &actuals, &MetricConfig::default(), week_len).map_err(to_py)?;
    Ok(harness::metrics_csv(&rows))
}

/// Repeat the last `k` values over the horizon.
#[pyfunction]
#[pyo3(signature = (history, horizon, k = 7))]
fn naive_forecast(history: Vec<f64>, horizon: usize, k: usize) -> PyResult<Vec<f64>> {
    naive(&history, k, horizon).map_err(to_py)
}

/// Additive Holt-Winters forecast: `(point, lower, upper)`.
#[pyfunction]
#[pyo3(signature = (history, horizon, period = 7, coverage = 0.95))]
fn ets_forecast(history: Vec<f64>, horizon: usize, period: usize, coverage: f64) -> PyResult<Bounds> {
    let m = fit_ets(&history, period).map_err(to_py)?;
    Ok(split(m.forecast(horizon, coverage).map_err(to_py)?))
}

/// Seasonal ARIMA forecast for `order = (p, d, q, P, D, Q, m)`.
#[pyfunction]
#[pyo3(signature = (history, horizon, order, coverage = 0.95))]
fn sarima_forecast(
    history: Vec<f64>,
    horizon: usize,
    order: (usize, usize, usize, usize, usize, usize, usize),
    coverage: f64,
) -> PyResult<Bounds> {
    let (p, d, q, sp, sd, sq, m) = order;
    let order = SarimaOrder { p, d, q, P: sp, D: sd, Q: sq, m };
    let model = fit_sarima(&history, order).map_err(to_py)?;
    Ok(split(model.forecast(&history, horizon, coverage).map_err(to_py)?))
}

/// The `panelcast` Python module.
#[pymodule]
#[pyo3(name = "panelcast")]
pub fn panelcast_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(run_backtest, m)?)?;
    m.add_function(wrap_pyfunction!(read_report, m)?)?;
    m.add_function(wrap_pyfunction!(write_synthetic_panel, m)?)?;
    m.add_function(wrap_pyfunction!(point_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(interval_score, m)?)?;
    m.add_function(wrap_pyfunction!(quantile_loss, m)?)?;
    m.add_function(wrap_pyfunction!(recompute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(naive_forecast, m)?)?;
    m.add_function(wrap_pyfunction!(ets_forecast, m)?)?;
    m.add_function(wrap_pyfunction!(sarima_forecast, m)?)?;
    Ok(())
}
