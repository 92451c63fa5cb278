//! Experiment orchestration: run configuration, the rolling-origin
//! backtest and the report files.

mod config;
mod report;
mod run;

pub use config::{BacktestConfig, DataConfig, ModelConfig, ModelKind, RunConfig, SplitConfig};
pub use report::{
    emit_report, evaluate_forecasts, forecast_error_ecdf, metrics_csv, read_report, recompute_metrics, weekly_mape_csv,
    ActualTable, AuditSummary, EvaluationReport, IntervalLevels, ModelMetrics, ModelReport, Provenance,
};
pub use run::{config_hash, forecast_origins, load_dataset, run_backtest};
