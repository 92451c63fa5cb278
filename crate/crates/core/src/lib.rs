//! Grouped time-series probabilistic forecasting.
//!
//! `panelcast` ingests a panel of daily series (one per group, e.g. a health
//! region) with static, past-observed and future-known covariates, and
//! forecasts a multi-week horizon with a Temporal Fusion Transformer and a
//! set of classical baselines. A rolling-origin backtest harness pools the
//! forecasts into point and interval metrics and, for the transformer,
//! attention and covariate-importance summaries.
//!
//! Module map:
//!
//! * [`panel`]: dataset model, CSV ingestion, calendar features, exclusion
//!   gaps, splits, normalization, windowing and a synthetic generator.
//! * [`metrics`]: MAE / RMSE / MAPE / MSE / MIS, quantile loss, weekly MAPE,
//!   ECDF of absolute errors, Pearson correlation.
//! * [`baselines`]: naive-k, additive Holt-Winters, seasonal ARIMA,
//!   differenced VAR and gradient-boosted quantile trees.
//! * [`tft`]: the Temporal Fusion Transformer with its own reverse-mode tape.
//! * [`interpret`]: global attention and importance summaries.
//! * [`harness`]: run configuration, backtest orchestration and report files.
#![warn(missing_docs)]

pub mod baselines;
mod error;
pub mod harness;
pub mod interpret;
pub mod metrics;
mod optim;
pub mod panel;
pub mod tft;

pub use error::{Error, Result};
