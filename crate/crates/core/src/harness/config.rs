use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::baselines::{GbtParams, SarimaOrder};
use crate::metrics::MetricConfig;
use crate::panel::{DateRange, SyntheticConfig};
use crate::tft::TftHyperParams;
use crate::{Error, Result};

/// Where the panel comes from: a CSV file with its schema, or the
/// synthetic generator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Panel CSV.
    pub csv: Option<PathBuf>,
    /// Column-role schema of the CSV.
    pub schema: Option<PathBuf>,
    /// Holiday dates; when given, calendar features are derived and added
    /// as future covariates.
    pub holidays: Option<PathBuf>,
    /// Generator settings (mutually exclusive with `csv`).
    pub synthetic: Option<SyntheticConfig>,
}

/// Split boundaries. Training data ends the day before `val_start`,
/// validation the day before `test_start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// First validation date.
    pub val_start: NaiveDate,
    /// First test date (first forecast origin).
    pub test_start: NaiveDate,
    /// Last test date; defaults to the end of the data.
    pub test_end: Option<NaiveDate>,
}

/// Rolling-origin settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    /// Days between consecutive origins.
    pub stride: usize,
    /// Forecast horizon (days).
    pub horizon: usize,
    /// Days per reported week in the weekly MAPE table.
    pub week_len: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig { stride: 7, horizon: 28, week_len: 7 }
    }
}

/// Forecaster family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Repeat the last `k` days.
    Naive,
    /// Additive Holt-Winters.
    Ets,
    /// Seasonal ARIMA.
    Sarima,
    /// Differenced VAR across groups.
    Var,
    /// Gradient-boosted trees.
    Gbt,
    /// Temporal Fusion Transformer.
    Tft,
}

impl ModelKind {
    fn label(self) -> &'static str {
        match self {
            ModelKind::Naive => "naive",
            ModelKind::Ets => "ets",
            ModelKind::Sarima => "sarima",
            ModelKind::Var => "var",
            ModelKind::Gbt => "gbt",
            ModelKind::Tft => "tft",
        }
    }
}

fn seven() -> usize {
    7
}

fn coverage_95() -> f64 {
    0.95
}

fn yes() -> bool {
    true
}

fn var_diffs() -> Vec<usize> {
    vec![0, 1]
}

/// One model entry. Options that do not apply to `kind` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Family.
    pub kind: ModelKind,
    /// Report name; defaults to the family (`naive<k>` for naive).
    pub name: Option<String>,
    /// Naive period.
    #[serde(default = "seven")]
    pub k: usize,
    /// ETS / SARIMA season length.
    #[serde(default = "seven")]
    pub period: usize,
    /// Interval coverage of ETS, SARIMA and GBT.
    #[serde(default = "coverage_95")]
    pub coverage: f64,
    /// Cap on the history (days) classical models are fitted on.
    pub max_history: Option<usize>,
    /// SARIMA candidate orders; the default grid when absent.
    pub sarima_grid: Option<Vec<SarimaOrder>>,
    /// Largest VAR lag order tried.
    #[serde(default = "seven")]
    pub var_max_p: usize,
    /// VAR differencing orders tried.
    #[serde(default = "var_diffs")]
    pub var_diffs: Vec<usize>,
    /// Boosting settings.
    #[serde(default)]
    pub gbt: GbtParams,
    /// Stride between training windows of GBT and TFT.
    pub train_stride: Option<usize>,
    /// TFT hyperparameters (the seed is taken from the run).
    #[serde(default)]
    pub tft: TftHyperParams,
    /// Sort TFT quantiles per step before use.
    #[serde(default = "yes")]
    pub enforce_monotonic: bool,
}

impl ModelConfig {
    /// Entry with all defaults.
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            name: None,
            k: 7,
            period: 7,
            coverage: 0.95,
            max_history: None,
            sarima_grid: None,
            var_max_p: 7,
            var_diffs: var_diffs(),
            gbt: GbtParams::default(),
            train_stride: None,
            tft: TftHyperParams::default(),
            enforce_monotonic: true,
        }
    }

    /// Name used in reports and file names.
    pub fn display_name(&self) -> String {
        match (&self.name, self.kind) {
            (Some(n), _) => n.clone(),
            (None, ModelKind::Naive) => format!("naive{}", self.k),
            (None, k) => k.label().to_string(),
        }
    }
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every random stream in the run.
    #[serde(default)]
    pub seed: u64,
    /// Report directory.
    pub output_dir: PathBuf,
    /// Data source.
    pub data: DataConfig,
    /// Date ranges removed before anything else.
    #[serde(default)]
    pub exclude: Vec<DateRange>,
    /// Split boundaries.
    pub split: SplitConfig,
    /// Rolling-origin settings.
    #[serde(default)]
    pub backtest: BacktestConfig,
    /// Metric settings.
    #[serde(default)]
    pub metrics: MetricConfig,
    /// Models to evaluate, in report order.
    pub models: Vec<ModelConfig>,
}

impl RunConfig {
    /// Parse TOML text. Relative paths are kept as written.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Read a TOML file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.output_dir);
        for p in [&mut cfg.data.csv, &mut cfg.data.schema, &mut cfg.data.holidays].into_iter().flatten() {
            fix(p);
        }
        Ok(cfg)
    }

    /// TOML rendering.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Check invariants and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        match (&d.csv, &d.synthetic) {
            (Some(_), Some(_)) => return Err(Error::Config("data: give either csv or synthetic, not both".into())),
            (None, None) => return Err(Error::Config("data: one of csv or synthetic is required".into())),
            (Some(_), None) if d.schema.is_none() => {
                return Err(Error::Config("data: csv input needs a schema file".into()))
            }
            _ => {}
        }
        for p in [&d.csv, &d.schema, &d.holidays].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("referenced file {} does not exist", p.display())));
            }
        }
        if let Some(s) = &d.synthetic {
            s.validate()?;
        }
        for r in &self.exclude {
            if r.start > r.end {
                return Err(Error::Config(format!("exclusion range {}..{} is reversed", r.start, r.end)));
            }
        }
        if self.split.val_start >= self.split.test_start {
            return Err(Error::Config("split: val_start must precede test_start".into()));
        }
        if let Some(end) = self.split.test_end {
            if end < self.split.test_start {
                return Err(Error::Config("split: test_end precedes test_start".into()));
            }
        }
        let b = &self.backtest;
        if b.stride == 0 || b.horizon == 0 || b.week_len == 0 {
            return Err(Error::Config("backtest stride, horizon and week_len must be positive".into()));
        }
        self.metrics.validate()?;
        if self.models.is_empty() {
            return Err(Error::Config("model list is empty".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &self.models {
            let name = m.display_name();
            if name.is_empty() || name.contains(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-')) {
                return Err(Error::Config(format!("model name '{name}' must be alphanumeric, '_' or '-'")));
            }
            if !names.insert(name.clone()) {
                return Err(Error::Config(format!("model name '{name}' appears twice")));
            }
            if m.k == 0 || m.period == 0 || m.var_max_p == 0 || m.train_stride == Some(0) {
                return Err(Error::Config(format!("model '{name}': k, period, var_max_p and train_stride must be positive")));
            }
            if !(m.coverage > 0.0 && m.coverage < 1.0) {
                return Err(Error::Config(format!("model '{name}': coverage must lie in (0, 1)")));
            }
            if m.kind == ModelKind::Tft {
                m.tft.validate()?;
                if m.tft.prediction_length != b.horizon {
                    return Err(Error::Config(format!(
                        "model '{name}': prediction_length {} differs from the backtest horizon {}",
                        m.tft.prediction_length, b.horizon
                    )));
                }
            }
        }
        Ok(())
    }
}
