use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::config::ModelKind;
use crate::baselines::{forecasts_to_csv, read_forecasts_csv, ForecastResult};
use crate::interpret::{importance_csv, InterpretationSummary};
use crate::metrics::{compute_point_metrics, empirical_cdf_abs_error, per_week_mape, with_interval_score, Ecdf, MetricConfig, MetricReport, WeeklyMape};
use crate::{Error, Result};

/// Observed targets by group and date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActualTable {
    values: BTreeMap<String, BTreeMap<NaiveDate, f64>>,
}

impl ActualTable {
    /// Add or replace one observation.
    pub fn insert(&mut self, group: &str, date: NaiveDate, value: f64) {
        self.values.entry(group.to_string()).or_default().insert(date, value);
    }

    /// Observation of `group` on `date`.
    pub fn get(&self, group: &str, date: NaiveDate) -> Option<f64> {
        self.values.get(group)?.get(&date).copied()
    }

    /// CSV with header `group,date,actual`, sorted by group then date.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("group,date,actual\n");
        for (g, m) in &self.values {
            for (d, v) in m {
                let _ = writeln!(s, "{g},{d},{v}");
            }
        }
        s
    }

    /// Read the format written by [`ActualTable::to_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::load(path, e.to_string()))?;
        let headers = rdr.headers().map_err(|e| Error::load(path, e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["group", "date", "actual"] {
            return Err(Error::load(path, "expected header group,date,actual"));
        }
        let mut t = ActualTable::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::load(path, e.to_string()))?;
            let line = i + 2;
            let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
                .map_err(|e| Error::load(path, format!("line {line}: bad date '{}': {e}", &rec[1])))?;
            let v: f64 = rec[2]
                .trim()
                .parse()
                .map_err(|_| Error::load(path, format!("line {line}: bad value '{}'", &rec[2])))?;
            t.insert(&rec[0], date, v);
        }
        Ok(t)
    }
}

/// Quantile levels used as interval bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalLevels {
    /// Lower bound level.
    pub lower: f64,
    /// Upper bound level.
    pub upper: f64,
}

/// Leakage audit of one model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    /// Smallest `origin - last input date` over all forecasts, in days.
    pub min_gap_days: Option<i64>,
    /// Latest input date used by any forecast.
    pub latest_input: Option<NaiveDate>,
    /// Latest target date seen during training (trained models only).
    pub training_data_end: Option<NaiveDate>,
    /// True when every input precedes its origin and training ended
    /// before the first origin.
    pub leak_free: bool,
}

impl AuditSummary {
    pub(crate) fn record(&mut self, origin: NaiveDate, last_input: NaiveDate) {
        let gap = (origin - last_input).num_days();
        self.min_gap_days = Some(self.min_gap_days.map_or(gap, |g| g.min(gap)));
        self.latest_input = Some(self.latest_input.map_or(last_input, |d| d.max(last_input)));
    }

    pub(crate) fn finish(&mut self, first_origin: NaiveDate) {
        self.leak_free = self.min_gap_days.is_some_and(|g| g >= 1)
            && self.training_data_end.is_none_or(|d| d < first_origin);
    }
}

/// Metrics of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    /// Pooled per-group and averaged metrics.
    pub overall: MetricReport,
    /// MAPE by horizon week.
    pub weekly: WeeklyMape,
    /// Forecast points scored.
    pub n_points: usize,
}

/// Outcome of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    /// Display name.
    pub name: String,
    /// Model family.
    pub kind: ModelKind,
    /// `ok` or `failed`.
    pub status: String,
    /// Error message of a failed model.
    pub error: Option<String>,
    /// Interval bounds, when the model produces them.
    pub interval: Option<IntervalLevels>,
    /// Metrics of a successful model.
    pub metrics: Option<ModelMetrics>,
    /// Leakage audit.
    pub audit: AuditSummary,
    /// Free-form notes (selected orders, training summary).
    pub notes: Vec<String>,
}

/// What produced a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the run configuration.
    pub config_sha256: String,
    /// Run seed.
    pub seed: u64,
    /// Package name.
    pub package: String,
    /// Package version.
    pub version: String,
}

/// Full result of a backtest run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Run provenance.
    pub provenance: Provenance,
    /// Group labels in dataset order.
    pub groups: Vec<String>,
    /// Forecast horizon.
    pub horizon: usize,
    /// Steps per reporting week.
    pub week_len: usize,
    /// Days between origins.
    pub stride: usize,
    /// Forecast origins (first forecast day of each window).
    pub origins: Vec<NaiveDate>,
    /// Metric settings.
    pub metric_config: MetricConfig,
    /// One entry per configured model, in config order.
    pub models: Vec<ModelReport>,
    /// Attention and importance summaries of the first TFT model.
    pub interpretation: Option<InterpretationSummary>,
    /// Run-level notes.
    pub notes: Vec<String>,
    /// Forecasts of the successful models (stored in `forecasts.csv`).
    #[serde(skip)]
    pub forecasts: Vec<ForecastResult>,
    /// Actuals over the test period (stored in `actuals.csv`).
    #[serde(skip)]
    pub actuals: ActualTable,
}

impl EvaluationReport {
    /// Report entry of a model by name.
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }

    /// Forecasts of a model by name.
    pub fn forecasts_of(&self, name: &str) -> Option<&ForecastResult> {
        self.forecasts.iter().find(|f| f.model == name)
    }

    /// Human-readable summary table.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} groups, {} origins ({}..{}), horizon {}",
            self.groups.len(),
            self.origins.len(),
            self.origins.first().map_or(String::new(), |d| d.to_string()),
            self.origins.last().map_or(String::new(), |d| d.to_string()),
            self.horizon
        );
        let _ = writeln!(s, "{:<12} {:>12} {:>12} {:>9} {:>14} {:>12}", "model", "MAE", "RMSE", "MAPE%", "MSE", "MIS");
        for m in &self.models {
            match &m.metrics {
                Some(r) => {
                    let o = &r.overall;
                    let mis = o.mis.map_or("-".to_string(), |v| format!("{v:.3}"));
                    let _ = writeln!(
                        s,
                        "{:<12} {:>12.3} {:>12.3} {:>9.3} {:>14.3} {:>12}",
                        m.name, o.mae, o.rmse, o.mape, o.mse, mis
                    );
                }
                None => {
                    let _ = writeln!(s, "{:<12} failed: {}", m.name, m.error.as_deref().unwrap_or("unknown error"));
                }
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

struct Pooled {
    actual: Vec<Vec<f64>>,
    point: Vec<Vec<f64>>,
    lower: Option<Vec<Vec<f64>>>,
    upper: Option<Vec<Vec<f64>>>,
    windows_actual: Vec<Vec<Vec<f64>>>,
    windows_point: Vec<Vec<Vec<f64>>>,
    groups: Vec<String>,
}

// Groups are keyed in sorted order so the result does not depend on the
// order of the records.
fn pool(result: &ForecastResult, actuals: &ActualTable, horizon: usize) -> Result<Pooled> {
    let mut by_group: BTreeMap<&str, Vec<&crate::baselines::ForecastRecord>> = BTreeMap::new();
    for r in &result.records {
        by_group.entry(&r.group).or_default().push(r);
    }
    if by_group.is_empty() {
        return Err(Error::InsufficientData(format!("model '{}' produced no forecasts", result.model)));
    }
    let has_bounds = result.records.iter().all(|r| r.forecast.lower.is_some() && r.forecast.upper.is_some());
    let mut p = Pooled {
        actual: vec![],
        point: vec![],
        lower: has_bounds.then(Vec::new),
        upper: has_bounds.then(Vec::new),
        windows_actual: vec![],
        windows_point: vec![],
        groups: vec![],
    };
    for (g, mut recs) in by_group {
        recs.sort_by_key(|r| r.origin);
        let (mut a, mut f, mut lo, mut hi, mut wa, mut wf) = (vec![], vec![], vec![], vec![], vec![], vec![]);
        for r in recs {
            if r.forecast.point.len() != horizon {
                return Err(Error::Shape(format!(
                    "model '{}', group '{g}', origin {}: {} steps, expected {horizon}",
                    result.model,
                    r.origin,
                    r.forecast.point.len()
                )));
            }
            let mut window = Vec::with_capacity(horizon);
            for h in 0..horizon {
                let date = r.origin + Days::new(h as u64);
                let y = actuals
                    .get(g, date)
                    .ok_or_else(|| Error::InsufficientData(format!("no actual for group '{g}' on {date}")))?;
                window.push(y);
            }
            a.extend_from_slice(&window);
            f.extend_from_slice(&r.forecast.point);
            if has_bounds {
                lo.extend_from_slice(r.forecast.lower.as_ref().expect("checked"));
                hi.extend_from_slice(r.forecast.upper.as_ref().expect("checked"));
            }
            wa.push(window);
            wf.push(r.forecast.point.clone());
        }
        p.actual.push(a);
        p.point.push(f);
        if let (Some(l), Some(u)) = (p.lower.as_mut(), p.upper.as_mut()) {
            l.push(lo);
            u.push(hi);
        }
        p.windows_actual.push(wa);
        p.windows_point.push(wf);
        p.groups.push(g.to_string());
    }
    Ok(p)
}

/// Score one model's forecasts against the actuals.
pub fn evaluate_forecasts(
    result: &ForecastResult,
    actuals: &ActualTable,
    cfg: &MetricConfig,
    horizon: usize,
    week_len: usize,
) -> Result<ModelMetrics> {
    let p = pool(result, actuals, horizon)?;
    let mut overall = compute_point_metrics(&p.actual, &p.point, cfg)?;
    if let (Some(l), Some(u)) = (&p.lower, &p.upper) {
        overall = with_interval_score(overall, &p.actual, l, u, cfg)?;
    }
    overall.groups = p.groups.clone();
    let weekly = per_week_mape(&p.windows_actual, &p.windows_point, horizon, week_len, cfg)?;
    Ok(ModelMetrics { overall, weekly, n_points: p.actual.iter().map(Vec::len).sum() })
}

/// ECDF of absolute errors of one model.
pub fn forecast_error_ecdf(result: &ForecastResult, actuals: &ActualTable, horizon: usize) -> Result<Ecdf> {
    let p = pool(result, actuals, horizon)?;
    empirical_cdf_abs_error(&p.actual, &p.point)
}

/// `model,MAE,RMSE,MAPE,MSE,MIS`, MIS empty for point-only models.
pub fn metrics_csv(rows: &[(String, ModelMetrics)]) -> String {
    let mut s = String::from("model,MAE,RMSE,MAPE,MSE,MIS\n");
    for (name, m) in rows {
        let o = &m.overall;
        let mis = o.mis.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(s, "{name},{},{},{},{},{mis}", o.mae, o.rmse, o.mape, o.mse);
    }
    s
}

/// `model,week1..weekN,total`.
pub fn weekly_mape_csv(rows: &[(String, ModelMetrics)]) -> String {
    let weeks = rows.iter().map(|(_, m)| m.weekly.weeks.len()).max().unwrap_or(0);
    let mut s = String::from("model");
    for k in 1..=weeks {
        let _ = write!(s, ",week{k}");
    }
    s.push_str(",total\n");
    for (name, m) in rows {
        s.push_str(name);
        for v in &m.weekly.weeks {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{}", m.weekly.total);
    }
    s
}

fn scored(report: &EvaluationReport) -> Vec<(String, ModelMetrics)> {
    report
        .models
        .iter()
        .filter_map(|m| m.metrics.clone().map(|x| (m.name.clone(), x)))
        .collect()
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Write every report file into `dir` (created if needed). Each file is
/// written to a temporary name and renamed into place.
pub fn emit_report(report: &EvaluationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(String, String)> = vec![
        ("report.json".into(), serde_json::to_string_pretty(report)? + "\n"),
        ("metrics.csv".into(), metrics_csv(&scored(report))),
        ("weekly_mape.csv".into(), weekly_mape_csv(&scored(report))),
        ("forecasts.csv".into(), forecasts_to_csv(&report.forecasts)?),
        ("actuals.csv".into(), report.actuals.to_csv()),
    ];
    for f in &report.forecasts {
        let ecdf = forecast_error_ecdf(f, &report.actuals, report.horizon)?;
        files.push((format!("ecdf_{}.csv", f.model), ecdf.to_csv()));
    }
    if let Some(i) = &report.interpretation {
        files.push(("attention_profile.csv".into(), i.attention.to_csv()));
        files.push(("importance_static.csv".into(), importance_csv(&i.importance.static_vars)));
        files.push(("importance_past.csv".into(), importance_csv(&i.importance.past)));
        files.push(("importance_future.csv".into(), importance_csv(&i.importance.future)));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = dir.join(name);
        write_atomic(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

/// Load a report directory written by [`emit_report`].
pub fn read_report(dir: &Path) -> Result<EvaluationReport> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut report: EvaluationReport =
        serde_json::from_str(&text).map_err(|e| Error::load(&path, e.to_string()))?;
    let fpath = dir.join("forecasts.csv");
    if fpath.exists() {
        report.forecasts = read_forecasts_csv(&fpath)?;
    }
    let apath = dir.join("actuals.csv");
    if apath.exists() {
        report.actuals = ActualTable::read_csv(&apath)?;
    }
    Ok(report)
}

/// Recompute per-model metrics from a forecasts CSV and an actuals CSV.
/// The horizon is taken from the forecast rows.
pub fn recompute_metrics(
    forecasts: &Path,
    actuals: &Path,
    cfg: &MetricConfig,
    week_len: usize,
) -> Result<Vec<(String, ModelMetrics)>> {
    let results = read_forecasts_csv(forecasts)?;
    let table = ActualTable::read_csv(actuals)?;
    let horizon = results
        .iter()
        .flat_map(|r| r.records.first())
        .map(|r| r.forecast.horizon())
        .next()
        .ok_or_else(|| Error::InsufficientData(format!("{} holds no forecasts", forecasts.display())))?;
    results
        .iter()
        .map(|r| Ok((r.model.clone(), evaluate_forecasts(r, &table, cfg, horizon, week_len)?)))
        .collect()
}
