//! Comparison forecasters: naive-k, additive Holt-Winters, seasonal ARIMA,
//! differenced VAR and gradient-boosted trees.

mod ets;
pub(crate) mod gbt;
mod naive;
mod sarima;
mod var;

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use ets::{fit_ets, fit_forecast_ets, EtsModel};
pub use gbt::{
    fit_forecast_gbt, fit_gbt, GbtFeatures, GbtForecaster, GbtModel, GbtParams, Objective, Tree, TreeNode,
};
pub use naive::naive_forecast;
pub use sarima::{default_sarima_grid, fit_forecast_sarima, fit_sarima, select_sarima, SarimaModel, SarimaOrder};
pub use var::{fit_forecast_var, fit_var, select_var, VarModel};

/// Version written into saved model documents.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Forecast of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesForecast {
    /// Point forecast per horizon step.
    pub point: Vec<f64>,
    /// Lower bound per step, when the model gives an interval.
    pub lower: Option<Vec<f64>>,
    /// Upper bound per step.
    pub upper: Option<Vec<f64>>,
}

impl SeriesForecast {
    /// Point forecast without interval.
    pub fn point_only(point: Vec<f64>) -> Self {
        SeriesForecast { point, lower: None, upper: None }
    }

    /// Symmetric Gaussian interval `point +- z * sd`.
    pub(crate) fn gaussian(point: Vec<f64>, sd: &[f64], coverage: f64) -> Result<Self> {
        let z = normal_quantile(coverage)?;
        let lower = point.iter().zip(sd).map(|(p, s)| p - z * s).collect();
        let upper = point.iter().zip(sd).map(|(p, s)| p + z * s).collect();
        Ok(SeriesForecast { point, lower: Some(lower), upper: Some(upper) })
    }

    /// Horizon length.
    pub fn horizon(&self) -> usize {
        self.point.len()
    }

    /// Map every value (point and bounds) through `f`, e.g. to undo a
    /// normalization. `f` must be increasing.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let m = |v: &Vec<f64>| v.iter().map(|x| f(*x)).collect::<Vec<_>>();
        SeriesForecast { point: m(&self.point), lower: self.lower.as_ref().map(m), upper: self.upper.as_ref().map(m) }
    }
}

/// Two-sided standard normal quantile for a central coverage level.
pub(crate) fn normal_quantile(coverage: f64) -> Result<f64> {
    use statrs::distribution::{ContinuousCDF, Normal};
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::Config(format!("coverage {coverage} outside (0, 1)")));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + coverage / 2.0))
}

/// One group's forecast from one origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    /// Group id.
    pub group: String,
    /// First forecast date; the model saw only data dated before it.
    pub origin: NaiveDate,
    /// Forecast values.
    pub forecast: SeriesForecast,
}

/// All forecasts of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    /// Model identifier.
    pub model: String,
    /// Nominal interval coverage, if the model emits intervals.
    pub coverage: Option<f64>,
    /// Forecast records.
    pub records: Vec<ForecastRecord>,
}

const CSV_HEADER: [&str; 7] = ["group", "origin_date", "step", "point", "lower", "upper", "model"];

impl ForecastResult {
    /// Empty result for `model`.
    pub fn new(model: impl Into<String>, coverage: Option<f64>) -> Self {
        ForecastResult { model: model.into(), coverage, records: Vec::new() }
    }

    /// Check bound ordering, lengths and finiteness; every record must
    /// have `horizon` steps.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        for r in &self.records {
            let f = &r.forecast;
            let bad = |what: &str| {
                Err(Error::InvalidData(format!(
                    "model '{}', group '{}', origin {}: {what}",
                    self.model, r.group, r.origin
                )))
            };
            if f.point.len() != horizon {
                return bad(&format!("{} steps instead of {horizon}", f.point.len()));
            }
            if f.point.iter().any(|v| !v.is_finite()) {
                return bad("non-finite point forecast");
            }
            match (&f.lower, &f.upper) {
                (None, None) => {}
                (Some(lo), Some(hi)) => {
                    if lo.len() != horizon || hi.len() != horizon {
                        return bad("interval length differs from horizon");
                    }
                    for ((l, p), u) in lo.iter().zip(&f.point).zip(hi) {
                        if !(l <= p && p <= u) {
                            return bad(&format!("bounds not ordered: {l} <= {p} <= {u}"));
                        }
                    }
                }
                _ => return bad("only one interval bound"),
            }
        }
        Ok(())
    }

    /// CSV rows (no header).
    fn write_rows<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for r in &self.records {
            let f = &r.forecast;
            for (i, p) in f.point.iter().enumerate() {
                let bound = |b: &Option<Vec<f64>>| b.as_ref().map_or(String::new(), |v| v[i].to_string());
                w.write_record([
                    r.group.clone(),
                    r.origin.to_string(),
                    (i + 1).to_string(),
                    p.to_string(),
                    bound(&f.lower),
                    bound(&f.upper),
                    self.model.clone(),
                ])
                .map_err(|e| Error::Serde(e.to_string()))?;
            }
        }
        Ok(())
    }
}

/// Serialize several results into one CSV with header
/// `group,origin_date,step,point,lower,upper,model`.
pub fn forecasts_to_csv(results: &[ForecastResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| Error::Serde(e.to_string()))?;
    for r in results {
        r.write_rows(&mut w)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

/// Read a forecast CSV back into per-model results (models in order of
/// first appearance). Coverage is not stored in the CSV and comes back
/// as `None`.
pub fn read_forecasts_csv(path: &Path) -> Result<Vec<ForecastResult>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::load(path, e.to_string()))?;
    let headers = rd.headers().map_err(|e| Error::load(path, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::load(path, format!("missing column '{name}'")))
    };
    let idx: Vec<usize> = CSV_HEADER.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut order: Vec<String> = Vec::new();
    // model -> (group, origin) -> rows of (step, point, lower, upper)
    type Rows = Vec<(usize, f64, Option<f64>, Option<f64>)>;
    let mut data: BTreeMap<String, BTreeMap<(String, NaiveDate), Rows>> = BTreeMap::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| Error::load(path, e.to_string()))?;
        let at = |k: usize| rec.get(idx[k]).unwrap_or("").trim();
        let num = |k: usize| -> Result<f64> {
            at(k).parse().map_err(|_| Error::load(path, format!("line {}: bad number '{}'", line + 2, at(k))))
        };
        let opt = |k: usize| -> Result<Option<f64>> { if at(k).is_empty() { Ok(None) } else { num(k).map(Some) } };
        let origin = NaiveDate::parse_from_str(at(1), "%Y-%m-%d")
            .map_err(|_| Error::load(path, format!("line {}: bad date '{}'", line + 2, at(1))))?;
        let step: usize = at(2)
            .parse()
            .map_err(|_| Error::load(path, format!("line {}: bad step '{}'", line + 2, at(2))))?;
        let model = at(6).to_string();
        if !order.contains(&model) {
            order.push(model.clone());
        }
        data.entry(model)
            .or_default()
            .entry((at(0).to_string(), origin))
            .or_default()
            .push((step, num(3)?, opt(4)?, opt(5)?));
    }
    let mut out = Vec::new();
    for model in order {
        let mut result = ForecastResult::new(model.clone(), None);
        for ((group, origin), mut rows) in data.remove(&model).unwrap_or_default() {
            rows.sort_by_key(|r| r.0);
            if rows.iter().enumerate().any(|(i, r)| r.0 != i + 1) {
                return Err(Error::load(path, format!("model '{model}', group '{group}', origin {origin}: steps not 1..n")));
            }
            let point = rows.iter().map(|r| r.1).collect();
            let lower: Option<Vec<f64>> = rows.iter().map(|r| r.2).collect();
            let upper: Option<Vec<f64>> = rows.iter().map(|r| r.3).collect();
            result.records.push(ForecastRecord { group, origin, forecast: SeriesForecast { point, lower, upper } });
        }
        out.push(result);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format_version: u32,
    kind: String,
    model: T,
}

/// Wrap a fitted model in a versioned JSON document.
pub fn save_model_json<T: Serialize>(kind: &str, model: &T) -> Result<String> {
    Ok(serde_json::to_string(&Envelope { format_version: MODEL_FORMAT_VERSION, kind: kind.to_string(), model })?)
}

/// Read a document written by [`save_model_json`], checking kind and version.
pub fn load_model_json<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let env: Envelope<T> = serde_json::from_str(text)?;
    if env.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Serde(format!("unsupported model format version {}", env.format_version)));
    }
    if env.kind != kind {
        return Err(Error::Serde(format!("document holds a '{}' model, expected '{kind}'", env.kind)));
    }
    Ok(env.model)
}
