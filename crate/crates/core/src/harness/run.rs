use chrono::{Days, NaiveDate};
use sha2::{Digest, Sha256};

use super::config::{ModelConfig, ModelKind, RunConfig};
use super::report::{evaluate_forecasts, ActualTable, AuditSummary, EvaluationReport, IntervalLevels, ModelReport, Provenance};
use crate::baselines::{
    default_sarima_grid, fit_ets, naive_forecast, select_sarima, select_var, ForecastRecord, ForecastResult,
    GbtFeatures, SeriesForecast,
};
use crate::interpret::summarize;
use crate::panel::{
    apply_normalization, attach_static_covariates, compute_group_statistics, exclude_date_ranges, generate_synthetic_panel,
    load_panel_csv, read_holiday_file, split_train_val_test, window_samples, with_calendar_features, Direction,
    GroupSeries, NormalizationStats, PanelDataset, SampleWindow, Schema,
};
use crate::tft::{enforce_quantile_monotonicity, train_tft, InputSchema, InterpretationTrace, TftHyperParams};
use crate::{Error, Result};

/// Load the panel a config points at (before exclusions).
pub fn load_dataset(cfg: &RunConfig) -> Result<PanelDataset> {
    let d = &cfg.data;
    let ds = match (&d.csv, &d.synthetic) {
        (Some(csv), None) => {
            let schema = Schema::from_file(d.schema.as_ref().expect("validated"))?;
            load_panel_csv(csv, &schema)?
        }
        (None, Some(s)) => generate_synthetic_panel(s)?,
        _ => return Err(Error::Config("data: one of csv or synthetic is required".into())),
    };
    match &d.holidays {
        Some(path) => Ok(with_calendar_features(&ds, &read_holiday_file(path)?)),
        None => Ok(ds),
    }
}

/// Forecast origins `test_start + k * stride` whose horizon ends on or
/// before `test_end`.
pub fn forecast_origins(test_start: NaiveDate, test_end: NaiveDate, horizon: usize, stride: usize) -> Result<Vec<NaiveDate>> {
    if horizon == 0 || stride == 0 {
        return Err(Error::Config("horizon and stride must be positive".into()));
    }
    let mut out = Vec::new();
    let mut o = test_start;
    while o + Days::new(horizon as u64 - 1) <= test_end {
        out.push(o);
        o = o + Days::new(stride as u64);
    }
    if out.is_empty() {
        return Err(Error::Config(format!(
            "test period {test_start}..{test_end} is shorter than the {horizon}-day horizon"
        )));
    }
    Ok(out)
}

/// Target values of the gap-free run of days ending just before `origin`,
/// limited to the last `max_len` days, with the date of the last value.
fn history_before(g: &GroupSeries, origin: NaiveDate, max_len: Option<usize>) -> Option<(&[f64], NaiveDate)> {
    let end = g.dates.partition_point(|d| *d < origin);
    if end == 0 {
        return None;
    }
    let mut start = end - 1;
    while start > 0 && g.dates[start - 1] + Days::new(1) == g.dates[start] {
        start -= 1;
    }
    if let Some(m) = max_len {
        start = start.max(end.saturating_sub(m));
    }
    Some((&g.target[start..end], g.dates[end - 1]))
}

/// Everything prepared once per run.
struct Prepared {
    raw: PanelDataset,
    normalized: PanelDataset,
    stats: NormalizationStats,
    origins: Vec<NaiveDate>,
    val_start: NaiveDate,
    test_start: NaiveDate,
}

struct ModelOutput {
    result: ForecastResult,
    interval: Option<IntervalLevels>,
    audit: AuditSummary,
    traces: Vec<InterpretationTrace>,
    notes: Vec<String>,
}

impl ModelOutput {
    fn new(name: &str, coverage: Option<f64>) -> Self {
        ModelOutput {
            result: ForecastResult::new(name, coverage),
            interval: None,
            audit: AuditSummary::default(),
            traces: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn push(&mut self, group: &str, origin: NaiveDate, last_input: NaiveDate, forecast: SeriesForecast) {
        self.audit.record(origin, last_input);
        self.result.records.push(ForecastRecord { group: group.to_string(), origin, forecast });
    }
}

fn denormalize(p: &Prepared, group: &str, f: &SeriesForecast) -> Result<SeriesForecast> {
    let s = p.stats.get(group)?.target;
    Ok(f.map(|v| s.inverse(v)))
}

fn run_naive(p: &Prepared, m: &ModelConfig, horizon: usize) -> Result<ModelOutput> {
    let mut out = ModelOutput::new(&m.display_name(), None);
    // naive-k is scale-equivariant, so it runs on the raw values directly
    for g in p.raw.groups() {
        for &o in &p.origins {
            let (hist, last) = history_before(g, o, None)
                .ok_or_else(|| Error::InsufficientData(format!("group '{}' has no data before {o}", g.group_id)))?;
            out.push(&g.group_id, o, last, SeriesForecast::point_only(naive_forecast(hist, m.k, horizon)?));
        }
    }
    Ok(out)
}

fn gaussian_levels(coverage: f64) -> IntervalLevels {
    IntervalLevels { lower: (1.0 - coverage) / 2.0, upper: (1.0 + coverage) / 2.0 }
}

fn run_ets(p: &Prepared, m: &ModelConfig, horizon: usize) -> Result<ModelOutput> {
    let mut out = ModelOutput::new(&m.display_name(), Some(m.coverage));
    out.interval = Some(gaussian_levels(m.coverage));
    for g in p.normalized.groups() {
        for &o in &p.origins {
            let (hist, last) = history_before(g, o, m.max_history)
                .ok_or_else(|| Error::InsufficientData(format!("group '{}' has no data before {o}", g.group_id)))?;
            let f = fit_ets(hist, m.period)?.forecast(horizon, m.coverage)?;
            out.push(&g.group_id, o, last, denormalize(p, &g.group_id, &f)?);
        }
    }
    Ok(out)
}

fn run_sarima(p: &Prepared, m: &ModelConfig, horizon: usize) -> Result<ModelOutput> {
    let mut out = ModelOutput::new(&m.display_name(), Some(m.coverage));
    out.interval = Some(gaussian_levels(m.coverage));
    let grid = m.sarima_grid.clone().unwrap_or_else(default_sarima_grid);
    let first = p.origins[0];
    for g in p.normalized.groups() {
        let (hist, _) = history_before(g, first, m.max_history)
            .ok_or_else(|| Error::InsufficientData(format!("group '{}' has no data before {first}", g.group_id)))?;
        let selected = select_sarima(hist, &grid)?;
        out.notes.push(format!("group '{}': selected order {:?}", g.group_id, selected.order));
        for &o in &p.origins {
            let (hist, last) = history_before(g, o, m.max_history).expect("origins are increasing");
            let model = selected.refit(hist)?;
            let f = model.forecast(hist, horizon, m.coverage)?;
            out.push(&g.group_id, o, last, denormalize(p, &g.group_id, &f)?);
        }
    }
    Ok(out)
}

fn aligned_histories(p: &Prepared, origin: NaiveDate, max_len: Option<usize>) -> Result<(Vec<Vec<f64>>, NaiveDate)> {
    let mut hs = Vec::new();
    let mut span: Option<(usize, NaiveDate)> = None;
    for g in p.normalized.groups() {
        let (h, last) = history_before(g, origin, max_len)
            .ok_or_else(|| Error::InsufficientData(format!("group '{}' has no data before {origin}", g.group_id)))?;
        hs.push(h);
        span = Some(match span {
            None => (h.len(), last),
            Some((n, l)) => {
                if l != last {
                    return Err(Error::InvalidData(format!("groups end on different dates before {origin}")));
                }
                (n.min(h.len()), l)
            }
        });
    }
    let (n, last) = span.ok_or_else(|| Error::InsufficientData("no groups".into()))?;
    Ok((hs.iter().map(|h| h[h.len() - n..].to_vec()).collect(), last))
}

fn run_var(p: &Prepared, m: &ModelConfig, horizon: usize) -> Result<ModelOutput> {
    let mut out = ModelOutput::new(&m.display_name(), None);
    let lags: Vec<usize> = (1..=m.var_max_p).collect();
    let (hist, _) = aligned_histories(p, p.origins[0], m.max_history)?;
    let selected = select_var(&hist, &lags, &m.var_diffs)?;
    out.notes.push(format!("selected p = {}, d = {}", selected.p, selected.d));
    for &o in &p.origins {
        let (hist, last) = aligned_histories(p, o, m.max_history)?;
        let model = crate::baselines::fit_var(&hist, selected.p, selected.d)?;
        let fc = model.forecast(&hist, horizon)?;
        for (g, f) in p.normalized.groups().iter().zip(fc) {
            out.push(&g.group_id, o, last, denormalize(p, &g.group_id, &SeriesForecast::point_only(f))?);
        }
    }
    Ok(out)
}

fn origin_windows(p: &Prepared, origin: NaiveDate, encoder: usize, horizon: usize) -> Result<Vec<SampleWindow>> {
    (0..p.normalized.groups().len())
        .map(|gi| SampleWindow::at_origin(&p.normalized, gi, origin, encoder, horizon))
        .collect()
}

fn last_encoder_date(w: &SampleWindow) -> NaiveDate {
    w.encoder_start + Days::new(w.encoder_len() as u64 - 1)
}

fn latest_target_date(windows: &[SampleWindow]) -> Option<NaiveDate> {
    windows
        .iter()
        .map(|w| w.decoder_start + Days::new(w.decoder_target.as_ref().map_or(0, Vec::len) as u64 - 1))
        .max()
}

// Days of history each GBT row may look back over (covers the 28-day lag).
const GBT_CONTEXT: usize = 42;

fn run_gbt(p: &Prepared, m: &ModelConfig, horizon: usize) -> Result<ModelOutput> {
    let encoder = GBT_CONTEXT;
    let mut out = ModelOutput::new(&m.display_name(), Some(m.coverage));
    out.interval = Some(gaussian_levels(m.coverage));
    let history = p.normalized.before(p.test_start);
    let windows = window_samples(&history, encoder, horizon, m.train_stride.unwrap_or(1));
    out.audit.training_data_end = latest_target_date(&windows);
    let features = GbtFeatures::new(history.past_names(), history.future_names());
    let model = crate::baselines::gbt::fit_with_features(&windows, features, Some(m.coverage), &m.gbt, horizon)?;
    for &o in &p.origins {
        for w in origin_windows(p, o, encoder, horizon)? {
            let f = model.predict(&w)?;
            out.push(&w.group_id, o, last_encoder_date(&w), denormalize(p, &w.group_id, &f)?);
        }
    }
    Ok(out)
}

fn nearest_level(levels: &[f64], target: f64) -> usize {
    let mut best = 0;
    for (i, l) in levels.iter().enumerate() {
        if (l - target).abs() < (levels[best] - target).abs() {
            best = i;
        }
    }
    best
}

fn run_tft(p: &Prepared, m: &ModelConfig, horizon: usize, seed: u64) -> Result<ModelOutput> {
    let hp = TftHyperParams { seed, prediction_length: horizon, ..m.tft.clone() };
    let enc = hp.encoder_length;
    let stride = m.train_stride.unwrap_or(1);
    let train_ds = p.normalized.before(p.val_start);
    let val_first = p.val_start - Days::new(enc as u64);
    let val_ds = p.normalized.between(val_first, p.test_start - Days::new(1));
    let train = window_samples(&train_ds, enc, horizon, stride);
    let val = window_samples(&val_ds, enc, horizon, stride);
    let schema = InputSchema::from_dataset(&p.normalized)?;
    let (model, log) = train_tft(schema, &hp, &train, &val)?;

    let lo = nearest_level(&hp.quantiles, 0.02);
    let hi = nearest_level(&hp.quantiles, 0.98);
    let mid = hp.median_index().expect("validated");
    let mut out = ModelOutput::new(&m.display_name(), Some(hp.quantiles[hi] - hp.quantiles[lo]));
    out.interval = Some(IntervalLevels { lower: hp.quantiles[lo], upper: hp.quantiles[hi] });
    out.audit.training_data_end = latest_target_date(&train).max(latest_target_date(&val));
    out.notes.push(format!(
        "trained {} epochs on {} windows, best epoch {}, best validation loss {}",
        log.epochs.len(),
        train.len(),
        log.best_epoch,
        log.epochs.get(log.best_epoch.saturating_sub(1)).map_or(f64::NAN, |r| r.val_loss)
    ));
    for &o in &p.origins {
        let windows = origin_windows(p, o, enc, horizon)?;
        let refs: Vec<&SampleWindow> = windows.iter().collect();
        let (fc, traces) = model.predict(&refs)?;
        for (w, steps) in windows.iter().zip(&fc.values) {
            let rows: Vec<Vec<f64>> = steps
                .iter()
                .map(|q| if m.enforce_monotonic { enforce_quantile_monotonicity(q) } else { q.clone() })
                .collect();
            let f = SeriesForecast {
                point: rows.iter().map(|q| q[mid]).collect(),
                lower: Some(rows.iter().map(|q| q[lo].min(q[mid])).collect()),
                upper: Some(rows.iter().map(|q| q[hi].max(q[mid])).collect()),
            };
            out.push(&w.group_id, o, last_encoder_date(w), denormalize(p, &w.group_id, &f)?);
        }
        out.traces.extend(traces);
    }
    Ok(out)
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let ds = load_dataset(cfg)?;
    let ds = exclude_date_ranges(&ds, &cfg.exclude);
    let (_, last) = ds.date_span().ok_or_else(|| Error::InsufficientData("dataset is empty".into()))?;
    let splits = split_train_val_test(&ds, cfg.split.val_start, cfg.split.test_start)?;
    let stats = compute_group_statistics(&splits.train)?;
    let test_end = cfg.split.test_end.unwrap_or(last);
    if test_end > last {
        return Err(Error::Config(format!("test_end {test_end} is after the last data date {last}")));
    }
    let raw = attach_static_covariates(&ds.between(ds.date_span().expect("nonempty").0, test_end), &stats)?;
    let normalized = apply_normalization(&raw, &stats, Direction::Forward)?;
    let origins = forecast_origins(cfg.split.test_start, test_end, cfg.backtest.horizon, cfg.backtest.stride)?;
    Ok(Prepared { raw, normalized, stats, origins, val_start: cfg.split.val_start, test_start: cfg.split.test_start })
}

fn actual_table(p: &Prepared, horizon: usize) -> ActualTable {
    let mut t = ActualTable::default();
    let end = *p.origins.last().expect("nonempty") + Days::new(horizon as u64);
    for g in p.raw.groups() {
        for (d, v) in g.dates.iter().zip(&g.target) {
            if *d >= p.origins[0] && *d < end {
                t.insert(&g.group_id, *d, *v);
            }
        }
    }
    t
}

/// SHA-256 of the config's canonical JSON form. The output directory is
/// left out so the same experiment hashes equally wherever it is written.
pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.output_dir = Default::default();
    let text = serde_json::to_string(&c)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// Run every configured model over the rolling origins and assemble the
/// report (nothing is written; see [`super::emit_report`]).
pub fn run_backtest(cfg: &RunConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let p = prepare(cfg)?;
    let horizon = cfg.backtest.horizon;
    let actuals = actual_table(&p, horizon);
    let mut models = Vec::new();
    let mut forecasts = Vec::new();
    let mut interpretation = None;
    let mut notes = Vec::new();
    for m in &cfg.models {
        let name = m.display_name();
        log::info!("running model '{name}'");
        let outcome = match m.kind {
            ModelKind::Naive => run_naive(&p, m, horizon),
            ModelKind::Ets => run_ets(&p, m, horizon),
            ModelKind::Sarima => run_sarima(&p, m, horizon),
            ModelKind::Var => run_var(&p, m, horizon),
            ModelKind::Gbt => run_gbt(&p, m, horizon),
            ModelKind::Tft => run_tft(&p, m, horizon, cfg.seed),
        }
        .and_then(|o| {
            o.result.validate(horizon)?;
            let metrics = evaluate_forecasts(&o.result, &actuals, &cfg.metrics, horizon, cfg.backtest.week_len)?;
            Ok((o, metrics))
        });
        match outcome {
            Ok((mut o, metrics)) => {
                o.audit.finish(p.origins[0]);
                if m.kind == ModelKind::Tft && interpretation.is_none() && !o.traces.is_empty() {
                    interpretation = Some(summarize(&o.traces)?);
                }
                models.push(ModelReport {
                    name,
                    kind: m.kind,
                    status: "ok".into(),
                    error: None,
                    interval: o.interval,
                    metrics: Some(metrics),
                    audit: o.audit,
                    notes: o.notes,
                });
                forecasts.push(o.result);
            }
            Err(e) => {
                log::warn!("model '{name}' failed: {e}");
                models.push(ModelReport {
                    name,
                    kind: m.kind,
                    status: "failed".into(),
                    error: Some(format!("{}: {e}", e.kind())),
                    interval: None,
                    metrics: None,
                    audit: AuditSummary::default(),
                    notes: Vec::new(),
                });
            }
        }
    }
    if interpretation.is_none() {
        notes.push("no TFT results in this run; attention and importance files are not written".to_string());
    }
    let groups = p.raw.groups().iter().map(|g| g.group_id.clone()).collect();
    Ok(EvaluationReport {
        provenance: Provenance {
            config_sha256: config_hash(cfg)?,
            seed: cfg.seed,
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        groups,
        horizon,
        week_len: cfg.backtest.week_len,
        stride: cfg.backtest.stride,
        origins: p.origins.clone(),
        metric_config: cfg.metrics,
        models,
        interpretation,
        notes,
        forecasts,
        actuals,
    })
}
