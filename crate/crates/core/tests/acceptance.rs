//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the criteria execute in
//! order and share the synthetic backtest. Exit status is nonzero when any
//! criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{Days, NaiveDate};
use panelcast::baselines::{
    fit_ets, fit_gbt, fit_sarima, fit_var, naive_forecast, GbtParams, Objective, SarimaOrder,
};
use panelcast::harness::{emit_report, run_backtest, EvaluationReport, ModelConfig, ModelKind, RunConfig};
use panelcast::metrics::{
    compute_point_metrics, empirical_cdf_abs_error, mean_interval_score, per_week_mape, quantile_loss, MetricConfig,
};
use panelcast::panel::{
    apply_normalization, attach_static_covariates, compute_group_statistics, generate_synthetic_panel,
    load_panel_csv, window_samples, write_panel_csv, Direction, SampleWindow, SyntheticConfig,
};
use panelcast::tft::{InputSchema, Mode, TftHyperParams, TftModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within_budget(t: Instant, budget: Duration, what: &str) -> Result<(), String> {
    let e = t.elapsed();
    if e > budget {
        return Err(format!("{what} took {:.1}s, budget {:.0}s", e.as_secs_f64(), budget.as_secs_f64()));
    }
    Ok(())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------------------
// independent metric oracles

fn oracle_group_stats(y: &[f64], f: &[f64], eps: f64) -> (f64, f64, f64, f64) {
    let n = y.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut pct = Vec::new();
    for i in 0..y.len() {
        let e = y[i] - f[i];
        abs += e.abs();
        sq += e * e;
        if y[i].abs() > eps {
            pct.push((e / y[i]).abs());
        }
    }
    let mape = 100.0 * pct.iter().sum::<f64>() / pct.len() as f64;
    (abs / n, (sq / n).sqrt(), mape, sq / n)
}

fn oracle_mis(y: &[f64], l: &[f64], u: &[f64], alpha: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        let below = if y[i] < l[i] { l[i] - y[i] } else { 0.0 };
        let above = if y[i] > u[i] { y[i] - u[i] } else { 0.0 };
        s += (u[i] - l[i]) + 2.0 / alpha * (below + above);
    }
    s / y.len() as f64
}

fn oracle_pinball(y: f64, f: f64, q: f64) -> f64 {
    if y >= f {
        q * (y - f)
    } else {
        (1.0 - q) * (f - y)
    }
}

fn oracle_ecdf(errors: &[f64], x: f64) -> f64 {
    errors.iter().filter(|e| **e <= x).count() as f64 / errors.len() as f64
}

fn avg(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_1() -> Check {
    let t = Instant::now();
    let cfg = MetricConfig::default();
    let tol = 1e-9;

    // hand example: errors 10 and -20 on actuals 100, 200
    let r = compute_point_metrics(&[vec![100.0, 200.0]], &[vec![110.0, 180.0]], &cfg).map_err(|e| e.to_string())?;
    ensure!(close(r.mae, 15.0, tol) && close(r.mse, 250.0, tol), "hand MAE/MSE {} {}", r.mae, r.mse);
    ensure!(close(r.rmse, 250f64.sqrt(), tol) && close(r.mape, 10.0, tol), "hand RMSE/MAPE {} {}", r.rmse, r.mape);
    let mis = mean_interval_score(&[vec![120.0]], &[vec![90.0]], &[vec![110.0]], &cfg).map_err(|e| e.to_string())?;
    ensure!(close(mis, 20.0 + 2.0 / 0.95 * 10.0, tol), "hand MIS {mis}");

    // random panels against the brute-force oracles
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for trial in 0..20 {
        let groups = rng.random_range(1..6);
        let windows = rng.random_range(1..5);
        let horizon = 28;
        let mut ya = Vec::new();
        let mut fa = Vec::new();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut yw = Vec::new();
        let mut fw = Vec::new();
        for _ in 0..groups {
            let (mut y, mut f, mut l, mut u, mut gy, mut gf) = (vec![], vec![], vec![], vec![], vec![], vec![]);
            for _ in 0..windows {
                let wy: Vec<f64> = (0..horizon).map(|_| rng.random_range(-5.0..500.0)).collect();
                let wf: Vec<f64> = wy.iter().map(|v| v + rng.random_range(-60.0..60.0)).collect();
                for (a, b) in wy.iter().zip(&wf) {
                    let w = rng.random_range(0.0..80.0);
                    l.push(b - w);
                    u.push(b + w * rng.random_range(0.2..1.5));
                    y.push(*a);
                    f.push(*b);
                }
                gy.push(wy);
                gf.push(wf);
            }
            ya.push(y);
            fa.push(f);
            lo.push(l);
            hi.push(u);
            yw.push(gy);
            fw.push(gf);
        }
        let r = compute_point_metrics(&ya, &fa, &cfg).map_err(|e| format!("trial {trial}: {e}"))?;
        let per: Vec<_> = ya.iter().zip(&fa).map(|(y, f)| oracle_group_stats(y, f, cfg.mape_epsilon)).collect();
        let want = (
            avg(&per.iter().map(|p| p.0).collect::<Vec<_>>()),
            avg(&per.iter().map(|p| p.1).collect::<Vec<_>>()),
            avg(&per.iter().map(|p| p.2).collect::<Vec<_>>()),
            avg(&per.iter().map(|p| p.3).collect::<Vec<_>>()),
        );
        ensure!(close(r.mae, want.0, tol), "trial {trial}: MAE {} vs {}", r.mae, want.0);
        ensure!(close(r.rmse, want.1, tol), "trial {trial}: RMSE {} vs {}", r.rmse, want.1);
        ensure!(close(r.mape, want.2, tol), "trial {trial}: MAPE {} vs {}", r.mape, want.2);
        ensure!(close(r.mse, want.3, tol * want.3.max(1.0)), "trial {trial}: MSE {} vs {}", r.mse, want.3);

        let mis = mean_interval_score(&ya, &lo, &hi, &cfg).map_err(|e| e.to_string())?;
        let want_mis = avg(&(0..groups).map(|g| oracle_mis(&ya[g], &lo[g], &hi[g], cfg.mis_alpha)).collect::<Vec<_>>());
        ensure!(close(mis, want_mis, tol), "trial {trial}: MIS {mis} vs {want_mis}");

        let weekly = per_week_mape(&yw, &fw, horizon, 7, &cfg).map_err(|e| e.to_string())?;
        for k in 0..4 {
            let per_group: Vec<f64> = (0..groups)
                .map(|g| {
                    let y: Vec<f64> = yw[g].iter().flat_map(|w| w[k * 7..k * 7 + 7].to_vec()).collect();
                    let f: Vec<f64> = fw[g].iter().flat_map(|w| w[k * 7..k * 7 + 7].to_vec()).collect();
                    oracle_group_stats(&y, &f, cfg.mape_epsilon).2
                })
                .collect();
            ensure!(close(weekly.weeks[k], avg(&per_group), tol), "trial {trial}: week {} MAPE", k + 1);
        }
        ensure!(close(weekly.total, want.2, tol), "trial {trial}: weekly total {} vs {}", weekly.total, want.2);

        let errors: Vec<f64> = ya.iter().flatten().zip(fa.iter().flatten()).map(|(a, b)| (a - b).abs()).collect();
        let ecdf = empirical_cdf_abs_error(&ya, &fa).map_err(|e| e.to_string())?;
        for x in [0.0, 1.0, 10.0, 30.0, 59.9, 100.0] {
            ensure!(close(ecdf.eval(x), oracle_ecdf(&errors, x), tol), "trial {trial}: ECDF({x})");
        }
        for (th, fr) in ecdf.thresholds.iter().zip(&ecdf.fractions) {
            ensure!(close(*fr, oracle_ecdf(&errors, *th), tol), "trial {trial}: ECDF at sample {th}");
        }
        for q in [0.02, 0.1, 0.25, 0.5, 0.75, 0.9, 0.98] {
            for (a, b) in ya[0].iter().zip(&fa[0]).take(20) {
                let v = quantile_loss(*a, *b, q).map_err(|e| e.to_string())?;
                ensure!(close(v, oracle_pinball(*a, *b, q), tol), "QL({a}, {b}, {q})");
            }
        }
        checked += 1;
    }
    within_budget(t, Duration::from_secs(1), "metric suite")?;
    Ok(format!("{checked} random panels and hand examples agree to 1e-9 in {:.3}s", t.elapsed().as_secs_f64()))
}

fn criterion_2() -> Check {
    let mut worst = 0.0f64;
    for i in 0..100 {
        for j in 0..100 {
            let y = -50.0 + i as f64 * 1.37;
            let f = -40.0 + j as f64 * 1.13;
            let ql = quantile_loss(y, f, 0.5).map_err(|e| e.to_string())?;
            worst = worst.max((ql - (y - f).abs() / 2.0).abs());
        }
    }
    ensure!(worst <= 1e-12, "max deviation {worst:e}");
    Ok(format!("max |QL(y, f, 0.5) - |y - f|/2| = {worst:e} over 100x100 grid"))
}

fn normalized_panel(cfg: &SyntheticConfig) -> panelcast::panel::PanelDataset {
    let ds = generate_synthetic_panel(cfg).unwrap();
    let stats = compute_group_statistics(&ds).unwrap();
    let ds = attach_static_covariates(&ds, &stats).unwrap();
    apply_normalization(&ds, &stats, Direction::Forward).unwrap()
}

fn criterion_3() -> Check {
    let t = Instant::now();
    let mut cfg = SyntheticConfig::default();
    cfg.days = 240;
    let ds = normalized_panel(&cfg);
    let schema = InputSchema::from_dataset(&ds).map_err(|e| e.to_string())?;
    let hp = TftHyperParams { seed: 5, ..TftHyperParams::default() };
    let model = TftModel::new(schema, hp.clone()).map_err(|e| e.to_string())?;
    let base = window_samples(&ds, hp.encoder_length, hp.prediction_length, 1);

    // random real-valued inputs on top of valid calendar categories
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut noise = || -> f64 { 3.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng) };
    let windows: Vec<SampleWindow> = (0..100)
        .map(|i| {
            let mut w = base[(i * 37) % base.len()].clone();
            w.encoder_target.iter_mut().for_each(|v| *v = noise());
            w.encoder_past.iter_mut().flatten().for_each(|v| *v = noise());
            w
        })
        .collect();
    let refs: Vec<&SampleWindow> = windows.iter().collect();
    let (fc, traces) = model.predict(&refs).map_err(|e| e.to_string())?;
    ensure!(fc.values.len() == 100, "batch dimension {}", fc.values.len());
    ensure!(
        fc.values.iter().all(|s| s.len() == 28 && s.iter().all(|q| q.len() == 7)),
        "output is not 100 x 28 x 7"
    );
    let e = hp.encoder_length;
    let mut worst: f64 = 0.0;
    for tr in &traces {
        let sums = std::iter::once(&tr.static_weights)
            .chain(&tr.encoder_weights)
            .chain(&tr.decoder_weights)
            .chain(&tr.attention);
        for w in sums {
            ensure!(w.iter().all(|x| *x >= 0.0), "negative weight");
            worst = worst.max((w.iter().sum::<f64>() - 1.0).abs());
        }
        for (i, row) in tr.attention.iter().enumerate() {
            ensure!(row[e + i + 1..].iter().all(|x| *x == 0.0), "query {i} attends to a future position");
        }
    }
    ensure!(worst <= 1e-6, "simplex deviation {worst:e}");
    within_budget(t, Duration::from_secs(60), "structural suite")?;
    Ok(format!("100 inputs, shape 100x28x7, max simplex deviation {worst:e}, masks exact"))
}

fn criterion_4() -> Check {
    let t = Instant::now();
    let mut cfg = SyntheticConfig::default();
    cfg.days = 60;
    cfg.group_ids.truncate(2);
    cfg.base_levels.truncate(2);
    let ds = normalized_panel(&cfg);
    let hp = TftHyperParams {
        encoder_length: 10,
        prediction_length: 4,
        hidden_size: 8,
        attention_heads: 2,
        hidden_continuous_size: 4,
        batch_size: 4,
        dropout: 0.0,
        ..TftHyperParams::default()
    };
    let windows = window_samples(&ds, 10, 4, 3);
    let model = TftModel::new(InputSchema::from_dataset(&ds).map_err(|e| e.to_string())?, hp).map_err(|e| e.to_string())?;
    let refs: Vec<&SampleWindow> = windows.iter().take(4).collect();
    let batch = model.batch(&refs).map_err(|e| e.to_string())?;
    let (_, grads) = model.loss_and_gradients(&batch, &mut Mode::eval()).map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let ids: Vec<_> = model.params().ids().collect();
    let (mut checked, mut attempts, mut worst) = (0, 0, 0.0f64);
    while checked < 30 && attempts < 5000 {
        attempts += 1;
        let id = ids[rng.random_range(0..ids.len())];
        let (r, c) = model.params().value(id).dim();
        let (i, j) = (rng.random_range(0..r), rng.random_range(0..c));
        let analytic = grads.get(id)[[i, j]];
        if analytic.abs() < 1e-6 {
            continue;
        }
        let h = 1e-6;
        let mut plus = model.clone();
        plus.params_mut().value_mut(id)[[i, j]] += h;
        let mut minus = model.clone();
        minus.params_mut().value_mut(id)[[i, j]] -= h;
        let numeric =
            (plus.loss(&batch).map_err(|e| e.to_string())? - minus.loss(&batch).map_err(|e| e.to_string())?) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
        ensure!(rel < 1e-3, "{}[{i},{j}]: analytic {analytic}, numeric {numeric}", model.params().name(id));
        worst = worst.max(rel);
        checked += 1;
    }
    ensure!(checked >= 20, "only {checked} parameters had a usable gradient");
    within_budget(t, Duration::from_secs(120), "gradient check")?;
    Ok(format!("{checked} parameters, worst relative error {worst:.2e}"))
}

fn criterion_6() -> Check {
    let t = Instant::now();
    let mut notes = Vec::new();

    // naive-7 on a purely weekly series
    let weekly = [5.0, 7.0, 9.0, 8.0, 6.0, 3.0, 2.0];
    let history: Vec<f64> = (0..70).map(|i| weekly[i % 7]).collect();
    let f = naive_forecast(&history, 7, 28).map_err(|e| e.to_string())?;
    ensure!((0..28).all(|h| f[h] == weekly[(70 + h) % 7]), "naive-7 is not exact");
    notes.push("naive exact".to_string());

    // SARIMA on AR(1) with phi = 0.7
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut y = vec![0.0f64];
    for _ in 1..3000 {
        let z: f64 = StandardNormal.sample(&mut rng);
        y.push(0.7 * y.last().unwrap() + z);
    }
    let m = fit_sarima(&y, SarimaOrder::arima(1, 0, 0)).map_err(|e| e.to_string())?;
    ensure!((m.ar[0] - 0.7).abs() <= 0.1, "AR(1) estimate {}", m.ar[0]);
    notes.push(format!("phi {:.3}", m.ar[0]));

    // VAR(1) with A = 0.5 I
    let mut s = vec![vec![0.0f64], vec![0.0f64]];
    for t in 1..5000 {
        for i in 0..2 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = 0.5 * s[i][t - 1] + z;
            s[i].push(v);
        }
    }
    let v = fit_var(&s, 1, 0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((v.coefs[0][i][j] - if i == j { 0.5 } else { 0.0 }).abs());
        }
    }
    ensure!(worst <= 0.05, "VAR coefficient error {worst}");
    notes.push(format!("VAR max error {worst:.3}"));

    // ETS on noiseless trend + weekly season
    let season = [3.0, -1.0, 0.5, 2.0, -2.5, -1.5, -0.5];
    let series = |t: usize| 50.0 + 0.3 * t as f64 + season[t % 7];
    let hist: Vec<f64> = (0..140).map(series).collect();
    let e = fit_ets(&hist, 7).map_err(|e| e.to_string())?;
    let fc = e.point_forecast(28);
    let err = (0..28).map(|h| (fc[h] - series(140 + h)).abs()).fold(0.0, f64::max);
    ensure!(err <= 1e-3, "ETS forecast error {err:e}");
    notes.push(format!("ETS max error {err:.1e}"));

    // GBT on a day-of-week function
    let dow = [120.0, 100.0, 95.0, 97.0, 92.0, 70.0, 75.0];
    let x: Vec<Vec<f64>> = (0..140).map(|i| vec![(i % 7) as f64, (i / 7) as f64]).collect();
    let yv: Vec<f64> = (0..140).map(|i| dow[i % 7]).collect();
    let g = fit_gbt(&x, &yv, Objective::Squared, &GbtParams::default()).map_err(|e| e.to_string())?;
    let mape = x.iter().zip(&yv).map(|(r, t)| ((g.predict(r) - t) / t).abs()).sum::<f64>() / yv.len() as f64;
    ensure!(mape < 0.01, "GBT training MAPE {mape}");
    notes.push(format!("GBT MAPE {:.2e}", mape));

    within_budget(t, Duration::from_secs(300), "baseline oracles")?;
    Ok(notes.join(", "))
}

// ---------------------------------------------------------------------------
// backtest-based criteria

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn main_experiment(out: &Path) -> Result<(EvaluationReport, Duration), String> {
    let mut cfg = RunConfig::from_file(&repo_root().join("configs/synthetic.toml")).map_err(|e| e.to_string())?;
    cfg.output_dir = out.to_path_buf();
    let t = Instant::now();
    let report = run_backtest(&cfg).map_err(|e| e.to_string())?;
    emit_report(&report, out).map_err(|e| e.to_string())?;
    Ok((report, t.elapsed()))
}

fn mape_of(report: &EvaluationReport, name: &str) -> Result<f64, String> {
    let m = report.model(name).ok_or(format!("no model {name}"))?;
    m.metrics
        .as_ref()
        .map(|x| x.overall.mape)
        .ok_or(format!("{name} failed: {}", m.error.clone().unwrap_or_default()))
}

fn criterion_5(report: &EvaluationReport, elapsed: Duration) -> Check {
    let tft = mape_of(report, "tft")?;
    let naive = mape_of(report, "naive7")?;
    ensure!(elapsed <= Duration::from_secs(1200), "backtest took {:.0}s", elapsed.as_secs_f64());
    ensure!(tft < naive, "TFT MAPE {tft:.3}% is not below naive-7 {naive:.3}%");
    Ok(format!("TFT MAPE {tft:.3}% < naive-7 {naive:.3}% (backtest {:.0}s)", elapsed.as_secs_f64()))
}

fn criterion_7(report: &EvaluationReport) -> Check {
    let interp = report.interpretation.as_ref().ok_or("no interpretation summary")?;
    let window_mean = |from: i64, to: i64| -> Result<f64, String> {
        let v: Vec<f64> = (from..=to).map(|p| interp.attention.at(p).ok_or(format!("no position {p}"))).collect::<Result<_, _>>()?;
        Ok(avg(&v))
    };
    let recent = window_mean(-7, -1)?;
    let early = window_mean(-42, -36)?;
    let rank = |list: &[panelcast::interpret::VariableImportance], name: &str| list.iter().position(|v| v.variable == name);
    let past = &interp.importance.past;
    let lead = rank(past, "resp_share").ok_or("resp_share not ranked")?;
    let noise = rank(past, "noise").ok_or("noise not ranked")?;
    let holiday = rank(&interp.importance.future, "holiday").ok_or("holiday not ranked")?;
    let parts = [
        (recent > early, format!("(a) attention -7..-1 {recent:.4} vs -42..-36 {early:.4}")),
        (lead < noise, format!("(b) resp_share rank {} vs noise rank {}", lead + 1, noise + 1)),
        (holiday < 2, format!("(c) holiday future rank {}", holiday + 1)),
    ];
    let text = parts.iter().map(|(ok, s)| format!("{s} {}", if *ok { "ok" } else { "FAILED" })).collect::<Vec<_>>().join("; ");
    ensure!(parts.iter().all(|(ok, _)| *ok), "{text}");
    Ok(text)
}

fn audit_config(out: &Path, data: Option<(&Path, &Path)>, test_end: Option<NaiveDate>) -> RunConfig {
    let mut cfg = RunConfig::parse(
        r#"
seed = 99
output_dir = "unused"
models = []

[data.synthetic]
seed = 3

[split]
val_start = "2021-07-24"
test_start = "2022-01-24"
"#,
    )
    .unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg.split.test_end = test_end;
    if let Some((csv, schema)) = data {
        cfg.data.synthetic = None;
        cfg.data.csv = Some(csv.to_path_buf());
        cfg.data.schema = Some(schema.to_path_buf());
    }
    let mut sarima = ModelConfig::new(ModelKind::Sarima);
    sarima.max_history = Some(364);
    sarima.sarima_grid = Some(vec![
        SarimaOrder { p: 1, d: 0, q: 1, P: 1, D: 1, Q: 1, m: 7 },
        SarimaOrder { p: 2, d: 1, q: 1, P: 0, D: 1, Q: 1, m: 7 },
    ]);
    let mut ets = ModelConfig::new(ModelKind::Ets);
    ets.max_history = Some(364);
    let mut var = ModelConfig::new(ModelKind::Var);
    var.max_history = Some(364);
    var.var_max_p = 3;
    let mut gbt = ModelConfig::new(ModelKind::Gbt);
    gbt.train_stride = Some(7);
    gbt.gbt.n_trees = 30;
    let mut tft = ModelConfig::new(ModelKind::Tft);
    tft.train_stride = Some(14);
    tft.tft.max_epochs = 2;
    cfg.models = vec![ModelConfig::new(ModelKind::Naive), ets, sarima, var, gbt, tft];
    cfg
}

fn criterion_8() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let first = audit_config(&a, None, None);
    let report = run_backtest(&first).map_err(|e| e.to_string())?;
    emit_report(&report, &a).map_err(|e| e.to_string())?;
    let expected = (189 - 28) / 7 + 1;
    ensure!(report.origins.len() == expected, "{} origins, expected {expected}", report.origins.len());
    for m in &report.models {
        ensure!(m.status == "ok", "model {} failed: {:?}", m.name, m.error);
        ensure!(m.audit.leak_free, "model {} audit: {:?}", m.name, m.audit);
    }
    let rerun = run_backtest(&audit_config(&b, None, None)).map_err(|e| e.to_string())?;
    emit_report(&rerun, &b).map_err(|e| e.to_string())?;
    let same = fs::read(a.join("metrics.csv")).map_err(|e| e.to_string())?
        == fs::read(b.join("metrics.csv")).map_err(|e| e.to_string())?;
    ensure!(same, "metrics.csv differs between identical runs");

    // Perturb every observed value from the first origin on. Forecasts made
    // at that origin must not move.
    let ds = generate_synthetic_panel(&first.data.synthetic.clone().unwrap()).map_err(|e| e.to_string())?;
    let origin = report.origins[0];
    let mut groups = ds.groups().to_vec();
    for g in &mut groups {
        for i in 0..g.len() {
            if g.dates[i] >= origin {
                g.target[i] *= 1.5;
                for c in &mut g.past {
                    c.values[i] += 7.0;
                }
            }
        }
    }
    let perturbed = panelcast::panel::PanelDataset::new(groups, ds.gaps().to_vec()).map_err(|e| e.to_string())?;
    let mut paths = Vec::new();
    for (name, d) in [("clean", &ds), ("perturbed", &perturbed)] {
        let csv = tmp.path().join(format!("{name}.csv"));
        let schema = tmp.path().join(format!("{name}.schema.toml"));
        write_panel_csv(d, &csv).map_err(|e| e.to_string())?.write(&schema).map_err(|e| e.to_string())?;
        load_panel_csv(&csv, &panelcast::panel::Schema::from_file(&schema).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        paths.push((csv, schema));
    }
    let end = Some(origin + Days::new(27));
    let clean = run_backtest(&audit_config(tmp.path(), Some((&paths[0].0, &paths[0].1)), end)).map_err(|e| e.to_string())?;
    let moved = run_backtest(&audit_config(tmp.path(), Some((&paths[1].0, &paths[1].1)), end)).map_err(|e| e.to_string())?;
    ensure!(clean.forecasts.len() == 6, "{} models forecast on clean data", clean.forecasts.len());
    for (c, m) in clean.forecasts.iter().zip(&moved.forecasts) {
        ensure!(c.records == m.records, "{} forecasts changed when post-origin data changed", c.model);
    }
    Ok(format!(
        "{} origins, all {} models leak-free, forecasts invariant to post-origin data, metrics.csv byte-identical",
        report.origins.len(),
        report.models.len()
    ))
}

fn read_csv(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn criterion_9(report: &EvaluationReport, dir: &Path) -> Check {
    let metrics = read_csv(&dir.join("metrics.csv"))?;
    ensure!(metrics[0] == ["model", "MAE", "RMSE", "MAPE", "MSE", "MIS"], "metrics.csv header {:?}", metrics[0]);
    ensure!(metrics.len() == 1 + report.models.len(), "metrics.csv has {} rows", metrics.len() - 1);

    // the MAPE column recomputed from forecasts.csv and actuals.csv
    let actuals = read_csv(&dir.join("actuals.csv"))?;
    let lookup: std::collections::HashMap<(String, String), f64> =
        actuals[1..].iter().map(|r| ((r[0].clone(), r[1].clone()), r[2].parse().unwrap())).collect();
    let forecasts = read_csv(&dir.join("forecasts.csv"))?;
    ensure!(
        forecasts[0] == ["group", "origin_date", "step", "point", "lower", "upper", "model"],
        "forecasts.csv header {:?}",
        forecasts[0]
    );
    for row in &metrics[1..] {
        let model = &row[0];
        let mut by_group: std::collections::BTreeMap<String, (f64, usize)> = Default::default();
        for f in forecasts[1..].iter().filter(|f| &f[6] == model) {
            let origin: NaiveDate = f[1].parse().unwrap();
            let date = origin + Days::new(f[2].parse::<u64>().unwrap() - 1);
            let y = lookup[&(f[0].clone(), date.to_string())];
            let p: f64 = f[3].parse().unwrap();
            let e = by_group.entry(f[0].clone()).or_default();
            if y.abs() > report.metric_config.mape_epsilon {
                e.0 += ((y - p) / y).abs();
                e.1 += 1;
            }
        }
        let mape = avg(&by_group.values().map(|(s, n)| 100.0 * s / *n as f64).collect::<Vec<_>>());
        let reported: f64 = row[3].parse().unwrap();
        ensure!(close(mape, reported, 1e-9 * mape.max(1.0)), "{model}: MAPE {reported} vs recomputed {mape}");
    }

    let weekly = read_csv(&dir.join("weekly_mape.csv"))?;
    ensure!(weekly[0] == ["model", "week1", "week2", "week3", "week4", "total"], "weekly header {:?}", weekly[0]);
    for (w, m) in weekly[1..].iter().zip(&metrics[1..]) {
        ensure!(w[0] == m[0] && w[5] == m[3], "weekly total of {} differs from its MAPE", w[0]);
    }

    let n_points = report.groups.len() * report.origins.len() * report.horizon;
    for row in &metrics[1..] {
        let ecdf = read_csv(&dir.join(format!("ecdf_{}.csv", row[0])))?;
        ensure!(ecdf[0] == ["abs_error", "fraction"], "ecdf header {:?}", ecdf[0]);
        let pts: Vec<(f64, f64)> = ecdf[1..].iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
        ensure!(pts.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1), "{}: ECDF not increasing", row[0]);
        ensure!(pts.last().unwrap().1 == 1.0, "{}: ECDF does not reach 1", row[0]);
        let step = 1.0 / n_points as f64;
        ensure!(
            pts.iter().all(|(_, f)| ((f / step) - (f / step).round()).abs() < 1e-6),
            "{}: fractions are not multiples of 1/{n_points}",
            row[0]
        );
    }
    Ok(format!(
        "{} metric rows, weekly table week1..4 + total, {} ECDF files over {n_points} points",
        metrics.len() - 1,
        metrics.len() - 1
    ))
}

// ---------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Check) -> Check {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .map_or("panicked".to_string(), |s| format!("panicked: {s}"))),
    }
}

fn main() {
    let mut results: Vec<(u8, &str, Check, Duration)> = Vec::new();
    let mut record = |id: u8, name: &'static str, f: &mut dyn FnMut() -> Check| {
        let t = Instant::now();
        let r = guarded(f);
        let line = match &r {
            Ok(s) => format!("PASS  criterion {id} {name}: {s}"),
            Err(s) => format!("FAIL  criterion {id} {name}: {s}"),
        };
        println!("{line} [{:.1}s]", t.elapsed().as_secs_f64());
        results.push((id, name, r, t.elapsed()));
    };

    record(1, "metric oracles", &mut criterion_1);
    record(2, "quantile-loss identity", &mut criterion_2);
    record(3, "TFT structure", &mut criterion_3);
    record(4, "gradient check", &mut criterion_4);
    record(6, "baseline oracles", &mut criterion_6);

    let dir = tempfile::tempdir().expect("tempdir");
    let experiment = catch_unwind(AssertUnwindSafe(|| main_experiment(dir.path())))
        .unwrap_or_else(|_| Err("synthetic backtest panicked".to_string()));
    match experiment {
        Ok((report, elapsed)) => {
            record(5, "learning sanity", &mut || criterion_5(&report, elapsed));
            record(7, "interpretability", &mut || criterion_7(&report));
            record(9, "report shape", &mut || criterion_9(&report, dir.path()));
        }
        Err(e) => {
            for (id, name) in [(5, "learning sanity"), (7, "interpretability"), (9, "report shape")] {
                record(id, name, &mut || Err(format!("synthetic backtest failed: {e}")));
            }
        }
    }
    record(8, "protocol audit", &mut criterion_8);

    results.sort_by_key(|r| r.0);
    let failed: Vec<u8> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
