//! Point and interval forecast metrics.
//!
//! Every metric is computed per group and then averaged uniformly across
//! groups. RMSE takes the root inside each group before averaging, so the
//! averaged RMSE is not the root of the averaged MSE.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Metric settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Actuals with `|y| <= mape_epsilon` are left out of MAPE.
    pub mape_epsilon: f64,
    /// The `alpha` of the interval score, used literally in `2 / alpha`.
    pub mis_alpha: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            mape_epsilon: 1.0,
            mis_alpha: 0.95,
        }
    }
}

impl MetricConfig {
    /// Check ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.mape_epsilon >= 0.0) {
            return Err(Error::Config("MAPE exclusion threshold must be >= 0".into()));
        }
        if !(self.mis_alpha > 0.0 && self.mis_alpha < 1.0) {
            return Err(Error::Config("MIS alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Metrics of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    /// Mean absolute error.
    pub mae: f64,
    /// Root mean squared error.
    pub rmse: f64,
    /// Mean absolute percentage error, in percent.
    pub mape: f64,
    /// Mean squared error.
    pub mse: f64,
    /// Mean interval score, when bounds were given.
    pub mis: Option<f64>,
    /// Points left out of MAPE.
    pub mape_excluded: usize,
    /// Number of points.
    pub n: usize,
}

/// Per-group and group-averaged metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Group labels, parallel to `per_group`.
    pub groups: Vec<String>,
    /// Per-group metrics.
    pub per_group: Vec<GroupMetrics>,
    /// Uniform average of per-group MAE.
    pub mae: f64,
    /// Uniform average of per-group RMSE.
    pub rmse: f64,
    /// Uniform average of per-group MAPE (percent).
    pub mape: f64,
    /// Uniform average of per-group MSE.
    pub mse: f64,
    /// Uniform average of per-group MIS.
    pub mis: Option<f64>,
    /// Total points left out of MAPE.
    pub mape_excluded: usize,
}

impl MetricReport {
    /// Flat CSV (`metric,group,week,value`), one row per metric and group,
    /// with `all` marking the cross-group average. Weekly MAPE rows are
    /// added when `weekly` is given.
    pub fn to_flat_csv(&self, weekly: Option<&WeeklyMape>) -> String {
        let mut out = String::from("metric,group,week,value\n");
        let mut row = |m: &str, g: &str, w: &str, v: f64| out.push_str(&format!("{m},{g},{w},{v}\n"));
        for (name, g) in self.groups.iter().zip(&self.per_group) {
            row("MAE", name, "all", g.mae);
            row("RMSE", name, "all", g.rmse);
            row("MAPE", name, "all", g.mape);
            row("MSE", name, "all", g.mse);
            if let Some(m) = g.mis {
                row("MIS", name, "all", m);
            }
        }
        row("MAE", "all", "all", self.mae);
        row("RMSE", "all", "all", self.rmse);
        row("MAPE", "all", "all", self.mape);
        row("MSE", "all", "all", self.mse);
        if let Some(m) = self.mis {
            row("MIS", "all", "all", m);
        }
        if let Some(w) = weekly {
            for (i, v) in w.weeks.iter().enumerate() {
                row("MAPE", "all", &(i + 1).to_string(), *v);
            }
        }
        out
    }
}

fn check_aligned(a: &[Vec<f64>], b: &[Vec<f64>], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{what}: {} groups vs {}", a.len(), b.len())));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.len() != y.len() {
            return Err(Error::Shape(format!("{what}: group {i} has {} actuals vs {} values", x.len(), y.len())));
        }
        if x.is_empty() {
            return Err(Error::Shape(format!("{what}: group {i} is empty")));
        }
    }
    Ok(())
}

fn group_mape(y: &[f64], f: &[f64], eps: f64) -> (f64, usize, usize) {
    let mut sum = 0.0;
    let mut used = 0;
    for (a, b) in y.iter().zip(f) {
        if a.abs() > eps {
            sum += (a - b).abs() / a.abs();
            used += 1;
        }
    }
    (100.0 * sum / used.max(1) as f64, used, y.len() - used)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// MAE, RMSE, MAPE and MSE per group and averaged across groups.
///
/// `actuals[g]` and `forecasts[g]` hold the pooled points of group `g`.
pub fn compute_point_metrics(actuals: &[Vec<f64>], forecasts: &[Vec<f64>], cfg: &MetricConfig) -> Result<MetricReport> {
    cfg.validate()?;
    check_aligned(actuals, forecasts, "point metrics")?;
    let mut per_group = Vec::with_capacity(actuals.len());
    for (gi, (y, f)) in actuals.iter().zip(forecasts).enumerate() {
        let n = y.len() as f64;
        let mae = y.iter().zip(f).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
        let mse = y.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        let (mape, used, excluded) = group_mape(y, f, cfg.mape_epsilon);
        if used == 0 {
            return Err(Error::InsufficientData(format!(
                "group {gi}: every actual is within {} of zero, MAPE undefined",
                cfg.mape_epsilon
            )));
        }
        per_group.push(GroupMetrics {
            mae,
            rmse: mse.sqrt(),
            mape,
            mse,
            mis: None,
            mape_excluded: excluded,
            n: y.len(),
        });
    }
    Ok(MetricReport {
        groups: (0..actuals.len()).map(|i| i.to_string()).collect(),
        mae: mean(per_group.iter().map(|g| g.mae)),
        rmse: mean(per_group.iter().map(|g| g.rmse)),
        mape: mean(per_group.iter().map(|g| g.mape)),
        mse: mean(per_group.iter().map(|g| g.mse)),
        mis: None,
        mape_excluded: per_group.iter().map(|g| g.mape_excluded).sum(),
        per_group,
    })
}

/// Interval score of one point.
pub fn interval_score(y: f64, lower: f64, upper: f64, alpha: f64) -> f64 {
    let mut s = upper - lower;
    if y < lower {
        s += 2.0 / alpha * (lower - y);
    }
    if y > upper {
        s += 2.0 / alpha * (y - upper);
    }
    s
}

/// Per-group mean interval score; the cross-group average is their mean.
pub fn mean_interval_score_per_group(
    actuals: &[Vec<f64>],
    lower: &[Vec<f64>],
    upper: &[Vec<f64>],
    cfg: &MetricConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_aligned(actuals, lower, "interval score lower")?;
    check_aligned(actuals, upper, "interval score upper")?;
    let mut out = Vec::with_capacity(actuals.len());
    for (gi, ((y, l), u)) in actuals.iter().zip(lower).zip(upper).enumerate() {
        let mut s = 0.0;
        for (i, ((y, l), u)) in y.iter().zip(l).zip(u).enumerate() {
            if l > u {
                return Err(Error::InvalidData(format!(
                    "crossed interval bounds at group {gi}, point {i}: lower {l} > upper {u}"
                )));
            }
            s += interval_score(*y, *l, *u, cfg.mis_alpha);
        }
        out.push(s / y.len() as f64);
    }
    Ok(out)
}

/// Mean interval score averaged across groups.
pub fn mean_interval_score(actuals: &[Vec<f64>], lower: &[Vec<f64>], upper: &[Vec<f64>], cfg: &MetricConfig) -> Result<f64> {
    Ok(mean(mean_interval_score_per_group(actuals, lower, upper, cfg)?.into_iter()))
}

/// Attach MIS to a report built by [`compute_point_metrics`].
pub fn with_interval_score(
    mut report: MetricReport,
    actuals: &[Vec<f64>],
    lower: &[Vec<f64>],
    upper: &[Vec<f64>],
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    let per = mean_interval_score_per_group(actuals, lower, upper, cfg)?;
    for (g, m) in report.per_group.iter_mut().zip(&per) {
        g.mis = Some(*m);
    }
    report.mis = Some(mean(per.into_iter()));
    Ok(report)
}

/// Pinball loss `max(q (y - yhat), (q - 1)(y - yhat))`.
pub fn quantile_loss(y: f64, yhat: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("quantile level {q} outside (0, 1)")));
    }
    let e = y - yhat;
    Ok((q * e).max((q - 1.0) * e))
}

/// MAPE by forecast week plus the all-steps total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyMape {
    /// MAPE (percent) of weeks 1..=n.
    pub weeks: Vec<f64>,
    /// All-steps MAPE (percent).
    pub total: f64,
}

/// MAPE split by horizon week.
///
/// `actuals[g][w]` is the horizon vector of window `w` of group `g`. Week
/// `k` pools steps `week_len*(k-1)+1 ..= week_len*k` of every window of a
/// group, then averages across groups, exactly like the total.
pub fn per_week_mape(
    actuals: &[Vec<Vec<f64>>],
    forecasts: &[Vec<Vec<f64>>],
    horizon: usize,
    week_len: usize,
    cfg: &MetricConfig,
) -> Result<WeeklyMape> {
    if week_len == 0 || !horizon.is_multiple_of(week_len) {
        return Err(Error::Config(format!(
            "horizon {horizon} is not a whole number of {week_len}-step weeks"
        )));
    }
    if actuals.len() != forecasts.len() {
        return Err(Error::Shape("weekly MAPE: group counts differ".into()));
    }
    for (a, f) in actuals.iter().zip(forecasts) {
        if a.len() != f.len() || a.iter().chain(f).any(|w| w.len() != horizon) {
            return Err(Error::Shape(format!("weekly MAPE: every window must have {horizon} steps")));
        }
    }
    let pool = |steps: std::ops::Range<usize>| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let take = |p: &[Vec<Vec<f64>>]| {
            p.iter()
                .map(|g| g.iter().flat_map(|w| w[steps.clone()].iter().copied()).collect())
                .collect()
        };
        (take(actuals), take(forecasts))
    };
    let mut weeks = Vec::new();
    for k in 0..horizon / week_len {
        let (a, f) = pool(k * week_len..(k + 1) * week_len);
        weeks.push(compute_point_metrics(&a, &f, cfg)?.mape);
    }
    let (a, f) = pool(0..horizon);
    let total = compute_point_metrics(&a, &f, cfg)?.mape;
    Ok(WeeklyMape { weeks, total })
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    /// Distinct sorted sample values.
    pub thresholds: Vec<f64>,
    /// Fraction of samples `<=` each threshold.
    pub fractions: Vec<f64>,
}

impl Ecdf {
    /// Build from samples.
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("ECDF of an empty sample".into()));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidData("ECDF sample contains NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let mut thresholds = Vec::new();
        let mut fractions = Vec::new();
        for (i, x) in samples.iter().enumerate() {
            if i + 1 < samples.len() && samples[i + 1] == *x {
                continue;
            }
            thresholds.push(*x);
            fractions.push((i + 1) as f64 / n);
        }
        Ok(Ecdf { thresholds, fractions })
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        match self.thresholds.partition_point(|t| *t <= x) {
            0 => 0.0,
            k => self.fractions[k - 1],
        }
    }

    /// Two-column CSV (`abs_error,fraction`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("abs_error,fraction\n");
        for (t, f) in self.thresholds.iter().zip(&self.fractions) {
            out.push_str(&format!("{t},{f}\n"));
        }
        out
    }
}

/// ECDF of `|y - yhat|` pooled over groups and steps.
pub fn empirical_cdf_abs_error(actuals: &[Vec<f64>], forecasts: &[Vec<f64>]) -> Result<Ecdf> {
    if actuals.len() != forecasts.len() || actuals.iter().zip(forecasts).any(|(a, f)| a.len() != f.len()) {
        return Err(Error::Shape("ECDF: actuals and forecasts are not aligned".into()));
    }
    let errs: Vec<f64> = actuals
        .iter()
        .zip(forecasts)
        .flat_map(|(a, f)| a.iter().zip(f).map(|(y, p)| (y - p).abs()))
        .collect();
    Ecdf::new(errs)
}

/// Pearson correlation coefficient.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Shape(format!(
            "correlation needs two equal series of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("correlation input is constant".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CFG: MetricConfig = MetricConfig {
        mape_epsilon: 1.0,
        mis_alpha: 0.95,
    };

    #[test]
    fn exact_forecast_is_zero() {
        let r = compute_point_metrics(&[vec![100.0]], &[vec![100.0]], &CFG).unwrap();
        assert_eq!((r.mae, r.rmse, r.mape, r.mse), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_example() {
        let r = compute_point_metrics(&[vec![100.0, 200.0]], &[vec![110.0, 180.0]], &CFG).unwrap();
        assert!((r.mae - 15.0).abs() < 1e-12);
        assert!((r.mse - 250.0).abs() < 1e-12);
        assert!((r.rmse - 250f64.sqrt()).abs() < 1e-12);
        assert!((r.mape - 10.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_group_average() {
        let r = compute_point_metrics(&[vec![10.0, 14.0], vec![20.0]], &[vec![12.0, 12.0], vec![10.0]], &CFG).unwrap();
        assert_eq!(r.per_group[0].mae, 2.0);
        assert_eq!(r.per_group[1].mae, 10.0);
        assert_eq!(r.mae, 6.0);
    }

    #[test]
    fn mape_exclusion() {
        let r = compute_point_metrics(&[vec![0.0, 100.0]], &[vec![5.0, 110.0]], &CFG).unwrap();
        assert!((r.mape - 10.0).abs() < 1e-12);
        assert_eq!(r.mape_excluded, 1);
        assert!(compute_point_metrics(&[vec![0.0, 0.5]], &[vec![1.0, 1.0]], &CFG).is_err());
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            compute_point_metrics(&[vec![1.0, 2.0]], &[vec![1.0]], &CFG),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn interval_score_cases() {
        let m = |y: f64| mean_interval_score(&[vec![y]], &[vec![90.0]], &[vec![110.0]], &CFG).unwrap();
        assert_eq!(m(100.0), 20.0);
        assert!((m(120.0) - (20.0 + 2.0 / 0.95 * 10.0)).abs() < 1e-12);
        assert!((m(120.0) - 41.0526).abs() < 1e-4);
        assert!((m(85.0) - 30.5263).abs() < 1e-4);
        assert!(mean_interval_score(&[vec![1.0]], &[vec![2.0]], &[vec![1.0]], &CFG).is_err());
    }

    #[test]
    fn pinball_examples() {
        assert_eq!(quantile_loss(10.0, 10.0, 0.5).unwrap(), 0.0);
        assert!((quantile_loss(10.0, 8.0, 0.9).unwrap() - 1.8).abs() < 1e-12);
        assert!((quantile_loss(8.0, 10.0, 0.9).unwrap() - 0.2).abs() < 1e-12);
        assert!(quantile_loss(1.0, 0.0, 1.0).is_err());
        assert!(quantile_loss(1.0, 0.0, 0.0).is_err());
    }

    fn window_set(rel: impl Fn(usize) -> f64) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>) {
        let y: Vec<f64> = (0..28).map(|i| 100.0 + i as f64).collect();
        let f: Vec<f64> = y.iter().enumerate().map(|(i, v)| v * (1.0 + rel(i))).collect();
        (vec![vec![y.clone(), y]], vec![vec![f.clone(), f]])
    }

    #[test]
    fn weekly_constant_error() {
        let (a, f) = window_set(|_| 0.1);
        let w = per_week_mape(&a, &f, 28, 7, &CFG).unwrap();
        assert_eq!(w.weeks.len(), 4);
        for v in w.weeks.iter().chain([&w.total]) {
            assert!((v - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn weekly_mixed_error() {
        let (a, f) = window_set(|i| if i < 7 { -0.05 } else { 0.15 });
        let w = per_week_mape(&a, &f, 28, 7, &CFG).unwrap();
        assert!((w.weeks[0] - 5.0).abs() < 1e-9);
        for k in 1..4 {
            assert!((w.weeks[k] - 15.0).abs() < 1e-9);
        }
        assert!((w.total - 12.5).abs() < 1e-9);
        assert!(per_week_mape(&a, &f, 28, 5, &CFG).is_err());
    }

    #[test]
    fn ecdf_definition() {
        let e = Ecdf::new(vec![3.0, 1.0, 2.0]).unwrap();
        assert!((e.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(3.0), 1.0);
        assert!(empirical_cdf_abs_error(&[], &[]).is_err());
        let a = empirical_cdf_abs_error(&[vec![1.0, 2.0]], &[vec![1.5, 0.0]]).unwrap();
        let b = empirical_cdf_abs_error(&[vec![1.0, 2.0]], &[vec![1.5, 0.0]]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pearson_cases() {
        assert!((pearson_correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_correlation(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            pearson_correlation(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]),
            Err(Error::ZeroVariance(_))
        ));
    }

    proptest! {
        #[test]
        fn permutation_invariance_and_jensen(
            pts in prop::collection::vec((1.5f64..1e3, 0.0f64..1e3), 1..40),
            seed in any::<u64>(),
        ) {
            let y: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let f: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let mut idx: Vec<usize> = (0..y.len()).collect();
            // deterministic shuffle from the seed
            let mut s = seed;
            for i in (1..idx.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                idx.swap(i, (s >> 33) as usize % (i + 1));
            }
            let yp: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let fp: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
            let a = compute_point_metrics(&[y], &[f], &CFG).unwrap();
            let b = compute_point_metrics(&[yp], &[fp], &CFG).unwrap();
            for (u, v) in [(a.mae, b.mae), (a.rmse, b.rmse), (a.mape, b.mape), (a.mse, b.mse)] {
                prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
            }
            prop_assert!(a.per_group[0].mae <= a.per_group[0].rmse * (1.0 + 1e-12));
        }

        #[test]
        fn mis_inside_is_width(y in -100.0f64..100.0, lo in 0.0f64..50.0, hi in 0.0f64..50.0) {
            let s = mean_interval_score(&[vec![y]], &[vec![y - lo]], &[vec![y + hi]], &CFG).unwrap();
            prop_assert!((s - (lo + hi)).abs() < 1e-9);
        }

        #[test]
        fn ecdf_monotone(v in prop::collection::vec(0.0f64..10.0, 1..50)) {
            let e = Ecdf::new(v.clone()).unwrap();
            prop_assert!(e.fractions.windows(2).all(|w| w[0] <= w[1]));
            let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(e.eval(min - 1e-9), 0.0);
            prop_assert_eq!(e.eval(max), 1.0);
        }
    }
}
