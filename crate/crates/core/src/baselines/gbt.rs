use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::SeriesForecast;
use crate::panel::SampleWindow;
use crate::{Error, Result};

/// Loss minimized by the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// Squared error; trees fit residuals.
    Squared,
    /// Pinball loss at the given level; trees fit the quantile gradient
    /// and leaves take the residual quantile.
    Pinball(f64),
}

/// Tree and boosting settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    /// Boosting rounds.
    pub n_trees: usize,
    /// Maximum depth.
    pub max_depth: usize,
    /// Shrinkage.
    pub learning_rate: f64,
    /// Minimum rows in a leaf.
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams { n_trees: 200, max_depth: 6, learning_rate: 0.1, min_samples_leaf: 5 }
    }
}

/// Node of a regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Terminal value.
    Leaf(f64),
    /// Go left when `x[feature] <= threshold`.
    Split {
        /// Feature index.
        feature: usize,
        /// Threshold.
        threshold: f64,
        /// Left child index.
        left: usize,
        /// Right child index.
        right: usize,
    },
}

/// Regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Nodes.
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Output for one feature row.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf(v) => return v,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

/// Boosted ensemble: `base + learning_rate * sum(tree outputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    /// Objective.
    pub objective: Objective,
    /// Initial constant.
    pub base: f64,
    /// Shrinkage.
    pub learning_rate: f64,
    /// Trees.
    pub trees: Vec<Tree>,
}

impl GbtModel {
    /// Prediction for one feature row.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

/// Type-7 (linear interpolation) quantile of unsorted values.
fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let (lo, frac) = (pos.floor() as usize, pos - pos.floor());
    if lo + 1 < values.len() {
        values[lo] + frac * (values[lo + 1] - values[lo])
    } else {
        values[lo]
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

struct NodeStats {
    n: usize,
    sum: f64,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Fit an ensemble on a row-major feature matrix.
///
/// Rows are put in a canonical order first, and split search scans
/// features in index order and thresholds ascending, keeping the first
/// strictly best split; the fit is therefore independent of input row
/// order.
pub fn fit_gbt(x: &[Vec<f64>], y: &[f64], objective: Objective, params: &GbtParams) -> Result<GbtModel> {
    if x.is_empty() || x[0].is_empty() {
        return Err(Error::InsufficientData("empty GBT feature matrix".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} feature rows but {} targets", x.len(), y.len())));
    }
    let nf = x[0].len();
    if x.iter().any(|r| r.len() != nf) {
        return Err(Error::Shape("ragged GBT feature matrix".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite GBT feature or target".into()));
    }
    if let Objective::Pinball(q) = objective {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Config(format!("pinball level {q} outside (0, 1)")));
        }
    }
    if params.learning_rate <= 0.0 || params.min_samples_leaf == 0 {
        return Err(Error::Config("GBT learning rate and min_samples_leaf must be positive".into()));
    }

    let mut rows: Vec<usize> = (0..x.len()).collect();
    rows.sort_by(|&a, &b| lex_cmp(&x[a], &x[b]).then(y[a].total_cmp(&y[b])));
    let n = rows.len();
    let cols: Vec<Vec<f64>> = (0..nf).map(|f| rows.iter().map(|&r| x[r][f]).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    let order: Vec<Vec<usize>> = cols
        .iter()
        .map(|c| {
            let mut o: Vec<usize> = (0..n).collect();
            o.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
            o
        })
        .collect();

    let base = match objective {
        Objective::Squared => y.iter().sum::<f64>() / n as f64,
        Objective::Pinball(q) => quantile(&mut y.clone(), q),
    };
    let mut fitted = vec![base; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let grad: Vec<f64> = match objective {
            Objective::Squared => y.iter().zip(&fitted).map(|(a, f)| a - f).collect(),
            Objective::Pinball(q) => y.iter().zip(&fitted).map(|(a, f)| if a > f { q } else { q - 1.0 }).collect(),
        };
        let (tree, node_of) = grow_tree(&cols, &order, &grad, params);
        // leaf values
        let mut nodes = tree;
        let n_nodes = nodes.len();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for (i, &k) in node_of.iter().enumerate() {
            members[k].push(i);
        }
        for (k, m) in members.iter().enumerate() {
            if let TreeNode::Leaf(v) = &mut nodes[k] {
                if m.is_empty() {
                    continue;
                }
                *v = match objective {
                    Objective::Squared => m.iter().map(|&i| grad[i]).sum::<f64>() / m.len() as f64,
                    Objective::Pinball(q) => {
                        let mut r: Vec<f64> = m.iter().map(|&i| y[i] - fitted[i]).collect();
                        quantile(&mut r, q)
                    }
                };
            }
        }
        let tree = Tree { nodes };
        for (i, &k) in node_of.iter().enumerate() {
            if let TreeNode::Leaf(v) = tree.nodes[k] {
                fitted[i] += params.learning_rate * v;
            }
        }
        trees.push(tree);
    }
    Ok(GbtModel { objective, base, learning_rate: params.learning_rate, trees })
}

/// Level-wise exact greedy growth on the squared error of `grad`.
/// Returns the nodes (leaves hold 0) and each row's leaf.
fn grow_tree(cols: &[Vec<f64>], order: &[Vec<usize>], grad: &[f64], params: &GbtParams) -> (Vec<TreeNode>, Vec<usize>) {
    let n = grad.len();
    let mut nodes = vec![TreeNode::Leaf(0.0)];
    let mut node_of = vec![0usize; n];
    let mut active = vec![0usize];
    let total_sq: f64 = grad.iter().map(|g| g * g).sum();
    let min_gain = 1e-12 * total_sq;
    let min_leaf = params.min_samples_leaf;

    for _ in 0..params.max_depth {
        if active.is_empty() {
            break;
        }
        // slot of each node in `active`
        let mut slot = vec![usize::MAX; nodes.len()];
        for (s, &k) in active.iter().enumerate() {
            slot[k] = s;
        }
        let mut totals: Vec<NodeStats> = active.iter().map(|_| NodeStats { n: 0, sum: 0.0 }).collect();
        for i in 0..n {
            let s = slot[node_of[i]];
            if s != usize::MAX {
                totals[s].n += 1;
                totals[s].sum += grad[i];
            }
        }
        let mut best: Vec<Option<Candidate>> = active.iter().map(|_| None).collect();
        for (f, col) in cols.iter().enumerate() {
            let mut left: Vec<NodeStats> = active.iter().map(|_| NodeStats { n: 0, sum: 0.0 }).collect();
            let mut last: Vec<f64> = vec![f64::NAN; active.len()];
            for &i in &order[f] {
                let s = slot[node_of[i]];
                if s == usize::MAX {
                    continue;
                }
                let v = col[i];
                let (l, t) = (&left[s], &totals[s]);
                if l.n >= min_leaf && t.n - l.n >= min_leaf && v > last[s] {
                    let (nl, nr) = (l.n as f64, (t.n - l.n) as f64);
                    let sr = t.sum - l.sum;
                    let gain = l.sum * l.sum / nl + sr * sr / nr - t.sum * t.sum / t.n as f64;
                    if gain > min_gain && best[s].as_ref().is_none_or(|b| gain > b.gain) {
                        let mid = last[s] + (v - last[s]) / 2.0;
                        let threshold = if mid < v { mid } else { last[s] };
                        best[s] = Some(Candidate { gain, feature: f, threshold });
                    }
                }
                left[s].n += 1;
                left[s].sum += grad[i];
                last[s] = v;
            }
        }
        let mut next = Vec::new();
        let mut split_of = vec![None; nodes.len()];
        for (s, &k) in active.iter().enumerate() {
            if let Some(c) = &best[s] {
                let (l, r) = (nodes.len(), nodes.len() + 1);
                nodes.push(TreeNode::Leaf(0.0));
                nodes.push(TreeNode::Leaf(0.0));
                nodes[k] = TreeNode::Split { feature: c.feature, threshold: c.threshold, left: l, right: r };
                split_of[k] = Some((c.feature, c.threshold, l, r));
                next.push(l);
                next.push(r);
            }
        }
        for i in 0..n {
            if let Some(Some((f, t, l, r))) = split_of.get(node_of[i]) {
                node_of[i] = if cols[*f][i] <= *t { *l } else { *r };
            }
        }
        active = next;
    }
    (nodes, node_of)
}

/// Feature construction from sample windows.
///
/// For forecast step `h` the lag-`k` feature is the latest observed value
/// on the same phase of a `k`-day cycle: encoder index
/// `E - 1 + h - k * ceil(h / k)`, so no feature reaches past the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtFeatures {
    /// Target lags.
    pub lags: Vec<usize>,
    /// Days averaged for the recent target and past-covariate means.
    pub recent_window: usize,
    /// Past covariate names (in window order).
    pub past: Vec<String>,
    /// Future covariate names (in window order).
    pub future: Vec<String>,
}

impl GbtFeatures {
    /// Default lags 1, 7, 14, 28 and a 7-day recent window.
    pub fn new(past: Vec<String>, future: Vec<String>) -> Self {
        GbtFeatures { lags: vec![1, 7, 14, 28], recent_window: 7, past, future }
    }

    /// Column names.
    pub fn names(&self) -> Vec<String> {
        let mut v = vec!["step".to_string(), "group".to_string()];
        v.extend(self.lags.iter().map(|k| format!("lag_{k}")));
        v.push(format!("target_mean_{}", self.recent_window));
        v.extend(self.past.iter().map(|p| format!("{p}_mean_{}", self.recent_window)));
        v.extend(self.future.iter().cloned());
        v
    }

    fn check(&self, w: &SampleWindow) -> Result<()> {
        let e = w.encoder_len();
        let need = self.lags.iter().copied().max().unwrap_or(1).max(self.recent_window);
        if e < need {
            return Err(Error::InsufficientData(format!("GBT features need {need} encoder steps, window has {e}")));
        }
        if w.encoder_past.len() != self.past.len() || w.decoder_future.len() != self.future.len() {
            return Err(Error::Shape("window covariates do not match the GBT feature schema".into()));
        }
        Ok(())
    }

    /// Feature row for 1-based step `h`.
    pub fn row(&self, w: &SampleWindow, h: usize) -> Vec<f64> {
        let y = &w.encoder_target;
        let e = y.len();
        let mean_tail = |v: &[f64]| v[e - self.recent_window..].iter().sum::<f64>() / self.recent_window as f64;
        let mut r = vec![h as f64, w.group as f64];
        r.extend(self.lags.iter().map(|&k| y[e - 1 + h - k * h.div_ceil(k)]));
        r.push(mean_tail(y));
        r.extend(w.encoder_past.iter().map(|p| mean_tail(p)));
        r.extend(w.decoder_future.iter().map(|f| f[h - 1]));
        r
    }
}

/// Point model plus optional lower/upper quantile models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtForecaster {
    /// Feature schema.
    pub features: GbtFeatures,
    /// Forecast horizon.
    pub horizon: usize,
    /// Interval coverage when quantile models are present.
    pub coverage: Option<f64>,
    /// Point model (median or squared loss).
    pub point: GbtModel,
    /// Lower quantile model.
    pub lower: Option<GbtModel>,
    /// Upper quantile model.
    pub upper: Option<GbtModel>,
}

impl GbtForecaster {
    /// Forecast one window (its decoder target is ignored). Quantile
    /// predictions are sorted per step so the bounds never cross.
    pub fn predict(&self, w: &SampleWindow) -> Result<SeriesForecast> {
        self.features.check(w)?;
        if w.decoder_future.iter().any(|f| f.len() < self.horizon) {
            return Err(Error::Shape("window horizon shorter than the model's".into()));
        }
        let rows: Vec<Vec<f64>> = (1..=self.horizon).map(|h| self.features.row(w, h)).collect();
        let point: Vec<f64> = rows.iter().map(|r| self.point.predict(r)).collect();
        match (&self.lower, &self.upper) {
            (Some(lo), Some(hi)) => {
                let mut l = Vec::with_capacity(self.horizon);
                let mut p = Vec::with_capacity(self.horizon);
                let mut u = Vec::with_capacity(self.horizon);
                for (r, mid) in rows.iter().zip(&point) {
                    let mut v = [lo.predict(r), *mid, hi.predict(r)];
                    v.sort_by(f64::total_cmp);
                    l.push(v[0]);
                    p.push(v[1]);
                    u.push(v[2]);
                }
                Ok(SeriesForecast { point: p, lower: Some(l), upper: Some(u) })
            }
            _ => Ok(SeriesForecast::point_only(point)),
        }
    }
}

/// Build `(window, step)` rows from training windows and fit the
/// ensembles: with `coverage` set, pinball models at `(1 - c)/2`, 0.5 and
/// `(1 + c)/2`; otherwise a single squared-error model.
pub fn fit_forecast_gbt(
    windows: &[SampleWindow],
    coverage: Option<f64>,
    params: &GbtParams,
    horizon: usize,
) -> Result<GbtForecaster> {
    let first = windows.first().ok_or_else(|| Error::InsufficientData("no GBT training windows".into()))?;
    let features = GbtFeatures::new(
        first.encoder_past.iter().enumerate().map(|(i, _)| format!("past{i}")).collect(),
        first.decoder_future.iter().enumerate().map(|(i, _)| format!("future{i}")).collect(),
    );
    fit_with_features(windows, features, coverage, params, horizon)
}

/// As [`fit_forecast_gbt`] with explicit (named) features.
pub(crate) fn fit_with_features(
    windows: &[SampleWindow],
    features: GbtFeatures,
    coverage: Option<f64>,
    params: &GbtParams,
    horizon: usize,
) -> Result<GbtForecaster> {
    if horizon == 0 {
        return Err(Error::Config("GBT horizon must be positive".into()));
    }
    let mut x = Vec::with_capacity(windows.len() * horizon);
    let mut y = Vec::with_capacity(windows.len() * horizon);
    for w in windows {
        features.check(w)?;
        let target = w
            .decoder_target
            .as_ref()
            .ok_or_else(|| Error::InvalidData("GBT training window without targets".into()))?;
        if target.len() < horizon {
            return Err(Error::Shape("training window shorter than the horizon".into()));
        }
        for h in 1..=horizon {
            x.push(features.row(w, h));
            y.push(target[h - 1]);
        }
    }
    let (point, lower, upper) = match coverage {
        Some(c) => {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::Config(format!("coverage {c} outside (0, 1)")));
            }
            (
                fit_gbt(&x, &y, Objective::Pinball(0.5), params)?,
                Some(fit_gbt(&x, &y, Objective::Pinball((1.0 - c) / 2.0), params)?),
                Some(fit_gbt(&x, &y, Objective::Pinball((1.0 + c) / 2.0), params)?),
            )
        }
        None => (fit_gbt(&x, &y, Objective::Squared, params)?, None, None),
    };
    Ok(GbtForecaster { features, horizon, coverage, point, lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const DOW: [f64; 7] = [12.0, 10.5, 10.0, 9.8, 9.7, 8.5, 9.0];

    fn dow_data(n: usize, noise: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<Vec<f64>> = (0..n).map(|t| vec![(t % 7) as f64, (t % 3) as f64]).collect();
        let y = x.iter().map(|r| DOW[r[0] as usize] + noise * z.sample(&mut rng)).collect();
        (x, y)
    }

    #[test]
    fn constant_target() {
        let (x, _) = dow_data(60, 0.0, 0);
        let y = vec![3.25; 60];
        for obj in [Objective::Squared, Objective::Pinball(0.1), Objective::Pinball(0.5)] {
            let m = fit_gbt(&x, &y, obj, &GbtParams { n_trees: 20, ..GbtParams::default() }).unwrap();
            assert!(x.iter().all(|r| m.predict(r) == 3.25), "{obj:?}");
        }
    }

    #[test]
    fn learns_day_of_week() {
        let (x, y) = dow_data(140, 0.0, 0);
        for obj in [Objective::Squared, Objective::Pinball(0.5)] {
            let m = fit_gbt(&x, &y, obj, &GbtParams::default()).unwrap();
            let mape = x.iter().zip(&y).map(|(r, t)| ((m.predict(r) - t) / t).abs()).sum::<f64>() / y.len() as f64;
            assert!(mape < 0.01, "{obj:?}: {mape}");
        }
    }

    #[test]
    fn median_tracks_conditional_mean_under_symmetric_noise() {
        let (x, y) = dow_data(2100, 0.5, 1);
        let m = fit_gbt(&x, &y, Objective::Pinball(0.5), &GbtParams::default()).unwrap();
        for (d, truth) in DOW.iter().enumerate() {
            let p = m.predict(&[d as f64, 0.0]);
            assert!((p - truth).abs() < 0.5, "dow {d}: {p} vs {truth}");
        }
    }

    #[test]
    fn row_order_does_not_matter() {
        let (x, y) = dow_data(200, 0.3, 2);
        let params = GbtParams { n_trees: 30, ..GbtParams::default() };
        let a = fit_gbt(&x, &y, Objective::Pinball(0.9), &params).unwrap();
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
        let xs: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let b = fit_gbt(&xs, &ys, Objective::Pinball(0.9), &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quantile_models_bracket_the_median() {
        let (x, y) = dow_data(700, 1.0, 3);
        let p = GbtParams { n_trees: 100, ..GbtParams::default() };
        let lo = fit_gbt(&x, &y, Objective::Pinball(0.05), &p).unwrap();
        let hi = fit_gbt(&x, &y, Objective::Pinball(0.95), &p).unwrap();
        let covered = x.iter().zip(&y).filter(|(r, t)| lo.predict(r) <= **t && **t <= hi.predict(r)).count();
        let frac = covered as f64 / y.len() as f64;
        assert!(frac > 0.8 && frac < 0.97, "{frac}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_gbt(&[], &[], Objective::Squared, &GbtParams::default()).is_err());
        assert!(fit_gbt(&[vec![f64::NAN]], &[1.0], Objective::Squared, &GbtParams::default()).is_err());
        assert!(fit_gbt(&[vec![1.0]], &[1.0], Objective::Pinball(1.5), &GbtParams::default()).is_err());
    }

    #[test]
    fn lag_features_stay_before_the_origin() {
        let w = SampleWindow {
            group: 0,
            group_id: "a".into(),
            encoder_start: chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            decoder_start: chrono::NaiveDate::from_ymd_opt(2020, 2, 12).unwrap(),
            encoder_target: (0..42).map(f64::from).collect(),
            encoder_past: vec![],
            encoder_future: vec![],
            decoder_future: vec![],
            decoder_target: None,
            statics: vec![],
        };
        let f = GbtFeatures::new(vec![], vec![]);
        // step 1: lags 1,7,14,28 -> indices 41, 35, 28, 14
        assert_eq!(f.row(&w, 1)[2..6], [41.0, 35.0, 28.0, 14.0]);
        // step 9: lag 1 -> 41, lag 7 -> 41 + 9 - 14 = 36, lag 14 -> 36, lag 28 -> 22
        assert_eq!(f.row(&w, 9)[2..6], [41.0, 36.0, 36.0, 22.0]);
        for h in 1..=28 {
            assert!(f.row(&w, h)[2..6].iter().all(|v| *v <= 41.0));
        }
    }
}
