use serde::{Deserialize, Serialize};

use super::SeriesForecast;
use crate::optim::nelder_mead;
use crate::{Error, Result};

/// Additive Holt-Winters in error-correction form:
///
/// ```text
/// e_t = y_t - (l + b + s_{t-m})
/// l  <- l + b + alpha e_t
/// b  <- b + beta e_t
/// s_t = s_{t-m} + gamma e_t
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsModel {
    /// Level smoothing.
    pub alpha: f64,
    /// Trend smoothing (error-correction scale, `0 <= beta <= alpha`).
    pub beta: f64,
    /// Seasonal smoothing (`0 <= gamma <= 1 - alpha`).
    pub gamma: f64,
    /// Season length.
    pub period: usize,
    /// Final level.
    pub level: f64,
    /// Final trend.
    pub trend: f64,
    /// Seasonal states indexed by `t mod period`.
    pub season: Vec<f64>,
    /// Observations the states were filtered over.
    pub n_obs: usize,
    /// One-step residual variance.
    pub sigma2: f64,
}

struct Filtered {
    sse: f64,
    level: f64,
    trend: f64,
    season: Vec<f64>,
}

fn initial_states(y: &[f64], m: usize) -> (f64, f64, Vec<f64>) {
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (m1, m2) = (mean(&y[..m]), mean(&y[m..2 * m]));
    let b0 = (m2 - m1) / m as f64;
    let l0 = m1 - b0 * (m as f64 + 1.0) / 2.0;
    let mut s: Vec<f64> = (0..m).map(|i| y[i] - (l0 + (i + 1) as f64 * b0)).collect();
    let sm = mean(&s);
    s.iter_mut().for_each(|v| *v -= sm);
    (l0, b0, s)
}

fn filter(y: &[f64], m: usize, alpha: f64, beta: f64, gamma: f64) -> Filtered {
    let (mut l, mut b, mut season) = initial_states(y, m);
    let mut sse = 0.0;
    for (t, &yt) in y.iter().enumerate() {
        let s = season[t % m];
        let e = yt - (l + b + s);
        sse += e * e;
        l = l + b + alpha * e;
        b += beta * e;
        season[t % m] = s + gamma * e;
    }
    Filtered { sse, level: l, trend: b, season }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn smoothing(x: &[f64]) -> (f64, f64, f64) {
    let alpha = logistic(x[0]);
    (alpha, alpha * logistic(x[1]), (1.0 - alpha) * logistic(x[2]))
}

/// Fit smoothing parameters by minimizing the one-step squared error.
/// Needs at least two full seasons.
pub fn fit_ets(history: &[f64], period: usize) -> Result<EtsModel> {
    if period == 0 {
        return Err(Error::Config("season period must be positive".into()));
    }
    if history.len() < 2 * period {
        return Err(Error::InsufficientData(format!(
            "Holt-Winters needs two full seasons ({} points), got {}",
            2 * period,
            history.len()
        )));
    }
    if history.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite value in ETS history".into()));
    }
    let objective = |x: &[f64]| {
        let (a, b, g) = smoothing(x);
        filter(history, period, a, b, g).sse
    };
    let starts = [[-1.0, -2.0, -2.0], [0.5, -1.0, -1.0], [-2.5, -3.0, -3.0]];
    let best = starts
        .iter()
        .map(|x0| nelder_mead(objective, x0, 1.0, 1e-10, 3000))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("starts");
    if !best.converged {
        log::debug!("ETS optimizer stopped at its evaluation limit");
    }
    if !best.value.is_finite() {
        return Err(Error::Numerical("Holt-Winters optimization failed".into()));
    }
    let (alpha, beta, gamma) = smoothing(&best.x);
    let f = filter(history, period, alpha, beta, gamma);
    Ok(EtsModel {
        alpha,
        beta,
        gamma,
        period,
        level: f.level,
        trend: f.trend,
        season: f.season,
        n_obs: history.len(),
        sigma2: f.sse / history.len() as f64,
    })
}

impl EtsModel {
    /// Point forecasts for steps `1..=horizon`.
    pub fn point_forecast(&self, horizon: usize) -> Vec<f64> {
        let m = self.period;
        (1..=horizon)
            .map(|h| self.level + h as f64 * self.trend + self.season[(self.n_obs - 1 + h) % m])
            .collect()
    }

    /// Forecast standard deviation per step:
    /// `sigma^2 (1 + sum_{j<h} (alpha + beta j + gamma [j mod m = 0])^2)`.
    pub fn forecast_sd(&self, horizon: usize) -> Vec<f64> {
        let mut acc = 1.0;
        (1..=horizon)
            .map(|h| {
                if h > 1 {
                    let j = h - 1;
                    let seasonal = if j % self.period == 0 { self.gamma } else { 0.0 };
                    acc += (self.alpha + self.beta * j as f64 + seasonal).powi(2);
                }
                (self.sigma2 * acc).sqrt()
            })
            .collect()
    }

    /// Point forecast with a Gaussian interval at `coverage`.
    pub fn forecast(&self, horizon: usize, coverage: f64) -> Result<SeriesForecast> {
        SeriesForecast::gaussian(self.point_forecast(horizon), &self.forecast_sd(horizon), coverage)
    }
}

/// Fit and forecast in one call.
pub fn fit_forecast_ets(history: &[f64], period: usize, horizon: usize, coverage: f64) -> Result<SeriesForecast> {
    fit_ets(history, period)?.forecast(horizon, coverage)
}
