use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SeriesForecast;
use crate::optim::nelder_mead;
use crate::{Error, Result};

/// `(p,d,q) x (P,D,Q)_m` orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SarimaOrder {
    /// AR order.
    pub p: usize,
    /// Differencing order.
    pub d: usize,
    /// MA order.
    pub q: usize,
    /// Seasonal AR order.
    pub P: usize,
    /// Seasonal differencing order.
    pub D: usize,
    /// Seasonal MA order.
    pub Q: usize,
    /// Season length.
    pub m: usize,
}

impl SarimaOrder {
    /// Non-seasonal ARIMA(p, d, q).
    pub fn arima(p: usize, d: usize, q: usize) -> Self {
        SarimaOrder { p, d, q, P: 0, D: 0, Q: 0, m: 7 }
    }

    fn n_coefs(&self) -> usize {
        self.p + self.q + self.P + self.Q
    }

    fn has_mean(&self) -> bool {
        self.d + self.D == 0
    }

    /// Observations lost to differencing.
    fn lost(&self) -> usize {
        self.d + self.D * self.m
    }

    /// Highest lag of the expanded AR polynomial of the differenced series.
    fn ar_span(&self) -> usize {
        self.p + self.P * self.m
    }
}

/// Default candidate grid: p, q in 0..=2, d in 0..=1, P, Q, D in 0..=1,
/// season 7.
pub fn default_sarima_grid() -> Vec<SarimaOrder> {
    let mut g = Vec::new();
    for d in 0..=1 {
        for big_d in 0..=1 {
            for p in 0..=2 {
                for q in 0..=2 {
                    for big_p in 0..=1 {
                        for big_q in 0..=1 {
                            g.push(SarimaOrder { p, d, q, P: big_p, D: big_d, Q: big_q, m: 7 });
                        }
                    }
                }
            }
        }
    }
    g
}

/// Fitted seasonal ARIMA coefficients.
///
/// Sign conventions: `phi(B) = 1 - sum phi_i B^i`, `theta(B) = 1 + sum
/// theta_j B^j`, likewise for the seasonal polynomials in `B^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaModel {
    /// Orders.
    pub order: SarimaOrder,
    /// AR coefficients.
    pub ar: Vec<f64>,
    /// MA coefficients.
    pub ma: Vec<f64>,
    /// Seasonal AR coefficients.
    pub sar: Vec<f64>,
    /// Seasonal MA coefficients.
    pub sma: Vec<f64>,
    /// Mean of the series (only without differencing).
    pub mean: f64,
    /// Innovation variance.
    pub sigma2: f64,
    /// Conditional sum of squares at the optimum.
    pub css: f64,
    /// Residuals contributing to the sum of squares.
    pub n_eff: usize,
    /// `n_eff ln(sigma2) + 2 k`.
    pub aic: f64,
}

/// Product of two polynomials in coefficient form (index = power).
fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `1 - sum c_i B^(i*step)` or `1 + ...` as a coefficient vector.
fn lag_poly(coefs: &[f64], step: usize, sign: f64) -> Vec<f64> {
    let mut p = vec![0.0; coefs.len() * step + 1];
    p[0] = 1.0;
    for (i, c) in coefs.iter().enumerate() {
        p[(i + 1) * step] = sign * c;
    }
    p
}

fn difference(y: &[f64], lag: usize) -> Vec<f64> {
    (lag..y.len()).map(|t| y[t] - y[t - lag]).collect()
}

struct Coefs<'a> {
    ar: &'a [f64],
    ma: &'a [f64],
    sar: &'a [f64],
    sma: &'a [f64],
}

fn split<'a>(order: &SarimaOrder, x: &'a [f64]) -> Coefs<'a> {
    let (ar, rest) = x.split_at(order.p);
    let (ma, rest) = rest.split_at(order.q);
    let (sar, rest) = rest.split_at(order.P);
    Coefs { ar, ma, sar, sma: &rest[..order.Q] }
}

/// Expanded AR lags `a_i` (z_t = sum a_i z_{t-i} + ...) and MA lags `b_j`.
fn expanded(order: &SarimaOrder, c: &Coefs) -> (Vec<f64>, Vec<f64>) {
    let ar = poly_mul(&lag_poly(c.ar, 1, -1.0), &lag_poly(c.sar, order.m, -1.0));
    let ma = poly_mul(&lag_poly(c.ma, 1, 1.0), &lag_poly(c.sma, order.m, 1.0));
    (ar[1..].iter().map(|v| -v).collect(), ma[1..].to_vec())
}

/// Conditional residuals of a demeaned, differenced series; the first
/// `span` residuals are conditioned to zero.
fn css_residuals(z: &[f64], a: &[f64], b: &[f64], span: usize) -> Vec<f64> {
    let mut e = vec![0.0; z.len()];
    for t in span..z.len() {
        let mut pred = 0.0;
        for (i, ai) in a.iter().enumerate() {
            if *ai != 0.0 {
                pred += ai * z[t - i - 1];
            }
        }
        for (j, bj) in b.iter().enumerate() {
            if *bj != 0.0 && t > j {
                pred += bj * e[t - j - 1];
            }
        }
        e[t] = z[t] - pred;
    }
    e
}

/// True when all roots of `1 - sum c_i x^i` lie outside the unit circle.
fn roots_outside_unit_circle(lags: &[f64]) -> bool {
    let n = lags.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
    if n == 0 {
        return true;
    }
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        comp[(0, i)] = lags[i];
        if i + 1 < n {
            comp[(i + 1, i)] = 1.0;
        }
    }
    comp.complex_eigenvalues().iter().all(|z| z.norm() < 1.0)
}

/// Fit one order by conditional sum of squares.
pub fn fit_sarima(history: &[f64], order: SarimaOrder) -> Result<SarimaModel> {
    if order.m == 0 {
        return Err(Error::Config("season length must be positive".into()));
    }
    if history.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite value in SARIMA history".into()));
    }
    let mut w = history.to_vec();
    for _ in 0..order.d {
        w = difference(&w, 1);
    }
    for _ in 0..order.D {
        w = difference(&w, order.m);
    }
    let span = order.ar_span();
    let k = order.n_coefs() + usize::from(order.has_mean());
    if w.len() < span + k + 2 {
        return Err(Error::InsufficientData(format!(
            "SARIMA{order:?} needs more than {} observations, got {}",
            span + k + 2 + order.lost(),
            history.len()
        )));
    }
    let w_mean = w.iter().sum::<f64>() / w.len() as f64;
    let scale = {
        let v = w.iter().map(|x| (x - w_mean).powi(2)).sum::<f64>() / w.len() as f64;
        if v > 0.0 { v.sqrt() } else { 1.0 }
    };
    let nc = order.n_coefs();
    let objective = |x: &[f64]| -> f64 {
        let c = split(&order, &x[..nc]);
        let (a, b) = expanded(&order, &c);
        if b.iter().any(|v| v.abs() > 10.0) || a.iter().any(|v| v.abs() > 10.0) {
            return f64::INFINITY;
        }
        let mu = if order.has_mean() { x[nc] * scale } else { 0.0 };
        let z: Vec<f64> = w.iter().map(|v| v - mu).collect();
        let e = css_residuals(&z, &a, &b, span);
        let s: f64 = e[span..].iter().map(|v| v * v).sum();
        if s.is_finite() { s } else { f64::INFINITY }
    };
    let mut x0 = vec![0.0; k];
    if order.has_mean() {
        x0[nc] = w_mean / scale;
    }
    let best = if k == 0 {
        crate::optim::Minimum { value: objective(&x0), x: x0, converged: true }
    } else {
        let first = nelder_mead(objective, &x0, 0.1, 1e-12, 400 * (k + 1));
        // restart from the optimum to escape early simplex collapse
        nelder_mead(objective, &first.x, 0.05, 1e-12, 400 * (k + 1))
    };
    if !best.converged {
        log::debug!("SARIMA{order:?} optimizer stopped at its evaluation limit");
    }
    if !best.value.is_finite() {
        return Err(Error::Numerical(format!("SARIMA{order:?} fit did not produce a finite sum of squares")));
    }
    let c = split(&order, &best.x[..nc]);
    let n_eff = w.len() - span;
    let sigma2 = (best.value / n_eff as f64).max(0.0);
    let model = SarimaModel {
        order,
        ar: c.ar.to_vec(),
        ma: c.ma.to_vec(),
        sar: c.sar.to_vec(),
        sma: c.sma.to_vec(),
        mean: if order.has_mean() { best.x[nc] * scale } else { 0.0 },
        sigma2,
        css: best.value,
        n_eff,
        aic: n_eff as f64 * sigma2.max(1e-300).ln() + 2.0 * (k + 1) as f64,
    };
    model.check_roots();
    Ok(model)
}

/// Fit every candidate order and keep the lowest AIC.
pub fn select_sarima(history: &[f64], grid: &[SarimaOrder]) -> Result<SarimaModel> {
    let mut best: Option<SarimaModel> = None;
    let mut last_err = None;
    for order in grid {
        match fit_sarima(history, *order) {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.aic < b.aic) {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Config("empty SARIMA order grid".into()))
    })
}

/// Select by AIC over `grid` and forecast.
pub fn fit_forecast_sarima(history: &[f64], grid: &[SarimaOrder], horizon: usize, coverage: f64) -> Result<SeriesForecast> {
    select_sarima(history, grid)?.forecast(history, horizon, coverage)
}

impl SarimaModel {
    /// Model with given coefficients (no fitting).
    pub fn with_coefficients(order: SarimaOrder, ar: Vec<f64>, ma: Vec<f64>, sar: Vec<f64>, sma: Vec<f64>, mean: f64, sigma2: f64) -> Result<Self> {
        if ar.len() != order.p || ma.len() != order.q || sar.len() != order.P || sma.len() != order.Q {
            return Err(Error::Shape("coefficient counts do not match the orders".into()));
        }
        Ok(SarimaModel { order, ar, ma, sar, sma, mean, sigma2, css: f64::NAN, n_eff: 0, aic: f64::NAN })
    }

    fn coefs(&self) -> Coefs<'_> {
        Coefs { ar: &self.ar, ma: &self.ma, sar: &self.sar, sma: &self.sma }
    }

    /// Warns when the AR or MA polynomial has a root on or inside the
    /// unit circle; returns whether both are fine.
    pub fn check_roots(&self) -> bool {
        let (a, b) = expanded(&self.order, &self.coefs());
        let stationary = roots_outside_unit_circle(&a);
        let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
        let invertible = roots_outside_unit_circle(&neg_b);
        if !stationary {
            log::warn!("SARIMA{:?}: AR polynomial has roots inside the unit circle", self.order);
        }
        if !invertible {
            log::warn!("SARIMA{:?}: MA polynomial has roots inside the unit circle", self.order);
        }
        stationary && invertible
    }

    /// Re-estimate the coefficients of the same orders on new data.
    pub fn refit(&self, history: &[f64]) -> Result<SarimaModel> {
        fit_sarima(history, self.order)
    }

    /// Forecast `horizon` steps past the end of `history` with the fitted
    /// recursion, and a Gaussian interval from the psi weights of the
    /// integrated model.
    pub fn forecast(&self, history: &[f64], horizon: usize, coverage: f64) -> Result<SeriesForecast> {
        let o = self.order;
        let (a, b) = expanded(&o, &self.coefs());
        let lost = o.lost();
        if history.len() <= lost + a.len() {
            return Err(Error::InsufficientData("history too short for the SARIMA recursion".into()));
        }
        // residuals on the differenced scale line up with history[lost..]
        let mut w = history.to_vec();
        for _ in 0..o.d {
            w = difference(&w, 1);
        }
        for _ in 0..o.D {
            w = difference(&w, o.m);
        }
        let z: Vec<f64> = w.iter().map(|v| v - self.mean).collect();
        let e = css_residuals(&z, &a, &b, o.ar_span());

        // integrated AR polynomial: phi(B) Phi(B^m) (1-B)^d (1-B^m)^D
        let mut full = poly_mul(&lag_poly(&self.ar, 1, -1.0), &lag_poly(&self.sar, o.m, -1.0));
        for _ in 0..o.d {
            full = poly_mul(&full, &[1.0, -1.0]);
        }
        for _ in 0..o.D {
            let mut s = vec![0.0; o.m + 1];
            s[0] = 1.0;
            s[o.m] = -1.0;
            full = poly_mul(&full, &s);
        }
        let alpha: Vec<f64> = full[1..].iter().map(|v| -v).collect();

        let n = history.len();
        let mut y: Vec<f64> = history.iter().map(|v| v - self.mean).collect();
        let mut err: Vec<f64> = vec![0.0; lost];
        err.extend_from_slice(&e);
        for h in 0..horizon {
            let t = n + h;
            let mut v = 0.0;
            for (i, ai) in alpha.iter().enumerate() {
                v += ai * y[t - i - 1];
            }
            for (j, bj) in b.iter().enumerate() {
                let idx = t - j - 1;
                if idx < n {
                    v += bj * err[idx];
                }
            }
            y.push(v);
        }
        let point: Vec<f64> = y[n..].iter().map(|v| v + self.mean).collect();

        let mut psi = vec![1.0];
        for j in 1..horizon {
            let mut v = b.get(j - 1).copied().unwrap_or(0.0);
            for i in 1..=j.min(alpha.len()) {
                v += alpha[i - 1] * psi[j - i];
            }
            psi.push(v);
        }
        let mut acc = 0.0;
        let sd: Vec<f64> = psi
            .iter()
            .map(|p| {
                acc += p * p;
                (self.sigma2 * acc).sqrt()
            })
            .collect();
        SeriesForecast::gaussian(point, &sd, coverage)
    }
}
