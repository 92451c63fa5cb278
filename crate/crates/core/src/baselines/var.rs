use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// VAR(p) on `d`-times differenced, jointly modelled series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    /// Lag order.
    pub p: usize,
    /// Differencing order.
    pub d: usize,
    /// Intercept per series.
    pub intercept: Vec<f64>,
    /// `coefs[l][i][j]`: effect of series `j` at lag `l + 1` on series `i`.
    pub coefs: Vec<Vec<Vec<f64>>>,
    /// Residual covariance (maximum likelihood).
    pub sigma: Vec<Vec<f64>>,
    /// Rows used in the regression.
    pub n_eff: usize,
    /// `ln det(sigma) + 2 k / n_eff` with `k` regression coefficients.
    pub aic: f64,
}

fn differenced(histories: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    histories
        .iter()
        .map(|h| {
            let mut w = h.clone();
            for _ in 0..d {
                w = w.windows(2).map(|p| p[1] - p[0]).collect();
            }
            w
        })
        .collect()
}

fn check_aligned(histories: &[Vec<f64>]) -> Result<usize> {
    let n = histories.first().map(Vec::len).ok_or_else(|| Error::InsufficientData("VAR needs at least one series".into()))?;
    if histories.iter().any(|h| h.len() != n) {
        return Err(Error::Shape("VAR series must be aligned (equal lengths)".into()));
    }
    if histories.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite value in VAR history".into()));
    }
    Ok(n)
}

/// Least-squares VAR(p) fit on `d`-differenced data.
pub fn fit_var(histories: &[Vec<f64>], p: usize, d: usize) -> Result<VarModel> {
    let n = check_aligned(histories)?;
    if p == 0 {
        return Err(Error::Config("VAR lag order must be positive".into()));
    }
    let g = histories.len();
    let w = differenced(histories, d);
    let nw = n.saturating_sub(d);
    let k = 1 + g * p;
    if nw <= p || nw - p <= k {
        return Err(Error::InsufficientData(format!(
            "VAR({p}) with {g} series needs more than {} differenced observations, got {nw}",
            k + p
        )));
    }
    let rows = nw - p;
    let x = DMatrix::from_fn(rows, k, |r, c| {
        let t = r + p;
        if c == 0 {
            1.0
        } else {
            let (lag, j) = ((c - 1) / g + 1, (c - 1) % g);
            w[j][t - lag]
        }
    });
    let y = DMatrix::from_fn(rows, g, |r, i| w[i][r + p]);
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if r.diagonal().iter().any(|v| v.abs() <= 1e-10 * diag_max.max(1e-300)) {
        return Err(Error::Numerical(format!("singular VAR({p}) regression matrix")));
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical(format!("singular VAR({p}) regression matrix")))?;
    let resid = &y - &x * &beta;
    let sigma = (resid.transpose() * &resid) / rows as f64;
    let det = sigma.determinant();
    let aic = if det > 0.0 { det.ln() + 2.0 * (k * g) as f64 / rows as f64 } else { f64::NEG_INFINITY };
    Ok(VarModel {
        p,
        d,
        intercept: (0..g).map(|i| beta[(0, i)]).collect(),
        coefs: (0..p)
            .map(|l| (0..g).map(|i| (0..g).map(|j| beta[(1 + l * g + j, i)]).collect()).collect())
            .collect(),
        sigma: (0..g).map(|i| (0..g).map(|j| sigma[(i, j)]).collect()).collect(),
        n_eff: rows,
        aic,
    })
}

/// Fit every `(p, d)` in the grid and keep the lowest AIC.
pub fn select_var(histories: &[Vec<f64>], lags: &[usize], diffs: &[usize]) -> Result<VarModel> {
    let mut best: Option<VarModel> = None;
    let mut last_err = None;
    for &d in diffs {
        for &p in lags {
            match fit_var(histories, p, d) {
                Ok(m) if best.as_ref().is_none_or(|b| m.aic < b.aic) => best = Some(m),
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Config("empty VAR order grid".into())))
}

impl VarModel {
    /// Iterated point forecasts, integrated back to levels. Returns one
    /// forecast vector per series.
    pub fn forecast(&self, histories: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
        let n = check_aligned(histories)?;
        let g = self.intercept.len();
        if histories.len() != g {
            return Err(Error::Shape(format!("model has {g} series, got {}", histories.len())));
        }
        if n < self.d + self.p {
            return Err(Error::InsufficientData("history shorter than the VAR lags".into()));
        }
        let mut w = differenced(histories, self.d);
        for _ in 0..horizon {
            let t = w[0].len();
            let next: Vec<f64> = (0..g)
                .map(|i| {
                    let mut v = self.intercept[i];
                    for l in 0..self.p {
                        for (j, wj) in w.iter().enumerate() {
                            v += self.coefs[l][i][j] * wj[t - l - 1];
                        }
                    }
                    v
                })
                .collect();
            for (wi, v) in w.iter_mut().zip(next) {
                wi.push(v);
            }
        }
        // undo differencing level by level
        let mut out: Vec<Vec<f64>> = w.iter().map(|wi| wi[wi.len() - horizon..].to_vec()).collect();
        for level in (0..self.d).rev() {
            let base = differenced(histories, level);
            for (o, b) in out.iter_mut().zip(&base) {
                let mut last = *b.last().expect("nonempty");
                for v in o.iter_mut() {
                    last += *v;
                    *v = last;
                }
            }
        }
        Ok(out)
    }
}

/// Fit a VAR(p) on `d`-differenced data and forecast.
pub fn fit_forecast_var(histories: &[Vec<f64>], p: usize, d: usize, horizon: usize) -> Result<Vec<Vec<f64>>> {
    fit_var(histories, p, d)?.forecast(histories, horizon)
}
