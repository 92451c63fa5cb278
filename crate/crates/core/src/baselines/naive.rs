use crate::{Error, Result};

/// Repeat the last `k` observations: step `h` (1-based) takes
/// `history[len - k + (h - 1) % k]`.
pub fn naive_forecast(history: &[f64], k: usize, horizon: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Config("naive period k must be positive".into()));
    }
    if history.len() < k {
        return Err(Error::InsufficientData(format!(
            "naive-{k} needs at least {k} observations, got {}",
            history.len()
        )));
    }
    let tail = &history[history.len() - k..];
    Ok((0..horizon).map(|h| tail[h % k]).collect())
}
