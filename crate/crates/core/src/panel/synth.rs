use std::collections::BTreeSet;
use std::f64::consts::PI;

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{derive_calendar_features, Covariate, GroupSeries, PanelDataset};
use crate::{Error, Result};

/// Respiratory-epidemic shock process shared by all groups.
///
/// Onsets arrive as a Bernoulli process; each shock is a half-sine bump of
/// `duration_days` scaling the target by `1 + bump`. The respiratory-share
/// covariate sees the same bump `lead_days` earlier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpidemicShocks {
    /// Expected onsets per year.
    pub rate_per_year: f64,
    /// Mean peak relative increase of the target.
    pub amplitude: f64,
    /// Length of one shock.
    pub duration_days: usize,
    /// Days by which the respiratory share leads the target.
    pub lead_days: usize,
}

impl Default for EpidemicShocks {
    fn default() -> Self {
        EpidemicShocks {
            rate_per_year: 3.0,
            amplitude: 0.25,
            duration_days: 35,
            lead_days: 10,
        }
    }
}

/// Parameters of the synthetic panel generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// First date.
    pub start: NaiveDate,
    /// Number of consecutive days.
    pub days: usize,
    /// Group identifiers; one per base level.
    pub group_ids: Vec<String>,
    /// Mean daily level of each group.
    pub base_levels: Vec<f64>,
    /// Day-of-week multipliers, Monday first.
    pub weekly_profile: [f64; 7],
    /// Relative amplitude of the annual cycle (winter peak).
    pub annual_amplitude: f64,
    /// Multiplier applied on holidays.
    pub holiday_dip: f64,
    /// Fixed-date holidays as (month, day).
    pub holidays: Vec<(u32, u32)>,
    /// Epidemic shock process.
    pub shocks: EpidemicShocks,
    /// Standard deviation of the lognormal target noise.
    pub noise_scale: f64,
    /// Observation noise of the past covariates (in units of their scale).
    pub covariate_noise: f64,
    /// Seed of the single generator all randomness flows from.
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            start: NaiveDate::from_ymd_opt(2019, 8, 1).expect("valid date"),
            days: 1096,
            group_ids: ["Norte", "Centro", "LVT", "Alentejo", "Algarve"].map(String::from).to_vec(),
            base_levels: vec![1800.0, 1100.0, 2400.0, 450.0, 520.0],
            weekly_profile: [1.25, 1.05, 1.0, 0.98, 0.97, 0.85, 0.9],
            annual_amplitude: 0.12,
            holiday_dip: 0.7,
            holidays: vec![
                (1, 1),
                (4, 25),
                (5, 1),
                (6, 10),
                (8, 15),
                (10, 5),
                (11, 1),
                (12, 1),
                (12, 8),
                (12, 25),
            ],
            shocks: EpidemicShocks::default(),
            noise_scale: 0.05,
            covariate_noise: 1.0,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    /// Check multipliers and sizes.
    pub fn validate(&self) -> Result<()> {
        if self.group_ids.len() != self.base_levels.len() || self.group_ids.is_empty() {
            return Err(Error::Config("synthetic: need one base level per group id".into()));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !self.base_levels.iter().copied().all(positive) {
            return Err(Error::Config("synthetic: base levels must be > 0".into()));
        }
        if !self.weekly_profile.iter().copied().all(positive) {
            return Err(Error::Config("synthetic: weekly multipliers must be > 0".into()));
        }
        if !positive(self.holiday_dip) {
            return Err(Error::Config("synthetic: holiday dip factor must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.annual_amplitude) {
            return Err(Error::Config("synthetic: annual amplitude must be in [0, 1)".into()));
        }
        if self.noise_scale < 0.0 || self.covariate_noise < 0.0 || self.shocks.amplitude < 0.0 || self.shocks.rate_per_year < 0.0 {
            return Err(Error::Config("synthetic: noise and shock parameters must be >= 0".into()));
        }
        if self.days == 0 {
            return Err(Error::Config("synthetic: days must be > 0".into()));
        }
        Ok(())
    }

    /// Dates covered by the generated panel.
    pub fn dates(&self) -> Vec<NaiveDate> {
        (0..self.days as u64).map(|i| self.start + Days::new(i)).collect()
    }

    /// Holiday dates within the generated span.
    pub fn holiday_dates(&self) -> BTreeSet<NaiveDate> {
        self.dates()
            .into_iter()
            .filter(|d| self.holidays.contains(&(d.month(), d.day())))
            .collect()
    }
}

/// Generate a deterministic synthetic panel.
///
/// Per group and date:
/// `target = base * weekly[dow] * (1 + annual) * holiday * (1 + shock) * exp(noise)`.
/// Past covariates: `resp_share` (leads the shock), `waiting_time`
/// (contemporaneous with the target) and `noise` (independent of everything).
/// Future covariates: the calendar features.
pub fn generate_synthetic_panel(cfg: &SyntheticConfig) -> Result<PanelDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dates = cfg.dates();
    let n = dates.len();
    let holidays = cfg.holiday_dates();
    let calendar = derive_calendar_features(&dates, &holidays);

    // shock bump indexed from -duration to n + lead so the leading share is
    // defined over the whole span
    let s = &cfg.shocks;
    let pad = s.duration_days;
    let total = n + s.lead_days + pad;
    let mut bump = vec![0.0; total];
    let p = s.rate_per_year / 365.0;
    for t0 in 0..total {
        let onset: f64 = rng.random();
        let amp_jitter: f64 = rng.random();
        if onset < p && s.duration_days > 0 {
            let a = s.amplitude * (0.5 + amp_jitter);
            for k in 0..s.duration_days {
                if let Some(b) = bump.get_mut(t0 + k) {
                    *b += a * (PI * (k as f64 + 0.5) / s.duration_days as f64).sin();
                }
            }
        }
    }
    let shock = |t: usize| bump[t + pad];

    let mut groups = Vec::with_capacity(cfg.group_ids.len());
    let mean_weekly = cfg.weekly_profile.iter().sum::<f64>() / 7.0;
    for (gid, &base) in cfg.group_ids.iter().zip(&cfg.base_levels) {
        let mut target = Vec::with_capacity(n);
        let mut resp = Vec::with_capacity(n);
        let mut wait = Vec::with_capacity(n);
        let mut noise = Vec::with_capacity(n);
        for (t, d) in dates.iter().enumerate() {
            let dow = d.weekday().num_days_from_monday() as usize;
            let doy = d.ordinal0() as f64;
            let annual = cfg.annual_amplitude * (2.0 * PI * (doy - 14.0) / 365.25).cos();
            let hol = if holidays.contains(d) { cfg.holiday_dip } else { 1.0 };
            let z: f64 = rng.sample(StandardNormal);
            let y = base * cfg.weekly_profile[dow] * (1.0 + annual) * hol * (1.0 + shock(t)) * (cfg.noise_scale * z).exp();
            target.push(y);

            let zr: f64 = rng.sample(StandardNormal);
            resp.push(0.10 + 0.4 * shock(t + s.lead_days) + 0.01 * cfg.covariate_noise * zr);
            let zw: f64 = rng.sample(StandardNormal);
            wait.push(45.0 * y / (base * mean_weekly) + 5.0 * cfg.covariate_noise * zw);
            let zn: f64 = rng.sample(StandardNormal);
            noise.push(zn);
        }
        groups.push(GroupSeries {
            group_id: gid.clone(),
            dates: dates.clone(),
            target,
            past: vec![
                Covariate::continuous("resp_share", resp),
                Covariate::continuous("waiting_time", wait),
                Covariate::continuous("noise", noise),
            ],
            future: calendar.clone(),
            statics: vec![],
        });
    }
    PanelDataset::new(groups, vec![])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(noise: f64) -> SyntheticConfig {
        SyntheticConfig {
            days: 60,
            annual_amplitude: 0.0,
            holiday_dip: 1.0,
            shocks: EpidemicShocks { rate_per_year: 0.0, ..Default::default() },
            noise_scale: noise,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = SyntheticConfig { days: 200, ..Default::default() };
        assert_eq!(generate_synthetic_panel(&cfg).unwrap(), generate_synthetic_panel(&cfg).unwrap());
        let other = SyntheticConfig { seed: 7, ..cfg.clone() };
        assert_ne!(generate_synthetic_panel(&cfg).unwrap(), generate_synthetic_panel(&other).unwrap());
    }

    #[test]
    fn noiseless_flat_is_weekly_periodic() {
        let ds = generate_synthetic_panel(&flat(0.0)).unwrap();
        for g in ds.groups() {
            for t in 7..g.len() {
                assert_eq!(g.target[t], g.target[t - 7]);
            }
        }
    }

    #[test]
    fn holiday_dip_halves_target() {
        let base = SyntheticConfig { holiday_dip: 1.0, ..flat(0.0) };
        let base = SyntheticConfig { days: 400, ..base };
        let dipped = SyntheticConfig { holiday_dip: 0.5, ..base.clone() };
        let a = generate_synthetic_panel(&base).unwrap();
        let b = generate_synthetic_panel(&dipped).unwrap();
        let hol = base.holiday_dates();
        assert!(!hol.is_empty());
        for (ga, gb) in a.groups().iter().zip(b.groups()) {
            for (i, d) in ga.dates.iter().enumerate() {
                if hol.contains(d) {
                    assert_eq!(gb.target[i], 0.5 * ga.target[i]);
                } else {
                    assert_eq!(gb.target[i], ga.target[i]);
                }
            }
        }
    }

    #[test]
    fn monday_peak() {
        let ds = generate_synthetic_panel(&flat(0.0)).unwrap();
        let g = &ds.groups()[0];
        let dow = &g.future[0].values;
        let monday = (0..7).find(|&i| dow[i] == 0.0).unwrap();
        let max = g.target[..7].iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(g.target[monday], max);
    }

    #[test]
    fn invalid_multipliers() {
        let mut cfg = SyntheticConfig::default();
        cfg.weekly_profile[3] = 0.0;
        assert!(generate_synthetic_panel(&cfg).is_err());
        let cfg = SyntheticConfig { holiday_dip: -1.0, ..Default::default() };
        assert!(generate_synthetic_panel(&cfg).is_err());
    }

    #[test]
    fn respiratory_share_leads_target() {
        let cfg = SyntheticConfig {
            noise_scale: 0.0,
            annual_amplitude: 0.0,
            holiday_dip: 1.0,
            covariate_noise: 0.0,
            shocks: EpidemicShocks { rate_per_year: 6.0, ..Default::default() },
            ..Default::default()
        };
        let ds = generate_synthetic_panel(&cfg).unwrap();
        let g = &ds.groups()[0];
        let lead = cfg.shocks.lead_days;
        let base = cfg.base_levels[0];
        // with the weekly factor removed, target/base - 1 is the shock, and the
        // share at t is 0.1 + 0.4 * shock(t + lead)
        for t in 0..g.len() - lead {
            let dow = g.future[0].values[t + lead] as usize;
            let shock = g.target[t + lead] / (base * cfg.weekly_profile[dow]) - 1.0;
            assert!((g.past[0].values[t] - (0.1 + 0.4 * shock)).abs() < 1e-9);
        }
    }
}
