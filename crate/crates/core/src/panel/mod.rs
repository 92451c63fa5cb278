//! Panel (grouped) daily time series with classified covariates.
//!
//! A [`PanelDataset`] holds one [`GroupSeries`] per group. Every group carries
//! the same covariate names, each classified as static, past-observed or
//! future-known. Rows removed with [`exclude_date_ranges`] leave declared
//! gaps; windowing never straddles a gap.

mod calendar;
mod io;
mod synth;
mod transform;
mod window;

use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use calendar::{derive_calendar_features, read_holiday_file, with_calendar_features, CALENDAR_FEATURES};
pub use io::{load_panel_csv, write_panel_csv, ColumnRole, Schema};
pub use synth::{generate_synthetic_panel, EpidemicShocks, SyntheticConfig};
pub use transform::{
    apply_normalization, attach_static_covariates, compute_group_statistics, exclude_date_ranges,
    split_train_val_test, Direction, GroupStats, NormalizationStats, SeriesStats, Splits, STATIC_STAT_NAMES,
};
pub use window::{segments, window_count, window_samples, SampleWindow};

/// Role of a covariate in the forecasting problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum CovariateClass {
    /// Constant per group.
    Static,
    /// Observed only up to the forecast origin.
    Past,
    /// Known for every date, including the forecast horizon.
    Future,
}

/// A named time-varying covariate aligned with its group's dates.
///
/// Categorical covariates store integer codes in `0..cardinality` as `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariate {
    /// Column name.
    pub name: String,
    /// Number of categories, `None` for continuous series.
    pub categories: Option<usize>,
    /// One value per date.
    pub values: Vec<f64>,
}

impl Covariate {
    /// Continuous covariate.
    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Self {
        Covariate {
            name: name.into(),
            categories: None,
            values,
        }
    }

    /// Categorical covariate with `categories` levels.
    pub fn categorical(name: impl Into<String>, categories: usize, values: Vec<f64>) -> Self {
        Covariate {
            name: name.into(),
            categories: Some(categories),
            values,
        }
    }

    /// Whether the series holds category codes.
    pub fn is_categorical(&self) -> bool {
        self.categories.is_some()
    }
}

/// A per-group constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticCovariate {
    /// Name.
    pub name: String,
    /// Number of categories, `None` for a real value.
    pub categories: Option<usize>,
    /// Value (category code when categorical).
    pub value: f64,
}

/// All series of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSeries {
    /// Group identifier, e.g. a region name.
    pub group_id: String,
    /// Strictly increasing dates.
    pub dates: Vec<NaiveDate>,
    /// Nonnegative target per date.
    pub target: Vec<f64>,
    /// Past-observed covariates.
    pub past: Vec<Covariate>,
    /// Future-known covariates.
    pub future: Vec<Covariate>,
    /// Per-group constants.
    pub statics: Vec<StaticCovariate>,
}

impl GroupSeries {
    /// Number of dated rows.
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    /// True when the group has no rows.
    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Keep only rows whose index satisfies `keep`.
    pub(crate) fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> GroupSeries {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let pick_cov = |c: &Covariate| Covariate {
            name: c.name.clone(),
            categories: c.categories,
            values: pick(&c.values),
        };
        GroupSeries {
            group_id: self.group_id.clone(),
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            target: pick(&self.target),
            past: self.past.iter().map(pick_cov).collect(),
            future: self.future.iter().map(pick_cov).collect(),
            statics: self.statics.clone(),
        }
    }

    /// Rows with date strictly before `date`.
    pub fn before(&self, date: NaiveDate) -> GroupSeries {
        self.filter_rows(|i| self.dates[i] < date)
    }

    /// Index of `date`, if present.
    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }
}

/// An inclusive range of calendar dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DateRange {
    /// First date in the range.
    pub start: NaiveDate,
    /// Last date in the range (inclusive).
    pub end: NaiveDate,
}

impl DateRange {
    /// Build a range, rejecting `end < start`.
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Config(format!("date range end {end} precedes start {start}")));
        }
        Ok(DateRange { start, end })
    }

    /// Whether `d` lies within the range.
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    /// Number of days covered.
    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }
}

/// Grouped daily panel with declared exclusion gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    groups: Vec<GroupSeries>,
    gaps: Vec<DateRange>,
}

impl PanelDataset {
    /// Validate and build a dataset.
    pub fn new(groups: Vec<GroupSeries>, gaps: Vec<DateRange>) -> Result<Self> {
        let ds = PanelDataset { groups, gaps };
        ds.validate()?;
        Ok(ds)
    }

    pub(crate) fn new_unchecked(groups: Vec<GroupSeries>, gaps: Vec<DateRange>) -> Self {
        PanelDataset { groups, gaps }
    }

    /// Groups in load order.
    pub fn groups(&self) -> &[GroupSeries] {
        &self.groups
    }

    /// Declared exclusion gaps.
    pub fn gaps(&self) -> &[DateRange] {
        &self.gaps
    }

    /// Group by identifier.
    pub fn group(&self, id: &str) -> Option<&GroupSeries> {
        self.groups.iter().find(|g| g.group_id == id)
    }

    /// Index of a group by identifier.
    pub fn group_index(&self, id: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.group_id == id)
    }

    /// Total number of (group, date) rows.
    pub fn n_rows(&self) -> usize {
        self.groups.iter().map(GroupSeries::len).sum()
    }

    /// Earliest and latest date across groups.
    pub fn date_span(&self) -> Option<(NaiveDate, NaiveDate)> {
        let first = self.groups.iter().filter_map(|g| g.dates.first()).min()?;
        let last = self.groups.iter().filter_map(|g| g.dates.last()).max()?;
        Some((*first, *last))
    }

    /// Names of past covariates (identical across groups).
    pub fn past_names(&self) -> Vec<String> {
        self.groups
            .first()
            .map(|g| g.past.iter().map(|c| c.name.clone()).collect())
            .unwrap_or_default()
    }

    /// Names of future covariates (identical across groups).
    pub fn future_names(&self) -> Vec<String> {
        self.groups
            .first()
            .map(|g| g.future.iter().map(|c| c.name.clone()).collect())
            .unwrap_or_default()
    }

    /// Names of static covariates (identical across groups).
    pub fn static_names(&self) -> Vec<String> {
        self.groups
            .first()
            .map(|g| g.statics.iter().map(|c| c.name.clone()).collect())
            .unwrap_or_default()
    }

    /// Apply `f` to every group, keeping the gaps.
    pub(crate) fn map_groups(&self, f: impl Fn(&GroupSeries) -> GroupSeries) -> PanelDataset {
        PanelDataset {
            groups: self.groups.iter().map(f).collect(),
            gaps: self.gaps.clone(),
        }
    }

    /// Rows dated strictly before `date` in every group.
    pub fn before(&self, date: NaiveDate) -> PanelDataset {
        self.map_groups(|g| g.before(date))
    }

    /// Rows within `[start, end]` in every group.
    pub fn between(&self, start: NaiveDate, end: NaiveDate) -> PanelDataset {
        self.map_groups(|g| g.filter_rows(|i| start <= g.dates[i] && g.dates[i] <= end))
    }

    /// Check the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        let reference = self.groups.first();
        for g in &self.groups {
            if !ids.insert(g.group_id.as_str()) {
                return Err(Error::InvalidData(format!("duplicate group '{}'", g.group_id)));
            }
            let n = g.dates.len();
            if g.target.len() != n {
                return Err(Error::InvalidData(format!(
                    "group '{}': target has {} values for {} dates",
                    g.group_id,
                    g.target.len(),
                    n
                )));
            }
            for c in g.past.iter().chain(&g.future) {
                if c.values.len() != n {
                    return Err(Error::InvalidData(format!(
                        "group '{}': covariate '{}' has {} values for {} dates",
                        g.group_id,
                        c.name,
                        c.values.len(),
                        n
                    )));
                }
                if let Some(k) = c.categories {
                    if let Some(v) = c.values.iter().find(|v| !is_code(**v, k)) {
                        return Err(Error::InvalidData(format!(
                            "group '{}': categorical '{}' has invalid code {v}",
                            g.group_id, c.name
                        )));
                    }
                } else if let Some(v) = c.values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::InvalidData(format!(
                        "group '{}': covariate '{}' has non-finite value {v}",
                        g.group_id, c.name
                    )));
                }
            }
            for (i, w) in g.dates.windows(2).enumerate() {
                if w[1] <= w[0] {
                    return Err(Error::InvalidData(format!(
                        "group '{}': dates not strictly increasing at row {}",
                        g.group_id,
                        i + 1
                    )));
                }
                let mut d = w[0] + Days::new(1);
                while d < w[1] {
                    if !self.gaps.iter().any(|r| r.contains(d)) {
                        return Err(Error::InvalidData(format!(
                            "group '{}': missing date {d} outside any declared gap",
                            g.group_id
                        )));
                    }
                    d = d + Days::new(1);
                }
            }
            if let Some((i, v)) = g.target.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "group '{}': target {v} at {} is negative or non-finite",
                    g.group_id, g.dates[i]
                )));
            }
            if let Some(r) = reference {
                let names = |cs: &[Covariate]| cs.iter().map(|c| (c.name.clone(), c.categories)).collect::<Vec<_>>();
                let snames = |cs: &[StaticCovariate]| cs.iter().map(|c| c.name.clone()).collect::<Vec<_>>();
                if names(&g.past) != names(&r.past)
                    || names(&g.future) != names(&r.future)
                    || snames(&g.statics) != snames(&r.statics)
                {
                    return Err(Error::InvalidData(format!(
                        "group '{}' has a covariate set different from group '{}'",
                        g.group_id, r.group_id
                    )));
                }
            }
            let mut seen = BTreeSet::new();
            for name in g
                .past
                .iter()
                .map(|c| &c.name)
                .chain(g.future.iter().map(|c| &c.name))
                .chain(g.statics.iter().map(|c| &c.name))
            {
                if !seen.insert(name) {
                    return Err(Error::InvalidData(format!(
                        "covariate '{name}' is classified more than once"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn is_code(v: f64, k: usize) -> bool {
    v >= 0.0 && v.fract() == 0.0 && (v as usize) < k
}
