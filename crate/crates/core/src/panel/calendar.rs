use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use super::{Covariate, PanelDataset};
use crate::{Error, Result};

/// Names of the derived calendar covariates, in output order.
pub const CALENDAR_FEATURES: [&str; 3] = ["day_of_week", "weekend", "holiday"];

/// Day-of-week (Monday = 0), weekend flag and holiday flag for each date.
pub fn derive_calendar_features(dates: &[NaiveDate], holidays: &BTreeSet<NaiveDate>) -> Vec<Covariate> {
    let dow: Vec<f64> = dates
        .iter()
        .map(|d| d.weekday().num_days_from_monday() as f64)
        .collect();
    let weekend = dow.iter().map(|&d| if d >= 5.0 { 1.0 } else { 0.0 }).collect();
    let holiday = dates
        .iter()
        .map(|d| if holidays.contains(d) { 1.0 } else { 0.0 })
        .collect();
    vec![
        Covariate::categorical(CALENDAR_FEATURES[0], 7, dow),
        Covariate::categorical(CALENDAR_FEATURES[1], 2, weekend),
        Covariate::categorical(CALENDAR_FEATURES[2], 2, holiday),
    ]
}

/// Add (or replace) the calendar covariates in every group's future set.
pub fn with_calendar_features(ds: &PanelDataset, holidays: &BTreeSet<NaiveDate>) -> PanelDataset {
    ds.map_groups(|g| {
        let mut g = g.clone();
        g.future.retain(|c| !CALENDAR_FEATURES.contains(&c.name.as_str()));
        g.future.extend(derive_calendar_features(&g.dates, holidays));
        g
    })
}

/// Read a holiday file: one ISO-8601 date per line; blank lines and `#`
/// comments are ignored.
pub fn read_holiday_file(path: &Path) -> Result<BTreeSet<NaiveDate>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let d = NaiveDate::parse_from_str(line, "%Y-%m-%d")
            .map_err(|e| Error::load(path, format!("line {}: bad date '{line}': {e}", lineno + 1)))?;
        out.insert(d);
    }
    Ok(out)
}
