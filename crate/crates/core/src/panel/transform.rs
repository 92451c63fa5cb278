use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DateRange, GroupSeries, PanelDataset, StaticCovariate};
use crate::{Error, Result};

/// Remove every row falling inside one of `ranges` and declare each range as
/// an exclusion gap.
pub fn exclude_date_ranges(ds: &PanelDataset, ranges: &[DateRange]) -> PanelDataset {
    if ranges.is_empty() {
        return ds.clone();
    }
    let groups = ds
        .groups()
        .iter()
        .map(|g| g.filter_rows(|i| !ranges.iter().any(|r| r.contains(g.dates[i]))))
        .collect();
    let mut gaps: Vec<DateRange> = ds.gaps().iter().chain(ranges).copied().collect();
    gaps.sort();
    gaps.dedup();
    PanelDataset::new_unchecked(groups, gaps)
}

/// Train / validation / test partitions of one dataset.
#[derive(Debug, Clone)]
pub struct Splits {
    /// Dates before `val_start`.
    pub train: PanelDataset,
    /// Dates in `[val_start, test_start)`.
    pub val: PanelDataset,
    /// Dates from `test_start` on.
    pub test: PanelDataset,
}

/// Date-disjoint split at `val_start` and `test_start`.
pub fn split_train_val_test(ds: &PanelDataset, val_start: NaiveDate, test_start: NaiveDate) -> Result<Splits> {
    let (first, last) = ds
        .date_span()
        .ok_or_else(|| Error::InsufficientData("cannot split an empty dataset".into()))?;
    if val_start >= test_start {
        return Err(Error::Config(format!(
            "validation start {val_start} must precede test start {test_start}"
        )));
    }
    for (name, d) in [("validation start", val_start), ("test start", test_start)] {
        if d < first || d > last {
            return Err(Error::Config(format!("{name} {d} outside data span {first}..{last}")));
        }
    }
    let train = ds.map_groups(|g| g.filter_rows(|i| g.dates[i] < val_start));
    if train.n_rows() == 0 {
        return Err(Error::InsufficientData(format!(
            "training split before {val_start} is empty"
        )));
    }
    Ok(Splits {
        train,
        val: ds.map_groups(|g| g.filter_rows(|i| val_start <= g.dates[i] && g.dates[i] < test_start)),
        test: ds.map_groups(|g| g.filter_rows(|i| g.dates[i] >= test_start)),
    })
}

/// Mean and population standard deviation of one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    /// Mean.
    pub mean: f64,
    /// Population standard deviation (divides by n).
    pub std: f64,
}

impl SeriesStats {
    /// Statistics of `values`; errors on empty input or zero variance.
    pub fn of(values: &[f64], what: &str) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData(format!("{what}: no training values")));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ZeroVariance(format!("{what} is constant ({mean})")));
        }
        Ok(SeriesStats { mean, std })
    }

    /// Standardize one value.
    pub fn forward(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    /// Undo [`SeriesStats::forward`].
    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Per-group statistics of the target and each continuous covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    /// Target statistics.
    pub target: SeriesStats,
    /// Continuous covariate statistics keyed by covariate name.
    pub covariates: BTreeMap<String, SeriesStats>,
}

/// Training-period statistics for every group, keyed by group id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NormalizationStats {
    /// Per group.
    pub groups: BTreeMap<String, GroupStats>,
}

impl NormalizationStats {
    /// Statistics of one group.
    pub fn get(&self, group: &str) -> Result<&GroupStats> {
        self.groups
            .get(group)
            .ok_or_else(|| Error::InvalidData(format!("no normalization statistics for group '{group}'")))
    }
}

/// Per-group target mean/std (population) and continuous covariate
/// statistics, computed on the given (training) data.
pub fn compute_group_statistics(train: &PanelDataset) -> Result<NormalizationStats> {
    let mut out = NormalizationStats::default();
    for g in train.groups() {
        let target = SeriesStats::of(&g.target, &format!("target of group '{}'", g.group_id))?;
        let mut covariates = BTreeMap::new();
        for c in g.past.iter().chain(&g.future).filter(|c| !c.is_categorical()) {
            let s = SeriesStats::of(&c.values, &format!("covariate '{}' of group '{}'", c.name, g.group_id))?;
            covariates.insert(c.name.clone(), s);
        }
        out.groups.insert(g.group_id.clone(), GroupStats { target, covariates });
    }
    Ok(out)
}

/// Names of the static covariates added by [`attach_static_covariates`].
pub const STATIC_STAT_NAMES: [&str; 2] = ["target_mean", "target_std"];

/// Attach the training target mean and standard deviation as static real
/// covariates (replacing earlier values of the same name).
pub fn attach_static_covariates(ds: &PanelDataset, stats: &NormalizationStats) -> Result<PanelDataset> {
    for g in ds.groups() {
        stats.get(&g.group_id)?;
    }
    Ok(ds.map_groups(|g| {
        let s = stats.groups[&g.group_id].target;
        let mut g = g.clone();
        g.statics.retain(|c| !STATIC_STAT_NAMES.contains(&c.name.as_str()));
        g.statics.push(StaticCovariate { name: STATIC_STAT_NAMES[0].into(), categories: None, value: s.mean });
        g.statics.push(StaticCovariate { name: STATIC_STAT_NAMES[1].into(), categories: None, value: s.std });
        g
    }))
}

/// Direction of [`apply_normalization`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `(x - mean) / std`.
    Forward,
    /// `z * std + mean`.
    Inverse,
}

/// Standardize (or de-standardize) the target and continuous covariates of
/// every group. Categorical series and statics are left untouched.
pub fn apply_normalization(ds: &PanelDataset, stats: &NormalizationStats, direction: Direction) -> Result<PanelDataset> {
    let mut groups = Vec::with_capacity(ds.groups().len());
    for g in ds.groups() {
        let gs = stats.get(&g.group_id)?;
        let map = |s: &SeriesStats, v: &[f64]| -> Vec<f64> {
            match direction {
                Direction::Forward => v.iter().map(|x| s.forward(*x)).collect(),
                Direction::Inverse => v.iter().map(|x| s.inverse(*x)).collect(),
            }
        };
        let mut out: GroupSeries = g.clone();
        out.target = map(&gs.target, &g.target);
        for c in out.past.iter_mut().chain(out.future.iter_mut()) {
            if c.is_categorical() {
                continue;
            }
            let s = gs.covariates.get(&c.name).ok_or_else(|| {
                Error::InvalidData(format!("no statistics for covariate '{}' of group '{}'", c.name, g.group_id))
            })?;
            c.values = map(s, &c.values);
        }
        groups.push(out);
    }
    // normalized targets are signed, so skip the nonnegativity check
    Ok(PanelDataset::new_unchecked(groups, ds.gaps().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{Covariate, GroupSeries};
    use chrono::Days;
    use proptest::prelude::*;

    fn d0() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
    }

    fn group(id: &str, target: Vec<f64>) -> GroupSeries {
        let n = target.len();
        GroupSeries {
            group_id: id.into(),
            dates: (0..n as u64).map(|i| d0() + Days::new(i)).collect(),
            past: vec![Covariate::continuous("resp", (0..n).map(|i| (i % 5) as f64 * 0.1 + 0.05).collect())],
            future: vec![Covariate::categorical("holiday", 2, (0..n).map(|i| (i % 9 == 0) as u8 as f64).collect())],
            statics: vec![],
            target,
        }
    }

    fn ds(n: usize) -> PanelDataset {
        PanelDataset::new(vec![group("a", (0..n).map(|i| 10.0 + (i % 7) as f64).collect())], vec![]).unwrap()
    }

    #[test]
    fn empty_exclusion_is_identity() {
        let x = ds(30);
        assert_eq!(exclude_date_ranges(&x, &[]), x);
    }

    #[test]
    fn exclusion_counts_rows_and_gap() {
        let x = ds(100);
        let r = DateRange::new(d0() + Days::new(40), d0() + Days::new(59)).unwrap();
        let y = exclude_date_ranges(&x, &[r]);
        assert_eq!(y.n_rows(), 80);
        assert_eq!(y.gaps(), &[r]);
        y.validate().unwrap();
    }

    #[test]
    fn exclusion_can_empty_a_group() {
        let x = ds(10);
        let r = DateRange::new(d0(), d0() + Days::new(20)).unwrap();
        let y = exclude_date_ranges(&x, &[r]);
        assert!(y.groups()[0].is_empty());
        assert!(crate::panel::window_samples(&y, 2, 1, 1).is_empty());
    }

    #[test]
    fn split_sizes() {
        let x = ds(10);
        let s = split_train_val_test(&x, d0() + Days::new(6), d0() + Days::new(8)).unwrap();
        assert_eq!((s.train.n_rows(), s.val.n_rows(), s.test.n_rows()), (6, 2, 2));
    }

    #[test]
    fn split_errors() {
        let x = ds(10);
        assert!(matches!(
            split_train_val_test(&x, d0(), d0() + Days::new(5)),
            Err(Error::InsufficientData(_))
        ));
        assert!(split_train_val_test(&x, d0() + Days::new(5), d0() + Days::new(50)).is_err());
        assert!(split_train_val_test(&x, d0() + Days::new(5), d0() + Days::new(3)).is_err());
    }

    #[test]
    fn six_month_test_period() {
        let start = NaiveDate::from_ymd_opt(2021, 9, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2022, 7, 31).unwrap();
        let n = (end - start).num_days() as usize + 1;
        let mut g = group("a", vec![1.0; n]);
        g.dates = (0..n as u64).map(|i| start + Days::new(i)).collect();
        let x = PanelDataset::new(vec![g], vec![]).unwrap();
        let test_start = NaiveDate::from_ymd_opt(2022, 1, 24).unwrap();
        let s = split_train_val_test(&x, NaiveDate::from_ymd_opt(2021, 11, 1).unwrap(), test_start).unwrap();
        let t = &s.test.groups()[0];
        assert_eq!(t.dates.first(), Some(&test_start));
        assert_eq!(t.dates.last(), Some(&end));
        assert_eq!(t.len(), 189);
    }

    #[test]
    fn population_std() {
        let s = SeriesStats::of(&[1.0, 2.0, 3.0], "x").unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.std - 0.8165).abs() < 1e-4);
        assert!(matches!(SeriesStats::of(&[5.0, 5.0, 5.0], "x"), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn stats_per_group() {
        let x = PanelDataset::new(
            vec![group("a", vec![1.0, 2.0, 3.0]), group("b", vec![10.0, 30.0, 20.0])],
            vec![],
        )
        .unwrap();
        let st = compute_group_statistics(&x).unwrap();
        assert_eq!(st.groups.len(), 2);
        assert_eq!(st.groups["b"].target.mean, 20.0);
        let with = attach_static_covariates(&x, &st).unwrap();
        assert_eq!(with.groups()[1].statics[0].value, 20.0);
        let flat = PanelDataset::new(vec![group("c", vec![5.0, 5.0, 5.0])], vec![]).unwrap();
        assert!(matches!(compute_group_statistics(&flat), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn forward_standardizes_and_keeps_categoricals() {
        let x = PanelDataset::new(vec![group("a", vec![1.0, 2.0, 3.0])], vec![]).unwrap();
        let st = compute_group_statistics(&x).unwrap();
        let z = apply_normalization(&x, &st, Direction::Forward).unwrap();
        let t = &z.groups()[0].target;
        let m: f64 = t.iter().sum::<f64>() / 3.0;
        let v: f64 = t.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 3.0;
        assert!(m.abs() < 1e-15 && (v - 1.0).abs() < 1e-12);
        assert_eq!(z.groups()[0].future, x.groups()[0].future);
        let inv = apply_normalization(&x, &st, Direction::Inverse).unwrap();
        assert_eq!(inv.groups()[0].future, x.groups()[0].future);
    }

    #[test]
    fn unknown_group_in_stats() {
        let x = ds(10);
        let other = PanelDataset::new(vec![group("zzz", vec![1.0, 2.0])], vec![]).unwrap();
        let st = compute_group_statistics(&other).unwrap();
        assert!(apply_normalization(&x, &st, Direction::Forward).is_err());
    }

    proptest! {
        #[test]
        fn normalization_round_trip(values in prop::collection::vec(0.0f64..1e4, 3..60)) {
            prop_assume!(values.iter().any(|v| (v - values[0]).abs() > 1e-3));
            let x = PanelDataset::new(vec![group("a", values)], vec![]).unwrap();
            let st = compute_group_statistics(&x).unwrap();
            let z = apply_normalization(&x, &st, Direction::Forward).unwrap();
            let back = apply_normalization(&z, &st, Direction::Inverse).unwrap();
            let (a, b) = (&x.groups()[0], &back.groups()[0]);
            for (u, v) in a.target.iter().zip(&b.target).chain(a.past[0].values.iter().zip(&b.past[0].values)) {
                prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
            }
        }

        #[test]
        fn splits_partition_the_dataset(n in 12usize..80, a in 1usize..10, b in 1usize..10) {
            let x = ds(n);
            let v = a.min(n - 3);
            let t = (v + b).min(n - 1);
            prop_assume!(v < t);
            let s = split_train_val_test(&x, d0() + Days::new(v as u64), d0() + Days::new(t as u64)).unwrap();
            let mut all: Vec<NaiveDate> = [&s.train, &s.val, &s.test]
                .iter()
                .flat_map(|p| p.groups()[0].dates.clone())
                .collect();
            let total = all.len();
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), total);
            prop_assert_eq!(all, x.groups()[0].dates.clone());
        }
    }
}
