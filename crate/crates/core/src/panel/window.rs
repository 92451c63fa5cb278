use std::ops::Range;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{GroupSeries, PanelDataset};
use crate::{Error, Result};

/// One encoder/decoder training or inference instance.
///
/// Time-varying inputs are stored variable-major: `encoder_past[j][t]` is
/// past covariate `j` at encoder step `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow {
    /// Index of the group in its dataset.
    pub group: usize,
    /// Group identifier.
    pub group_id: String,
    /// First encoder date.
    pub encoder_start: NaiveDate,
    /// First decoder (forecast) date, i.e. the forecast origin.
    pub decoder_start: NaiveDate,
    /// Target over the encoder range.
    pub encoder_target: Vec<f64>,
    /// Past covariates over the encoder range.
    pub encoder_past: Vec<Vec<f64>>,
    /// Future covariates over the encoder range.
    pub encoder_future: Vec<Vec<f64>>,
    /// Future covariates over the decoder range.
    pub decoder_future: Vec<Vec<f64>>,
    /// Target over the decoder range; `None` at inference.
    pub decoder_target: Option<Vec<f64>>,
    /// Static covariate values.
    pub statics: Vec<f64>,
}

impl SampleWindow {
    /// Encoder length.
    pub fn encoder_len(&self) -> usize {
        self.encoder_target.len()
    }

    /// Decoder length (forecast horizon).
    pub fn horizon(&self) -> usize {
        self.decoder_future.first().map_or_else(
            || self.decoder_target.as_ref().map_or(0, Vec::len),
            Vec::len,
        )
    }

    /// Encoder dates.
    pub fn encoder_dates(&self) -> Vec<NaiveDate> {
        (0..self.encoder_len() as u64).map(|i| self.encoder_start + Days::new(i)).collect()
    }

    /// Decoder dates.
    pub fn decoder_dates(&self, horizon: usize) -> Vec<NaiveDate> {
        (0..horizon as u64).map(|i| self.decoder_start + Days::new(i)).collect()
    }

    fn slice(group: usize, g: &GroupSeries, enc: Range<usize>, dec: Range<usize>, with_target: bool) -> Self {
        SampleWindow {
            group,
            group_id: g.group_id.clone(),
            encoder_start: g.dates[enc.start],
            decoder_start: g.dates[dec.start],
            encoder_target: g.target[enc.clone()].to_vec(),
            encoder_past: g.past.iter().map(|c| c.values[enc.clone()].to_vec()).collect(),
            encoder_future: g.future.iter().map(|c| c.values[enc.clone()].to_vec()).collect(),
            decoder_future: g.future.iter().map(|c| c.values[dec.clone()].to_vec()).collect(),
            decoder_target: with_target.then(|| g.target[dec].to_vec()),
            statics: g.statics.iter().map(|s| s.value).collect(),
        }
    }

    /// Inference window forecasting from `origin` for `group` of `ds`.
    ///
    /// The encoder takes the `encoder_len` days before `origin`; the decoder
    /// only receives the future-known covariates. Fails if the required
    /// dates are not contiguous in the dataset.
    pub fn at_origin(ds: &PanelDataset, group: usize, origin: NaiveDate, encoder_len: usize, horizon: usize) -> Result<Self> {
        let g = &ds.groups()[group];
        let start = origin
            .checked_sub_days(Days::new(encoder_len as u64))
            .ok_or_else(|| Error::InsufficientData("origin too early".into()))?;
        let i0 = g.position(start).ok_or_else(|| {
            Error::InsufficientData(format!("group '{}' has no encoder history starting {start}", g.group_id))
        })?;
        let end = i0 + encoder_len + horizon;
        if end > g.len() || g.dates[end - 1] != start + Days::new((encoder_len + horizon - 1) as u64) {
            return Err(Error::InsufficientData(format!(
                "group '{}' has no contiguous {encoder_len}+{horizon} day window at origin {origin}",
                g.group_id
            )));
        }
        Ok(Self::slice(group, g, i0..i0 + encoder_len, i0 + encoder_len..end, false))
    }
}

/// Contiguous (gap-free) index ranges of a group.
pub fn segments(g: &GroupSeries) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=g.len() {
        if i == g.len() || g.dates[i] != g.dates[i - 1] + Days::new(1) {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Number of windows a segment of length `len` yields.
pub fn window_count(len: usize, encoder_len: usize, horizon: usize, stride: usize) -> usize {
    let span = encoder_len + horizon;
    if len < span || stride == 0 {
        0
    } else {
        (len - span) / stride + 1
    }
}

/// Slide an `encoder_len + horizon` window with `stride` over every
/// gap-free segment of every group. Windows are ordered by group, then
/// origin date.
pub fn window_samples(ds: &PanelDataset, encoder_len: usize, horizon: usize, stride: usize) -> Vec<SampleWindow> {
    let mut out = Vec::new();
    if encoder_len == 0 || horizon == 0 || stride == 0 {
        return out;
    }
    for (gi, g) in ds.groups().iter().enumerate() {
        for seg in segments(g) {
            let n = window_count(seg.len(), encoder_len, horizon, stride);
            for k in 0..n {
                let s = seg.start + k * stride;
                out.push(SampleWindow::slice(gi, g, s..s + encoder_len, s + encoder_len..s + encoder_len + horizon, true));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{exclude_date_ranges, Covariate, DateRange};
    use proptest::prelude::*;

    fn day(i: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + Days::new(i)
    }

    fn ds(n: usize) -> PanelDataset {
        let g = GroupSeries {
            group_id: "g".into(),
            dates: (0..n as u64).map(day).collect(),
            target: (0..n).map(|i| i as f64).collect(),
            past: vec![Covariate::continuous("p", (0..n).map(|i| -(i as f64)).collect())],
            future: vec![Covariate::categorical("hol", 2, vec![0.0; n])],
            statics: vec![],
        };
        PanelDataset::new(vec![g], vec![]).unwrap()
    }

    #[test]
    fn seventy_days_one_window() {
        let w = window_samples(&ds(70), 42, 28, 1);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].encoder_len(), 42);
        assert_eq!(w[0].horizon(), 28);
        assert_eq!(w[0].decoder_target.as_ref().unwrap()[0], 42.0);
        assert_eq!(w[0].encoder_past[0][41], -41.0);
    }

    #[test]
    fn sixty_nine_days_none() {
        assert!(window_samples(&ds(69), 42, 28, 1).is_empty());
    }

    #[test]
    fn gap_blocks_windows() {
        let x = exclude_date_ranges(&ds(100), &[DateRange::new(day(50), day(50)).unwrap()]);
        assert_eq!(segments(&x.groups()[0]).len(), 2);
        assert!(window_samples(&x, 42, 28, 1).is_empty());
    }

    #[test]
    fn origin_window_excludes_future_target() {
        let x = ds(100);
        let w = SampleWindow::at_origin(&x, 0, day(60), 42, 28).unwrap();
        assert_eq!(w.encoder_start, day(18));
        assert_eq!(*w.encoder_target.last().unwrap(), 59.0);
        assert!(w.decoder_target.is_none());
        assert_eq!(w.horizon(), 28);
        assert!(SampleWindow::at_origin(&x, 0, day(90), 42, 28).is_err());
        assert!(SampleWindow::at_origin(&x, 0, day(10), 42, 28).is_err());
    }

    proptest! {
        #[test]
        fn windows_respect_gaps_and_count(
            n in 10usize..90, gap_start in 0u64..90, gap_len in 0u64..15,
            enc in 1usize..12, hor in 1usize..8, stride in 1usize..5,
        ) {
            let x = ds(n);
            let x = if gap_len > 0 {
                exclude_date_ranges(&x, &[DateRange::new(day(gap_start), day(gap_start + gap_len - 1)).unwrap()])
            } else { x };
            let w = window_samples(&x, enc, hor, stride);
            let expected: usize = segments(&x.groups()[0]).iter().map(|s| window_count(s.len(), enc, hor, stride)).sum();
            prop_assert_eq!(w.len(), expected);
            for win in &w {
                let first = win.encoder_start;
                let last = win.decoder_start + Days::new(hor as u64 - 1);
                prop_assert_eq!(win.decoder_start, first + Days::new(enc as u64));
                for gap in x.gaps() {
                    prop_assert!(last < gap.start || first > gap.end);
                }
            }
            for pair in w.windows(2) {
                prop_assert!(pair[0].decoder_start < pair[1].decoder_start);
            }
        }
    }
}
