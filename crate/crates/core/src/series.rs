//! Hourly series container, calendar helpers, min-max scaling and
//! chronological splitting.

use chrono::{DateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SECONDS_PER_HOUR: i64 = 3600;

/// Whole hours since the Unix epoch for an on-the-hour UTC timestamp.
pub fn hour_of(t: &DateTime<Utc>) -> Result<i64> {
    if t.minute() != 0 || t.second() != 0 || t.nanosecond() != 0 {
        return Err(Error::NonHourly(t.to_rfc3339()));
    }
    Ok(t.timestamp().div_euclid(SECONDS_PER_HOUR))
}

pub fn datetime_of(hour: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(hour * SECONDS_PER_HOUR, 0)
        .single()
        .expect("hour index within chrono range")
}

/// Parses an ISO-8601 UTC timestamp that must fall on the hour.
pub fn parse_hour(s: &str) -> Result<i64> {
    let t = DateTime::parse_from_rfc3339(s.trim())
        .map_err(|e| Error::Parse {
            line: 0,
            message: format!("bad timestamp `{s}`: {e}"),
        })?
        .with_timezone(&Utc);
    hour_of(&t)
}

/// Canonical `YYYY-MM-DDTHH:00:00Z` rendering.
pub fn format_hour(hour: i64) -> String {
    datetime_of(hour).format("%Y-%m-%dT%H:00:00Z").to_string()
}

/// Hourly UTC-indexed scalar series. Index `i` maps to `start + i` hours;
/// absent values are gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    start: i64,
    pub values: Vec<Option<f64>>,
    pub name: String,
    pub unit: String,
}

impl TimeSeries {
    pub fn new(
        start: DateTime<Utc>,
        values: Vec<Option<f64>>,
        name: impl Into<String>,
        unit: impl Into<String>,
    ) -> Result<Self> {
        Ok(Self::from_hour(hour_of(&start)?, values, name, unit))
    }

    pub fn from_hour(
        start_hour: i64,
        values: Vec<Option<f64>>,
        name: impl Into<String>,
        unit: impl Into<String>,
    ) -> Self {
        TimeSeries {
            start: start_hour,
            values,
            name: name.into(),
            unit: unit.into(),
        }
    }

    /// Gap-free series from plain values.
    pub fn dense(start_hour: i64, values: &[f64], name: &str, unit: &str) -> Self {
        Self::from_hour(start_hour, values.iter().map(|&v| Some(v)).collect(), name, unit)
    }

    pub fn start(&self) -> DateTime<Utc> {
        datetime_of(self.start)
    }

    pub fn start_hour(&self) -> i64 {
        self.start
    }

    /// Exclusive end, in hours since the epoch.
    pub fn end_hour(&self) -> i64 {
        self.start + self.values.len() as i64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hour_at(&self, i: usize) -> i64 {
        self.start + i as i64
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied().flatten()
    }

    /// Value at an absolute hour, `None` outside the span or on a gap.
    pub fn at_hour(&self, hour: i64) -> Option<f64> {
        let i = hour - self.start;
        if i < 0 {
            return None;
        }
        self.get(i as usize)
    }

    pub fn index_of_hour(&self, hour: i64) -> Option<usize> {
        let i = hour - self.start;
        (i >= 0 && (i as usize) < self.values.len()).then_some(i as usize)
    }

    pub fn present(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(|v| *v)
    }

    pub fn gap_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Sub-series over absolute hours `[from, to)`, clipped to the span.
    pub fn slice_hours(&self, from: i64, to: i64) -> TimeSeries {
        let lo = (from - self.start).clamp(0, self.values.len() as i64) as usize;
        let hi = (to - self.start).clamp(lo as i64, self.values.len() as i64) as usize;
        TimeSeries {
            start: self.start + lo as i64,
            values: self.values[lo..hi].to_vec(),
            name: self.name.clone(),
            unit: self.unit.clone(),
        }
    }

    pub fn map_present(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            start: self.start,
            values: self.values.iter().map(|v| v.map(&f)).collect(),
            name: self.name.clone(),
            unit: self.unit.clone(),
        }
    }
}

/// Training-split extrema used for min-max scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: f64,
    pub max: f64,
}

impl ScalerParams {
    pub fn scale(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn unscale(&self, v: f64) -> f64 {
        v * (self.max - self.min) + self.min
    }
}

pub fn minmax_fit(series: &TimeSeries) -> Result<ScalerParams> {
    let mut it = series.present();
    let first = it.next().ok_or(Error::EmptySeries)?;
    let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if max <= min {
        return Err(Error::ConstantSeries(min));
    }
    Ok(ScalerParams { min, max })
}

/// Maps present values onto the fitted range. Values outside the fitted
/// extrema land outside `[0, 1]`.
pub fn minmax_transform(series: &TimeSeries, p: &ScalerParams) -> TimeSeries {
    let mut out = series.map_present(|v| p.scale(v));
    out.unit = "scaled".to_string();
    out
}

pub fn minmax_inverse(series: &TimeSeries, p: &ScalerParams) -> TimeSeries {
    series.map_present(|v| p.unscale(v))
}

/// Chronological train/test boundaries (both exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_end: DateTime<Utc>,
    pub test_end: DateTime<Utc>,
}

impl SplitSpec {
    pub fn new(train_end: DateTime<Utc>, test_end: DateTime<Utc>) -> Result<Self> {
        let spec = SplitSpec {
            train_end,
            test_end,
        };
        spec.hours()?;
        Ok(spec)
    }

    /// `(train_end, test_end)` in hours since the epoch, validated.
    pub fn hours(&self) -> Result<(i64, i64)> {
        let a = hour_of(&self.train_end)?;
        let b = hour_of(&self.test_end)?;
        if a >= b {
            return Err(Error::InvalidSplit(format!(
                "train_end {} must precede test_end {}",
                self.train_end, self.test_end
            )));
        }
        Ok((a, b))
    }
}

/// Splits into `[start, train_end)` and `[train_end, test_end)`. Anything
/// after `test_end` is excluded.
pub fn split(series: &TimeSeries, spec: &SplitSpec) -> Result<(TimeSeries, TimeSeries)> {
    let (train_end, test_end) = spec.hours()?;
    if train_end < series.start_hour() {
        return Err(Error::OutOfRange(format_hour(train_end)));
    }
    if train_end == series.start_hour() {
        return Err(Error::EmptyTrain);
    }
    if test_end > series.end_hour() {
        return Err(Error::OutOfRange(format_hour(test_end)));
    }
    Ok((
        series.slice_hours(series.start_hour(), train_end),
        series.slice_hours(train_end, test_end),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(values: Vec<Option<f64>>) -> TimeSeries {
        TimeSeries::from_hour(0, values, "x", "MW")
    }

    #[test]
    fn fit_extrema() {
        let p = minmax_fit(&ts(vec![Some(0.0), Some(5.0), Some(10.0)])).unwrap();
        assert_eq!(p, ScalerParams { min: 0.0, max: 10.0 });
        let p = minmax_fit(&ts(vec![Some(3.0), None, Some(7.0)])).unwrap();
        assert_eq!(p, ScalerParams { min: 3.0, max: 7.0 });
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            minmax_fit(&ts(vec![Some(4.0); 3])),
            Err(Error::ConstantSeries(_))
        ));
        assert!(matches!(minmax_fit(&ts(vec![None, None])), Err(Error::EmptySeries)));
        assert!(matches!(minmax_fit(&ts(vec![])), Err(Error::EmptySeries)));
    }

    #[test]
    fn transform_and_inverse() {
        let p = ScalerParams { min: 0.0, max: 10.0 };
        let s = minmax_transform(&ts(vec![Some(10.0), Some(0.0), Some(12.0), None]), &p);
        assert_eq!(s.values, vec![Some(1.0), Some(0.0), Some(1.2), None]);
        assert_eq!(s.unit, "scaled");

        let back = minmax_inverse(&ts(vec![Some(1.0)]), &p);
        assert_eq!(back.values, vec![Some(10.0)]);
        let back = minmax_inverse(&ts(vec![Some(0.5)]), &ScalerParams { min: 2.0, max: 4.0 });
        assert_eq!(back.values, vec![Some(3.0)]);
    }

    #[test]
    fn non_hourly_timestamps_rejected() {
        assert!(matches!(parse_hour("2020-01-01T00:30:00Z"), Err(Error::NonHourly(_))));
        assert_eq!(parse_hour("1970-01-01T05:00:00Z").unwrap(), 5);
        assert_eq!(format_hour(5), "1970-01-01T05:00:00Z");
    }

    fn at(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    #[test]
    fn four_year_split() {
        let start = parse_hour("2017-01-01T00:00:00Z").unwrap();
        let end = parse_hour("2021-01-01T00:00:00Z").unwrap();
        let s = TimeSeries::dense(start, &vec![1.0; (end - start) as usize], "solar_mw", "MW");
        let spec = SplitSpec::new(at("2020-01-01T00:00:00Z"), at("2021-01-01T00:00:00Z")).unwrap();
        let (train, test) = split(&s, &spec).unwrap();
        assert_eq!(train.start_hour(), start);
        assert_eq!(train.len(), 365 * 24 * 3);
        assert_eq!(test.start(), at("2020-01-01T00:00:00Z"));
        assert_eq!(test.len(), 366 * 24);
    }

    #[test]
    fn split_edges() {
        let s = TimeSeries::dense(10, &[1.0; 20], "x", "MW");
        let spec = SplitSpec::new(datetime_of(10), datetime_of(15)).unwrap();
        assert!(matches!(split(&s, &spec), Err(Error::EmptyTrain)));

        let spec = SplitSpec::new(datetime_of(15), datetime_of(16)).unwrap();
        let (train, test) = split(&s, &spec).unwrap();
        assert_eq!((train.len(), test.len()), (5, 1));

        let spec = SplitSpec::new(datetime_of(15), datetime_of(31)).unwrap();
        assert!(matches!(split(&s, &spec), Err(Error::OutOfRange(_))));
        let spec = SplitSpec::new(datetime_of(5), datetime_of(12)).unwrap();
        assert!(matches!(split(&s, &spec), Err(Error::OutOfRange(_))));
        assert!(SplitSpec::new(datetime_of(15), datetime_of(15)).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-1e6f64..1e6, 2..64)) {
            let s = TimeSeries::dense(0, &values, "x", "MW");
            if let Ok(p) = minmax_fit(&s) {
                let back = minmax_inverse(&minmax_transform(&s, &p), &p);
                for (a, b) in s.present().zip(back.present()) {
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(p.max - p.min));
                }
            }
        }

        #[test]
        fn transform_spans_unit_interval(values in prop::collection::vec(-1e3f64..1e3, 2..64)) {
            let s = TimeSeries::dense(0, &values, "x", "MW");
            if let Ok(p) = minmax_fit(&s) {
                let t = minmax_transform(&s, &p);
                let lo = t.present().fold(f64::INFINITY, f64::min);
                let hi = t.present().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(lo, 0.0);
                prop_assert_eq!(hi, 1.0);
            }
        }

        #[test]
        fn split_preserves_length(n in 3usize..200, a in 1usize..100, b in 1usize..100) {
            let s = TimeSeries::dense(0, &vec![0.0; n], "x", "MW");
            let train_end = (a % (n - 1)) as i64 + 1;
            let test_end = (train_end + (b as i64)).min(n as i64);
            prop_assume!(test_end > train_end);
            let spec = SplitSpec::new(datetime_of(train_end), datetime_of(test_end)).unwrap();
            let (train, test) = split(&s, &spec).unwrap();
            let tail = n as i64 - test_end;
            prop_assert_eq!(train.len() as i64 + test.len() as i64 + tail, n as i64);
        }
    }
}
