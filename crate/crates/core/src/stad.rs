//! Seasonal-trend additive decomposer.
//!
//! Models `y(t) = g(t) + s(t) + h(t) + r(t) + ε(t)` where `g` is a
//! piecewise-linear trend with hinge changepoints, `s` is a sum of Fourier
//! seasonal blocks plus piecewise-constant daypart levels, `h` holds
//! per-date holiday effects and `r` is a linear term in external regressors.
//! All weights come from one penalized least-squares solve: hinge deltas are
//! penalized by `trend_reg`, Fourier, daypart and holiday weights by
//! `seasonal_reg`, regressor weights by `regressor_reg`; intercept and base
//! slope are free.

use std::f64::consts::PI;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::FeatureMatrix;
use crate::linalg::{cholesky_solve, cross_products};
use crate::series::{datetime_of, format_hour, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalBlock {
    pub name: String,
    /// Period in hours.
    pub period: f64,
    pub order: usize,
}

impl SeasonalBlock {
    pub fn new(name: &str, period: f64, order: usize) -> Self {
        SeasonalBlock {
            name: name.to_string(),
            period,
            order,
        }
    }
}

/// A named UTC hour range `[start, end)`, wrapping past midnight when `end <= start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Daypart {
    pub name: String,
    pub start: u32,
    pub end: u32,
}

impl Daypart {
    fn new(name: &str, start: u32, end: u32) -> Self {
        Daypart {
            name: name.to_string(),
            start,
            end,
        }
    }

    pub fn contains(&self, hour: u32) -> bool {
        if self.start < self.end {
            (self.start..self.end).contains(&hour)
        } else {
            hour >= self.start || hour < self.end
        }
    }
}

pub fn default_dayparts() -> Vec<Daypart> {
    vec![
        Daypart::new("sunrise", 5, 8),
        Daypart::new("morning", 8, 12),
        Daypart::new("noon", 12, 16),
        Daypart::new("sunset", 16, 20),
        Daypart::new("night", 20, 5),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StadConfig {
    pub seasonal_blocks: Vec<SeasonalBlock>,
    /// Daypart levels; `None` disables the time-of-day term.
    pub dayparts: Option<Vec<Daypart>>,
    pub changepoints: usize,
    /// Share of the fit span (from its start) over which changepoints are spread.
    pub changepoint_range: f64,
    pub trend_reg: f64,
    pub seasonal_reg: f64,
    pub regressor_reg: f64,
    pub regressor_names: Vec<String>,
    pub holidays: Vec<NaiveDate>,
}

impl Default for StadConfig {
    fn default() -> Self {
        StadConfig {
            seasonal_blocks: vec![
                SeasonalBlock::new("daily", 24.0, 6),
                SeasonalBlock::new("weekly", 168.0, 3),
                SeasonalBlock::new("yearly", 8766.0, 10),
                SeasonalBlock::new("biseasonal", 4383.0, 2),
            ],
            dayparts: Some(default_dayparts()),
            changepoints: 25,
            changepoint_range: 0.8,
            trend_reg: 10.0,
            seasonal_reg: 1.0,
            regressor_reg: 1.0,
            regressor_names: Vec::new(),
            holidays: Vec::new(),
        }
    }
}

impl StadConfig {
    /// Trend only: no seasonal blocks, dayparts, holidays or regressors.
    pub fn trend_only() -> Self {
        StadConfig {
            seasonal_blocks: Vec::new(),
            dayparts: None,
            ..StadConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.seasonal_blocks {
            if !(b.period > 0.0) || b.order == 0 {
                return Err(Error::InvalidConfig(format!(
                    "block `{}` needs period > 0 and order >= 1",
                    b.name
                )));
            }
        }
        if let Some(parts) = &self.dayparts {
            if parts.len() < 2 {
                return Err(Error::InvalidConfig("need at least two dayparts".into()));
            }
            for h in 0..24 {
                let n = parts.iter().filter(|p| p.contains(h)).count();
                if n != 1 {
                    return Err(Error::InvalidConfig(format!(
                        "hour {h} is covered by {n} dayparts"
                    )));
                }
            }
        }
        for (name, v) in [
            ("trend_reg", self.trend_reg),
            ("seasonal_reg", self.seasonal_reg),
            ("regressor_reg", self.regressor_reg),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0")));
            }
        }
        if !(self.changepoint_range > 0.0 && self.changepoint_range <= 1.0) {
            return Err(Error::InvalidConfig("changepoint_range must be in (0, 1]".into()));
        }
        Ok(())
    }

    fn n_fourier(&self) -> usize {
        2 * self.seasonal_blocks.iter().map(|b| b.order).sum::<usize>()
    }

    fn n_dayparts(&self) -> usize {
        self.dayparts.as_ref().map_or(0, Vec::len)
    }

    /// Length of the full weight vector.
    pub fn n_weights(&self) -> usize {
        (self.changepoints + 2)
            + self.n_fourier()
            + self.n_dayparts()
            + self.holidays.len()
            + self.regressor_names.len()
    }
}

/// `[sin(2πkt/P), cos(2πkt/P)]` for `k = 1..=order`. The phase is reduced
/// modulo the period first, so `t` and `t + period` give identical output.
pub fn fourier_basis(t: f64, period: f64, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * order);
    push_fourier(&mut out, t, period, order);
    out
}

fn push_fourier(out: &mut Vec<f64>, t: f64, period: f64, order: usize) {
    let phase = t.rem_euclid(period) / period;
    for k in 1..=order {
        let angle = 2.0 * PI * k as f64 * phase;
        out.push(angle.sin());
        out.push(angle.cos());
    }
}

/// `[1, t, max(0, t − c₁), …, max(0, t − c_m)]`.
pub fn trend_basis(t: f64, changepoints: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(changepoints.len() + 2);
    push_trend(&mut out, t, changepoints);
    out
}

fn push_trend(out: &mut Vec<f64>, t: f64, changepoints: &[f64]) {
    out.push(1.0);
    out.push(t);
    out.extend(changepoints.iter().map(|&c| (t - c).max(0.0)));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub intercept: f64,
    pub slope: f64,
    pub deltas: Vec<f64>,
    /// Changepoints on the internal time scale.
    pub changepoints: Vec<f64>,
}

/// A fitted decomposer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StadModel {
    pub config: StadConfig,
    /// First fitted hour; internal time is `(hour − origin) / time_scale`.
    pub origin: i64,
    pub time_scale: f64,
    pub trend: Trend,
    pub seasonal_weights: Vec<Vec<f64>>,
    pub daypart_weights: Vec<f64>,
    pub holiday_weights: Vec<f64>,
    pub regressor_weights: Vec<f64>,
    /// `[first, last]` fitted hour.
    pub fit_span: (i64, i64),
}

/// Hour offsets of the design-matrix blocks.
struct Layout {
    n_trend: usize,
    fourier: usize,
    daypart: usize,
    holiday: usize,
    regressor: usize,
    total: usize,
}

impl Layout {
    fn of(cfg: &StadConfig) -> Layout {
        let n_trend = cfg.changepoints + 2;
        let fourier = n_trend;
        let daypart = fourier + cfg.n_fourier();
        // Daypart levels are constrained to sum to zero, so one fewer free column.
        let holiday = daypart + cfg.n_dayparts().saturating_sub(1);
        let regressor = holiday + cfg.holidays.len();
        let total = regressor + cfg.regressor_names.len();
        Layout {
            n_trend,
            fourier,
            daypart,
            holiday,
            regressor,
            total,
        }
    }
}

fn hour_of_day(hour: i64) -> u32 {
    hour.rem_euclid(24) as u32
}

fn date_of(hour: i64) -> NaiveDate {
    datetime_of(hour).date_naive()
}

/// Writes one design row (free parameters only).
fn design_row(
    cfg: &StadConfig,
    changepoints: &[f64],
    origin: i64,
    scale: f64,
    hour: i64,
    regressors: Option<&[f64]>,
    out: &mut Vec<f64>,
) {
    out.clear();
    push_trend(out, (hour - origin) as f64 / scale, changepoints);
    for b in &cfg.seasonal_blocks {
        push_fourier(out, hour as f64, b.period, b.order);
    }
    if let Some(parts) = &cfg.dayparts {
        let h = hour_of_day(hour);
        let last = f64::from(u8::from(parts[parts.len() - 1].contains(h)));
        for p in &parts[..parts.len() - 1] {
            out.push(f64::from(u8::from(p.contains(h))) - last);
        }
    }
    if !cfg.holidays.is_empty() {
        let d = date_of(hour);
        out.extend(cfg.holidays.iter().map(|&hd| f64::from(u8::from(hd == d))));
    }
    if let Some(r) = regressors {
        out.extend_from_slice(r);
    }
}

/// Locates the regressor row for each hour, or reports misalignment.
fn regressor_rows<'a>(cfg: &StadConfig, regressors: Option<&'a FeatureMatrix>) -> Result<Option<&'a FeatureMatrix>> {
    match regressors {
        None if cfg.regressor_names.is_empty() => Ok(None),
        None => Err(Error::MisalignedRegressors(format!(
            "config names {} regressors but none were supplied",
            cfg.regressor_names.len()
        ))),
        Some(m) if m.columns != cfg.regressor_names => Err(Error::MisalignedRegressors(
            "regressor columns differ from the configured names".into(),
        )),
        Some(m) if cfg.regressor_names.is_empty() => {
            debug_assert_eq!(m.n_cols(), 0);
            Ok(None)
        }
        Some(m) => Ok(Some(m)),
    }
}

fn find_row(m: &FeatureMatrix, hour: i64) -> Option<usize> {
    m.hours.binary_search(&hour).ok()
}

/// Fits the decomposer to the present values of `y`. With regressors, only
/// hours that also have a regressor row are used.
pub fn stad_fit(y: &TimeSeries, regressors: Option<&FeatureMatrix>, cfg: &StadConfig) -> Result<StadModel> {
    stad_fit_with(y, regressors, cfg, Execution::default())
}

pub fn stad_fit_with(
    y: &TimeSeries,
    regressors: Option<&FeatureMatrix>,
    cfg: &StadConfig,
    exec: Execution,
) -> Result<StadModel> {
    cfg.validate()?;
    let reg = regressor_rows(cfg, regressors)?;
    if let Some(m) = reg {
        if m.hours.first().is_some_and(|&h| h < y.start_hour())
            || m.hours.last().is_some_and(|&h| h >= y.end_hour())
        {
            return Err(Error::MisalignedRegressors(
                "regressor rows fall outside the series span".into(),
            ));
        }
    }

    // (hour, target, regressor row)
    let samples: Vec<(i64, f64, Option<usize>)> = (0..y.len())
        .filter_map(|i| {
            let v = y.get(i)?;
            let hour = y.hour_at(i);
            match reg {
                Some(m) => find_row(m, hour).map(|r| (hour, v, Some(r))),
                None => Some((hour, v, None)),
            }
        })
        .collect();
    if samples.len() < 2 {
        return Err(Error::TooFewRows(format!("{} usable hours", samples.len())));
    }
    let origin = samples[0].0;
    let last = samples[samples.len() - 1].0;
    let scale = (last - origin).max(1) as f64;
    let changepoints: Vec<f64> = (1..=cfg.changepoints)
        .map(|j| cfg.changepoint_range * j as f64 / cfg.changepoints as f64)
        .collect();

    let layout = Layout::of(cfg);
    let p = layout.total;
    let cp = cross_products(exec, samples.len(), p, |i, buf| {
        let (hour, v, r) = samples[i];
        let mut row = Vec::with_capacity(p);
        let rrow = r.map(|r| reg.expect("regressors present").row(r));
        design_row(cfg, &changepoints, origin, scale, hour, rrow, &mut row);
        buf.copy_from_slice(&row);
        v
    });

    let mut a = cp.xtx;
    for j in 2..layout.n_trend {
        a[j * p + j] += cfg.trend_reg;
    }
    for j in layout.fourier..layout.regressor {
        a[j * p + j] += cfg.seasonal_reg;
    }
    for j in layout.regressor..p {
        a[j * p + j] += cfg.regressor_reg;
    }
    let w = cholesky_solve(&a, p, &cp.xty)?;

    let mut seasonal_weights = Vec::with_capacity(cfg.seasonal_blocks.len());
    let mut at = layout.fourier;
    for b in &cfg.seasonal_blocks {
        seasonal_weights.push(w[at..at + 2 * b.order].to_vec());
        at += 2 * b.order;
    }
    let mut daypart_weights = w[layout.daypart..layout.holiday].to_vec();
    if cfg.dayparts.is_some() {
        daypart_weights.push(-daypart_weights.iter().sum::<f64>());
    }
    Ok(StadModel {
        config: cfg.clone(),
        origin,
        time_scale: scale,
        trend: Trend {
            intercept: w[0],
            slope: w[1],
            deltas: w[2..layout.n_trend].to_vec(),
            changepoints,
        },
        seasonal_weights,
        daypart_weights,
        holiday_weights: w[layout.holiday..layout.regressor].to_vec(),
        regressor_weights: w[layout.regressor..].to_vec(),
        fit_span: (origin, last),
    })
}

impl StadModel {
    fn scaled_time(&self, hour: i64) -> f64 {
        (hour - self.origin) as f64 / self.time_scale
    }

    /// Piecewise-linear trend; beyond the last changepoint it continues with
    /// the final slope.
    pub fn trend_at(&self, hour: i64) -> f64 {
        let t = self.scaled_time(hour);
        let mut g = self.trend.intercept + self.trend.slope * t;
        for (d, c) in self.trend.deltas.iter().zip(&self.trend.changepoints) {
            g += d * (t - c).max(0.0);
        }
        g
    }

    /// Base trend segment as `(value at hour 0, slope per hour)`.
    pub fn base_trend_per_hour(&self) -> (f64, f64) {
        let slope = self.trend.slope / self.time_scale;
        (self.trend.intercept - slope * self.origin as f64, slope)
    }

    pub fn block_at(&self, block: usize, hour: i64) -> f64 {
        let b = &self.config.seasonal_blocks[block];
        let mut basis = Vec::with_capacity(2 * b.order);
        push_fourier(&mut basis, hour as f64, b.period, b.order);
        basis.iter().zip(&self.seasonal_weights[block]).map(|(x, w)| x * w).sum()
    }

    pub fn daypart_at(&self, hour: i64) -> f64 {
        let Some(parts) = &self.config.dayparts else {
            return 0.0;
        };
        let h = hour_of_day(hour);
        parts
            .iter()
            .zip(&self.daypart_weights)
            .find(|(p, _)| p.contains(h))
            .map_or(0.0, |(_, w)| *w)
    }

    /// `s(t)`: every Fourier block plus the daypart level.
    pub fn seasonal_at(&self, hour: i64) -> f64 {
        (0..self.config.seasonal_blocks.len())
            .map(|b| self.block_at(b, hour))
            .sum::<f64>()
            + self.daypart_at(hour)
    }

    pub fn holiday_at(&self, hour: i64) -> f64 {
        if self.config.holidays.is_empty() {
            return 0.0;
        }
        let d = date_of(hour);
        self.config
            .holidays
            .iter()
            .zip(&self.holiday_weights)
            .filter(|(hd, _)| **hd == d)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn regressor_effect(&self, row: &[f64]) -> f64 {
        self.regressor_weights.iter().zip(row).map(|(w, x)| w * x).sum()
    }

    pub fn uses_regressors(&self) -> bool {
        !self.regressor_weights.is_empty()
    }

    /// Full model value at `hour`.
    pub fn predict(&self, hour: i64, regressors: Option<&[f64]>) -> Result<f64> {
        let r = match (self.uses_regressors(), regressors) {
            (false, _) => 0.0,
            (true, Some(row)) => self.regressor_effect(row),
            (true, None) => return Err(Error::MissingRegressors(hour)),
        };
        Ok(self.trend_at(hour) + self.seasonal_at(hour) + self.holiday_at(hour) + r)
    }

    /// All weights in design order, with the five daypart levels expanded.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.trend.intercept, self.trend.slope];
        w.extend(&self.trend.deltas);
        for s in &self.seasonal_weights {
            w.extend(s);
        }
        w.extend(&self.daypart_weights);
        w.extend(&self.holiday_weights);
        w.extend(&self.regressor_weights);
        w
    }

    pub fn seasonal_norm(&self) -> f64 {
        self.seasonal_weights
            .iter()
            .flatten()
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt()
    }
}

/// Separate component series over a span.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub trend: TimeSeries,
    pub seasonal: TimeSeries,
    pub holiday: TimeSeries,
    pub regressor: TimeSeries,
}

/// Components plus the residual against observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub trend: TimeSeries,
    pub seasonal: TimeSeries,
    pub holiday: TimeSeries,
    /// Regressor contribution; all zeros for models without regressors.
    pub regressor: TimeSeries,
    pub residual: TimeSeries,
    pub fitted: TimeSeries,
}

/// Evaluates each component at hours `[start, start + len)`. Outside the
/// fit span the trend extrapolates linearly and seasonality periodically.
pub fn stad_components(
    model: &StadModel,
    start: i64,
    len: usize,
    regressors: Option<&FeatureMatrix>,
) -> Result<Components> {
    let reg = regressor_rows(&model.config, regressors)?;
    let mut trend = Vec::with_capacity(len);
    let mut seasonal = Vec::with_capacity(len);
    let mut holiday = Vec::with_capacity(len);
    let mut regressor = Vec::with_capacity(len);
    for i in 0..len {
        let hour = start + i as i64;
        trend.push(Some(model.trend_at(hour)));
        seasonal.push(Some(model.seasonal_at(hour)));
        holiday.push(Some(model.holiday_at(hour)));
        let r = match reg {
            None => 0.0,
            Some(m) => {
                let row = find_row(m, hour).ok_or(Error::MissingRegressors(hour))?;
                model.regressor_effect(m.row(row))
            }
        };
        regressor.push(Some(r));
    }
    let mk = |v, name: &str| TimeSeries::from_hour(start, v, name, "scaled");
    Ok(Components {
        trend: mk(trend, "trend"),
        seasonal: mk(seasonal, "seasonal"),
        holiday: mk(holiday, "holiday"),
        regressor: mk(regressor, "regressor"),
    })
}

/// Decomposes `y` with a fitted model. Residuals are gaps where `y` is.
pub fn decompose(model: &StadModel, y: &TimeSeries, regressors: Option<&FeatureMatrix>) -> Result<Decomposition> {
    let c = stad_components(model, y.start_hour(), y.len(), regressors)?;
    let fitted: Vec<Option<f64>> = (0..y.len())
        .map(|i| {
            Some(
                c.trend.get(i).unwrap()
                    + c.seasonal.get(i).unwrap()
                    + c.holiday.get(i).unwrap()
                    + c.regressor.get(i).unwrap(),
            )
        })
        .collect();
    let residual = (0..y.len())
        .map(|i| Some(y.get(i)? - fitted[i].unwrap()))
        .collect();
    Ok(Decomposition {
        trend: c.trend,
        seasonal: c.seasonal,
        holiday: c.holiday,
        regressor: c.regressor,
        residual: TimeSeries::from_hour(y.start_hour(), residual, "residual", "scaled"),
        fitted: TimeSeries::from_hour(y.start_hour(), fitted, "fitted", "scaled"),
    })
}

/// `y − s − h`; the trend stays in the output.
pub fn deseasonalize(y: &TimeSeries, model: &StadModel) -> TimeSeries {
    deseasonalize_with(y, model, false)
}

/// `y − s − h`, additionally minus `g` when `subtract_trend` is set.
pub fn deseasonalize_with(y: &TimeSeries, model: &StadModel, subtract_trend: bool) -> TimeSeries {
    let values = (0..y.len())
        .map(|i| {
            let hour = y.hour_at(i);
            let mut v = y.get(i)? - model.seasonal_at(hour) - model.holiday_at(hour);
            if subtract_trend {
                v -= model.trend_at(hour);
            }
            Some(v)
        })
        .collect();
    TimeSeries::from_hour(y.start_hour(), values, y.name.clone(), y.unit.clone())
}

impl Decomposition {
    /// Writes `timestamp,trend,seasonal,holiday,regressor,residual,fitted`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["timestamp", "trend", "seasonal", "holiday", "regressor", "residual", "fitted"])?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for i in 0..self.trend.len() {
            w.write_record([
                format_hour(self.trend.hour_at(i)),
                cell(self.trend.get(i)),
                cell(self.seasonal.get(i)),
                cell(self.holiday.get(i)),
                cell(self.regressor.get(i)),
                cell(self.residual.get(i)),
                cell(self.fitted.get(i)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: i64 = 420_000;

    fn daily_only(order: usize) -> StadConfig {
        StadConfig {
            seasonal_blocks: vec![SeasonalBlock::new("daily", 24.0, order)],
            dayparts: None,
            changepoints: 0,
            trend_reg: 0.0,
            seasonal_reg: 0.0,
            regressor_reg: 0.0,
            ..StadConfig::default()
        }
    }

    fn sinusoid(n: usize) -> TimeSeries {
        let v: Vec<f64> = (0..n)
            .map(|i| 2.0 + 3.0 * (2.0 * PI * (T0 + i as i64) as f64 / 24.0).sin())
            .collect();
        TimeSeries::dense(T0, &v, "y", "scaled")
    }

    #[test]
    fn fourier_shape_and_period() {
        assert_eq!(fourier_basis(0.0, 24.0, 2), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(fourier_basis(24.0, 24.0, 2), fourier_basis(0.0, 24.0, 2));
        assert_eq!(fourier_basis(17.0, 8766.0, 3).len(), 6);
        assert_eq!(fourier_basis(5.0 + 4383.0, 4383.0, 2), fourier_basis(5.0, 4383.0, 2));
    }

    #[test]
    fn hinges() {
        let b = trend_basis(1.0, &[2.0, 3.0]);
        assert_eq!(b, vec![1.0, 1.0, 0.0, 0.0]);
        let b = trend_basis(3.0, &[2.0, 3.0]);
        assert_eq!(b, vec![1.0, 3.0, 1.0, 0.0]);
    }

    #[test]
    fn recovers_line() {
        let v: Vec<f64> = (0..200).map(|t| 2.0 + 3.0 * t as f64).collect();
        let y = TimeSeries::dense(0, &v, "y", "");
        let cfg = StadConfig {
            changepoints: 0,
            trend_reg: 0.0,
            ..StadConfig::trend_only()
        };
        let m = stad_fit(&y, None, &cfg).unwrap();
        let (a, b) = m.base_trend_per_hour();
        assert!((a - 2.0).abs() < 1e-8 && (b - 3.0).abs() < 1e-8);
    }

    #[test]
    fn recovers_sinusoid() {
        let y = sinusoid(24 * 30);
        let m = stad_fit(&y, None, &daily_only(2)).unwrap();
        assert!((m.seasonal_weights[0][0] - 3.0).abs() < 1e-6);
        assert!(m.seasonal_weights[0][1..].iter().all(|w| w.abs() < 1e-6));
        assert!((m.trend_at(T0) - 2.0).abs() < 1e-6);
        assert!((m.trend_at(T0 + 500) - 2.0).abs() < 1e-6);
        // One period past the fit span.
        let end = T0 + 24 * 30;
        for h in end..end + 24 {
            let truth = 2.0 + 3.0 * (2.0 * PI * h as f64 / 24.0).sin();
            assert!((m.predict(h, None).unwrap() - truth).abs() < 1e-5);
        }
        let d = deseasonalize(&y, &m);
        assert!(d.present().all(|v| (v - 2.0).abs() < 1e-6));
    }

    #[test]
    fn constant_signal() {
        let y = TimeSeries::dense(T0, &vec![0.4; 24 * 21], "y", "");
        let m = stad_fit(&y, None, &StadConfig::default()).unwrap();
        assert!(m.seasonal_norm() < 1e-9);
        assert!((m.trend_at(T0 + 100) - 0.4).abs() < 1e-9);
    }

    #[test]
    fn weight_count_invariant() {
        let mut cfg = StadConfig::default();
        cfg.holidays = vec![NaiveDate::from_ymd_opt(2017, 12, 25).unwrap()];
        let y = sinusoid(24 * 60);
        let m = stad_fit(&y, None, &cfg).unwrap();
        assert_eq!(m.weights().len(), 2 * (6 + 3 + 10 + 2) + 5 + 1 + 0 + (25 + 2));
        assert_eq!(m.weights().len(), cfg.n_weights());
        assert!(m.daypart_weights.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn unpenalized_collinear_blocks_are_singular() {
        let cfg = StadConfig {
            trend_reg: 0.0,
            seasonal_reg: 0.0,
            regressor_reg: 0.0,
            ..StadConfig::default()
        };
        let y = sinusoid(24 * 400);
        assert!(matches!(stad_fit(&y, None, &cfg), Err(Error::SingularSystem)));
    }

    #[test]
    fn periodic_extrapolation() {
        let m = stad_fit(&sinusoid(24 * 10), None, &daily_only(3)).unwrap();
        for h in [T0 - 1000, T0 + 7, T0 + 10_000] {
            assert_eq!(m.block_at(0, h), m.block_at(0, h + 24));
        }
    }

    #[test]
    fn zero_seasonal_model_is_identity() {
        let y = sinusoid(100);
        let m = stad_fit(&y, None, &StadConfig::trend_only()).unwrap();
        assert_eq!(deseasonalize(&y, &m), y);
    }

    #[test]
    fn regressor_alignment_checked() {
        let y = sinusoid(100);
        let mut cfg = daily_only(1);
        cfg.regressor_names = vec!["a".into()];
        assert!(matches!(stad_fit(&y, None, &cfg), Err(Error::MisalignedRegressors(_))));
        let reg = FeatureMatrix {
            columns: vec!["b".into()],
            data: vec![1.0; 100],
            target: vec![0.0; 100],
            hours: (T0..T0 + 100).collect(),
        };
        assert!(matches!(stad_fit(&y, Some(&reg), &cfg), Err(Error::MisalignedRegressors(_))));
    }

    #[test]
    fn invalid_config() {
        let mut cfg = StadConfig::default();
        cfg.dayparts = Some(vec![Daypart::new("a", 0, 12), Daypart::new("b", 11, 0)]);
        assert!(cfg.validate().is_err());
        let mut cfg = StadConfig::default();
        cfg.seasonal_blocks[0].order = 0;
        assert!(cfg.validate().is_err());
    }

    fn noisy(n: usize, seed: u64, gap_every: usize) -> TimeSeries {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let v: Vec<Option<f64>> = (0..n)
            .map(|i| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let noise = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                let h = (T0 + i as i64) as f64;
                let v = 0.3 + 0.001 * i as f64 + 0.2 * (2.0 * PI * h / 24.0).cos() + 0.1 * noise;
                (gap_every == 0 || i % gap_every != 3).then_some(v)
            })
            .collect();
        TimeSeries::from_hour(T0, v, "y", "scaled")
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]

        #[test]
        fn components_add_up(seed in 0u64..500, n in 60usize..400, gap_every in 0usize..9) {
            let y = noisy(n, seed, gap_every);
            let mut cfg = StadConfig::default();
            cfg.changepoints = 5;
            cfg.holidays = vec![datetime_of(T0 + 30).date_naive()];
            let m = stad_fit(&y, None, &cfg).unwrap();
            let d = decompose(&m, &y, None).unwrap();
            for i in 0..n {
                match y.get(i) {
                    None => proptest::prop_assert!(d.residual.get(i).is_none()),
                    Some(v) => {
                        let sum = d.trend.get(i).unwrap() + d.seasonal.get(i).unwrap()
                            + d.holiday.get(i).unwrap() + d.regressor.get(i).unwrap()
                            + d.residual.get(i).unwrap();
                        proptest::prop_assert!((sum - v).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn seasonal_norm_shrinks_with_penalty(seed in 0u64..500) {
            let y = noisy(24 * 20, seed, 0);
            let mut cfg = StadConfig { dayparts: None, changepoints: 4, ..StadConfig::default() };
            let mut last = f64::INFINITY;
            for lambda in [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0] {
                cfg.seasonal_reg = lambda;
                let norm = stad_fit(&y, None, &cfg).unwrap().seasonal_norm();
                proptest::prop_assert!(norm <= last * (1.0 + 1e-9));
                last = norm;
            }
        }
    }

    #[test]
    fn deterministic_across_modes() {
        let y = noisy(24 * 200, 7, 5);
        let cfg = StadConfig::default();
        let a = stad_fit_with(&y, None, &cfg, Execution::Sequential).unwrap();
        let b = stad_fit_with(&y, None, &cfg, Execution::Parallel).unwrap();
        let c = stad_fit(&y, None, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn decomposition_csv_header() {
        let y = noisy(48, 1, 0);
        let m = stad_fit(&y, None, &StadConfig::trend_only()).unwrap();
        let mut out = Vec::new();
        decompose(&m, &y, None).unwrap().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("timestamp,trend,seasonal,holiday,regressor,residual,fitted\n"));
        assert_eq!(text.lines().count(), 49);
    }
}
