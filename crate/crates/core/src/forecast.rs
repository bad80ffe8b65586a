//! Forecasters: persistence, direct Extra-Trees, direct decomposer and the
//! decomposer + Extra-Trees hybrid.
//!
//! Every forecaster works in min-max scaled units fitted on its training
//! split. Forecasting walks hour by hour over a span without refitting and
//! reads data only through [`DataAccess`], so the availability constraint
//! can be audited.

mod bundle;

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::access::{AuditedAccess, DataAccess, HourAudit};
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::features::{build_matrix_with, rfe, FeatureMatrix, FeatureSpec, ResolvedWeather, SelectionResult};
use crate::ingest::{AlignedDataset, EnergyType};
use crate::series::{format_hour, minmax_fit, minmax_transform, parse_hour, ScalerParams, TimeSeries};
use crate::stad::{stad_fit_with, StadConfig, StadModel};
use crate::trees::{ext_fit_with, grid_search_with, ExtParams, Forest, GridResult, ParamGrid, SplitMode};

pub use bundle::{load_bundle, save_bundle, BUNDLE_MANIFEST};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Persistence { n_days: usize },
    MlDirect,
    StadDirect,
    Hybrid,
}

impl ModelKind {
    pub fn id(&self) -> String {
        match self {
            ModelKind::Persistence { n_days } => format!("persistence_t-{n_days}"),
            ModelKind::MlDirect => "ml_direct".into(),
            ModelKind::StadDirect => "stad_direct".into(),
            ModelKind::Hybrid => "hybrid".into(),
        }
    }
}

/// Settings shared by all fitting pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    /// Design-matrix recipe; `None` uses [`FeatureSpec::canonical`].
    pub feature_spec: Option<FeatureSpec>,
    /// Columns kept by RFE; `None` uses 150 for solar and 160 for wind.
    /// Clamped to the matrix width.
    pub rfe_k: Option<usize>,
    pub rfe_step: usize,
    pub rfe_lambda: f64,
    pub grid: ParamGrid,
    /// Base tree parameters (and seed) that grid axes override.
    pub trees: ExtParams,
    pub stad: StadConfig,
    /// Feed the external regressor set to the decomposer.
    pub stad_regressors: bool,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            feature_spec: None,
            rfe_k: None,
            rfe_step: 2,
            rfe_lambda: 1.0,
            grid: ParamGrid::default_grid(),
            trees: ExtParams::default(),
            stad: StadConfig::default(),
            stad_regressors: true,
        }
    }
}

impl ForecastConfig {
    pub fn feature_spec(&self, energy_type: EnergyType) -> FeatureSpec {
        self.feature_spec
            .clone()
            .unwrap_or_else(|| FeatureSpec::canonical(energy_type))
    }

    fn rfe_k(&self, energy_type: EnergyType, width: usize) -> usize {
        let k = self.rfe_k.unwrap_or(match energy_type {
            EnergyType::Solar => 150,
            EnergyType::Wind => 160,
        });
        k.min(width)
    }
}

/// A fitted forecaster. Only the artifacts its kind needs are populated.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    pub kind: ModelKind,
    pub energy_type: EnergyType,
    pub energy_scaler: ScalerParams,
    pub weather_scalers: Vec<(String, ScalerParams)>,
    pub feature_spec: Option<FeatureSpec>,
    pub selection: Option<SelectionResult>,
    pub grid: Option<GridResult>,
    pub forest: Option<Forest>,
    pub stad: Option<StadModel>,
    pub stad_spec: Option<FeatureSpec>,
}

impl Forecaster {
    pub fn model_id(&self) -> String {
        self.kind.id()
    }

    /// Applies the training scalers to a raw dataset.
    pub fn scale(&self, data: &AlignedDataset) -> Result<AlignedDataset> {
        scale_with(data, &self.energy_scaler, &self.weather_scalers)
    }
}

/// Wall-clock time of one fitting stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Default)]
struct Stopwatch {
    stages: Vec<StageTiming>,
}

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        let seconds = start.elapsed().as_secs_f64();
        log::info!("{stage}: {seconds:.2}s");
        self.stages.push(StageTiming {
            stage: stage.to_string(),
            seconds,
        });
        Ok(out)
    }
}

fn weather_scaler(name: &str, values: &[Option<f64>]) -> ScalerParams {
    let series = TimeSeries::from_hour(0, values.to_vec(), name, "");
    match minmax_fit(&series) {
        Ok(p) => p,
        // Constant or empty variables are only shifted.
        Err(_) => {
            let min = series.present().next().unwrap_or(0.0);
            ScalerParams { min, max: min + 1.0 }
        }
    }
}

fn fit_scalers(train: &AlignedDataset) -> Result<(ScalerParams, Vec<(String, ScalerParams)>)> {
    let energy = minmax_fit(&train.energy)?;
    let weather = train
        .weather
        .variables()
        .iter()
        .map(|(n, v)| (n.clone(), weather_scaler(n, v)))
        .collect();
    Ok((energy, weather))
}

fn scale_with(
    data: &AlignedDataset,
    energy: &ScalerParams,
    weather: &[(String, ScalerParams)],
) -> Result<AlignedDataset> {
    let frame = data.weather.map_variables(|name, values| {
        let p = weather
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::MissingVariable(name.to_string()))?;
        Ok(values.iter().map(|v| v.map(|x| p.scale(x))).collect())
    })?;
    AlignedDataset::new(minmax_transform(&data.energy, energy), frame, data.energy_type)
}

/// `y[t − 24·n_days]`.
pub fn persistence_forecast(history: &TimeSeries, t: usize, n_days: usize) -> Result<f64> {
    let back = 24 * n_days;
    if t < back {
        return Err(Error::InsufficientHistory(t));
    }
    history.get(t - back).ok_or(Error::GapAtLag(t - back))
}

pub fn fit(kind: ModelKind, train: &AlignedDataset, cfg: &ForecastConfig) -> Result<Forecaster> {
    fit_logged(kind, train, cfg).map(|(f, _)| f)
}

/// Fits `kind` and reports per-stage timings.
pub fn fit_logged(kind: ModelKind, train: &AlignedDataset, cfg: &ForecastConfig) -> Result<(Forecaster, Vec<StageTiming>)> {
    let mut clock = Stopwatch::default();
    let (energy_scaler, weather_scalers) = clock.time("scale", || fit_scalers(train))?;
    let mut f = Forecaster {
        kind,
        energy_type: train.energy_type,
        energy_scaler,
        weather_scalers,
        feature_spec: None,
        selection: None,
        grid: None,
        forest: None,
        stad: None,
        stad_spec: None,
    };
    if let ModelKind::Persistence { n_days } = kind {
        if n_days == 0 {
            return Err(Error::InvalidParams("persistence needs n_days >= 1".into()));
        }
        return Ok((f, clock.stages));
    }
    let scaled = f.scale(train)?;
    let exec = Execution::default();

    let mut residual_target: Option<Vec<f64>> = None;
    if matches!(kind, ModelKind::StadDirect | ModelKind::Hybrid) {
        let (stad, spec) = clock.time("decompose", || fit_stad(&scaled, cfg, exec))?;
        f.stad = Some(stad);
        f.stad_spec = spec;
        if kind == ModelKind::StadDirect {
            return Ok((f, clock.stages));
        }
    }

    let spec = cfg.feature_spec(train.energy_type);
    let x = clock.time("features", || build_matrix_with(&scaled, &spec, 0..scaled.len(), exec))?;
    if let Some(stad) = &f.stad {
        residual_target = Some(
            x.hours
                .iter()
                .zip(&x.target)
                .map(|(&h, &y)| y - stad.seasonal_at(h) - stad.holiday_at(h))
                .collect(),
        );
    }
    let x = match residual_target {
        Some(t) => x.with_target(t),
        None => x,
    };
    let k = cfg.rfe_k(train.energy_type, x.n_cols());
    let selection = clock.time("rfe", || rfe(&x, &x.target, k, cfg.rfe_step, cfg.rfe_lambda))?;
    let x = x.select_names(&selection.kept)?;
    let grid = clock.time("grid_search", || grid_search_with(&x, &cfg.grid, &cfg.trees, exec))?;
    let forest = clock.time("ext_fit", || ext_fit_with(&x, &grid.best, SplitMode::Random, exec))?;
    f.feature_spec = Some(spec);
    f.selection = Some(selection);
    f.grid = Some(grid);
    f.forest = Some(forest);
    Ok((f, clock.stages))
}

pub fn fit_ml_direct(train: &AlignedDataset, cfg: &ForecastConfig) -> Result<Forecaster> {
    fit(ModelKind::MlDirect, train, cfg)
}

pub fn fit_stad_direct(train: &AlignedDataset, cfg: &ForecastConfig) -> Result<Forecaster> {
    fit(ModelKind::StadDirect, train, cfg)
}

pub fn fit_hybrid(train: &AlignedDataset, cfg: &ForecastConfig) -> Result<Forecaster> {
    fit(ModelKind::Hybrid, train, cfg)
}

fn fit_stad(scaled: &AlignedDataset, cfg: &ForecastConfig, exec: Execution) -> Result<(StadModel, Option<FeatureSpec>)> {
    if !cfg.stad_regressors {
        let mut stad_cfg = cfg.stad.clone();
        stad_cfg.regressor_names.clear();
        return Ok((stad_fit_with(&scaled.energy, None, &stad_cfg, exec)?, None));
    }
    let spec = FeatureSpec::decomposer_regressors(scaled.energy_type);
    let regressors = build_matrix_with(scaled, &spec, 0..scaled.len(), exec)?;
    let mut stad_cfg = cfg.stad.clone();
    stad_cfg.regressor_names = regressors.columns.clone();
    let model = stad_fit_with(&scaled.energy, Some(&regressors), &stad_cfg, exec)?;
    Ok((model, Some(spec)))
}

/// Per-hour state resolved once per walk.
struct Prepared<'a> {
    f: &'a Forecaster,
    features: Option<(&'a FeatureSpec, Vec<ResolvedWeather>, Vec<usize>)>,
    regressors: Option<(&'a FeatureSpec, Vec<ResolvedWeather>)>,
}

impl<'a> Prepared<'a> {
    fn new<A: DataAccess + ?Sized>(f: &'a Forecaster, access: &A) -> Result<Self> {
        let features = match (&f.feature_spec, &f.selection) {
            (Some(spec), Some(sel)) => {
                let names = spec.column_names();
                let idx = sel
                    .kept
                    .iter()
                    .map(|k| {
                        names
                            .iter()
                            .position(|n| n == k)
                            .ok_or_else(|| Error::Bundle(format!("selected column `{k}` not in spec")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some((spec, spec.resolve(access)?, idx))
            }
            _ => None,
        };
        let regressors = match &f.stad_spec {
            Some(spec) => Some((spec, spec.resolve(access)?)),
            None => None,
        };
        Ok(Prepared {
            f,
            features,
            regressors,
        })
    }

    fn forest_part<A: DataAccess + ?Sized>(&self, access: &A, t: usize) -> Result<f64> {
        let (spec, weather, idx) = self.features.as_ref().expect("forest model has features");
        let row = spec.row(access, t, weather)?;
        let selected: Vec<f64> = idx.iter().map(|&j| row[j]).collect();
        Ok(self.f.forest.as_ref().expect("forest present").predict_row(&selected))
    }

    /// Scaled prediction for index `t` of `access`.
    fn predict<A: DataAccess + ?Sized>(&self, access: &A, t: usize) -> Result<f64> {
        let hour = access.start_hour() + t as i64;
        match self.f.kind {
            ModelKind::Persistence { n_days } => {
                let back = 24 * n_days;
                if t < back {
                    return Err(Error::InsufficientHistory(t));
                }
                access.energy(t - back).ok_or(Error::GapAtLag(t - back))
            }
            ModelKind::MlDirect => self.forest_part(access, t),
            ModelKind::StadDirect => {
                let stad = self.f.stad.as_ref().expect("decomposer present");
                let row = match &self.regressors {
                    Some((spec, weather)) => Some(spec.row(access, t, weather)?),
                    None => None,
                };
                stad.predict(hour, row.as_deref())
            }
            ModelKind::Hybrid => {
                let stad = self.f.stad.as_ref().expect("decomposer present");
                Ok(self.forest_part(access, t)? + stad.seasonal_at(hour) + stad.holiday_at(hour))
            }
        }
    }
}

/// Predictions against actuals over one span, both in scaled units.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRun {
    pub model_id: String,
    pub energy_type: EnergyType,
    pub predictions: TimeSeries,
    pub actuals: TimeSeries,
}

/// An hour the walk could not forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedHour {
    pub hour: i64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastOutcome {
    pub run: ForecastRun,
    pub skipped: Vec<SkippedHour>,
}

fn span_indices(data: &AlignedDataset, span: &Range<i64>) -> Result<Range<usize>> {
    if span.start >= span.end {
        return Err(Error::InvalidSplit("empty forecast span".into()));
    }
    if span.start < data.start_hour() || span.end > data.end_hour() {
        return Err(Error::OutOfRange(format!(
            "{}..{}",
            format_hour(span.start),
            format_hour(span.end)
        )));
    }
    let lo = (span.start - data.start_hour()) as usize;
    let hi = (span.end - data.start_hour()) as usize;
    Ok(lo..hi)
}

pub fn forecast(f: &Forecaster, data: &AlignedDataset, span: Range<i64>) -> Result<ForecastOutcome> {
    forecast_with(f, data, span, Execution::default())
}

/// One-hour-ahead predictions for every hour in `span` (epoch hours,
/// end exclusive). `data` is raw and must include the history the
/// forecaster needs before the span.
pub fn forecast_with(f: &Forecaster, data: &AlignedDataset, span: Range<i64>, exec: Execution) -> Result<ForecastOutcome> {
    let idx = span_indices(data, &span)?;
    let scaled = f.scale(data)?;
    let prepared = Prepared::new(f, &scaled)?;
    let results = map_range(exec, idx.len(), |i| prepared.predict(&scaled, idx.start + i));
    let mut predictions = Vec::with_capacity(idx.len());
    let mut skipped = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => predictions.push(Some(v)),
            Err(e) => {
                predictions.push(None);
                skipped.push(SkippedHour {
                    hour: span.start + i as i64,
                    reason: e.to_string(),
                });
            }
        }
    }
    if !skipped.is_empty() {
        log::info!("{}: skipped {} of {} hours", f.model_id(), skipped.len(), idx.len());
    }
    Ok(ForecastOutcome {
        run: ForecastRun {
            model_id: f.model_id(),
            energy_type: f.energy_type,
            predictions: TimeSeries::from_hour(span.start, predictions, f.model_id(), "scaled"),
            actuals: scaled.energy.slice_hours(span.start, span.end),
        },
        skipped,
    })
}

/// Forecasts each hour in `span` through an [`AuditedAccess`] and returns
/// the read log of every hour, forecast or skipped.
pub fn forecast_audited(f: &Forecaster, data: &AlignedDataset, span: Range<i64>) -> Result<Vec<HourAudit>> {
    let idx = span_indices(data, &span)?;
    let scaled = f.scale(data)?;
    let prepared = Prepared::new(f, &scaled)?;
    Ok(idx
        .map(|t| {
            let audited = AuditedAccess::new(&scaled, t);
            let _ = prepared.predict(&audited, t);
            audited.finish()
        })
        .collect())
}

impl ForecastRun {
    pub fn len(&self) -> usize {
        self.actuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actuals.is_empty()
    }

    /// `(predicted, actual)` for hours where both exist.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        (0..self.len())
            .filter_map(|i| Some((self.predictions.get(i)?, self.actuals.get(i)?)))
            .collect()
    }

    /// Hours where both a prediction and an actual exist.
    pub fn valid_hours(&self) -> BTreeSet<i64> {
        (0..self.len())
            .filter(|&i| self.predictions.get(i).is_some() && self.actuals.get(i).is_some())
            .map(|i| self.actuals.hour_at(i))
            .collect()
    }

    /// Masks every hour outside `keep`.
    pub fn restrict(&self, keep: &BTreeSet<i64>) -> ForecastRun {
        let mask = |s: &TimeSeries| {
            let v = (0..s.len())
                .map(|i| s.get(i).filter(|_| keep.contains(&s.hour_at(i))))
                .collect();
            TimeSeries::from_hour(s.start_hour(), v, s.name.clone(), s.unit.clone())
        };
        ForecastRun {
            model_id: self.model_id.clone(),
            energy_type: self.energy_type,
            predictions: mask(&self.predictions),
            actuals: mask(&self.actuals),
        }
    }

    /// Writes `timestamp,actual,predicted`; gaps are empty cells.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["timestamp", "actual", "predicted"])?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for i in 0..self.len() {
            w.write_record([
                format_hour(self.actuals.hour_at(i)),
                cell(self.actuals.get(i)),
                cell(self.predictions.get(i)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R, model_id: &str, energy_type: EnergyType) -> Result<ForecastRun> {
        let mut rdr = csv::Reader::from_reader(source);
        let mut start = None;
        let mut actuals = Vec::new();
        let mut predictions = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let hour = parse_hour(&rec[0])?;
            let expected = start.get_or_insert(hour);
            if hour != *expected + actuals.len() as i64 {
                return Err(Error::Parse {
                    line,
                    message: "timestamps are not consecutive hours".into(),
                });
            }
            let cell = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse().map(Some).map_err(|_| Error::Parse {
                    line,
                    message: format!("bad number `{s}`"),
                })
            };
            actuals.push(cell(&rec[1])?);
            predictions.push(cell(&rec[2])?);
        }
        let start = start.ok_or(Error::EmptyRun)?;
        Ok(ForecastRun {
            model_id: model_id.to_string(),
            energy_type,
            predictions: TimeSeries::from_hour(start, predictions, model_id, "scaled"),
            actuals: TimeSeries::from_hour(start, actuals, "actual", "scaled"),
        })
    }
}

/// Restricts every run to the hours valid in all of them. Runs must share
/// one span.
pub fn common_support(runs: &[ForecastRun]) -> Result<Vec<ForecastRun>> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    for r in runs {
        if r.actuals.start_hour() != first.actuals.start_hour() || r.len() != first.len() {
            return Err(Error::SpanMismatch);
        }
    }
    let mut keep = first.valid_hours();
    for r in &runs[1..] {
        let v = r.valid_hours();
        keep.retain(|h| v.contains(h));
    }
    Ok(runs.iter().map(|r| r.restrict(&keep)).collect())
}

/// Convenience: the design matrix a fitted forest model consumes, built
/// from a raw dataset.
pub fn selected_matrix(f: &Forecaster, data: &AlignedDataset) -> Result<FeatureMatrix> {
    let (Some(spec), Some(sel)) = (&f.feature_spec, &f.selection) else {
        return Err(Error::InvalidParams(format!("{} has no feature pipeline", f.model_id())));
    };
    let scaled = f.scale(data)?;
    build_matrix_with(&scaled, spec, 0..scaled.len(), Execution::default())?.select_names(&sel.kept)
}
