//! Design-matrix construction and ridge-driven feature selection.
//!
//! A row is built for each target index `t` from four column families, in
//! this order: cyclical calendar encodings, lagged energy, rolling statistics
//! over an energy window, and weather values at offsets around `t`. Every
//! family respects the availability constraint (energy no later than
//! `t - 48`, weather no later than `t + 24`); [`FeatureSpec::validate`]
//! rejects specs that would break it.

mod cyclical;
mod rfe;
mod ridge;
mod window;

use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::access::{DataAccess, ENERGY_LAG_HOURS, WEATHER_LEAD_HOURS};
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::ingest::{AlignedDataset, EnergyType};
use crate::series::{datetime_of, format_hour, parse_hour};

pub use cyclical::{encode_cyclical, CyclicalField};
pub use rfe::{rfe, EliminationStep, SelectionResult};
pub use ridge::{ridge_fit, RidgeModel};
pub use window::{lag_features, rolling_stats, weather_window, RollingStats};

/// Nominal design-matrix width the canonical spec targets.
pub const NOMINAL_WIDTH: usize = 176;

/// Weather offsets always kept by the canonical spec before padding.
const ANCHOR_OFFSETS: [i64; 10] = [-24, -12, -6, -3, -1, 1, 3, 6, 12, 24];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagRange {
    pub min: usize,
    pub max: usize,
}

impl Default for LagRange {
    fn default() -> Self {
        LagRange { min: 48, max: 96 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeatherColumns {
    pub variable: String,
    /// Offsets in hours relative to the target; negative = past.
    pub offsets: Vec<i64>,
}

/// Recipe for one feature row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub cyclical_fields: Vec<CyclicalField>,
    pub lags: Option<LagRange>,
    /// Span in hours of the rolling-statistics window ending at `t - 48`.
    pub rolling_window: Option<usize>,
    pub weather: Vec<WeatherColumns>,
}

/// Weather columns with variable names resolved to dataset positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedWeather {
    pub position: usize,
    pub offsets: Vec<i64>,
}

/// Where a column's value comes from, relative to the target index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSource {
    Calendar,
    Energy { offset: i64 },
    EnergyWindow { from: i64, to: i64 },
    Weather { variable: String, offset: i64 },
}

impl FeatureSpec {
    /// Every family at full resolution: weather at all offsets in `[-24, 24]`.
    pub fn full(energy_type: EnergyType) -> Self {
        FeatureSpec {
            cyclical_fields: CyclicalField::ALL.to_vec(),
            lags: Some(LagRange::default()),
            rolling_window: Some(48),
            weather: energy_type
                .weather_vars()
                .iter()
                .map(|v| WeatherColumns {
                    variable: v.to_string(),
                    offsets: (-WEATHER_LEAD_HOURS..=WEATHER_LEAD_HOURS).collect(),
                })
                .collect(),
        }
    }

    /// The pipeline default: [`full`](Self::full) with the weather block
    /// narrowed so the total width is [`NOMINAL_WIDTH`] (or as close as the
    /// variable count allows).
    pub fn canonical(energy_type: EnergyType) -> Self {
        Self::with_width(energy_type, NOMINAL_WIDTH)
    }

    /// Narrows the weather block so the total width reaches `width`. Each
    /// variable keeps the anchor offsets first, then the remaining offsets
    /// nearest the target; the budget is shared round-robin across variables.
    pub fn with_width(energy_type: EnergyType, width: usize) -> Self {
        let mut spec = Self::full(energy_type);
        let fixed = spec.width() - spec.weather.iter().map(|w| w.offsets.len()).sum::<usize>();
        let budget = width.saturating_sub(fixed);
        let nv = spec.weather.len();
        let priority = offset_priority();
        for (i, w) in spec.weather.iter_mut().enumerate() {
            let count = (budget / nv + usize::from(i < budget % nv)).min(priority.len());
            let mut offsets = priority[..count].to_vec();
            offsets.sort_unstable();
            w.offsets = offsets;
        }
        spec
    }

    /// Lagged energy only; no calendar, rolling or weather columns.
    pub fn raw_lags_only() -> Self {
        FeatureSpec {
            cyclical_fields: Vec::new(),
            lags: Some(LagRange::default()),
            rolling_window: None,
            weather: Vec::new(),
        }
    }

    /// External regressors for the decomposer: rolling statistics, energy
    /// lags 48 to 72 h, weather lags 48 to 72 h and weather leads 1 to 24 h.
    pub fn decomposer_regressors(energy_type: EnergyType) -> Self {
        FeatureSpec {
            cyclical_fields: Vec::new(),
            lags: Some(LagRange { min: 48, max: 72 }),
            rolling_window: Some(48),
            weather: energy_type
                .weather_vars()
                .iter()
                .map(|v| WeatherColumns {
                    variable: v.to_string(),
                    offsets: (-72..=-48).chain(1..=WEATHER_LEAD_HOURS).collect(),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lags {
            if l.min < ENERGY_LAG_HOURS as usize || l.max < l.min {
                return Err(Error::InvalidSpec(format!(
                    "lag range {}..={} must start at or beyond {ENERGY_LAG_HOURS}",
                    l.min, l.max
                )));
            }
        }
        if self.rolling_window == Some(0) {
            return Err(Error::InvalidSpec("rolling window must be positive".into()));
        }
        for w in &self.weather {
            if let Some(&o) = w.offsets.iter().find(|&&o| o > WEATHER_LEAD_HOURS) {
                return Err(Error::InvalidSpec(format!(
                    "weather offset +{o} for `{}` exceeds the {WEATHER_LEAD_HOURS} h forecast horizon",
                    w.variable
                )));
            }
        }
        let names = self.column_names();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::InvalidSpec("duplicate column names".into()));
        }
        if names.is_empty() {
            return Err(Error::InvalidSpec("spec has no columns".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        2 * self.cyclical_fields.len()
            + self.lags.map_or(0, |l| l.max - l.min + 1)
            + if self.rolling_window.is_some() { 6 } else { 0 }
            + self.weather.iter().map(|w| w.offsets.len()).sum::<usize>()
    }

    fn rolling_anchor(&self) -> usize {
        ENERGY_LAG_HOURS as usize
    }

    /// Earliest target index with enough energy history.
    pub fn min_history(&self) -> usize {
        let lag = self.lags.map_or(0, |l| l.max);
        let roll = self.rolling_window.map_or(0, |w| self.rolling_anchor() + w);
        lag.max(roll)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.column_sources_named().into_iter().map(|(n, _)| n).collect()
    }

    pub fn column_sources(&self) -> Vec<ColumnSource> {
        self.column_sources_named().into_iter().map(|(_, s)| s).collect()
    }

    fn column_sources_named(&self) -> Vec<(String, ColumnSource)> {
        let mut out = Vec::with_capacity(self.width());
        for f in &self.cyclical_fields {
            out.push((format!("{}_sin", f.name()), ColumnSource::Calendar));
            out.push((format!("{}_cos", f.name()), ColumnSource::Calendar));
        }
        if let Some(l) = self.lags {
            for k in l.min..=l.max {
                out.push((format!("lag_{k}"), ColumnSource::Energy { offset: -(k as i64) }));
            }
        }
        if let Some(w) = self.rolling_window {
            let to = -(self.rolling_anchor() as i64);
            for stat in RollingStats::NAMES {
                out.push((
                    format!("roll_{stat}"),
                    ColumnSource::EnergyWindow {
                        from: to - w as i64,
                        to,
                    },
                ));
            }
        }
        for w in &self.weather {
            for &o in &w.offsets {
                let suffix = match o.cmp(&0) {
                    std::cmp::Ordering::Less => format!("m{}", -o),
                    std::cmp::Ordering::Equal => "0".to_string(),
                    std::cmp::Ordering::Greater => format!("p{o}"),
                };
                out.push((
                    format!("{}_{suffix}", w.variable),
                    ColumnSource::Weather {
                        variable: w.variable.clone(),
                        offset: o,
                    },
                ));
            }
        }
        out
    }

    pub fn resolve<A: DataAccess + ?Sized>(&self, access: &A) -> Result<Vec<ResolvedWeather>> {
        self.weather
            .iter()
            .map(|w| {
                let position = access
                    .weather_position(&w.variable)
                    .ok_or_else(|| Error::MissingVariable(w.variable.clone()))?;
                Ok(ResolvedWeather {
                    position,
                    offsets: w.offsets.clone(),
                })
            })
            .collect()
    }

    /// All feature values for target index `t`, in column order.
    pub fn row<A: DataAccess + ?Sized>(
        &self,
        access: &A,
        t: usize,
        weather: &[ResolvedWeather],
    ) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.width());
        if !self.cyclical_fields.is_empty() {
            let when = datetime_of(access.start_hour() + t as i64);
            for f in &self.cyclical_fields {
                let (s, c) = f.encode(&when);
                row.push(s);
                row.push(c);
            }
        }
        row.extend(lag_features(access, t, self)?);
        if self.rolling_window.is_some() {
            row.extend(rolling_stats(access, t, self)?.to_array());
        }
        row.extend(weather_window(access, t, weather)?);
        Ok(row)
    }
}

/// Anchor offsets, then the rest of `[-24, 24]` by distance from the target
/// (past before future on ties).
fn offset_priority() -> Vec<i64> {
    let mut rest: Vec<i64> = (-WEATHER_LEAD_HOURS..=WEATHER_LEAD_HOURS)
        .filter(|o| !ANCHOR_OFFSETS.contains(o))
        .collect();
    rest.sort_by_key(|&o| (o.abs(), o));
    ANCHOR_OFFSETS.iter().copied().chain(rest).collect()
}

/// Row-per-target design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    /// Row-major values, `n_rows × columns.len()`.
    pub data: Vec<f64>,
    pub target: Vec<f64>,
    /// Target hour of each row, in hours since the epoch.
    pub hours: Vec<i64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn select_columns(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.n_rows() * idx.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        FeatureMatrix {
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            data,
            target: self.target.clone(),
            hours: self.hours.clone(),
        }
    }

    pub fn select_names(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::InvalidSpec(format!("unknown column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&idx))
    }

    pub fn slice_rows(&self, rows: Range<usize>) -> FeatureMatrix {
        let p = self.n_cols();
        FeatureMatrix {
            columns: self.columns.clone(),
            data: self.data[rows.start * p..rows.end * p].to_vec(),
            target: self.target[rows.clone()].to_vec(),
            hours: self.hours[rows].to_vec(),
        }
    }

    pub fn with_target(mut self, target: Vec<f64>) -> FeatureMatrix {
        assert_eq!(target.len(), self.n_rows());
        self.target = target;
        self
    }

    /// Writes `timestamp,target,<columns...>`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["timestamp".to_string(), "target".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut rec = vec![format_hour(self.hours[r]), self.target[r].to_string()];
            rec.extend(self.row(r).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<FeatureMatrix> {
        let mut rdr = csv::Reader::from_reader(source);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("timestamp") || headers.get(1) != Some("target") {
            return Err(Error::Parse {
                line: 1,
                message: "expected `timestamp,target,...` header".into(),
            });
        }
        let columns: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut m = FeatureMatrix {
            columns,
            data: Vec::new(),
            target: Vec::new(),
            hours: Vec::new(),
        };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let num = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad number `{s}`"),
                })
            };
            m.hours.push(parse_hour(&rec[0])?);
            m.target.push(num(&rec[1])?);
            for cell in rec.iter().skip(2) {
                m.data.push(num(cell)?);
            }
        }
        Ok(m)
    }
}

/// Builds one row per index of `data` whose features and target are all present.
pub fn build_matrix(data: &AlignedDataset, spec: &FeatureSpec) -> Result<FeatureMatrix> {
    build_matrix_with(data, spec, 0..data.len(), Execution::default())
}

/// [`build_matrix`] over target indices in `rows`, with an explicit
/// execution mode. Rows are assembled independently.
pub fn build_matrix_with<A: DataAccess + Sync + ?Sized>(
    data: &A,
    spec: &FeatureSpec,
    rows: Range<usize>,
    exec: Execution,
) -> Result<FeatureMatrix> {
    spec.validate()?;
    let weather = spec.resolve(data)?;
    let first = rows.start.max(spec.min_history());
    let last = rows.end.min(data.len());
    let n = last.saturating_sub(first);
    let built = map_range(exec, n, |i| {
        let t = first + i;
        let y = data.energy(t)?;
        spec.row(data, t, &weather).ok().map(|row| (t, y, row))
    });
    let p = spec.width();
    let mut m = FeatureMatrix {
        columns: spec.column_names(),
        data: Vec::with_capacity(n * p),
        target: Vec::with_capacity(n),
        hours: Vec::with_capacity(n),
    };
    for (t, y, row) in built.into_iter().flatten() {
        m.data.extend(row);
        m.target.push(y);
        m.hours.push(data.start_hour() + t as i64);
    }
    if m.n_rows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(m)
}
