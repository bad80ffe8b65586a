//! CSV ingestion and alignment of generation and weather data onto one
//! hourly UTC grid.
//!
//! Input dialect: comma-separated UTF-8 with a mandatory header row, a
//! `timestamp` column holding `YYYY-MM-DDTHH:00:00Z` values and numeric
//! value columns where an empty cell means "missing". Generation files carry
//! `solar_mw` / `wind_mw`; weather files carry one column per variable.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{format_hour, parse_hour, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyType {
    Solar,
    Wind,
}

impl EnergyType {
    /// Column holding this energy type in generation files.
    pub fn column(self) -> &'static str {
        match self {
            EnergyType::Solar => "solar_mw",
            EnergyType::Wind => "wind_mw",
        }
    }

    /// Weather variables that drive this energy type.
    pub fn weather_vars(self) -> &'static [&'static str] {
        match self {
            EnergyType::Solar => &["temperature", "humidity", "visibility", "wind_speed"],
            EnergyType::Wind => &["gust", "wind_speed"],
        }
    }
}

impl fmt::Display for EnergyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyType::Solar => "solar",
            EnergyType::Wind => "wind",
        })
    }
}

impl FromStr for EnergyType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solar" => Ok(EnergyType::Solar),
            "wind" => Ok(EnergyType::Wind),
            other => Err(Error::InvalidParams(format!("unknown energy type `{other}`"))),
        }
    }
}

/// Weather variables sharing one hourly grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherFrame {
    start: i64,
    len: usize,
    variables: Vec<(String, Vec<Option<f64>>)>,
}

impl WeatherFrame {
    pub fn new(start_hour: i64, variables: Vec<(String, Vec<Option<f64>>)>) -> Result<Self> {
        let len = variables.first().map_or(0, |(_, v)| v.len());
        let mut seen = HashSet::new();
        for (name, values) in &variables {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidParams(format!("duplicate weather variable `{name}`")));
            }
            if values.len() != len {
                return Err(Error::InvalidParams(format!(
                    "weather variable `{name}` has length {} (expected {len})",
                    values.len()
                )));
            }
        }
        Ok(WeatherFrame {
            start: start_hour,
            len,
            variables,
        })
    }

    pub fn start_hour(&self) -> i64 {
        self.start
    }

    pub fn end_hour(&self) -> i64 {
        self.start + self.len as i64
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|(n, _)| n.as_str())
    }

    pub fn variables(&self) -> &[(String, Vec<Option<f64>>)] {
        &self.variables
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|(n, _)| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&[Option<f64>]> {
        self.variables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn series(&self, name: &str) -> Option<TimeSeries> {
        self.get(name)
            .map(|v| TimeSeries::from_hour(self.start, v.to_vec(), name, ""))
    }

    pub fn slice_hours(&self, from: i64, to: i64) -> WeatherFrame {
        let lo = (from - self.start).clamp(0, self.len as i64) as usize;
        let hi = (to - self.start).clamp(lo as i64, self.len as i64) as usize;
        WeatherFrame {
            start: self.start + lo as i64,
            len: hi - lo,
            variables: self
                .variables
                .iter()
                .map(|(n, v)| (n.clone(), v[lo..hi].to_vec()))
                .collect(),
        }
    }

    pub fn map_variables(
        &self,
        mut f: impl FnMut(&str, &[Option<f64>]) -> Result<Vec<Option<f64>>>,
    ) -> Result<WeatherFrame> {
        let variables = self
            .variables
            .iter()
            .map(|(n, v)| Ok((n.clone(), f(n, v)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(WeatherFrame {
            start: self.start,
            len: self.len,
            variables,
        })
    }
}

/// Energy and weather on an identical span.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub energy: TimeSeries,
    pub weather: WeatherFrame,
    pub energy_type: EnergyType,
}

impl AlignedDataset {
    pub fn new(energy: TimeSeries, weather: WeatherFrame, energy_type: EnergyType) -> Result<Self> {
        if energy.start_hour() != weather.start_hour() || energy.len() != weather.len() {
            return Err(Error::InvalidParams(
                "energy and weather spans differ".to_string(),
            ));
        }
        Ok(AlignedDataset {
            energy,
            weather,
            energy_type,
        })
    }

    pub fn start_hour(&self) -> i64 {
        self.energy.start_hour()
    }

    pub fn end_hour(&self) -> i64 {
        self.energy.end_hour()
    }

    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }

    pub fn slice_hours(&self, from: i64, to: i64) -> AlignedDataset {
        AlignedDataset {
            energy: self.energy.slice_hours(from, to),
            weather: self.weather.slice_hours(from, to),
            energy_type: self.energy_type,
        }
    }

    /// `(name, gap count, gap fraction)` for energy followed by every weather variable.
    pub fn gap_summary(&self) -> Vec<(String, usize, f64)> {
        let n = self.len().max(1) as f64;
        let mut out = vec![(
            self.energy.name.clone(),
            self.energy.gap_count(),
            self.energy.gap_count() as f64 / n,
        )];
        for (name, values) in self.weather.variables() {
            let gaps = values.iter().filter(|v| v.is_none()).count();
            out.push((name.clone(), gaps, gaps as f64 / n));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GapPolicy {
    /// Longest gap (hours) bridged by forward fill.
    pub max_fill: usize,
    /// Largest residual gap fraction tolerated per variable.
    pub max_gap_fraction: f64,
}

impl Default for GapPolicy {
    fn default() -> Self {
        GapPolicy {
            max_fill: 3,
            max_gap_fraction: 0.05,
        }
    }
}

struct ParsedTable {
    start: i64,
    columns: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a timestamped numeric table, expanding it onto a gapless hourly
/// grid. Duplicate timestamps resolve last-wins.
fn parse_table<R: Read>(source: R) -> Result<ParsedTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| parse_error(1, e.to_string()))?
        .clone();
    let ts_col = headers
        .iter()
        .position(|h| h.trim() == "timestamp")
        .ok_or_else(|| parse_error(1, "missing `timestamp` column"))?;
    let mut columns = Vec::new();
    let mut seen = HashSet::new();
    for (i, h) in headers.iter().enumerate() {
        if i == ts_col {
            continue;
        }
        let h = h.trim().to_string();
        if !seen.insert(h.clone()) {
            return Err(parse_error(1, format!("duplicate column `{h}`")));
        }
        columns.push(h);
    }
    if columns.is_empty() {
        return Err(parse_error(1, "no value columns"));
    }

    let mut by_hour: BTreeMap<i64, Vec<Option<f64>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let hour = match parse_hour(&record[ts_col]) {
            Ok(h) => h,
            Err(Error::Parse { message, .. }) => return Err(parse_error(line, message)),
            Err(e) => return Err(e),
        };
        let mut row = Vec::with_capacity(columns.len());
        for (i, cell) in record.iter().enumerate() {
            if i == ts_col {
                continue;
            }
            let cell = cell.trim();
            if cell.is_empty() {
                row.push(None);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_error(line, format!("non-numeric value `{cell}`")))?;
                if !v.is_finite() {
                    return Err(parse_error(line, format!("non-finite value `{cell}`")));
                }
                row.push(Some(v));
            }
        }
        if by_hour.insert(hour, row).is_some() {
            log::warn!("duplicate timestamp {} at line {line}; keeping the later row", format_hour(hour));
        }
    }

    let (&start, _) = by_hour
        .first_key_value()
        .ok_or_else(|| parse_error(2, "no data rows"))?;
    let (&last, _) = by_hour.last_key_value().expect("non-empty");
    let mut rows = vec![vec![None; columns.len()]; (last - start + 1) as usize];
    for (hour, row) in by_hour {
        rows[(hour - start) as usize] = row;
    }
    Ok(ParsedTable {
        start,
        columns,
        rows,
    })
}

impl ParsedTable {
    fn column(&self, idx: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[idx]).collect()
    }
}

/// Parses one value column of a generation CSV into an hourly series.
/// Missing rows become gaps.
pub fn parse_generation_csv<R: Read>(source: R, column: &str) -> Result<TimeSeries> {
    let table = parse_table(source)?;
    let idx = table
        .columns
        .iter()
        .position(|c| c == column)
        .ok_or_else(|| parse_error(1, format!("missing column `{column}`")))?;
    Ok(TimeSeries::from_hour(table.start, table.column(idx), column, "MW"))
}

pub fn parse_weather_csv<R: Read>(source: R) -> Result<WeatherFrame> {
    let table = parse_table(source)?;
    let variables = (0..table.columns.len())
        .map(|i| (table.columns[i].clone(), table.column(i)))
        .collect();
    WeatherFrame::new(table.start, variables)
}

/// Forward-fills gap runs of at most `max_fill` hours. Longer runs and
/// leading gaps are left untouched.
pub fn forward_fill(values: &[Option<f64>], max_fill: usize) -> Vec<Option<f64>> {
    let mut out = values.to_vec();
    let mut i = 0;
    while i < out.len() {
        if out[i].is_some() {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < out.len() && out[i].is_none() {
            i += 1;
        }
        let run = i - run_start;
        if run_start > 0 && run <= max_fill {
            let fill = out[run_start - 1];
            for v in &mut out[run_start..i] {
                *v = fill;
            }
        }
    }
    out
}

/// Trims energy and weather to their common span and bridges short gaps.
pub fn align(
    energy: &TimeSeries,
    weather: &WeatherFrame,
    energy_type: EnergyType,
    policy: &GapPolicy,
) -> Result<AlignedDataset> {
    let from = energy.start_hour().max(weather.start_hour());
    let to = energy.end_hour().min(weather.end_hour());
    if to <= from {
        return Err(Error::NoOverlap);
    }
    let mut energy = energy.slice_hours(from, to);
    energy.values = forward_fill(&energy.values, policy.max_fill);
    let weather = weather
        .slice_hours(from, to)
        .map_variables(|_, v| Ok(forward_fill(v, policy.max_fill)))?;
    let data = AlignedDataset {
        energy,
        weather,
        energy_type,
    };
    for (name, _, fraction) in data.gap_summary() {
        if fraction > policy.max_gap_fraction {
            return Err(Error::ExcessiveGaps {
                name,
                fraction,
                limit: policy.max_gap_fraction,
            });
        }
    }
    Ok(data)
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the aligned dataset as `timestamp,<energy column>,<weather...>`.
pub fn write_canonical_csv<W: Write>(data: &AlignedDataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["timestamp".to_string(), data.energy_type.column().to_string()];
    header.extend(data.weather.names().map(str::to_string));
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row = vec![format_hour(data.start_hour() + i as i64), fmt_cell(data.energy.get(i))];
        row.extend(data.weather.variables().iter().map(|(_, v)| fmt_cell(v[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `timestamp,<series name>`, the layout [`parse_generation_csv`] reads.
pub fn write_generation_csv<W: Write>(series: &TimeSeries, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["timestamp", series.name.as_str()])?;
    for i in 0..series.len() {
        w.write_record([format_hour(series.hour_at(i)), fmt_cell(series.get(i))])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `timestamp,<variables...>`, the layout [`parse_weather_csv`] reads.
pub fn write_weather_csv<W: Write>(frame: &WeatherFrame, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["timestamp".to_string()];
    header.extend(frame.names().map(str::to_string));
    w.write_record(&header)?;
    for i in 0..frame.len() {
        let mut row = vec![format_hour(frame.start_hour() + i as i64)];
        row.extend(frame.variables().iter().map(|(_, v)| fmt_cell(v[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_canonical_csv<R: Read>(source: R, energy_type: EnergyType) -> Result<AlignedDataset> {
    let table = parse_table(source)?;
    let column = energy_type.column();
    let e_idx = table
        .columns
        .iter()
        .position(|c| c == column)
        .ok_or_else(|| parse_error(1, format!("missing column `{column}`")))?;
    let energy = TimeSeries::from_hour(table.start, table.column(e_idx), column, "MW");
    let variables = (0..table.columns.len())
        .filter(|&i| i != e_idx)
        .map(|i| (table.columns[i].clone(), table.column(i)))
        .collect();
    AlignedDataset::new(energy, WeatherFrame::new(table.start, variables)?, energy_type)
}
