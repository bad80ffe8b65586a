//! Positional data access used by every forecast-time feature builder.
//!
//! Forecasters read energy and weather only through [`DataAccess`], which
//! lets [`AuditedAccess`] record every read made while forecasting one hour
//! and check it against the availability constraint.

use std::cell::RefCell;

use crate::ingest::AlignedDataset;

/// Most recent energy observation usable for a target hour `t` is `t - 48`.
pub const ENERGY_LAG_HOURS: i64 = 48;
/// Weather forecasts are usable up to `t + 24`.
pub const WEATHER_LEAD_HOURS: i64 = 24;

pub trait DataAccess {
    fn len(&self) -> usize;
    fn start_hour(&self) -> i64;
    fn energy(&self, idx: usize) -> Option<f64>;
    fn weather(&self, var: usize, idx: usize) -> Option<f64>;
    fn weather_position(&self, name: &str) -> Option<usize>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl DataAccess for AlignedDataset {
    fn len(&self) -> usize {
        AlignedDataset::len(self)
    }

    fn start_hour(&self) -> i64 {
        AlignedDataset::start_hour(self)
    }

    fn energy(&self, idx: usize) -> Option<f64> {
        self.energy.get(idx)
    }

    fn weather(&self, var: usize, idx: usize) -> Option<f64> {
        self.weather.variables()[var].1.get(idx).copied().flatten()
    }

    fn weather_position(&self, name: &str) -> Option<usize> {
        self.weather.position(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Energy,
    Weather(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Read {
    pub source: Source,
    /// Read index minus the target index.
    pub offset: i64,
}

/// Reads made while forecasting one target hour.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HourAudit {
    pub target: usize,
    pub reads: Vec<Read>,
}

impl HourAudit {
    pub fn max_energy_offset(&self) -> Option<i64> {
        self.reads
            .iter()
            .filter(|r| r.source == Source::Energy)
            .map(|r| r.offset)
            .max()
    }

    pub fn max_weather_offset(&self) -> Option<i64> {
        self.reads
            .iter()
            .filter(|r| matches!(r.source, Source::Weather(_)))
            .map(|r| r.offset)
            .max()
    }

    pub fn violations(&self) -> impl Iterator<Item = &Read> {
        self.reads.iter().filter(|r| match r.source {
            Source::Energy => r.offset > -ENERGY_LAG_HOURS,
            Source::Weather(_) => r.offset > WEATHER_LEAD_HOURS,
        })
    }
}

/// Wraps a data source and logs each read relative to one target index.
pub struct AuditedAccess<'a, A: ?Sized> {
    inner: &'a A,
    log: RefCell<HourAudit>,
}

impl<'a, A: DataAccess + ?Sized> AuditedAccess<'a, A> {
    pub fn new(inner: &'a A, target: usize) -> Self {
        AuditedAccess {
            inner,
            log: RefCell::new(HourAudit {
                target,
                reads: Vec::new(),
            }),
        }
    }

    pub fn finish(self) -> HourAudit {
        self.log.into_inner()
    }

    fn record(&self, source: Source, idx: usize) {
        let mut log = self.log.borrow_mut();
        let offset = idx as i64 - log.target as i64;
        log.reads.push(Read { source, offset });
    }
}

impl<A: DataAccess + ?Sized> DataAccess for AuditedAccess<'_, A> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn start_hour(&self) -> i64 {
        self.inner.start_hour()
    }

    fn energy(&self, idx: usize) -> Option<f64> {
        self.record(Source::Energy, idx);
        self.inner.energy(idx)
    }

    fn weather(&self, var: usize, idx: usize) -> Option<f64> {
        self.record(Source::Weather(var), idx);
        self.inner.weather(var, idx)
    }

    fn weather_position(&self, name: &str) -> Option<usize> {
        self.inner.weather_position(name)
    }
}
