//! Short-term renewable generation forecasting.
//!
//! The crate covers the whole pipeline for one-hour-ahead solar and wind
//! forecasting under a 48-hour data-availability lag:
//!
//! * [`series`]: hourly UTC series, min-max scaling, chronological splits
//! * [`ingest`]: generation/weather CSV parsing and grid alignment
//! * [`features`]: cyclical, lag, rolling and weather features; ridge-driven RFE
//! * [`stad`]: seasonal-trend additive decomposer (trend, Fourier terms, dayparts, holidays and regressors)
//! * [`trees`]: Extra-Trees regression and grid search
//! * [`forecast`]: persistence, direct ML, direct decomposer and hybrid forecasters
//! * [`eval`]: MAE/RMSE, error-interval shares, heat maps, comparison tables
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default); see [`Execution`].

pub mod access;
pub mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod forecast;
pub mod ingest;
mod linalg;
pub mod series;
pub mod stad;
pub mod synthetic;
pub mod trees;

pub use error::{Error, Result};
pub use exec::Execution;
pub use ingest::{AlignedDataset, EnergyType, GapPolicy, WeatherFrame};
pub use series::{ScalerParams, SplitSpec, TimeSeries};
