//! Window features read relative to a target index `t`.

use serde::{Deserialize, Serialize};

use crate::access::DataAccess;
use crate::error::{Error, Result};

use super::{FeatureSpec, ResolvedWeather};

/// Lagged energy values `y[t - lag_min] … y[t - lag_max]`, nearest lag first.
pub fn lag_features<A: DataAccess + ?Sized>(
    access: &A,
    t: usize,
    spec: &FeatureSpec,
) -> Result<Vec<f64>> {
    let Some(lags) = spec.lags else {
        return Ok(Vec::new());
    };
    if t < lags.max {
        return Err(Error::InsufficientHistory(t));
    }
    (lags.min..=lags.max)
        .map(|k| access.energy(t - k).ok_or(Error::GapInWindow(t)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub skew: f64,
    pub var: f64,
    pub std: f64,
}

impl RollingStats {
    pub const NAMES: [&'static str; 6] = ["min", "max", "mean", "skew", "var", "std"];

    pub fn to_array(self) -> [f64; 6] {
        [self.min, self.max, self.mean, self.skew, self.var, self.std]
    }

    /// Population moments accumulated in a single streaming pass.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<RollingStats> {
        let mut n = 0.0_f64;
        let mut mean = 0.0_f64;
        let mut m2 = 0.0_f64;
        let mut m3 = 0.0_f64;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for x in values {
            let n1 = n;
            n += 1.0;
            let delta = x - mean;
            let delta_n = delta / n;
            let term1 = delta * delta_n * n1;
            mean += delta_n;
            m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2;
            m2 += term1;
            min = min.min(x);
            max = max.max(x);
        }
        if n == 0.0 {
            return None;
        }
        let var = m2 / n;
        let skew = if m2 > 0.0 { (n.sqrt() * m3) / m2.powf(1.5) } else { 0.0 };
        Some(RollingStats {
            min,
            max,
            mean,
            skew,
            var,
            std: var.sqrt(),
        })
    }
}

/// Statistics over the energy window `[t - lag_min - window, t - lag_min]`.
pub fn rolling_stats<A: DataAccess + ?Sized>(
    access: &A,
    t: usize,
    spec: &FeatureSpec,
) -> Result<RollingStats> {
    let window = spec
        .rolling_window
        .ok_or_else(|| Error::InvalidSpec("rolling statistics disabled".into()))?;
    let anchor = spec.rolling_anchor();
    if t < anchor + window {
        return Err(Error::InsufficientHistory(t));
    }
    let hi = t - anchor;
    let lo = hi - window;
    let mut values = Vec::with_capacity(window + 1);
    for i in lo..=hi {
        values.push(access.energy(i).ok_or(Error::GapInWindow(t))?);
    }
    Ok(RollingStats::from_values(values).expect("window is non-empty"))
}

/// Weather values at each configured offset around `t`, variable by variable.
pub fn weather_window<A: DataAccess + ?Sized>(
    access: &A,
    t: usize,
    weather: &[ResolvedWeather],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(weather.iter().map(|w| w.offsets.len()).sum());
    for w in weather {
        for &off in &w.offsets {
            let idx = t as i64 + off;
            if idx < 0 || idx >= access.len() as i64 {
                return Err(Error::InsufficientCoverage(t));
            }
            out.push(access.weather(w.position, idx as usize).ok_or(Error::GapInWindow(t))?);
        }
    }
    Ok(out)
}
