//! Metrics, error-interval shares, month × hour heat maps and comparison tables.

use std::fmt::Write as _;
use std::io::Write;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecastRun;
use crate::ingest::EnergyType;
use crate::series::{datetime_of, TimeSeries};

/// Absolute scaled errors below this are "under 10%".
pub const LOW_THRESHOLD: f64 = 0.10;
/// Absolute scaled errors above this are "over 15%".
pub const HIGH_THRESHOLD: f64 = 0.15;

fn errors(run: &ForecastRun) -> Result<Vec<f64>> {
    let e: Vec<f64> = run.pairs().into_iter().map(|(p, a)| p - a).collect();
    if e.is_empty() {
        return Err(Error::EmptyRun);
    }
    Ok(e)
}

pub fn mae_of(errors: &[f64]) -> f64 {
    errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64
}

pub fn rmse_of(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Mean absolute error over hours with both a prediction and an actual.
pub fn mae(run: &ForecastRun) -> Result<f64> {
    Ok(mae_of(&errors(run)?))
}

pub fn rmse(run: &ForecastRun) -> Result<f64> {
    Ok(rmse_of(&errors(run)?))
}

/// Percentages of hours by absolute error: `< 0.10`, `[0.10, 0.15]`, `> 0.15`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalShares {
    pub under_10: f64,
    pub between_10_15: f64,
    pub over_15: f64,
}

impl IntervalShares {
    pub fn of(errors: &[f64]) -> IntervalShares {
        let (mut lo, mut mid, mut hi) = (0usize, 0usize, 0usize);
        for e in errors {
            let a = e.abs();
            if a < LOW_THRESHOLD {
                lo += 1;
            } else if a <= HIGH_THRESHOLD {
                mid += 1;
            } else {
                hi += 1;
            }
        }
        let n = errors.len() as f64;
        let under_10 = 100.0 * lo as f64 / n;
        let between_10_15 = 100.0 * mid as f64 / n;
        IntervalShares {
            under_10,
            between_10_15,
            over_15: if hi == 0 { 0.0 } else { 100.0 - under_10 - between_10_15 },
        }
    }

    pub fn total(&self) -> f64 {
        self.under_10 + self.between_10_15 + self.over_15
    }
}

pub fn error_intervals(run: &ForecastRun) -> Result<IntervalShares> {
    Ok(IntervalShares::of(&errors(run)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_id: String,
    pub energy_type: EnergyType,
    pub mae: f64,
    pub rmse: f64,
    pub interval_pcts: IntervalShares,
    pub n_hours: usize,
}

pub fn evaluate(run: &ForecastRun) -> Result<EvaluationReport> {
    let e = errors(run)?;
    Ok(EvaluationReport {
        model_id: run.model_id.clone(),
        energy_type: run.energy_type,
        mae: mae_of(&e),
        rmse: rmse_of(&e),
        interval_pcts: IntervalShares::of(&e),
        n_hours: e.len(),
    })
}

/// Mean value per (month, hour of day); `None` where no value is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMatrix {
    /// `cells[month - 1][hour]`.
    pub cells: Vec<Vec<Option<f64>>>,
}

pub fn heatmap(series: &TimeSeries) -> HeatmapMatrix {
    let mut sum = [[0.0f64; 24]; 12];
    let mut count = [[0usize; 24]; 12];
    for i in 0..series.len() {
        if let Some(v) = series.get(i) {
            let t = datetime_of(series.hour_at(i));
            let (m, h) = (t.month0() as usize, t.hour() as usize);
            sum[m][h] += v;
            count[m][h] += 1;
        }
    }
    HeatmapMatrix {
        cells: (0..12)
            .map(|m| {
                (0..24)
                    .map(|h| (count[m][h] > 0).then(|| sum[m][h] / count[m][h] as f64))
                    .collect()
            })
            .collect(),
    }
}

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

impl HeatmapMatrix {
    pub fn get(&self, month0: usize, hour: usize) -> Option<f64> {
        self.cells[month0][hour]
    }

    /// Header `h00..h23`, then one row per month; absent cells are empty.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record((0..24).map(|h| format!("h{h:02}")))?;
        for row in &self.cells {
            w.write_record(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Month-by-hour grid shaded from white (0) to dark blue (1); absent
    /// cells are grey.
    pub fn to_svg(&self, title: &str) -> String {
        const CELL: usize = 24;
        const LEFT: usize = 40;
        const TOP: usize = 30;
        let width = LEFT + 24 * CELL + 10;
        let height = TOP + 12 * CELL + 30;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
        );
        let _ = writeln!(s, r#"<text x="{LEFT}" y="18" font-size="13">{}</text>"#, escape(title));
        for (m, row) in self.cells.iter().enumerate() {
            let y = TOP + m * CELL;
            let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, y + 16, MONTHS[m]);
            for (h, cell) in row.iter().enumerate() {
                let x = LEFT + h * CELL;
                let fill = match cell {
                    Some(v) => {
                        let v = v.clamp(0.0, 1.0);
                        let c = |lo: f64, hi: f64| (lo + (hi - lo) * v).round() as u8;
                        format!("rgb({},{},{})", c(255.0, 8.0), c(255.0, 48.0), c(255.0, 107.0))
                    }
                    None => "#bbbbbb".to_string(),
                };
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"><title>{} {h:02}:00 {}</title></rect>"#,
                    MONTHS[m],
                    cell.map_or("n/a".to_string(), |v| format!("{v:.3}"))
                );
            }
        }
        for h in (0..24).step_by(3) {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}">{h:02}</text>"#,
                LEFT + h * CELL + 4,
                TOP + 12 * CELL + 14
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reports of one energy type ordered by MAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub energy_type: EnergyType,
    pub rows: Vec<EvaluationReport>,
}

/// Sorts reports by ascending MAE (stable). All reports must share an
/// energy type and hour count.
pub fn compare(reports: &[EvaluationReport]) -> Result<Comparison> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidParams("nothing to compare".into()))?;
    if reports.iter().any(|r| r.energy_type != first.energy_type) {
        return Err(Error::MixedEnergyTypes);
    }
    if reports.iter().any(|r| r.n_hours != first.n_hours) {
        return Err(Error::SpanMismatch);
    }
    let mut rows = reports.to_vec();
    rows.sort_by(|a, b| a.mae.total_cmp(&b.mae));
    Ok(Comparison {
        energy_type: first.energy_type,
        rows,
    })
}

impl Comparison {
    /// `model_id,energy_type,mae,rmse,under_10,between_10_15,over_15,n_hours`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "model_id",
            "energy_type",
            "mae",
            "rmse",
            "under_10",
            "between_10_15",
            "over_15",
            "n_hours",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.model_id.clone(),
                r.energy_type.to_string(),
                r.mae.to_string(),
                r.rmse.to_string(),
                r.interval_pcts.under_10.to_string(),
                r.interval_pcts.between_10_15.to_string(),
                r.interval_pcts.over_15.to_string(),
                r.n_hours.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
