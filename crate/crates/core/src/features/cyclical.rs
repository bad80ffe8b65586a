use std::f64::consts::PI;

use chrono::{DateTime, Datelike, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CyclicalField {
    Hour,
    DayOfWeek,
    DayOfMonth,
    DayOfYear,
    Month,
}

impl CyclicalField {
    pub const ALL: [CyclicalField; 5] = [
        CyclicalField::Hour,
        CyclicalField::DayOfWeek,
        CyclicalField::DayOfMonth,
        CyclicalField::DayOfYear,
        CyclicalField::Month,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CyclicalField::Hour => "hour",
            CyclicalField::DayOfWeek => "day_of_week",
            CyclicalField::DayOfMonth => "day_of_month",
            CyclicalField::DayOfYear => "day_of_year",
            CyclicalField::Month => "month",
        }
    }

    /// Zero-based position and period of `t` for this field.
    pub fn position(self, t: &DateTime<Utc>) -> (u32, u32) {
        match self {
            CyclicalField::Hour => (t.hour(), 24),
            CyclicalField::DayOfWeek => (t.weekday().num_days_from_monday(), 7),
            CyclicalField::DayOfMonth => (t.day0(), days_in_month(t.year(), t.month())),
            CyclicalField::DayOfYear => (t.ordinal0(), if is_leap(t.year()) { 366 } else { 365 }),
            CyclicalField::Month => (t.month0(), 12),
        }
    }

    pub fn encode(self, t: &DateTime<Utc>) -> (f64, f64) {
        let (p, period) = self.position(t);
        let angle = 2.0 * PI * f64::from(p) / f64::from(period);
        (angle.sin(), angle.cos())
    }
}

fn is_leap(year: i32) -> bool {
    NaiveDate::from_ymd_opt(year, 2, 29).is_some()
}

fn days_in_month(year: i32, month: u32) -> u32 {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    NaiveDate::from_ymd_opt(ny, nm, 1)
        .and_then(|d| d.pred_opt())
        .map_or(31, |d| d.day())
}

/// `(sin, cos)` polar encoding of every calendar field at `t`.
pub fn encode_cyclical(t: &DateTime<Utc>) -> Vec<(CyclicalField, (f64, f64))> {
    CyclicalField::ALL.iter().map(|&f| (f, f.encode(t))).collect()
}
