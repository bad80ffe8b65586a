//! Seeded synthetic generation and weather datasets.
//!
//! Solar output follows a clear-sky curve whose day length and amplitude
//! vary over the year, dimmed by a persistent cloud process that also drives
//! humidity, visibility and temperature. Wind output is a clipped cubic
//! power curve of a persistent wind-speed process with daily and yearly
//! modulation; gust tracks wind speed.

use std::f64::consts::PI;

use chrono::{Datelike, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{AlignedDataset, EnergyType, WeatherFrame};
use crate::series::{datetime_of, TimeSeries};

/// Rated output in MW.
pub const CAPACITY_MW: f64 = 100.0;

pub fn generate(energy_type: EnergyType, start_hour: i64, hours: usize, seed: u64) -> AlignedDataset {
    match energy_type {
        EnergyType::Solar => solar_like(start_hour, hours, seed),
        EnergyType::Wind => wind_like(start_hour, hours, seed),
    }
}

fn std_normal() -> Normal<f64> {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// AR(1) with coefficient `rho` and unit stationary variance.
fn ar1(rng: &mut ChaCha8Rng, n: usize, rho: f64) -> Vec<f64> {
    let z = std_normal();
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = z.sample(rng);
    (0..n)
        .map(|_| {
            x = rho * x + innov * z.sample(rng);
            x
        })
        .collect()
}

fn year_phase(hour: i64) -> f64 {
    let t = datetime_of(hour);
    let doy = t.ordinal0() as f64 + t.hour() as f64 / 24.0;
    // 1 at the June solstice, -1 in December.
    (2.0 * PI * (doy - 171.0) / 365.25).cos()
}

fn hour_of_day(hour: i64) -> f64 {
    hour.rem_euclid(24) as f64
}

pub fn solar_like(start_hour: i64, hours: usize, seed: u64) -> AlignedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud_driver = ar1(&mut rng, hours, 0.97);
    let wind_driver = ar1(&mut rng, hours, 0.9);
    let z = std_normal();
    let mut energy = Vec::with_capacity(hours);
    let (mut temp, mut hum, mut vis, mut wind) = (
        Vec::with_capacity(hours),
        Vec::with_capacity(hours),
        Vec::with_capacity(hours),
        Vec::with_capacity(hours),
    );
    for i in 0..hours {
        let hour = start_hour + i as i64;
        let season = year_phase(hour);
        let h = hour_of_day(hour);
        let day_curve = (2.0 * PI * (h - 12.0) / 24.0).cos() + 0.25 * season;
        let clear = day_curve.max(0.0) / 1.25 * (0.8 + 0.2 * season);
        let cloud = 1.0 / (1.0 + (-1.5 * cloud_driver[i] + 0.5).exp());
        let out = CAPACITY_MW * clear * (1.0 - 0.75 * cloud) + 0.5 * z.sample(&mut rng);
        energy.push(out.max(0.0));

        let daily_heat = (2.0 * PI * (h - 14.0) / 24.0).cos();
        temp.push(16.0 + 9.0 * season + 4.0 * daily_heat - 4.0 * cloud + 0.5 * z.sample(&mut rng));
        hum.push((55.0 + 35.0 * cloud - 10.0 * daily_heat + 2.0 * z.sample(&mut rng)).clamp(5.0, 100.0));
        vis.push((10.0 - 7.0 * cloud + 0.3 * z.sample(&mut rng)).max(0.1));
        wind.push((4.0 + 2.0 * wind_driver[i] + 0.5 * z.sample(&mut rng)).max(0.0));
    }
    let weather = vec![
        ("temperature".to_string(), temp.into_iter().map(Some).collect()),
        ("humidity".to_string(), hum.into_iter().map(Some).collect()),
        ("visibility".to_string(), vis.into_iter().map(Some).collect()),
        ("wind_speed".to_string(), wind.into_iter().map(Some).collect()),
    ];
    assemble(EnergyType::Solar, start_hour, &energy, weather)
}

pub fn wind_like(start_hour: i64, hours: usize, seed: u64) -> AlignedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let driver = ar1(&mut rng, hours, 0.96);
    let z = std_normal();
    let mut energy = Vec::with_capacity(hours);
    let (mut gust, mut speed) = (Vec::with_capacity(hours), Vec::with_capacity(hours));
    for (i, d) in driver.iter().enumerate() {
        let hour = start_hour + i as i64;
        let h = hour_of_day(hour);
        let mean = 7.0 - 1.5 * year_phase(hour) + 1.0 * (2.0 * PI * (h - 15.0) / 24.0).cos();
        let v = (mean + 3.0 * d).max(0.0);
        let power = ((v - 3.0) / 9.0).clamp(0.0, 1.0).powi(3);
        energy.push((CAPACITY_MW * power + 0.5 * z.sample(&mut rng)).max(0.0));
        speed.push((v + 0.4 * z.sample(&mut rng)).max(0.0));
        gust.push((1.4 * v + 1.0 + rng.random_range(0.0..1.5)).max(0.0));
    }
    let weather = vec![
        ("gust".to_string(), gust.into_iter().map(Some).collect()),
        ("wind_speed".to_string(), speed.into_iter().map(Some).collect()),
    ];
    assemble(EnergyType::Wind, start_hour, &energy, weather)
}

fn assemble(
    energy_type: EnergyType,
    start_hour: i64,
    energy: &[f64],
    weather: Vec<(String, Vec<Option<f64>>)>,
) -> AlignedDataset {
    let energy = TimeSeries::dense(start_hour, energy, energy_type.column(), "MW");
    let weather = WeatherFrame::new(start_hour, weather).expect("distinct variable names");
    AlignedDataset::new(energy, weather, energy_type).expect("equal spans")
}
