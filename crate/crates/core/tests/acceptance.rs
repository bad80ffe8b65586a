//! Acceptance criteria. Each test prints one `acceptance N: PASS|FAIL|SKIPPED`
//! line (run with `--nocapture` to see them) and fails when its criterion does.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use chrono::{DateTime, Datelike, TimeZone, Utc};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rescast::eval::{evaluate, EvaluationReport};
use rescast::features::{ridge_fit, CyclicalField, FeatureMatrix};
use rescast::forecast::{common_support, fit, forecast, forecast_audited, ForecastConfig, ForecastRun, ModelKind};
use rescast::ingest::{align, parse_generation_csv, parse_weather_csv};
use rescast::series::{hour_of, minmax_fit, minmax_inverse, minmax_transform};
use rescast::stad::{decompose, stad_fit, StadConfig};
use rescast::synthetic::solar_like;
use rescast::trees::{ext_fit, ext_fit_with, ExtParams, Forest, ParamGrid, SplitMode};
use rescast::{AlignedDataset, EnergyType, Execution, GapPolicy, TimeSeries};

/// Bypasses libtest output capture so the verdicts show in every run.
fn emit(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn report(n: u32, ok: bool, detail: &str) {
    emit(&format!("acceptance {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" }));
}

fn jan1(year: i32) -> i64 {
    hour_of(&Utc.with_ymd_and_hms(year, 1, 1, 0, 0, 0).unwrap()).unwrap()
}

fn matrix(rows: &[Vec<f64>], y: &[f64]) -> FeatureMatrix {
    let p = rows.first().map_or(0, Vec::len);
    FeatureMatrix {
        columns: (0..p).map(|j| format!("x{j}")).collect(),
        data: rows.iter().flatten().copied().collect(),
        target: y.to_vec(),
        hours: (0..rows.len() as i64).collect(),
    }
}

// ---------------------------------------------------------------- 1

fn cyclical_ok(rng: &mut ChaCha8Rng) -> bool {
    let lo = jan1(1990) * 3600;
    let hi = jan1(2060) * 3600;
    (0..10_000).all(|_| {
        let t = DateTime::from_timestamp(rng.random_range(lo..hi), 0).unwrap();
        let unit = CyclicalField::ALL.iter().all(|f| {
            let (s, c) = f.encode(&t);
            (s * s + c * c - 1.0).abs() < 1e-12
        });
        let shifted = |f: CyclicalField, u: DateTime<Utc>| f.encode(&t) == f.encode(&u);
        let periodic = shifted(CyclicalField::Hour, t + chrono::Duration::hours(24))
            && shifted(CyclicalField::DayOfWeek, t + chrono::Duration::days(7))
            && shifted(CyclicalField::Month, t.with_year(t.year() + 1).unwrap_or(t))
            && t
                .with_year(t.year() + 4)
                .is_none_or(|u| shifted(CyclicalField::DayOfYear, u) && shifted(CyclicalField::DayOfMonth, u));
        unit && periodic
    })
}

fn minmax_ok(rng: &mut ChaCha8Rng) -> bool {
    (0..200).all(|_| {
        let n = rng.random_range(2..300);
        let scale = 10f64.powf(rng.random_range(-3.0..4.0));
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let s = TimeSeries::dense(0, &v, "y", "MW");
        let Ok(p) = minmax_fit(&s) else { return true };
        let back = minmax_inverse(&minmax_transform(&s, &p), &p);
        let ok = back.present().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-12 * scale.max(1.0));
        ok
    })
}

/// Max |Δw| between `ridge_fit` and a dense normal-equations solve of the
/// same standardized problem.
fn ridge_gap(rng: &mut ChaCha8Rng) -> f64 {
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(20..120);
        let p = rng.random_range(1..8);
        let lambda = [0.0, 0.01, 1.0, 10.0][rng.random_range(0..4)];
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|j| z.sample(rng) * (j + 1) as f64 + j as f64).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() + z.sample(rng)).collect();
        let x = matrix(&rows, &y);
        let model = ridge_fit(&x, &y, lambda).unwrap();

        let xm = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        let means: Vec<f64> = (0..p).map(|j| xm.column(j).mean()).collect();
        let sds: Vec<f64> = (0..p)
            .map(|j| (xm.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / n as f64).sqrt())
            .collect();
        let zm = DMatrix::from_fn(n, p, |i, j| (rows[i][j] - means[j]) / sds[j]);
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let a = zm.transpose() * &zm + DMatrix::identity(p, p) * lambda;
        let b = zm.transpose() * yc;
        let w_std = a.lu().solve(&b).unwrap();
        for j in 0..p {
            worst = worst.max((w_std[j] / sds[j] - model.weights[j]).abs());
        }
        let intercept = y_mean - (0..p).map(|j| w_std[j] / sds[j] * means[j]).sum::<f64>();
        worst = worst.max((intercept - model.intercept).abs());
    }
    worst
}

fn random_run(rng: &mut ChaCha8Rng) -> ForecastRun {
    let n = rng.random_range(1..200);
    let spread = rng.random_range(0.01..0.5);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let p: Vec<f64> = a.iter().map(|v| v + rng.random_range(-spread..spread)).collect();
    ForecastRun {
        model_id: "random".into(),
        energy_type: EnergyType::Solar,
        predictions: TimeSeries::dense(0, &p, "p", "scaled"),
        actuals: TimeSeries::dense(0, &a, "a", "scaled"),
    }
}

fn stad_identity_gap(rng: &mut ChaCha8Rng) -> f64 {
    let z = Normal::new(0.0, 0.05).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let start = jan1(2017) + rng.random_range(0..5000);
        let n = rng.random_range(24 * 30..24 * 120);
        let v: Vec<Option<f64>> = (0..n)
            .map(|i| {
                let h = (start + i as i64) as f64;
                let y = 0.4 + 0.3 * (2.0 * PI * h / 24.0).sin() + z.sample(rng);
                (rng.random_range(0.0..1.0) > 0.02).then_some(y)
            })
            .collect();
        let y = TimeSeries::from_hour(start, v, "y", "scaled");
        let m = stad_fit(&y, None, &StadConfig::default()).unwrap();
        let d = decompose(&m, &y, None).unwrap();
        for i in 0..n {
            if let Some(v) = y.get(i) {
                let sum = d.trend.get(i).unwrap()
                    + d.seasonal.get(i).unwrap()
                    + d.holiday.get(i).unwrap()
                    + d.regressor.get(i).unwrap()
                    + d.residual.get(i).unwrap();
                worst = worst.max((sum - v).abs());
            }
        }
    }
    worst
}

#[test]
fn acceptance_1_property_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cyc = cyclical_ok(&mut rng);
    let mm = minmax_ok(&mut rng);
    let ridge = ridge_gap(&mut rng);
    let runs: Vec<ForecastRun> = (0..1000).map(|_| random_run(&mut rng)).collect();
    let dominance = runs.iter().all(|r| {
        let e = evaluate(r).unwrap();
        e.rmse >= e.mae - 1e-15
    });
    let shares = runs.iter().all(|r| {
        let e = evaluate(r).unwrap();
        (e.interval_pcts.total() - 100.0).abs() < 1e-9
    });
    let identity = stad_identity_gap(&mut rng);
    let elapsed = start.elapsed();
    let ok = cyc && mm && ridge < 1e-8 && dominance && shares && identity < 1e-9 && elapsed < Duration::from_secs(60);
    report(
        1,
        ok,
        &format!(
            "cyclical {cyc}, minmax {mm}, ridge max|dw| {ridge:.1e}, rmse>=mae {dominance}, \
             shares {shares}, stad identity {identity:.1e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 2

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

#[test]
fn acceptance_2_decomposer_recovery() {
    let clock = Instant::now();
    let start = jan1(2017);
    let n = 3 * 8766;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let injected: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64;
            0.5 * (2.0 * PI * t / 24.0).sin() + 0.2 * (2.0 * PI * t / 8766.0).sin()
        })
        .collect();
    let y: Vec<f64> = injected.iter().map(|s| 2.0 + s + noise.sample(&mut rng)).collect();
    let series = TimeSeries::dense(start, &y, "y", "");
    let model = stad_fit(&series, None, &StadConfig::default()).unwrap();
    let d = decompose(&model, &series, None).unwrap();
    let seasonal: Vec<f64> = d.seasonal.present().collect();
    let residual: Vec<f64> = d.residual.present().collect();
    let r = pearson(&seasonal, &injected);
    let ratio = variance(&residual) / variance(&y);
    let elapsed = clock.elapsed();
    let ok = r > 0.95 && ratio < 0.25 && elapsed < Duration::from_secs(60);
    report(
        2,
        ok,
        &format!("corr {r:.4}, residual/raw variance {ratio:.4}, {:.1}s", elapsed.as_secs_f64()),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 3

/// Greedy regression tree grown by brute force: every feature, every
/// midpoint of adjacent distinct values, strict improvement keeps the first.
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

fn greedy(x: &FeatureMatrix, idx: &[usize], depth: usize, p: &ExtParams) -> Node {
    let y: Vec<f64> = idx.iter().map(|&i| x.target[i]).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if idx.len() < p.min_samples_split || p.max_depth.is_some_and(|d| depth >= d) || y.iter().all(|&v| v == y[0]) {
        return Node::Leaf(mean);
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x.n_cols() {
        let mut vals: Vec<f64> = idx.iter().map(|&i| x.value(i, f)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let thr = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.value(i, f) <= thr);
            let sl: f64 = l.iter().map(|&i| x.target[i]).sum();
            let sr: f64 = r.iter().map(|&i| x.target[i]).sum();
            let s = sl + sr;
            let score = sl * sl / l.len() as f64 + sr * sr / r.len() as f64 - s * s / idx.len() as f64;
            if best.is_none_or(|b| score > b.2) {
                best = Some((f, thr, score));
            }
        }
    }
    match best {
        None => Node::Leaf(mean),
        Some((feature, threshold, _)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.value(i, feature) <= threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(greedy(x, &l, depth + 1, p)),
                right: Box::new(greedy(x, &r, depth + 1, p)),
            }
        }
    }
}

fn same_tree(forest: &Forest, node: usize, oracle: &Node) -> bool {
    let t = &forest.trees[0];
    match oracle {
        Node::Leaf(v) => t.feature[node] == -1 && t.value[node] == *v,
        Node::Split { feature, threshold, left, right } => {
            t.feature[node] == *feature as i32
                && t.threshold[node] == *threshold
                && same_tree(forest, t.left[node] as usize, left)
                && same_tree(forest, t.right[node] as usize, right)
        }
    }
}

#[test]
fn acceptance_3_extra_trees_oracle() {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut equal = 0;
    for d in 0..20 {
        let n = rng.random_range(5..=50);
        let p = rng.random_range(1..=4);
        // Coarse grids force duplicate values and tied scores.
        let levels = if d % 3 == 0 { 4.0 } else { 1000.0 };
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| (rng.random_range(0.0f64..1.0) * levels).floor() / levels).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 3.0 + rng.random_range(-0.5..0.5)).collect();
        let x = matrix(&rows, &y);
        let params = ExtParams {
            n_estimators: 1,
            max_depth: [None, Some(2), Some(4)][d % 3],
            min_samples_split: 2 + d % 4,
            ..ExtParams::default()
        };
        let forest = ext_fit_with(&x, &params, SplitMode::Exhaustive, Execution::Sequential).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        if same_tree(&forest, 0, &greedy(&x, &idx, 0, &params)) {
            equal += 1;
        }
    }

    let rows: Vec<Vec<f64>> = (0..500).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[0] - 2.0 * r[3] * r[5] + rng.random_range(-0.1..0.1)).collect();
    let x = matrix(&rows, &y);
    let params = ExtParams { n_estimators: 50, k_features: Some(3), seed: 99, ..ExtParams::default() };
    let a = ext_fit(&x, &params).unwrap();
    let b = ext_fit(&x, &params).unwrap();
    let seq = ext_fit_with(&x, &params, SplitMode::Random, Execution::Sequential).unwrap();
    let identical = a.to_json().unwrap() == b.to_json().unwrap() && a == seq;

    let elapsed = clock.elapsed();
    let ok = equal == 20 && identical && elapsed < Duration::from_secs(60);
    report(
        3,
        ok,
        &format!("{equal}/20 trees equal the oracle, double fit identical {identical}, {:.1}s", elapsed.as_secs_f64()),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 4 / 5

struct Scores {
    reports: Vec<EvaluationReport>,
}

impl Scores {
    fn get(&self, id: &str) -> &EvaluationReport {
        self.reports.iter().find(|r| r.model_id == id).unwrap()
    }
}

fn run_models(data: &AlignedDataset, train_end: i64, test_end: i64, cfg: &ForecastConfig) -> Scores {
    let train = data.slice_hours(data.start_hour(), train_end);
    let kinds = [ModelKind::Persistence { n_days: 2 }, ModelKind::MlDirect, ModelKind::Hybrid];
    let runs: Vec<ForecastRun> = kinds
        .iter()
        .map(|&k| {
            let t = Instant::now();
            let f = fit(k, &train, cfg).unwrap();
            let run = forecast(&f, data, train_end..test_end).unwrap().run;
            println!("  {}: fit + forecast {:.1}s", k.id(), t.elapsed().as_secs_f64());
            run
        })
        .collect();
    let runs = common_support(&runs).unwrap();
    Scores {
        reports: runs.iter().map(|r| evaluate(r).unwrap()).collect(),
    }
}

fn describe(s: &Scores) -> String {
    s.reports
        .iter()
        .map(|r| {
            format!(
                "{} mae {:.4} rmse {:.4} <10% {:.1}",
                r.model_id, r.mae, r.rmse, r.interval_pcts.under_10
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn synthetic_config() -> ForecastConfig {
    ForecastConfig {
        grid: ParamGrid {
            n_estimators: Some(vec![60]),
            min_samples_split: Some(vec![5]),
            ..ParamGrid::default()
        },
        trees: ExtParams { k_features: Some(40), seed: 4, ..ExtParams::default() },
        ..ForecastConfig::default()
    }
}

#[test]
fn acceptance_4_model_ordering() {
    let clock = Instant::now();
    let start = jan1(2017);
    let train_end = jan1(2020);
    let test_end = jan1(2021);
    let data = solar_like(start, (test_end - start) as usize, 2024);
    let s = run_models(&data, train_end, test_end, &synthetic_config());
    let (p, m, h) = (s.get("persistence_t-2"), s.get("ml_direct"), s.get("hybrid"));
    let elapsed = clock.elapsed();
    let ok = h.rmse < m.rmse
        && m.rmse < p.rmse
        && h.interval_pcts.under_10 > p.interval_pcts.under_10
        && elapsed < Duration::from_secs(300);
    report(4, ok, &format!("{}; {:.0}s", describe(&s), elapsed.as_secs_f64()));
    assert!(ok);
}

fn load_greek(dir: &std::path::Path, energy_type: EnergyType) -> AlignedDataset {
    let gen = std::fs::File::open(dir.join("generation.csv")).expect("generation.csv");
    let weather = std::fs::File::open(dir.join("weather.csv")).expect("weather.csv");
    let energy = parse_generation_csv(gen, energy_type.column()).unwrap();
    let weather = parse_weather_csv(weather).unwrap();
    align(&energy, &weather, energy_type, &GapPolicy::default()).unwrap()
}

#[test]
fn acceptance_5_greek_dataset_reproduction() {
    let Some(dir) = std::env::var_os("RESCAST_GREEK_DATA").map(PathBuf::from) else {
        emit("acceptance 5: SKIPPED (set RESCAST_GREEK_DATA to a directory with generation.csv and weather.csv)");
        return;
    };
    let clock = Instant::now();
    let train_end = jan1(2020);
    let test_end = jan1(2021);
    let cfg = ForecastConfig::default();
    let mut ok = true;
    let mut details = Vec::new();
    for (et, target, tol) in [(EnergyType::Solar, 0.041, 0.015), (EnergyType::Wind, 0.069, 0.02)] {
        let data = load_greek(&dir, et);
        let s = run_models(&data, train_end, test_end.min(data.end_hour()), &cfg);
        let (p, m, h) = (s.get("persistence_t-2"), s.get("ml_direct"), s.get("hybrid"));
        ok &= (h.mae - target).abs() <= tol;
        ok &= h.mae <= m.mae && m.mae <= p.mae;
        if et == EnergyType::Solar {
            ok &= h.interval_pcts.under_10 >= 80.0;
        }
        details.push(format!("{et}: {}", describe(&s)));
    }
    let elapsed = clock.elapsed();
    ok &= elapsed < Duration::from_secs(30 * 60);
    report(5, ok, &format!("{}; {:.0}s", details.join(" | "), elapsed.as_secs_f64()));
    assert!(ok);
}

// ---------------------------------------------------------------- 6

#[test]
fn acceptance_6_availability_audit() {
    let start = jan1(2018);
    let data = solar_like(start, 24 * 90, 6);
    let train_end = start + 24 * 75;
    let train = data.slice_hours(start, train_end);
    let cfg = ForecastConfig {
        rfe_k: Some(80),
        rfe_step: 24,
        grid: ParamGrid { n_estimators: Some(vec![10]), ..ParamGrid::default() },
        trees: ExtParams { k_features: Some(20), ..ExtParams::default() },
        ..ForecastConfig::default()
    };
    let mut reads = 0;
    let mut violations = 0;
    let mut late_energy = i64::MIN;
    let mut late_weather = i64::MIN;
    let mut hours = BTreeSet::new();
    for kind in [
        ModelKind::Persistence { n_days: 2 },
        ModelKind::Persistence { n_days: 7 },
        ModelKind::MlDirect,
        ModelKind::StadDirect,
        ModelKind::Hybrid,
    ] {
        let f = fit(kind, &train, &cfg).unwrap();
        for a in forecast_audited(&f, &data, train_end..train_end + 100).unwrap() {
            hours.insert(a.target);
            reads += a.reads.len();
            violations += a.violations().count();
            late_energy = late_energy.max(a.max_energy_offset().unwrap_or(i64::MIN));
            late_weather = late_weather.max(a.max_weather_offset().unwrap_or(i64::MIN));
        }
    }
    let ok = violations == 0 && hours.len() == 100 && reads > 0;
    report(
        6,
        ok,
        &format!(
            "{} hours x 5 models, {reads} reads, {violations} violations, latest energy t{late_energy:+}, latest weather t{late_weather:+}",
            hours.len()
        ),
    );
    assert!(ok);
}
