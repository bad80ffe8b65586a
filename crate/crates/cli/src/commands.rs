use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rescast::eval::{compare, evaluate as score, heatmap, Comparison, HeatmapMatrix};
use rescast::forecast::{
    common_support, fit_logged, forecast as walk, load_bundle, save_bundle, ForecastRun, Forecaster, ModelKind,
    StageTiming, BUNDLE_MANIFEST,
};
use rescast::ingest::{
    align, parse_generation_csv, parse_weather_csv, read_canonical_csv, write_canonical_csv, write_generation_csv,
    write_weather_csv,
};
use rescast::series::{datetime_of, format_hour, parse_hour};
use rescast::trees::ParamGrid;
use rescast::{synthetic, AlignedDataset, EnergyType, Error, SplitSpec, WeatherFrame};
use serde::Serialize;

use crate::config::RunConfig;
use crate::lock::ArtifactLock;
use crate::Failure;

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::parse(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::parse(format!("cannot create {}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::parse(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::parse(e.to_string()))?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::parse(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text + "\n").map_err(|e| Failure::parse(format!("cannot write {}: {e}", path.display())))
}

fn io_failure(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| Failure::parse(format!("{}: {e}", path.display()))
}

pub fn ingest(cfg: &RunConfig) -> Result<(), Failure> {
    let column = cfg.energy_type.column();
    let energy = parse_generation_csv(open(&cfg.generation_csv)?, column).map_err(io_failure(&cfg.generation_csv))?;
    let weather = parse_weather_csv(open(&cfg.weather_csv)?).map_err(io_failure(&cfg.weather_csv))?;
    let mut vars = Vec::new();
    for name in cfg.energy_type.weather_vars() {
        let v = weather
            .get(name)
            .ok_or_else(|| Failure::align(Error::MissingVariable(name.to_string()).to_string()))?;
        vars.push((name.to_string(), v.to_vec()));
    }
    let weather = WeatherFrame::new(weather.start_hour(), vars).map_err(|e| Failure::align(e.to_string()))?;
    let data = align(&energy, &weather, cfg.energy_type, &cfg.gap_policy).map_err(|e| Failure::align(e.to_string()))?;

    let _lock = ArtifactLock::acquire(&cfg.artifact_dir)?;
    let path = cfg.dataset_path();
    write_canonical_csv(&data, create(&path)?).map_err(io_failure(&path))?;
    println!(
        "{} hours {}..{} -> {}",
        data.len(),
        format_hour(data.start_hour()),
        format_hour(data.end_hour()),
        path.display()
    );
    for (name, gaps, fraction) in data.gap_summary() {
        println!("  {name:<12} gaps {gaps:>6}  ({:.3}%)", 100.0 * fraction);
    }
    Ok(())
}

fn load_dataset(cfg: &RunConfig) -> Result<AlignedDataset, Failure> {
    let path = cfg.dataset_path();
    if !path.exists() {
        return Err(Failure::parse(format!(
            "{} not found; run `rescast ingest` first",
            path.display()
        )));
    }
    read_canonical_csv(open(&path)?, cfg.energy_type).map_err(io_failure(&path))
}

#[derive(Serialize)]
struct TrainLog {
    model_id: String,
    energy_type: EnergyType,
    train_start: String,
    train_end: String,
    rows: usize,
    seed: u64,
    stages: Vec<StageTiming>,
    total_seconds: f64,
}

pub fn train(cfg: &RunConfig, kind: ModelKind) -> Result<(), Failure> {
    let data = load_dataset(cfg)?;
    let (train_end, _) = cfg.split_hours()?;
    if train_end <= data.start_hour() || train_end > data.end_hour() {
        return Err(Failure::fit(format!(
            "train_end {} lies outside the dataset {}..{}",
            format_hour(train_end),
            format_hour(data.start_hour()),
            format_hour(data.end_hour())
        )));
    }
    let train = data.slice_hours(data.start_hour(), train_end);
    let clock = Instant::now();
    let (model, stages) =
        fit_logged(kind, &train, &cfg.forecast_config()).map_err(|e| Failure::fit(format!("{}: {e}", kind.id())))?;
    let total_seconds = clock.elapsed().as_secs_f64();

    let _lock = ArtifactLock::acquire(&cfg.artifact_dir)?;
    let dir = cfg.models_dir().join(model.model_id());
    save_bundle(&model, &dir).map_err(io_failure(&dir))?;
    write_json(
        &dir.join("train_log.json"),
        &TrainLog {
            model_id: model.model_id(),
            energy_type: cfg.energy_type,
            train_start: format_hour(train.start_hour()),
            train_end: format_hour(train_end),
            rows: train.len(),
            seed: cfg.seed,
            stages,
            total_seconds,
        },
    )?;
    println!("{} trained in {total_seconds:.1}s -> {}", model.model_id(), dir.display());
    Ok(())
}

/// Saved bundles in id order, optionally only `only`.
fn bundles(cfg: &RunConfig, only: Option<&str>) -> Result<Vec<Forecaster>, Failure> {
    let root = cfg.models_dir();
    let mut dirs: Vec<PathBuf> = match fs::read_dir(&root) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(BUNDLE_MANIFEST).is_file())
            .collect(),
        Err(_) => Vec::new(),
    };
    dirs.sort();
    if let Some(id) = only {
        dirs.retain(|d| d.file_name().is_some_and(|n| n == id));
    }
    dirs.iter()
        .map(|d| load_bundle(d).map_err(io_failure(d)))
        .collect()
}

fn forecast_runs(
    cfg: &RunConfig,
    data: &AlignedDataset,
    models: &[Forecaster],
    on_error: fn(String) -> Failure,
) -> Result<Vec<ForecastRun>, Failure> {
    let (train_end, test_end) = cfg.split_hours()?;
    let dir = cfg.root().join("forecasts");
    let mut runs = Vec::new();
    for m in models {
        let id = m.model_id();
        let out = walk(m, data, train_end..test_end).map_err(|e| on_error(format!("{id}: {e}")))?;
        info!("{id}: {} forecasts, {} skipped", out.run.pairs().len(), out.skipped.len());
        let path = dir.join(format!("{id}.csv"));
        out.run.write_csv(create(&path)?).map_err(io_failure(&path))?;
        write_json(&dir.join(format!("{id}.skipped.json")), &out.skipped)?;
        runs.push(out.run);
    }
    Ok(runs)
}

pub fn forecast(cfg: &RunConfig, kind: Option<ModelKind>) -> Result<(), Failure> {
    let data = load_dataset(cfg)?;
    let id = kind.map(|k| k.id());
    let models = bundles(cfg, id.as_deref())?;
    if models.is_empty() {
        return Err(Failure::fit(format!(
            "no trained model{} under {}",
            id.map(|i| format!(" `{i}`")).unwrap_or_default(),
            cfg.models_dir().display()
        )));
    }
    let _lock = ArtifactLock::acquire(&cfg.artifact_dir)?;
    for run in forecast_runs(cfg, &data, &models, Failure::fit)? {
        println!(
            "{}: {} of {} hours forecast",
            run.model_id,
            run.pairs().len(),
            run.len()
        );
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), Failure> {
    let data = load_dataset(cfg)?;
    let models = bundles(cfg, None)?;
    if models.is_empty() {
        return Err(Failure::evaluate(format!(
            "no trained models under {}",
            cfg.models_dir().display()
        )));
    }
    let _lock = ArtifactLock::acquire(&cfg.artifact_dir)?;
    let runs = forecast_runs(cfg, &data, &models, Failure::evaluate)?;
    let runs = common_support(&runs).map_err(|e| Failure::evaluate(e.to_string()))?;

    let dir = cfg.root().join("reports");
    let mut reports = Vec::new();
    let mut maps = BTreeMap::new();
    maps.insert("actual".to_string(), heatmap(&data.energy));
    for run in &runs {
        let report = score(run).map_err(|e| Failure::evaluate(format!("{}: {e}", run.model_id)))?;
        write_json(&dir.join(format!("{}.json", run.model_id)), &report)?;
        reports.push(report);
        maps.insert(run.model_id.clone(), heatmap(&run.predictions));
    }
    let table = compare(&reports).map_err(|e| Failure::evaluate(e.to_string()))?;
    let path = dir.join("comparison.csv");
    table.write_csv(create(&path)?).map_err(io_failure(&path))?;
    write_json(&dir.join("comparison.json"), &table)?;
    for (name, m) in &maps {
        let path = dir.join(format!("heatmap_{name}.csv"));
        m.write_csv(create(&path)?).map_err(io_failure(&path))?;
    }
    write_json(&dir.join("heatmaps.json"), &maps)?;
    print!("{}", render_table(&table));
    Ok(())
}

fn render_table(table: &Comparison) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>9} {:>9} {:>7} {:>9} {:>7} {:>7}",
        "model", "mae", "rmse", "<10%", "10-15%", ">15%", "hours"
    );
    for r in &table.rows {
        let p = &r.interval_pcts;
        let _ = writeln!(
            s,
            "{:<16} {:>9.5} {:>9.5} {:>7.2} {:>9.2} {:>7.2} {:>7}",
            r.model_id, r.mae, r.rmse, p.under_10, p.between_10_15, p.over_15, r.n_hours
        );
    }
    s
}

pub fn report(cfg: &RunConfig) -> Result<(), Failure> {
    let dir = cfg.root().join("reports");
    let path = dir.join("comparison.json");
    if !path.exists() {
        return Err(Failure::parse(format!(
            "{} not found; run `rescast evaluate` first",
            path.display()
        )));
    }
    let table: Comparison =
        serde_json::from_reader(open(&path)?).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
    let maps_path = dir.join("heatmaps.json");
    let maps: BTreeMap<String, HeatmapMatrix> = serde_json::from_reader(open(&maps_path)?)
        .map_err(|e| Failure::parse(format!("{}: {e}", maps_path.display())))?;
    let _lock = ArtifactLock::acquire(&cfg.artifact_dir)?;
    for (name, m) in &maps {
        let svg = dir.join(format!("heatmap_{name}.svg"));
        fs::write(&svg, m.to_svg(&format!("{} {name}", table.energy_type)))
            .map_err(|e| Failure::parse(format!("cannot write {}: {e}", svg.display())))?;
    }
    print!("{}", render_table(&table));
    Ok(())
}

fn year_start(year: i32) -> Result<i64, Failure> {
    parse_hour(&format!("{year:04}-01-01T00:00:00Z")).map_err(|e| Failure::parse(e.to_string()))
}

pub fn synth(out: &Path, energy_type: EnergyType, seed: u64, start_year: i32, years: i32) -> Result<(), Failure> {
    if years < 2 {
        return Err(Failure::parse("--years must be at least 2"));
    }
    let start = year_start(start_year)?;
    let test_start = year_start(start_year + years - 1)?;
    let end = year_start(start_year + years)?;
    let data = synthetic::generate(energy_type, start, (end - start) as usize, seed);

    let gen = out.join("generation.csv");
    write_generation_csv(&data.energy, create(&gen)?).map_err(io_failure(&gen))?;
    let wx = out.join("weather.csv");
    write_weather_csv(&data.weather, create(&wx)?).map_err(io_failure(&wx))?;

    let mut cfg = RunConfig {
        energy_type,
        seed,
        split: Some(
            SplitSpec::new(datetime_of(test_start), datetime_of(end)).map_err(|e| Failure::parse(e.to_string()))?,
        ),
        ..RunConfig::default()
    };
    cfg.model.grid = ParamGrid {
        n_estimators: Some(vec![100]),
        max_depth: Some(vec![None]),
        min_samples_split: Some(vec![5]),
        k_features: None,
    };
    cfg.model.trees.k_features = Some(40);
    write_json(&out.join("config.json"), &cfg)?;
    println!(
        "{} hours of synthetic {energy_type} data {}..{} -> {}",
        data.len(),
        format_hour(start),
        format_hour(end),
        out.display()
    );
    Ok(())
}
