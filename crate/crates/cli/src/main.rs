use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rescast::forecast::ModelKind;
use rescast::EnergyType;

mod commands;
mod config;
mod lock;

use config::RunConfig;

/// Short-term solar and wind generation forecasting.
#[derive(Debug, Parser)]
#[command(name = "rescast", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, align and gap-fill the raw CSVs into a canonical dataset.
    Ingest(Common),
    /// Fit one model on the training span and save its bundle.
    Train(ModelArgs),
    /// Walk-forward forecasts over the test span for saved bundles.
    Forecast(ModelArgs),
    /// Score every saved bundle on the common test support.
    Evaluate(Common),
    /// Print the comparison table and render heat maps as SVG.
    Report(Common),
    /// Write seeded synthetic generation and weather CSVs.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(EnergyType))]
    energy_type: Option<EnergyType>,
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Persistence lag in days.
    #[arg(long)]
    n_days: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(EnergyType), default_value = "solar")]
    energy_type: EnergyType,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving generation.csv, weather.csv and config.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2017)]
    start_year: i32,
    #[arg(long, default_value_t = 4)]
    years: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Persistence,
    Ml,
    Stad,
    Hybrid,
}

impl ModelArg {
    fn kind(self, n_days: usize) -> ModelKind {
        match self {
            ModelArg::Persistence => ModelKind::Persistence { n_days },
            ModelArg::Ml => ModelKind::MlDirect,
            ModelArg::Stad => ModelKind::StadDirect,
            ModelArg::Hybrid => ModelKind::Hybrid,
        }
    }
}

/// A failed command: message for stderr plus the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    /// Unreadable input or configuration.
    pub fn parse(message: impl Into<String>) -> Self {
        Failure::new(1, message)
    }

    pub fn align(message: impl Into<String>) -> Self {
        Failure::new(2, message)
    }

    pub fn fit(message: impl Into<String>) -> Self {
        Failure::new(3, message)
    }

    pub fn evaluate(message: impl Into<String>) -> Self {
        Failure::new(4, message)
    }
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(t) = self.energy_type {
            cfg.energy_type = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.artifact_dir = o.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest(c) => commands::ingest(&c.resolve()?),
        Command::Train(m) => {
            let mut cfg = m.common.resolve()?;
            if let Some(n) = m.n_days {
                cfg.persistence_days = n;
            }
            let arg = m.model.unwrap_or(ModelArg::Hybrid);
            commands::train(&cfg, arg.kind(cfg.persistence_days))
        }
        Command::Forecast(m) => {
            let mut cfg = m.common.resolve()?;
            if let Some(n) = m.n_days {
                cfg.persistence_days = n;
            }
            let kind = m.model.map(|a| a.kind(cfg.persistence_days));
            commands::forecast(&cfg, kind)
        }
        Command::Evaluate(c) => commands::evaluate(&c.resolve()?),
        Command::Report(c) => commands::report(&c.resolve()?),
        Command::Synth(s) => commands::synth(&s.out, s.energy_type, s.seed, s.start_year, s.years),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RESCAST_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
