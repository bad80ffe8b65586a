//! On-disk forecaster bundles: `manifest.json` plus one JSON file per artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Forecaster, ModelKind};
use crate::error::{Error, Result};
use crate::ingest::EnergyType;
use crate::series::ScalerParams;

pub const BUNDLE_MANIFEST: &str = "manifest.json";
const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    model_id: String,
    model: ModelKind,
    energy_type: EnergyType,
    /// Artifact name to file name, relative to the bundle directory.
    artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Scalers {
    energy: ScalerParams,
    weather: Vec<(String, ScalerParams)>,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, pretty: bool, artifacts: &mut BTreeMap<String, String>) -> Result<()> {
    let file = format!("{name}.json");
    let text = if pretty {
        serde_json::to_string_pretty(value)?
    } else {
        serde_json::to_string(value)?
    };
    fs::write(dir.join(&file), text)?;
    artifacts.insert(name.to_string(), file);
    Ok(())
}

/// Writes the bundle into `dir`, creating it if needed. Output is a pure
/// function of the forecaster, so refits with the same seed are byte-identical.
pub fn save_bundle(f: &Forecaster, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut artifacts = BTreeMap::new();
    let scalers = Scalers {
        energy: f.energy_scaler,
        weather: f.weather_scalers.clone(),
    };
    write_json(dir, "scalers", &scalers, true, &mut artifacts)?;
    if let Some(v) = &f.feature_spec {
        write_json(dir, "feature_spec", v, true, &mut artifacts)?;
    }
    if let Some(v) = &f.selection {
        write_json(dir, "selection", v, true, &mut artifacts)?;
    }
    if let Some(v) = &f.grid {
        write_json(dir, "grid", v, true, &mut artifacts)?;
    }
    if let Some(v) = &f.forest {
        write_json(dir, "forest", v, false, &mut artifacts)?;
    }
    if let Some(v) = &f.stad {
        write_json(dir, "stad", v, true, &mut artifacts)?;
    }
    if let Some(v) = &f.stad_spec {
        write_json(dir, "stad_regressors", v, true, &mut artifacts)?;
    }
    let manifest = Manifest {
        format_version: BUNDLE_VERSION,
        model_id: f.model_id(),
        model: f.kind,
        energy_type: f.energy_type,
        artifacts,
    };
    fs::write(dir.join(BUNDLE_MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<Forecaster> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(BUNDLE_MANIFEST))?)?;
    if manifest.format_version != BUNDLE_VERSION {
        return Err(Error::Bundle(format!(
            "unsupported bundle format {}",
            manifest.format_version
        )));
    }
    fn read<T: DeserializeOwned>(dir: &Path, m: &Manifest, name: &str) -> Result<Option<T>> {
        match m.artifacts.get(name) {
            None => Ok(None),
            Some(file) => Ok(Some(serde_json::from_str(&fs::read_to_string(dir.join(file))?)?)),
        }
    }
    let scalers: Scalers = read(dir, &manifest, "scalers")?
        .ok_or_else(|| Error::Bundle("bundle lacks scalers".into()))?;
    let f = Forecaster {
        kind: manifest.model,
        energy_type: manifest.energy_type,
        energy_scaler: scalers.energy,
        weather_scalers: scalers.weather,
        feature_spec: read(dir, &manifest, "feature_spec")?,
        selection: read(dir, &manifest, "selection")?,
        grid: read(dir, &manifest, "grid")?,
        forest: read(dir, &manifest, "forest")?,
        stad: read(dir, &manifest, "stad")?,
        stad_spec: read(dir, &manifest, "stad_regressors")?,
    };
    let needs_forest = matches!(f.kind, ModelKind::MlDirect | ModelKind::Hybrid);
    let needs_stad = matches!(f.kind, ModelKind::StadDirect | ModelKind::Hybrid);
    if needs_forest && (f.forest.is_none() || f.selection.is_none() || f.feature_spec.is_none()) {
        return Err(Error::Bundle(format!("{} bundle lacks forest artifacts", f.model_id())));
    }
    if needs_stad && f.stad.is_none() {
        return Err(Error::Bundle(format!("{} bundle lacks the decomposer", f.model_id())));
    }
    Ok(f)
}
