use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{parse_trial, serialize_trial, ActionLabel, Dataset, DatasetError};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_FORMAT: &str = "dataset-manifest-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub trial_id: u32,
    pub label: ActionLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub trials: Vec<ManifestEntry>,
    pub counts: BTreeMap<ActionLabel, usize>,
    /// Free-form provenance (tool version, config hash).
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Manifest {
    pub fn for_dataset(d: &Dataset, meta: BTreeMap<String, String>) -> Self {
        let counts = d.counts();
        Self {
            format: MANIFEST_FORMAT.into(),
            trials: d
                .trials
                .iter()
                .map(|t| ManifestEntry {
                    file: trial_file_name(t.trial_id),
                    trial_id: t.trial_id,
                    label: t.label,
                })
                .collect(),
            counts: ActionLabel::ALL.iter().map(|l| (*l, counts.get(*l))).collect(),
            meta,
        }
    }
}

pub fn trial_file_name(id: u32) -> String {
    format!("trial_{id:05}.csv")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes one CSV per trial plus `manifest.json` into `dir` (created if needed).
pub fn write_dataset(
    dir: &Path,
    d: &Dataset,
    meta: BTreeMap<String, String>,
) -> Result<Manifest, DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = Manifest::for_dataset(d, meta);
    for (trial, entry) in d.trials.iter().zip(&manifest.trials) {
        let path = dir.join(&entry.file);
        fs::write(&path, serialize_trial(trial)).map_err(io_err(&path))?;
    }
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

/// Loads every trial listed in `dir/manifest.json`. Trial files are parsed in
/// parallel; the result keeps manifest order.
pub fn load_dataset(dir: &Path) -> Result<(Manifest, Dataset), DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    let trials = manifest
        .trials
        .par_iter()
        .map(|e| {
            let p = dir.join(&e.file);
            let content = fs::read_to_string(&p).map_err(io_err(&p))?;
            let trial = parse_trial(&content)?;
            if trial.trial_id != e.trial_id || trial.label != e.label {
                return Err(DatasetError::Manifest(format!(
                    "{} does not match its manifest entry",
                    e.file
                )));
            }
            Ok(trial)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((manifest, Dataset::new(trials)))
}
