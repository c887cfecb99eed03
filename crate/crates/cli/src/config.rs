use std::fs;
use std::path::Path;

use legible::anticipate::EvalConfig;
use legible::dataset::SynthConfig;
use legible::streamsync::AlignConfig;
use legible::trajgmm::EmConfig;
use legible::trajgmr::CovarianceMode;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmrSettings {
    pub points: usize,
    pub covariance: CovarianceMode,
}

impl Default for GmrSettings {
    fn default() -> Self {
        Self {
            points: 100,
            covariance: CovarianceMode::MomentMatched,
        }
    }
}

/// Everything a command may read, fully resolved.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub em: EmConfig,
    pub gmr: GmrSettings,
    pub eval: EvalConfig,
    pub align: AlignConfig,
}

impl RunConfig {
    /// Defaults, then the config file, then `--set` pairs, then command flags.
    pub fn resolve(
        file: Option<&Path>,
        sets: &[String],
        flags: &[(String, Value)],
    ) -> Result<Self, CliError> {
        let mut tree = serde_json::to_value(RunConfig::default()).expect("serializable");
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let overlay: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            merge(&mut tree, overlay, "")?;
        }
        for s in sets {
            let (key, raw) = s
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("--set expects key=value, got '{s}'")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut tree, key.trim(), value)?;
        }
        for (key, value) in flags {
            set_path(&mut tree, key, value.clone())?;
        }
        serde_json::from_value(tree).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("serializable");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

fn merge(base: &mut Value, overlay: Value, prefix: &str) -> Result<(), CliError> {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            let open = b.is_empty();
            for (k, v) in o {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &path)?,
                    None if open => {
                        b.insert(k, v);
                    }
                    None => return Err(CliError::config(format!("unknown config key '{path}'"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let unknown = || CliError::config(format!("unknown config key '{key}'"));
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().ok_or_else(unknown)?;
    let mut node = tree;
    for p in parents {
        node = node.get_mut(*p).ok_or_else(unknown)?;
    }
    let obj = node.as_object_mut().ok_or_else(unknown)?;
    if !obj.contains_key(*last) && !obj.is_empty() {
        return Err(unknown());
    }
    obj.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_overrides_nested_values() {
        let c = RunConfig::resolve(None, &["em.components=2".into(), "eval.prior_mode=uniform".into()], &[]).unwrap();
        assert_eq!(c.em.components, 2);
        assert_eq!(c.eval.prior_mode, legible::anticipate::PriorMode::Uniform);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::resolve(None, &["em.nope=1".into()], &[]).is_err());
        assert!(RunConfig::resolve(None, &["em".into()], &[]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.em.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }
}
