use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    ActionModel, ActionModels, EmConfig, FitMeta, GmmComponent, GmmError, GmmModel,
    TimeNormalization,
};
use crate::dataset::{ActionLabel, LabelCounts};

pub const GMM_VERSION: &str = "gmm-v1";
pub const BUNDLE_FORMAT: &str = "gmm-bundle-v1";

/// On-disk form of a single mixture. Covariances are flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmFile {
    pub version: String,
    pub k: usize,
    pub dim: usize,
    pub input_dims: Vec<usize>,
    pub output_dims: Vec<usize>,
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
    pub fit_meta: FitMeta,
}

impl From<&GmmModel> for GmmFile {
    fn from(m: &GmmModel) -> Self {
        let dim = m.dim();
        Self {
            version: GMM_VERSION.to_string(),
            k: m.k(),
            dim,
            input_dims: m.input_dims.clone(),
            output_dims: m.output_dims.clone(),
            priors: m.components.iter().map(|c| c.prior).collect(),
            means: m.components.iter().map(|c| c.mean.as_slice().to_vec()).collect(),
            covariances: m
                .components
                .iter()
                .map(|c| {
                    (0..dim)
                        .flat_map(|r| (0..dim).map(move |col| (r, col)))
                        .map(|(r, col)| c.covariance[(r, col)])
                        .collect()
                })
                .collect(),
            fit_meta: m.fit_meta.clone(),
        }
    }
}

impl TryFrom<GmmFile> for GmmModel {
    type Error = GmmError;

    fn try_from(f: GmmFile) -> Result<Self, GmmError> {
        let bad = |msg: String| Err(GmmError::Format(msg));
        if f.version != GMM_VERSION {
            return bad(format!("unsupported version '{}'", f.version));
        }
        let (k, d) = (f.k, f.dim);
        if k == 0 || f.priors.len() != k || f.means.len() != k || f.covariances.len() != k {
            return bad(format!("expected {k} priors, means and covariances"));
        }
        let mut dims: Vec<usize> = f.input_dims.iter().chain(&f.output_dims).copied().collect();
        dims.sort_unstable();
        if dims != (0..d).collect::<Vec<_>>() {
            return bad("input_dims and output_dims must partition 0..dim".into());
        }
        let sum: f64 = f.priors.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || f.priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad(format!("priors must be probabilities summing to 1, got sum {sum}"));
        }
        let mut components = Vec::with_capacity(k);
        for (j, ((prior, mean), cov)) in f.priors.iter().zip(f.means).zip(f.covariances).enumerate() {
            if mean.len() != d || cov.len() != d * d {
                return bad(format!("component {j} has the wrong shape"));
            }
            let covariance = DMatrix::from_row_slice(d, d, &cov);
            if (0..d).any(|r| (0..r).any(|c| covariance[(r, c)] != covariance[(c, r)])) {
                return bad(format!("covariance {j} is not symmetric"));
            }
            components.push(GmmComponent {
                prior: *prior,
                mean: DVector::from_vec(mean),
                covariance,
            });
        }
        Ok(GmmModel {
            components,
            input_dims: f.input_dims,
            output_dims: f.output_dims,
            fit_meta: f.fit_meta,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelEntry {
    PerAxis(Vec<GmmFile>),
    Joint(GmmFile),
}

/// On-disk form of [`ActionModels`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleFile {
    pub format: String,
    pub time_normalization: TimeNormalization,
    pub em_config: EmConfig,
    pub reach_durations: BTreeMap<ActionLabel, f64>,
    pub training_trial_ids: BTreeSet<u32>,
    pub training_counts: BTreeMap<ActionLabel, usize>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    pub models: BTreeMap<ActionLabel, ModelEntry>,
}

impl From<&ActionModels> for BundleFile {
    fn from(m: &ActionModels) -> Self {
        Self {
            format: BUNDLE_FORMAT.to_string(),
            time_normalization: m.time_normalization,
            em_config: m.config.clone(),
            reach_durations: m.reach_durations.clone(),
            training_trial_ids: m.training_trial_ids.clone(),
            training_counts: ActionLabel::ALL
                .into_iter()
                .map(|l| (l, m.training_counts.get(l)))
                .collect(),
            meta: m.meta.clone(),
            models: m
                .models
                .iter()
                .map(|(l, am)| {
                    let e = match am {
                        ActionModel::PerAxis(v) => ModelEntry::PerAxis(v.iter().map(GmmFile::from).collect()),
                        ActionModel::Joint(g) => ModelEntry::Joint(g.into()),
                    };
                    (*l, e)
                })
                .collect(),
        }
    }
}

impl TryFrom<BundleFile> for ActionModels {
    type Error = GmmError;

    fn try_from(b: BundleFile) -> Result<Self, GmmError> {
        if b.format != BUNDLE_FORMAT {
            return Err(GmmError::Format(format!("unsupported bundle format '{}'", b.format)));
        }
        let mut models = BTreeMap::new();
        for (label, entry) in b.models {
            let m = match entry {
                ModelEntry::PerAxis(v) => {
                    let gs = v
                        .into_iter()
                        .map(GmmModel::try_from)
                        .collect::<Result<Vec<_>, _>>()?;
                    let arr: [GmmModel; 3] = gs.try_into().map_err(|_| {
                        GmmError::Format(format!("{label}: per-axis entry needs 3 models"))
                    })?;
                    ActionModel::PerAxis(Box::new(arr))
                }
                ModelEntry::Joint(g) => ActionModel::Joint(g.try_into()?),
            };
            if m.gmms().iter().any(|g| g.fit_meta.time_normalization != b.time_normalization) {
                return Err(GmmError::Format(format!(
                    "{label}: model time normalization differs from the bundle"
                )));
            }
            models.insert(label, m);
        }
        let mut counts = LabelCounts::default();
        for (l, c) in &b.training_counts {
            counts.0[l.index()] = *c;
        }
        Ok(ActionModels {
            models,
            time_normalization: b.time_normalization,
            reach_durations: b.reach_durations,
            training_trial_ids: b.training_trial_ids,
            training_counts: counts,
            config: b.em_config,
            meta: b.meta,
        })
    }
}

impl ActionModels {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&BundleFile::from(self)).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, GmmError> {
        let b: BundleFile = serde_json::from_str(s).map_err(|e| GmmError::Format(e.to_string()))?;
        b.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajgmm::{fit, TrainingMatrix};

    #[test]
    fn model_file_round_trip_is_exact() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 / 39.0;
                vec![t, (t * 3.1).sin() + 0.01 * ((i * 7 % 5) as f64)]
            })
            .collect();
        let m = fit(&TrainingMatrix::from_rows(rows), 2, &EmConfig::default(), 3).unwrap();
        let json = serde_json::to_string(&GmmFile::from(&m)).unwrap();
        let back: GmmModel = serde_json::from_str::<GmmFile>(&json).unwrap().try_into().unwrap();
        let mut expected = m.clone();
        expected.fit_meta.loglik_trace.clear();
        assert_eq!(back, expected);
    }

    #[test]
    fn rejects_wrong_version_and_priors() {
        let m = GmmModel::from_parts(
            vec![GmmComponent {
                prior: 1.0,
                mean: DVector::from_vec(vec![0.0, 0.0]),
                covariance: DMatrix::identity(2, 2),
            }],
            TimeNormalization::Unit,
        );
        let mut f = GmmFile::from(&m);
        f.version = "gmm-v0".into();
        assert!(GmmModel::try_from(f.clone()).is_err());
        f.version = GMM_VERSION.into();
        f.priors = vec![0.5];
        assert!(GmmModel::try_from(f).is_err());
    }
}
