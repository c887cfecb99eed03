use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::{AnticipateError, Observation};
use crate::dataset::{Action, ActionLabel, SceneGeometry};
use crate::gaze::{generate_script, GazePattern, TargetKind, TimingConfig};
use crate::trajgmm::{normalize_time, ActionModel, ActionModels, Gaussian};
use crate::trajgmr::{regress, GmrQuery};

type LabelScores = BTreeMap<ActionLabel, f64>;

/// One source of evidence about the intended action.
pub trait CueModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Log-likelihood of the observation under every label, or `None` when the
    /// observation does not carry this cue.
    fn log_likelihoods(
        &self,
        obs: &Observation,
        models: &ActionModels,
    ) -> Result<Option<LabelScores>, AnticipateError>;
}

/// Cue parameters and which cues are used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CueConfig {
    pub enabled: Vec<String>,
    /// Probability that a fixation is attributed to the wrong target.
    pub gaze_confusion: f64,
    /// Angular spread of the head cue, radians.
    pub head_sigma: f64,
    /// Observation noise added to the GMR covariance, meters.
    pub arm_sigma: f64,
    /// Give pattern weights in [`GazePattern::GIVE`] order.
    pub pattern_weights: [f64; 4],
    pub timing: TimingConfig,
}

impl Default for CueConfig {
    fn default() -> Self {
        Self {
            enabled: vec!["gaze".into(), "head".into(), "arm".into()],
            gaze_confusion: 0.1,
            head_sigma: 0.1,
            arm_sigma: 0.005,
            pattern_weights: [1.0; 4],
            timing: TimingConfig::default(),
        }
    }
}

impl CueConfig {
    pub fn check(&self) -> Result<(), AnticipateError> {
        let bad = |m: &str| Err(AnticipateError::Parameter(m.to_string()));
        if !(self.gaze_confusion > 0.0 && self.gaze_confusion < 1.0) {
            return bad("gaze_confusion must be in (0, 1)");
        }
        if !(self.head_sigma > 0.0 && self.arm_sigma > 0.0) {
            return bad("head_sigma and arm_sigma must be positive");
        }
        if self.pattern_weights.iter().any(|w| !(*w >= 0.0)) || self.pattern_weights.iter().sum::<f64>() <= 0.0 {
            return bad("pattern weights must be >= 0 with a positive sum");
        }
        Ok(())
    }
}

/// Ordered set of cue models, looked up by name.
#[derive(Clone, Default)]
pub struct CueRegistry {
    cues: Vec<Arc<dyn CueModel>>,
}

impl CueRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Gaze, head and arm cues built from `cfg`, restricted to `cfg.enabled`.
    pub fn from_config(cfg: &CueConfig) -> Result<Self, AnticipateError> {
        cfg.check()?;
        let all: Vec<Arc<dyn CueModel>> = vec![
            Arc::new(GazeCue::new(cfg)),
            Arc::new(HeadCue::new(cfg)),
            Arc::new(ArmCue {
                sigma: cfg.arm_sigma,
            }),
        ];
        let mut r = Self::empty();
        for name in &cfg.enabled {
            let cue = all
                .iter()
                .find(|c| c.name() == name)
                .ok_or_else(|| AnticipateError::UnknownCue(name.clone()))?;
            r.register(cue.clone());
        }
        Ok(r)
    }

    /// Adds a cue, replacing any cue with the same name.
    pub fn register(&mut self, cue: Arc<dyn CueModel>) {
        match self.cues.iter().position(|c| c.name() == cue.name()) {
            Some(i) => self.cues[i] = cue,
            None => self.cues.push(cue),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn CueModel>> {
        self.cues.iter().find(|c| c.name() == name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.cues.iter().map(|c| c.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn CueModel>> {
        self.cues.iter()
    }
}

fn log_sum_exp(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Post-pickup target sequences a label can produce, with probabilities.
fn label_sequences(
    label: ActionLabel,
    scene: &SceneGeometry,
    timing: &TimingConfig,
    weights: &[f64; 4],
) -> Result<Vec<(f64, Vec<TargetKind>)>, AnticipateError> {
    let patterns: Vec<(GazePattern, f64)> = match label.action {
        Action::Place => vec![(GazePattern::GoalOnly, 1.0)],
        Action::Give => {
            let total: f64 = weights.iter().sum();
            GazePattern::GIVE
                .into_iter()
                .zip(weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(p, w)| (p, w / total))
                .collect()
        }
    };
    patterns
        .into_iter()
        .map(|(p, w)| {
            let script = generate_script(label, p, timing, scene)
                .map_err(|e| AnticipateError::Parameter(e.to_string()))?;
            let mut seq: Vec<TargetKind> = Vec::new();
            for ev in script.post_pickup() {
                if seq.last() != Some(&ev.target.kind) {
                    seq.push(ev.target.kind);
                }
            }
            Ok((w, seq))
        })
        .collect()
}

/// Fixation-target sequence likelihood with a symmetric confusion model,
/// marginalized over the label's gaze patterns.
pub struct GazeCue {
    confusion: f64,
    timing: TimingConfig,
    weights: [f64; 4],
}

impl GazeCue {
    /// Post-pickup targets an observed fixation can be attributed to.
    const KINDS: f64 = 9.0;

    pub fn new(cfg: &CueConfig) -> Self {
        Self {
            confusion: cfg.gaze_confusion,
            timing: cfg.timing,
            weights: cfg.pattern_weights,
        }
    }
}

impl CueModel for GazeCue {
    fn name(&self) -> &'static str {
        "gaze"
    }

    fn log_likelihoods(
        &self,
        obs: &Observation,
        _models: &ActionModels,
    ) -> Result<Option<LabelScores>, AnticipateError> {
        let Some(targets) = &obs.gaze_targets else {
            return Ok(None);
        };
        let hit = (1.0 - self.confusion).ln();
        let miss = (self.confusion / (Self::KINDS - 1.0)).ln();
        let observed: Vec<TargetKind> = targets
            .iter()
            .map(|t| t.kind)
            .filter(|k| *k != TargetKind::InitialObject)
            .collect();
        let mut out = LabelScores::new();
        for label in ActionLabel::ALL {
            let seqs = label_sequences(label, &obs.scene, &self.timing, &self.weights)?;
            let ll = log_sum_exp(seqs.iter().map(|(w, seq)| {
                w.ln()
                    + observed
                        .iter()
                        .enumerate()
                        .map(|(i, k)| if seq.get(i) == Some(k) { hit } else { miss })
                        .sum::<f64>()
            }));
            out.insert(label, ll);
        }
        Ok(Some(out))
    }
}

/// Gaussian on the angle between the observed head direction and the
/// directions to the targets a label looks at.
pub struct HeadCue {
    sigma: f64,
    timing: TimingConfig,
    weights: [f64; 4],
}

impl HeadCue {
    pub fn new(cfg: &CueConfig) -> Self {
        Self {
            sigma: cfg.head_sigma,
            timing: cfg.timing,
            weights: cfg.pattern_weights,
        }
    }
}

impl CueModel for HeadCue {
    fn name(&self) -> &'static str {
        "head"
    }

    fn log_likelihoods(
        &self,
        obs: &Observation,
        _models: &ActionModels,
    ) -> Result<Option<LabelScores>, AnticipateError> {
        let Some(h) = obs.head_direction else {
            return Ok(None);
        };
        let head = Vector3::from(h).normalize();
        let eye = Vector3::from(obs.scene.actor_eye);
        let log_norm = -(self.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
        let mut out = LabelScores::new();
        for label in ActionLabel::ALL {
            let seqs = label_sequences(label, &obs.scene, &self.timing, &self.weights)?;
            let terms = seqs.iter().flat_map(|(w, seq)| {
                let share = w / seq.len() as f64;
                seq.iter().map(move |k| {
                    let dir = (Vector3::from(k.point(&obs.scene)) - eye).normalize();
                    let angle = head.dot(&dir).clamp(-1.0, 1.0).acos();
                    share.ln() + log_norm - 0.5 * (angle / self.sigma).powi(2)
                })
            });
            out.insert(label, log_sum_exp(terms));
        }
        Ok(Some(out))
    }
}

/// GMR predictive density of every arm-prefix sample.
pub struct ArmCue {
    pub sigma: f64,
}

impl CueModel for ArmCue {
    fn name(&self) -> &'static str {
        "arm"
    }

    fn log_likelihoods(
        &self,
        obs: &Observation,
        models: &ActionModels,
    ) -> Result<Option<LabelScores>, AnticipateError> {
        let Some(arm) = &obs.arm else {
            return Ok(None);
        };
        let var_obs = self.sigma * self.sigma;
        let mut out = LabelScores::new();
        for label in ActionLabel::ALL {
            let model = models
                .get(label)
                .ok_or_else(|| AnticipateError::Coverage(vec![label]))?;
            if arm.samples.is_empty() {
                out.insert(label, 0.0);
                continue;
            }
            let dur = models.reach_durations.get(&label).copied().unwrap_or(1.0);
            let end = models.reach_end(label);
            let taus: Vec<f64> = arm
                .samples
                .times
                .iter()
                .map(|t| normalize_time(*t, (arm.onset, arm.onset + dur), models.time_normalization).clamp(0.0, end))
                .collect();
            let q = GmrQuery::new(taus)?;
            let mut ll = 0.0;
            match model {
                ActionModel::PerAxis(axes) => {
                    for (a, g) in axes.iter().enumerate() {
                        let r = regress(g, &q)?;
                        for (i, p) in arm.samples.points.iter().enumerate() {
                            let var = r.covariance[i][(0, 0)].max(0.0) + var_obs;
                            let e = p[a] - r.mean[i][0];
                            ll += -0.5 * (e * e / var + (2.0 * std::f64::consts::PI * var).ln());
                        }
                    }
                }
                ActionModel::Joint(g) => {
                    let r = regress(g, &q)?;
                    for (i, p) in arm.samples.points.iter().enumerate() {
                        let cov: DMatrix<f64> = &r.covariance[i] + DMatrix::identity(3, 3) * var_obs;
                        let gauss = Gaussian::new(&r.mean[i], &cov).ok_or_else(|| {
                            AnticipateError::Parameter("predictive covariance not positive definite".into())
                        })?;
                        ll += gauss.log_density(DVector::from_row_slice(p).as_slice());
                    }
                }
            }
            out.insert(label, ll);
        }
        Ok(Some(out))
    }
}
