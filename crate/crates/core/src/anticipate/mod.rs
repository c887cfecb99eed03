//! Intent classification from partial observations, the gated evaluation
//! harness and a two-way ANOVA over its outcomes.

mod anova;
mod cues;
mod eval;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use anova::{anova_two_way, AnovaEffect, AnovaResidual, AnovaTable, ANOVA_METHOD};
pub use cues::{ArmCue, CueConfig, CueModel, CueRegistry, GazeCue, HeadCue};
pub use eval::{
    derive_events, gate_cuts, observe, run_gated_eval, Chance, EvalConfig, GateConfig, GateResult,
    GatedReport, Perception, TrialGateRow, REPORT_FORMAT,
};

use crate::dataset::{Action, ActionLabel, Direction, LabelCounts, Point3, SceneGeometry, Trajectory};
use crate::gaze::FixationTarget;
use crate::trajgmm::ActionModels;
use crate::trajgmr::GmrError;

#[derive(Debug, thiserror::Error)]
pub enum AnticipateError {
    #[error("observation carries no cues")]
    EmptyObservation,
    #[error("no model for labels: {}", .0.iter().map(|l| l.token()).collect::<Vec<_>>().join(","))]
    Coverage(Vec<ActionLabel>),
    #[error("invalid priors: {0}")]
    Priors(String),
    #[error("{} test trial(s) also used for training: {:?}", .0.len(), .0)]
    Leakage(Vec<u32>),
    #[error("design error: {0}")]
    Design(String),
    #[error("degenerate design: {0}")]
    Degenerate(String),
    #[error("trial {trial_id}: {msg}")]
    Events { trial_id: u32, msg: String },
    #[error("unknown gate '{0}'")]
    UnknownGate(String),
    #[error("unknown cue '{0}'")]
    UnknownCue(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Gmr(#[from] GmrError),
}

/// Information cut of the gated experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gate {
    /// Gaze shift towards the goal.
    G,
    /// Plus the head turning to it.
    GH,
    /// Plus the start of the arm movement.
    GHA,
    /// Plus the whole arm movement.
    GHAPlus,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::G, Gate::GH, Gate::GHA, Gate::GHAPlus];

    pub fn name(self) -> &'static str {
        match self {
            Gate::G => "G",
            Gate::GH => "GH",
            Gate::GHA => "GHA",
            Gate::GHAPlus => "GHA+",
        }
    }

    pub fn has_head(self) -> bool {
        self >= Gate::GH
    }

    pub fn has_arm(self) -> bool {
        self >= Gate::GHA
    }

    /// Parses a comma-separated list, returned sorted and deduplicated.
    pub fn parse_list(s: &str) -> Result<Vec<Gate>, AnticipateError> {
        let mut gates = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Gate>, _>>()?;
        gates.sort();
        gates.dedup();
        if gates.is_empty() {
            return Err(AnticipateError::Parameter("empty gate list".into()));
        }
        Ok(gates)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gate {
    type Err = AnticipateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Gate::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("GHAplus") && *g == Gate::GHAPlus))
            .ok_or_else(|| AnticipateError::UnknownGate(s.to_string()))
    }
}

impl Serialize for Gate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Gate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Arm samples from reach onset up to the gate cut.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmPrefix {
    pub onset: f64,
    pub samples: Trajectory,
}

/// What an observer has seen of a trial up to some cut.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub scene: SceneGeometry,
    /// Estimated post-pickup fixation targets in order. `Some(vec![])` means
    /// gaze was watched but nothing informative was seen yet.
    pub gaze_targets: Option<Vec<FixationTarget>>,
    /// Unit head direction at the cut.
    pub head_direction: Option<Point3>,
    pub arm: Option<ArmPrefix>,
}

impl Observation {
    pub fn new(scene: SceneGeometry) -> Self {
        Self {
            scene,
            gaze_targets: None,
            head_direction: None,
            arm: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.gaze_targets.is_none() && self.head_direction.is_none() && self.arm.is_none()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Proportional to the training trial counts.
    #[default]
    Empirical,
    Uniform,
}

/// Label prior probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Priors(pub BTreeMap<ActionLabel, f64>);

impl Priors {
    pub fn uniform() -> Self {
        Self(ActionLabel::ALL.into_iter().map(|l| (l, 1.0 / 6.0)).collect())
    }

    pub fn from_counts(c: &LabelCounts) -> Result<Self, AnticipateError> {
        let total = c.total();
        if total == 0 {
            return Err(AnticipateError::Priors("no training trials".into()));
        }
        Ok(Self(
            ActionLabel::ALL
                .into_iter()
                .map(|l| (l, c.get(l) as f64 / total as f64))
                .collect(),
        ))
    }

    pub fn for_mode(mode: PriorMode, models: &ActionModels) -> Result<Self, AnticipateError> {
        match mode {
            PriorMode::Uniform => Ok(Self::uniform()),
            PriorMode::Empirical => Self::from_counts(&models.training_counts),
        }
    }

    pub fn check(&self) -> Result<(), AnticipateError> {
        if self.0.values().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(AnticipateError::Priors("probabilities must be finite and >= 0".into()));
        }
        let sum: f64 = self.0.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(AnticipateError::Priors(format!("sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn get(&self, l: ActionLabel) -> f64 {
        self.0.get(&l).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub probs: BTreeMap<ActionLabel, f64>,
}

impl Posterior {
    /// Most probable label; ties go to the earlier label in canonical order.
    pub fn argmax(&self) -> ActionLabel {
        let mut best = (ActionLabel::ALL[0], f64::NEG_INFINITY);
        for l in ActionLabel::ALL {
            let p = self.probs.get(&l).copied().unwrap_or(0.0);
            if p > best.1 {
                best = (l, p);
            }
        }
        best.0
    }

    pub fn get(&self, l: ActionLabel) -> f64 {
        self.probs.get(&l).copied().unwrap_or(0.0)
    }

    pub fn direction_marginal(&self, d: Direction) -> f64 {
        Action::ALL.iter().map(|a| self.get(ActionLabel::new(*a, d))).sum()
    }

    pub fn action_marginal(&self, a: Action) -> f64 {
        Direction::ALL.iter().map(|d| self.get(ActionLabel::new(a, *d))).sum()
    }
}

/// Posterior ∝ prior × Π cue likelihoods, accumulated in log space.
pub fn classify(
    obs: &Observation,
    models: &ActionModels,
    priors: &Priors,
    cues: &CueRegistry,
) -> Result<Posterior, AnticipateError> {
    if obs.is_empty() {
        return Err(AnticipateError::EmptyObservation);
    }
    priors.check()?;
    let missing: Vec<ActionLabel> = ActionLabel::ALL
        .into_iter()
        .filter(|l| models.get(*l).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(AnticipateError::Coverage(missing));
    }
    let mut logp: BTreeMap<ActionLabel, f64> = ActionLabel::ALL
        .into_iter()
        .map(|l| (l, priors.get(l).ln()))
        .collect();
    for cue in cues.iter() {
        if let Some(ll) = cue.log_likelihoods(obs, models)? {
            for (l, v) in ll {
                *logp.get_mut(&l).expect("all labels") += v;
            }
        }
    }
    Ok(normalize_log(logp))
}

fn normalize_log(logp: BTreeMap<ActionLabel, f64>) -> Posterior {
    let m = logp.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        // Every label ruled out or an overflow: fall back to uniform.
        return Posterior {
            probs: logp.keys().map(|l| (*l, 1.0 / logp.len() as f64)).collect(),
        };
    }
    let w: BTreeMap<ActionLabel, f64> = logp.into_iter().map(|(l, v)| (l, (v - m).exp())).collect();
    let s: f64 = w.values().sum();
    Posterior {
        probs: w.into_iter().map(|(l, v)| (l, v / s)).collect(),
    }
}
