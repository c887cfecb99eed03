use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cues::CueConfig;
use super::{
    anova_two_way, classify, AnovaTable, AnticipateError, ArmPrefix, CueRegistry, Gate,
    Observation, PriorMode, Priors,
};
use crate::dataset::{
    fmt_time, Action, ActionLabel, Dataset, TrialEvents, TrialRecord, Trajectory, GAZE_STREAM,
    HEAD_STREAM,
};
use crate::gaze::{assign_target, detect_fixations, DispersionThreshold, FixationTarget, TargetKind};
use crate::trajgmm::{reach_window, ActionModels};

pub const REPORT_FORMAT: &str = "gated-report-v1";

const HEAD_SPEED_WINDOW: f64 = 0.1;

/// Where each gate cuts a trial, relative to its events.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    /// Gaze visible after the goal-directed saccade at gate G, seconds.
    pub gaze_window: f64,
    /// Fraction of the reach visible at gate GHA.
    pub arm_fraction: f64,
    /// Head angular speed separating a turn from rest, rad/s. Only used when
    /// a trial has no event annotations.
    pub head_speed_threshold: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            gaze_window: 0.15,
            arm_fraction: 0.25,
            head_speed_threshold: 0.3,
        }
    }
}

/// How the classifier perceives the gaze stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Perception {
    /// Std of the error added to each fixation centroid before it is
    /// attributed to a target, meters.
    pub gaze_noise: f64,
    pub fixation: DispersionThreshold,
}

impl Default for Perception {
    fn default() -> Self {
        Self {
            gaze_noise: 0.08,
            fixation: DispersionThreshold::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub prior_mode: PriorMode,
    pub gates: GateConfig,
    pub cues: CueConfig,
    pub perception: Perception,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            prior_mode: PriorMode::Empirical,
            gates: GateConfig::default(),
            cues: CueConfig::default(),
            perception: Perception::default(),
            seed: 7,
        }
    }
}

/// Event times of a trial: its annotations, or estimates from the streams.
pub fn derive_events(
    trial: &TrialRecord,
    perception: &Perception,
    gates: &GateConfig,
) -> Result<TrialEvents, AnticipateError> {
    if let Some(ev) = trial.events {
        return Ok(ev);
    }
    let err = |msg: String| AnticipateError::Events {
        trial_id: trial.trial_id,
        msg,
    };
    let gaze = trial
        .stream(GAZE_STREAM)
        .ok_or_else(|| err("no gaze stream".into()))?;
    let gaze_shift = detect_fixations(gaze, &perception.fixation)
        .into_iter()
        .find(|f| {
            assign_target(&f.centroid, &trial.scene, f64::INFINITY)
                .is_some_and(|k| k != TargetKind::InitialObject)
        })
        .map(|f| f.start)
        .ok_or_else(|| err("no goal-directed fixation found".into()))?;

    let mut head_settle = gaze_shift;
    if let Some(head) = trial.stream(HEAD_STREAM).filter(|s| s.dim == 3) {
        let s = &head.samples;
        // Differencing across a window keeps sensor noise below the threshold.
        let speed = |i: usize| {
            let j = s[..i].partition_point(|x| x.t <= s[i].t - HEAD_SPEED_WINDOW).saturating_sub(1);
            let a = Vector3::from_row_slice(&s[j].value).normalize();
            let b = Vector3::from_row_slice(&s[i].value).normalize();
            a.dot(&b).clamp(-1.0, 1.0).acos() / (s[i].t - s[j].t)
        };
        let start = s.partition_point(|x| x.t < gaze_shift).max(1);
        if let Some(moving) = (start..s.len()).find(|&i| speed(i) > gates.head_speed_threshold) {
            head_settle = (moving + 1..s.len())
                .find(|&i| speed(i) <= gates.head_speed_threshold)
                .map_or(s[s.len() - 1].t, |i| s[i].t - 0.5 * HEAD_SPEED_WINDOW);
        }
    }
    let (arm_onset, arm_end) = reach_window(trial).map_err(|e| err(e.to_string()))?;
    Ok(TrialEvents {
        gaze_shift,
        head_settle,
        arm_onset,
        arm_end,
    })
}

/// Cut time of each gate. Cuts never decrease from one gate to the next.
pub fn gate_cuts(ev: &TrialEvents, cfg: &GateConfig) -> [(Gate, f64); 4] {
    let g = ev.gaze_shift + cfg.gaze_window;
    let gh = ev.head_settle.max(g);
    let gha = (ev.arm_onset + cfg.arm_fraction * (ev.arm_end - ev.arm_onset)).max(gh);
    let plus = ev.arm_end.max(gha);
    [(Gate::G, g), (Gate::GH, gh), (Gate::GHA, gha), (Gate::GHAPlus, plus)]
}

fn trial_rng(seed: u64, trial_id: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (u64::from(trial_id) + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Builds what an observer sees of `trial` at `gate`. Perceptual noise for the
/// i-th fixation is the same at every gate.
pub fn observe(
    trial: &TrialRecord,
    gate: Gate,
    cut: f64,
    events: &TrialEvents,
    perception: &Perception,
    seed: u64,
) -> Observation {
    let mut obs = Observation::new(trial.scene.clone());
    if let Some(gaze) = trial.stream(GAZE_STREAM) {
        let mut rng = trial_rng(seed, trial.trial_id);
        let mut targets: Vec<FixationTarget> = Vec::new();
        for f in detect_fixations(&gaze.truncated(cut), &perception.fixation) {
            let mut c = [0.0; 3];
            for (k, slot) in c.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *slot = f.centroid.get(k).copied().unwrap_or(0.0) + perception.gaze_noise * z;
            }
            let Some(kind) = assign_target(&c, &trial.scene, f64::INFINITY) else {
                continue;
            };
            if kind == TargetKind::InitialObject || targets.last().is_some_and(|t| t.kind == kind) {
                continue;
            }
            targets.push(FixationTarget { kind, point: c });
        }
        obs.gaze_targets = Some(targets);
    }
    if gate.has_head() {
        if let Some(head) = trial.stream(HEAD_STREAM).filter(|s| s.dim == 3) {
            if let Some(i) = head.last_index_at(cut) {
                let v = &head.samples[i].value;
                obs.head_direction = Some([v[0], v[1], v[2]]);
            }
        }
    }
    if gate.has_arm() {
        if let Ok(hand) = trial.hand() {
            let mut samples = Trajectory::default();
            for s in hand.samples.iter().filter(|s| s.t >= events.arm_onset && s.t <= cut) {
                samples.times.push(s.t);
                samples.points.push([s.value[0], s.value[1], s.value[2]]);
            }
            obs.arm = Some(ArmPrefix {
                onset: events.arm_onset,
                samples,
            });
        }
    }
    obs
}

/// Outcome of one trial at one gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialGateRow {
    pub trial_id: u32,
    pub label: ActionLabel,
    pub gate: Gate,
    pub cut: f64,
    pub predicted: ActionLabel,
    pub p_true: f64,
    pub correct: bool,
    pub direction_correct: bool,
    pub action_correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chance {
    pub overall: f64,
    pub direction: f64,
    pub action: f64,
}

impl Default for Chance {
    fn default() -> Self {
        Self {
            overall: 1.0 / 6.0,
            direction: 1.0 / 3.0,
            action: 1.0 / 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub gate: Gate,
    pub n: usize,
    pub accuracy: f64,
    /// Direction of the top-1 label, so never below `accuracy`.
    pub direction_accuracy: f64,
    pub action_accuracy: f64,
    /// Overall accuracy among trials of each action type.
    pub action_type_accuracy: BTreeMap<Action, f64>,
    pub label_accuracy: BTreeMap<ActionLabel, f64>,
    /// Rows: true label, columns: predicted label, both in canonical order.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatedReport {
    pub format: String,
    pub prior_mode: PriorMode,
    pub seed: u64,
    pub n_trials: usize,
    pub labels: Vec<ActionLabel>,
    pub chance: Chance,
    pub gates: Vec<GateResult>,
    /// Correctness by gate × action type.
    pub anova: Option<AnovaTable>,
    pub anova_note: Option<String>,
    #[serde(skip)]
    pub rows: Vec<TrialGateRow>,
}

impl GatedReport {
    pub fn gate(&self, g: Gate) -> Option<&GateResult> {
        self.gates.iter().find(|r| r.gate == g)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    /// One row per (trial, gate).
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(
            "trial_id,label,gate,cut,predicted,p_true,correct,direction_correct,action_correct\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.trial_id,
                r.label,
                r.gate,
                fmt_time(r.cut),
                r.predicted,
                r.p_true,
                u8::from(r.correct),
                u8::from(r.direction_correct),
                u8::from(r.action_correct)
            )
            .unwrap();
        }
        out
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn aggregate(gate: Gate, rows: &[&TrialGateRow]) -> GateResult {
    let mut confusion = vec![vec![0usize; 6]; 6];
    for r in rows {
        confusion[r.label.index()][r.predicted.index()] += 1;
    }
    let count = |f: &dyn Fn(&TrialGateRow) -> bool| rows.iter().filter(|r| f(r)).count();
    let action_type_accuracy = Action::ALL
        .into_iter()
        .map(|a| {
            let n = count(&|r| r.label.action == a);
            (a, ratio(count(&|r| r.label.action == a && r.correct), n))
        })
        .collect();
    let label_accuracy = ActionLabel::ALL
        .into_iter()
        .map(|l| (l, ratio(count(&|r| r.label == l && r.correct), count(&|r| r.label == l))))
        .collect();
    GateResult {
        gate,
        n: rows.len(),
        accuracy: ratio(count(&|r| r.correct), rows.len()),
        direction_accuracy: ratio(count(&|r| r.direction_correct), rows.len()),
        action_accuracy: ratio(count(&|r| r.action_correct), rows.len()),
        action_type_accuracy,
        label_accuracy,
        confusion,
    }
}

/// Classifies every test trial at every requested gate and aggregates the
/// outcomes. Trials are processed in parallel and reported in trial-id order.
pub fn run_gated_eval(
    test: &Dataset,
    models: &ActionModels,
    gates: &[Gate],
    cfg: &EvalConfig,
) -> Result<GatedReport, AnticipateError> {
    let mut leaked: Vec<u32> = test
        .trials
        .iter()
        .map(|t| t.trial_id)
        .filter(|id| models.training_trial_ids.contains(id))
        .collect();
    if !leaked.is_empty() {
        leaked.sort_unstable();
        leaked.dedup();
        return Err(AnticipateError::Leakage(leaked));
    }
    let mut gates = gates.to_vec();
    gates.sort();
    gates.dedup();
    if gates.is_empty() {
        return Err(AnticipateError::Parameter("no gates requested".into()));
    }
    let cues = CueRegistry::from_config(&cfg.cues)?;
    let priors = Priors::for_mode(cfg.prior_mode, models)?;

    let mut trials: Vec<&TrialRecord> = test.trials.iter().collect();
    trials.sort_by_key(|t| t.trial_id);

    let per_trial: Vec<Result<Vec<TrialGateRow>, AnticipateError>> = trials
        .par_iter()
        .map(|trial| {
            let ev = derive_events(trial, &cfg.perception, &cfg.gates)?;
            let cuts = gate_cuts(&ev, &cfg.gates);
            gates
                .iter()
                .map(|g| {
                    let cut = cuts.iter().find(|(x, _)| x == g).expect("all gates").1;
                    let obs = observe(trial, *g, cut, &ev, &cfg.perception, cfg.seed);
                    let post = classify(&obs, models, &priors, &cues)?;
                    let predicted = post.argmax();
                    Ok(TrialGateRow {
                        trial_id: trial.trial_id,
                        label: trial.label,
                        gate: *g,
                        cut,
                        predicted,
                        p_true: post.get(trial.label),
                        correct: predicted == trial.label,
                        direction_correct: predicted.direction == trial.label.direction,
                        action_correct: predicted.action == trial.label.action,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(trials.len() * gates.len());
    for r in per_trial {
        rows.extend(r?);
    }

    let results = gates
        .iter()
        .map(|g| {
            let sel: Vec<&TrialGateRow> = rows.iter().filter(|r| r.gate == *g).collect();
            aggregate(*g, &sel)
        })
        .collect();
    let anova_rows: Vec<(Gate, Action, f64)> = rows
        .iter()
        .map(|r| (r.gate, r.label.action, f64::from(u8::from(r.correct))))
        .collect();
    let (anova, anova_note) = match anova_two_way(&anova_rows) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };

    Ok(GatedReport {
        format: REPORT_FORMAT.to_string(),
        prior_mode: cfg.prior_mode,
        seed: cfg.seed,
        n_trials: trials.len(),
        labels: ActionLabel::ALL.to_vec(),
        chance: Chance::default(),
        gates: results,
        anova,
        anova_note,
        rows,
    })
}
