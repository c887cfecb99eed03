use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::{fit, EmConfig, GmmError, GmmModel, TimeNormalization, TrainingMatrix};
use crate::dataset::{ActionLabel, Dataset, DatasetError, LabelCounts, TrialRecord};

pub const AXES: [&str; 3] = ["x", "y", "z"];

/// Hand speed (m/s) separating rest from reaching when a trial carries no
/// event annotations.
pub const REACH_SPEED_THRESHOLD: f64 = 0.05;
/// Width of the centered difference used for speed estimation, seconds.
const SPEED_WINDOW: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum ActionModel {
    /// Three (t, coordinate) models in x, y, z order.
    PerAxis(Box<[GmmModel; 3]>),
    /// One (t, x, y, z) model.
    Joint(GmmModel),
}

impl ActionModel {
    pub fn gmms(&self) -> Vec<&GmmModel> {
        match self {
            ActionModel::PerAxis(m) => m.iter().collect(),
            ActionModel::Joint(m) => vec![m],
        }
    }

    pub fn all_converged(&self) -> bool {
        self.gmms().iter().all(|m| m.fit_meta.converged)
    }
}

/// Fitted models for all six labels plus what is needed to use them later.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionModels {
    pub models: BTreeMap<ActionLabel, ActionModel>,
    pub time_normalization: TimeNormalization,
    /// Mean reach duration of the training trials per label, seconds.
    pub reach_durations: BTreeMap<ActionLabel, f64>,
    pub training_trial_ids: BTreeSet<u32>,
    pub training_counts: LabelCounts,
    pub config: EmConfig,
    pub meta: BTreeMap<String, String>,
}

impl ActionModels {
    pub fn get(&self, label: ActionLabel) -> Option<&ActionModel> {
        self.models.get(&label)
    }

    pub fn model_count(&self) -> usize {
        self.models.values().map(|m| m.gmms().len()).sum()
    }
}

/// Reach onset and end, seconds. Uses the trial's event annotations when
/// present, otherwise thresholds the smoothed hand speed around its peak.
pub fn reach_window(trial: &TrialRecord) -> Result<(f64, f64), DatasetError> {
    if let Some(ev) = trial.events {
        return Ok((ev.arm_onset, ev.arm_end));
    }
    let traj = trial.hand_trajectory()?;
    let n = traj.len();
    if n < 3 {
        return Err(DatasetError::Parameter(format!(
            "trial {}: too few hand samples to detect a reach",
            trial.trial_id
        )));
    }
    let dt = (traj.times[n - 1] - traj.times[0]) / (n - 1) as f64;
    let half = ((SPEED_WINDOW / 2.0 / dt).round() as usize).max(1);
    let smooth: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mut acc = [0.0; 3];
            for p in &traj.points[lo..=hi] {
                for a in 0..3 {
                    acc[a] += p[a];
                }
            }
            acc.map(|v| v / (hi - lo + 1) as f64)
        })
        .collect();
    let speed: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let span = traj.times[hi] - traj.times[lo];
            let d: f64 = (0..3)
                .map(|a| (smooth[hi][a] - smooth[lo][a]).powi(2))
                .sum::<f64>()
                .sqrt();
            d / span
        })
        .collect();
    let (peak, vmax) = speed
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
    if !(vmax > REACH_SPEED_THRESHOLD) {
        return Err(DatasetError::Parameter(format!(
            "trial {}: no reach movement detected",
            trial.trial_id
        )));
    }
    let onset = (0..peak)
        .rev()
        .find(|&i| speed[i] < REACH_SPEED_THRESHOLD)
        .map_or(0, |i| i + 1);
    let end = (peak + 1..n)
        .find(|&i| speed[i] < REACH_SPEED_THRESHOLD)
        .map_or(n - 1, |i| i - 1);
    Ok((traj.times[onset], traj.times[end]))
}

/// Maps trial time to model time.
pub fn normalize_time(t: f64, window: (f64, f64), tn: TimeNormalization) -> f64 {
    match tn {
        TimeNormalization::Unit => (t - window.0) / (window.1 - window.0),
        TimeNormalization::Raw => t - window.0,
    }
}

/// Pools the in-window hand samples of `trials` into rows `(t, coordinate)`
/// for `axis = Some(a)` or `(t, x, y, z)` for `axis = None`.
pub fn training_matrix<'a>(
    trials: impl IntoIterator<Item = &'a TrialRecord>,
    axis: Option<usize>,
    tn: TimeNormalization,
    margin: f64,
) -> Result<TrainingMatrix, DatasetError> {
    let mut m = TrainingMatrix::new(if axis.is_some() { 2 } else { 4 });
    for trial in trials {
        let window = reach_window(trial)?;
        if !(window.1 > window.0) {
            return Err(DatasetError::Parameter(format!(
                "trial {}: empty reach window",
                trial.trial_id
            )));
        }
        let pad = margin * (window.1 - window.0);
        for s in &trial.hand()?.samples {
            if s.t < window.0 - pad || s.t > window.1 + pad {
                continue;
            }
            let tau = normalize_time(s.t, window, tn);
            let row = match axis {
                Some(a) => vec![tau, s.value[a]],
                None => vec![tau, s.value[0], s.value[1], s.value[2]],
            };
            m.push(row, trial.trial_id);
        }
    }
    Ok(m)
}

fn job_seed(base: u64, label: ActionLabel, slot: usize) -> u64 {
    let tag = (label.index() as u64) << 8 | slot as u64;
    base ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Fits the per-label models. The independent fits run in parallel; each has
/// its own seed so the result matches a sequential run bit for bit.
pub fn fit_action_models(d: &Dataset, cfg: &EmConfig) -> Result<ActionModels, GmmError> {
    cfg.check()?;
    let counts = d.counts();
    let missing = counts.missing();
    if !missing.is_empty() {
        return Err(GmmError::Coverage(missing));
    }
    let slots: Vec<Option<usize>> = if cfg.joint {
        vec![None]
    } else {
        (0..3).map(Some).collect()
    };

    let mut jobs = Vec::new();
    let mut reach_durations = BTreeMap::new();
    for label in ActionLabel::ALL {
        let mut total = 0.0;
        for trial in d.by_label(label) {
            let (on, end) =
                reach_window(trial).map_err(|source| GmmError::Trial { label, source })?;
            total += end - on;
        }
        reach_durations.insert(label, total / counts.get(label) as f64);
        for (slot, axis) in slots.iter().enumerate() {
            let m = training_matrix(d.by_label(label), *axis, cfg.time_normalization, cfg.window_margin)
                .map_err(|source| GmmError::Trial { label, source })?;
            jobs.push((label, m, job_seed(cfg.seed, label, slot)));
        }
    }

    let fitted: Vec<Result<GmmModel, GmmError>> = jobs
        .par_iter()
        .map(|(_, m, seed)| fit(m, cfg.components, cfg, *seed))
        .collect();

    let mut per_label: BTreeMap<ActionLabel, Vec<GmmModel>> = BTreeMap::new();
    for ((label, _, _), r) in jobs.iter().zip(fitted) {
        per_label.entry(*label).or_default().push(r?);
    }
    let models = per_label
        .into_iter()
        .map(|(label, mut v)| {
            let m = if cfg.joint {
                ActionModel::Joint(v.remove(0))
            } else {
                let arr: [GmmModel; 3] = v.try_into().expect("three axis models");
                ActionModel::PerAxis(Box::new(arr))
            };
            (label, m)
        })
        .collect();

    Ok(ActionModels {
        models,
        time_normalization: cfg.time_normalization,
        reach_durations,
        training_trial_ids: d.trial_ids(),
        training_counts: counts,
        config: cfg.clone(),
        meta: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize_dataset, Action, Direction, SynthConfig};

    fn small_config() -> SynthConfig {
        SynthConfig {
            counts: LabelCounts([3; 6]),
            ..SynthConfig::default()
        }
    }

    #[test]
    fn detected_window_brackets_annotated_one() {
        let d = synthesize_dataset(&small_config()).unwrap();
        for trial in &d.trials {
            let ev = trial.events.unwrap();
            let mut bare = trial.clone();
            bare.events = None;
            let (on, end) = reach_window(&bare).unwrap();
            assert!((on - ev.arm_onset).abs() < 0.2, "onset {on} vs {}", ev.arm_onset);
            assert!((end - ev.arm_end).abs() < 0.2, "end {end} vs {}", ev.arm_end);
        }
    }

    #[test]
    fn missing_label_is_coverage_error() {
        let mut d = synthesize_dataset(&small_config()).unwrap();
        let gl = ActionLabel::new(Action::Give, Direction::Left);
        d.trials.retain(|t| t.label != gl);
        match fit_action_models(&d, &EmConfig::default()) {
            Err(GmmError::Coverage(m)) => assert_eq!(m, vec![gl]),
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn unit_time_spans_zero_to_one() {
        let d = synthesize_dataset(&small_config()).unwrap();
        let m = training_matrix(d.trials.iter().take(1), Some(0), TimeNormalization::Unit, 0.0).unwrap();
        let ts: Vec<f64> = m.rows.iter().map(|r| r[0]).collect();
        assert!(ts.iter().all(|t| (0.0..=1.0).contains(t)));
        assert!(ts[0] < 0.01 && *ts.last().unwrap() > 0.99);
    }
}
