use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    Action, ActionLabel, Dataset, DatasetError, LabelCounts, SceneGeometry, Stream, TrialEvents,
    TrialRecord, GAZE_STREAM, HAND_STREAM, HEAD_STREAM,
};
use crate::gaze::{generate_script, GazePattern, HeadCoordination, HeadMotion, TimingConfig};
use crate::minjerk::MinJerkSegment;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Isotropic hand-position noise, meters.
    pub hand_std: f64,
    /// Isotropic gaze-point noise, meters.
    pub gaze_std: f64,
    /// Per-component head-direction noise before renormalization.
    pub head_std: f64,
    /// Half-width of the uniform per-trial start-time jitter, seconds.
    pub start_jitter: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            hand_std: 0.005,
            gaze_std: 0.001,
            head_std: 0.005,
            start_jitter: 0.05,
        }
    }
}

impl NoiseSpec {
    pub fn zero() -> Self {
        Self {
            hand_std: 0.0,
            gaze_std: 0.0,
            head_std: 0.0,
            start_jitter: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthTiming {
    /// Delay from the first post-pickup saccade to arm onset.
    pub arm_delay: f64,
    pub reach_duration_place: f64,
    pub reach_duration_give: f64,
    /// Rest after the reach before the trial ends.
    pub hold: f64,
    pub hand_rate: f64,
    pub gaze_rate: f64,
    pub head_rate: f64,
}

impl Default for SynthTiming {
    fn default() -> Self {
        Self {
            arm_delay: 0.5,
            reach_duration_place: 1.2,
            reach_duration_give: 1.2,
            hold: 0.3,
            hand_rate: 120.0,
            gaze_rate: 60.0,
            head_rate: 120.0,
        }
    }
}

impl SynthTiming {
    pub fn reach_duration(&self, action: Action) -> f64 {
        match action {
            Action::Place => self.reach_duration_place,
            Action::Give => self.reach_duration_give,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub geometry: SceneGeometry,
    pub counts: LabelCounts,
    pub noise: NoiseSpec,
    pub timing: SynthTiming,
    pub gaze: TimingConfig,
    pub head: HeadCoordination,
    /// Weights of the giving patterns in [`GazePattern::GIVE`] order.
    pub pattern_weights: [f64; 4],
    pub first_trial_id: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            geometry: SceneGeometry::default(),
            counts: LabelCounts::RECORDED_TALLY,
            noise: NoiseSpec::default(),
            timing: SynthTiming::default(),
            gaze: TimingConfig::default(),
            head: HeadCoordination::default(),
            pattern_weights: [1.0; 4],
            first_trial_id: 1,
            seed: 7,
        }
    }
}

fn param(msg: impl Into<String>) -> DatasetError {
    DatasetError::Parameter(msg.into())
}

impl SynthConfig {
    fn check(&self) -> Result<(), DatasetError> {
        self.geometry.validate()?;
        let t = &self.timing;
        for (name, v) in [
            ("reach_duration_place", t.reach_duration_place),
            ("reach_duration_give", t.reach_duration_give),
            ("hand_rate", t.hand_rate),
            ("gaze_rate", t.gaze_rate),
            ("head_rate", t.head_rate),
            ("gaze.pickup_time", self.gaze.pickup_time),
            ("gaze.dwell", self.gaze.dwell),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(param(format!("{name} must be positive, got {v}")));
            }
        }
        if !(t.arm_delay >= 0.0 && t.hold >= 0.0) {
            return Err(param("arm_delay and hold must be non-negative"));
        }
        let n = &self.noise;
        for (name, v) in [
            ("hand_std", n.hand_std),
            ("gaze_std", n.gaze_std),
            ("head_std", n.head_std),
            ("start_jitter", n.start_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(param(format!("noise.{name} must be >= 0, got {v}")));
            }
        }
        if n.start_jitter >= self.gaze.pickup_time {
            return Err(param("start_jitter must be smaller than gaze.pickup_time"));
        }
        if self.pattern_weights.iter().any(|w| !(*w >= 0.0))
            || self.pattern_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(param("pattern weights must be >= 0 with a positive sum"));
        }
        Ok(())
    }
}

fn grid(rate: f64, end: f64) -> impl Iterator<Item = f64> {
    let n = (end * rate).floor() as usize;
    (0..=n).map(move |i| i as f64 / rate)
}

/// Generates a dataset of trials with minimum-jerk reaches, scripted gaze and
/// a lagged head stream. Deterministic for a fixed config (including seed).
pub fn synthesize_dataset(cfg: &SynthConfig) -> Result<Dataset, DatasetError> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut labels: Vec<ActionLabel> = ActionLabel::ALL
        .iter()
        .flat_map(|l| std::iter::repeat_n(*l, cfg.counts.get(*l)))
        .collect();
    labels.shuffle(&mut rng);

    let pattern_dist = WeightedIndex::new(cfg.pattern_weights).map_err(|e| param(e.to_string()))?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut trials = Vec::with_capacity(labels.len());
    for (i, label) in labels.into_iter().enumerate() {
        let pattern = match label.action {
            Action::Place => GazePattern::GoalOnly,
            Action::Give => GazePattern::GIVE[pattern_dist.sample(&mut rng)],
        };
        let jitter = if cfg.noise.start_jitter > 0.0 {
            rng.random_range(-cfg.noise.start_jitter..=cfg.noise.start_jitter)
        } else {
            0.0
        };
        let timing = TimingConfig {
            pickup_time: cfg.gaze.pickup_time + jitter,
            ..cfg.gaze
        };
        let scene = &cfg.geometry;
        let script = generate_script(label, pattern, &timing, scene)
            .map_err(|e| param(e.to_string()))?;
        let head = HeadMotion::new(&script, &cfg.head, &scene.actor_eye)
            .map_err(|e| param(e.to_string()))?;

        let arm_onset = timing.pickup_time + cfg.timing.arm_delay;
        let reach = cfg.timing.reach_duration(label.action);
        let arm_end = arm_onset + reach;
        let last_switch = script.events.last().map_or(0.0, |e| e.t);
        let end = (arm_end + cfg.timing.hold).max(last_switch + timing.dwell);

        let goal = match label.action {
            Action::Place => scene.place_marker(label.direction),
            Action::Give => scene.handover_point(label.direction),
        };
        let seg = MinJerkSegment::new(scene.ball_start, goal, reach)
            .map_err(|e| param(e.to_string()))?;

        let mut hand = Stream::new(HAND_STREAM, cfg.timing.hand_rate, 3);
        for t in grid(cfg.timing.hand_rate, end) {
            let p = seg.position_clamped(t - arm_onset);
            let v = p.map(|x| x + cfg.noise.hand_std * unit.sample(&mut rng));
            hand.push(t, v.to_vec());
        }

        let mut gaze = Stream::new(GAZE_STREAM, cfg.timing.gaze_rate, 3);
        for t in grid(cfg.timing.gaze_rate, end) {
            let p = script.target_at(t).point;
            let v = p.map(|x| x + cfg.noise.gaze_std * unit.sample(&mut rng));
            gaze.push(t, v.to_vec());
        }

        let mut head_stream = Stream::new(HEAD_STREAM, cfg.timing.head_rate, 3);
        for t in grid(cfg.timing.head_rate, end) {
            let d = head.direction_at(t);
            let noisy = d.map(|x| x + cfg.noise.head_std * unit.sample(&mut rng));
            let n = noisy.norm();
            head_stream.push(t, (noisy / n).as_slice().to_vec());
        }

        let events = TrialEvents {
            gaze_shift: timing.pickup_time,
            head_settle: head.first_settle().unwrap_or(timing.pickup_time),
            arm_onset,
            arm_end,
        };

        trials.push(TrialRecord {
            trial_id: cfg.first_trial_id + i as u32,
            label,
            streams: [hand, gaze, head_stream]
                .into_iter()
                .map(|s| (s.name.clone(), s))
                .collect(),
            scene: scene.clone(),
            events: Some(events),
            gaze_pattern: Some(pattern),
        });
    }
    Ok(Dataset::new(trials))
}
