use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ActionLabel, DatasetError, LabelCounts, SceneGeometry, Stream, Trajectory};
use crate::gaze::GazePattern;

pub const HAND_STREAM: &str = "hand_pos";
pub const GAZE_STREAM: &str = "gaze_point";
pub const HEAD_STREAM: &str = "head_dir";

/// Known event times of a trial, seconds from trial start. Present for
/// synthesized trials; recorded trials derive them from the streams instead.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialEvents {
    /// First post-pickup saccade towards the goal.
    pub gaze_shift: f64,
    /// Head has turned to the first post-pickup target.
    pub head_settle: f64,
    pub arm_onset: f64,
    pub arm_end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial_id: u32,
    pub label: ActionLabel,
    pub streams: BTreeMap<String, Stream>,
    pub scene: SceneGeometry,
    pub events: Option<TrialEvents>,
    pub gaze_pattern: Option<GazePattern>,
}

impl TrialRecord {
    pub fn stream(&self, name: &str) -> Option<&Stream> {
        self.streams.get(name)
    }

    pub fn hand(&self) -> Result<&Stream, DatasetError> {
        self.stream(HAND_STREAM)
            .filter(|s| s.dim == 3)
            .ok_or(DatasetError::MissingStream {
                trial_id: self.trial_id,
                stream: HAND_STREAM,
            })
    }

    pub fn hand_trajectory(&self) -> Result<Trajectory, DatasetError> {
        Ok(Trajectory::from_stream(self.hand()?).expect("hand stream is 3D"))
    }

    /// Structural checks: hand stream present, every stream well-formed.
    pub fn check(&self) -> Result<(), DatasetError> {
        self.hand()?;
        for s in self.streams.values() {
            s.check()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub trials: Vec<TrialRecord>,
}

impl Dataset {
    pub fn new(trials: Vec<TrialRecord>) -> Self {
        Self { trials }
    }

    pub fn counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for t in &self.trials {
            c.increment(t.label);
        }
        c
    }

    pub fn trial_ids(&self) -> BTreeSet<u32> {
        self.trials.iter().map(|t| t.trial_id).collect()
    }

    pub fn by_label(&self, label: ActionLabel) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter(move |t| t.label == label)
    }

    /// Errors with the list of absent labels unless all six are present.
    pub fn require_coverage(&self) -> Result<(), DatasetError> {
        let missing = self.counts().missing();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::Coverage(missing))
        }
    }
}
