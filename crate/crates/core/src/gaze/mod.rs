//! Gaze behavior: fixation detection, fixation-pattern classification, the
//! scripted gaze state machine for placing/giving, and eye-head timelines.

mod fixation;
mod pattern;
mod script;
mod timeline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use fixation::{detect_fixations, DispersionThreshold, Fixation, FixationDetector};
pub use pattern::{classify_pattern, pattern_from_targets, assign_target, PatternClassification};
pub use script::{generate_script, GazeEvent, GazeScript, TimingConfig};
pub use timeline::{eye_head_timeline, EyeHeadTimeline, HeadCoordination, HeadMotion, Sampling};

use crate::dataset::{Action, ActionLabel, Direction, Point3, SceneGeometry};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GazeError {
    #[error("pattern {pattern} is incompatible with label {label}")]
    Incompatible {
        label: ActionLabel,
        pattern: GazePattern,
    },
    #[error("unclassifiable fixation sequence: {reason} (unassigned fixations: {unassigned:?})")]
    Unclassifiable {
        reason: String,
        unassigned: Vec<usize>,
    },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Fixation patterns: placing looks at the goal only; giving shows one of four
/// face/handover patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GazePattern {
    GoalOnly,
    HandOnly,
    FaceOnly,
    HandThenFace,
    FaceThenHand,
}

impl GazePattern {
    pub const ALL: [GazePattern; 5] = [
        GazePattern::GoalOnly,
        GazePattern::HandOnly,
        GazePattern::FaceOnly,
        GazePattern::HandThenFace,
        GazePattern::FaceThenHand,
    ];

    /// Giving patterns, in the order used for mixture weights.
    pub const GIVE: [GazePattern; 4] = [
        GazePattern::HandOnly,
        GazePattern::FaceOnly,
        GazePattern::HandThenFace,
        GazePattern::FaceThenHand,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GazePattern::GoalOnly => "GoalOnly",
            GazePattern::HandOnly => "HandOnly",
            GazePattern::FaceOnly => "FaceOnly",
            GazePattern::HandThenFace => "HandThenFace",
            GazePattern::FaceThenHand => "FaceThenHand",
        }
    }

    pub fn compatible_with(self, action: Action) -> bool {
        (self == GazePattern::GoalOnly) == (action == Action::Place)
    }

    pub fn is_switching(self) -> bool {
        matches!(self, GazePattern::HandThenFace | GazePattern::FaceThenHand)
    }
}

impl fmt::Display for GazePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GazePattern {
    type Err = GazeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GazePattern::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| GazeError::Parameter(format!("unknown gaze pattern '{s}'")))
    }
}

/// What the actor is looking at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "direction")]
pub enum TargetKind {
    InitialObject,
    PlaceMarker(Direction),
    PartnerFace(Direction),
    HandoverPoint(Direction),
}

impl TargetKind {
    /// All ten scene targets.
    pub fn all() -> Vec<TargetKind> {
        let mut v = vec![TargetKind::InitialObject];
        for d in Direction::ALL {
            v.push(TargetKind::PlaceMarker(d));
            v.push(TargetKind::PartnerFace(d));
            v.push(TargetKind::HandoverPoint(d));
        }
        v
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            TargetKind::InitialObject => None,
            TargetKind::PlaceMarker(d) | TargetKind::PartnerFace(d) | TargetKind::HandoverPoint(d) => {
                Some(d)
            }
        }
    }

    pub fn point(self, scene: &SceneGeometry) -> Point3 {
        match self {
            TargetKind::InitialObject => scene.ball_start,
            TargetKind::PlaceMarker(d) => scene.place_marker(d),
            TargetKind::PartnerFace(d) => scene.partner_face(d),
            TargetKind::HandoverPoint(d) => scene.handover_point(d),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixationTarget {
    #[serde(flatten)]
    pub kind: TargetKind,
    pub point: Point3,
}

impl FixationTarget {
    pub fn in_scene(kind: TargetKind, scene: &SceneGeometry) -> Self {
        Self {
            kind,
            point: kind.point(scene),
        }
    }
}
