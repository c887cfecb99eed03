use serde::{Deserialize, Serialize};

use super::{FixationTarget, GazeError, GazePattern, TargetKind};
use crate::dataset::{Action, ActionLabel, SceneGeometry};

/// Timing of the gaze state machine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingConfig {
    /// Time of the first post-pickup saccade, seconds from trial start.
    pub pickup_time: f64,
    /// Dwell on each target before a face/handover switch.
    pub dwell: f64,
    /// Number of face/handover switches for switching patterns.
    pub switches: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            pickup_time: 0.5,
            dwell: 0.4,
            switches: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeEvent {
    pub t: f64,
    pub target: FixationTarget,
}

/// Timed fixation-target switches; the first event is the initial object at t = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeScript {
    pub label: ActionLabel,
    pub pattern: GazePattern,
    pub events: Vec<GazeEvent>,
}

impl GazeScript {
    /// Target being fixated at time `t` (the last event at or before `t`).
    pub fn target_at(&self, t: f64) -> &FixationTarget {
        let idx = self.events.partition_point(|e| e.t <= t).saturating_sub(1);
        &self.events[idx].target
    }

    pub fn kinds(&self) -> Vec<TargetKind> {
        self.events.iter().map(|e| e.target.kind).collect()
    }

    pub fn post_pickup(&self) -> &[GazeEvent] {
        &self.events[1..]
    }
}

/// Runs the gaze state machine for one label. Placing makes a single
/// transition to the goal marker; giving enters the face/handover pair in the
/// order given by `pattern`, switching every `dwell` seconds.
pub fn generate_script(
    label: ActionLabel,
    pattern: GazePattern,
    timing: &TimingConfig,
    scene: &SceneGeometry,
) -> Result<GazeScript, GazeError> {
    if !pattern.compatible_with(label.action) {
        return Err(GazeError::Incompatible { label, pattern });
    }
    if !(timing.pickup_time > 0.0 && timing.dwell > 0.0) {
        return Err(GazeError::Parameter(
            "pickup time and dwell must be positive".into(),
        ));
    }
    let d = label.direction;
    let face = TargetKind::PartnerFace(d);
    let hand = TargetKind::HandoverPoint(d);
    let post: Vec<TargetKind> = match (label.action, pattern) {
        (Action::Place, _) => vec![TargetKind::PlaceMarker(d)],
        (_, GazePattern::HandOnly) => vec![hand],
        (_, GazePattern::FaceOnly) => vec![face],
        (_, GazePattern::HandThenFace) | (_, GazePattern::FaceThenHand) => {
            let (a, b) = if pattern == GazePattern::HandThenFace {
                (hand, face)
            } else {
                (face, hand)
            };
            (0..=timing.switches.max(1))
                .map(|i| if i % 2 == 0 { a } else { b })
                .collect()
        }
        (_, GazePattern::GoalOnly) => unreachable!("checked by compatibility"),
    };

    let mut events = vec![GazeEvent {
        t: 0.0,
        target: FixationTarget::in_scene(TargetKind::InitialObject, scene),
    }];
    for (i, kind) in post.into_iter().enumerate() {
        events.push(GazeEvent {
            t: timing.pickup_time + i as f64 * timing.dwell,
            target: FixationTarget::in_scene(kind, scene),
        });
    }
    Ok(GazeScript {
        label,
        pattern,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Direction;

    #[test]
    fn place_middle_goal_only() {
        let scene = SceneGeometry::default();
        let label = ActionLabel::new(Action::Place, Direction::Middle);
        let s = generate_script(label, GazePattern::GoalOnly, &TimingConfig::default(), &scene)
            .unwrap();
        assert_eq!(s.events.len(), 2);
        assert_eq!(
            s.kinds(),
            vec![TargetKind::InitialObject, TargetKind::PlaceMarker(Direction::Middle)]
        );
        assert_eq!(s.events[1].target.point, scene.place_marker(Direction::Middle));
    }

    #[test]
    fn give_right_hand_then_face() {
        let scene = SceneGeometry::default();
        let label = ActionLabel::new(Action::Give, Direction::Right);
        let s = generate_script(label, GazePattern::HandThenFace, &TimingConfig::default(), &scene)
            .unwrap();
        assert_eq!(
            s.kinds(),
            vec![
                TargetKind::InitialObject,
                TargetKind::HandoverPoint(Direction::Right),
                TargetKind::PartnerFace(Direction::Right)
            ]
        );
        assert!(s.events.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn place_with_face_pattern_is_incompatible() {
        let label = ActionLabel::new(Action::Place, Direction::Left);
        let r = generate_script(
            label,
            GazePattern::FaceThenHand,
            &TimingConfig::default(),
            &SceneGeometry::default(),
        );
        assert!(matches!(r, Err(GazeError::Incompatible { .. })));
    }

    #[test]
    fn repeated_switching() {
        let label = ActionLabel::new(Action::Give, Direction::Left);
        let timing = TimingConfig {
            switches: 3,
            ..TimingConfig::default()
        };
        let s = generate_script(label, GazePattern::FaceThenHand, &timing, &SceneGeometry::default())
            .unwrap();
        assert_eq!(s.post_pickup().len(), 4);
        assert!(s.kinds().windows(2).all(|w| w[0] != w[1]));
        assert_eq!(s.target_at(0.55).kind, TargetKind::PartnerFace(Direction::Left));
        assert_eq!(s.target_at(0.95).kind, TargetKind::HandoverPoint(Direction::Left));
        assert_eq!(s.target_at(0.1).kind, TargetKind::InitialObject);
    }
}
