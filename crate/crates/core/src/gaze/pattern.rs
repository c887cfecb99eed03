use serde::Serialize;

use super::{Fixation, GazeError, GazePattern, TargetKind};
use crate::dataset::{Action, Direction, SceneGeometry};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatternClassification {
    pub pattern: GazePattern,
    pub direction: Option<Direction>,
    /// Assigned targets with consecutive repeats collapsed.
    pub targets: Vec<TargetKind>,
    /// Indices of fixations farther than the radius from every target.
    pub unassigned: Vec<usize>,
}

/// Nearest scene target to `point`, if within `radius`.
pub fn assign_target(point: &[f64], scene: &SceneGeometry, radius: f64) -> Option<TargetKind> {
    TargetKind::all()
        .into_iter()
        .map(|k| {
            let p = k.point(scene);
            let d2: f64 = p.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            (k, d2)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .filter(|(_, d2)| d2.sqrt() <= radius)
        .map(|(k, _)| k)
}

fn collapse(seq: impl IntoIterator<Item = TargetKind>) -> Vec<TargetKind> {
    let mut out: Vec<TargetKind> = Vec::new();
    for k in seq {
        if out.last() != Some(&k) {
            out.push(k);
        }
    }
    out
}

/// Maps a target sequence to a pattern. Leading and interleaved looks at the
/// initial object are ignored; what remains is the post-pickup sequence.
pub fn pattern_from_targets(targets: &[TargetKind], action: Action) -> Option<GazePattern> {
    let post = collapse(
        targets
            .iter()
            .copied()
            .filter(|k| *k != TargetKind::InitialObject),
    );
    let first = *post.first()?;
    match action {
        Action::Place => match post.as_slice() {
            [TargetKind::PlaceMarker(_)] => Some(GazePattern::GoalOnly),
            _ => None,
        },
        Action::Give => {
            let partner_only = post.iter().all(|k| {
                matches!(k, TargetKind::PartnerFace(_) | TargetKind::HandoverPoint(_))
            });
            if !partner_only {
                return None;
            }
            match (first, post.len()) {
                (TargetKind::HandoverPoint(_), 1) => Some(GazePattern::HandOnly),
                (TargetKind::PartnerFace(_), 1) => Some(GazePattern::FaceOnly),
                (TargetKind::HandoverPoint(_), _) => Some(GazePattern::HandThenFace),
                (TargetKind::PartnerFace(_), _) => Some(GazePattern::FaceThenHand),
                _ => None,
            }
        }
    }
}

pub fn classify_pattern(
    fixes: &[Fixation],
    scene: &SceneGeometry,
    action: Action,
    radius: f64,
) -> Result<PatternClassification, GazeError> {
    let mut unassigned = Vec::new();
    let mut assigned = Vec::new();
    for (i, f) in fixes.iter().enumerate() {
        match assign_target(&f.centroid, scene, radius) {
            Some(k) => assigned.push(k),
            None => unassigned.push(i),
        }
    }
    if assigned.is_empty() {
        return Err(GazeError::Unclassifiable {
            reason: format!("no fixation within {radius} m of a scene target"),
            unassigned,
        });
    }
    let targets = collapse(assigned);
    let pattern = pattern_from_targets(&targets, action).ok_or_else(|| {
        GazeError::Unclassifiable {
            reason: format!("target sequence {targets:?} matches no {action:?} pattern"),
            unassigned: unassigned.clone(),
        }
    })?;
    let direction = targets.iter().rev().find_map(|k| k.direction());
    Ok(PatternClassification {
        pattern,
        direction,
        targets,
        unassigned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use TargetKind::*;

    #[test]
    fn sequence_to_pattern() {
        let m = Direction::Middle;
        assert_eq!(
            pattern_from_targets(&[InitialObject, PlaceMarker(m)], Action::Place),
            Some(GazePattern::GoalOnly)
        );
        assert_eq!(
            pattern_from_targets(&[InitialObject, PartnerFace(m), HandoverPoint(m)], Action::Give),
            Some(GazePattern::FaceThenHand)
        );
        assert_eq!(
            pattern_from_targets(&[InitialObject, HandoverPoint(m)], Action::Give),
            Some(GazePattern::HandOnly)
        );
        assert_eq!(
            pattern_from_targets(&[InitialObject, PartnerFace(m)], Action::Give),
            Some(GazePattern::FaceOnly)
        );
        assert_eq!(
            pattern_from_targets(&[InitialObject, HandoverPoint(m), PartnerFace(m)], Action::Give),
            Some(GazePattern::HandThenFace)
        );
        assert_eq!(pattern_from_targets(&[InitialObject], Action::Give), None);
        assert_eq!(
            pattern_from_targets(&[InitialObject, PartnerFace(m)], Action::Place),
            None
        );
    }

    #[test]
    fn far_fixations_are_unclassifiable() {
        let scene = SceneGeometry::default();
        let f = Fixation {
            start: 0.0,
            end: 0.5,
            centroid: vec![5.0, 5.0, 5.0],
            dispersion: 0.0,
            samples: (0, 10),
        };
        match classify_pattern(&[f], &scene, Action::Give, 0.1) {
            Err(GazeError::Unclassifiable { unassigned, .. }) => assert_eq!(unassigned, vec![0]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
