use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{GazeError, GazeScript};
use crate::dataset::{Point3, SceneGeometry, Stream};

pub const EYE_STREAM: &str = "eye_dir";

/// Head follows each gaze switch after `head_lag` seconds, rotating along the
/// great circle at no more than `head_rate_limit` rad/s (infinite = jump).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadCoordination {
    pub head_lag: f64,
    pub head_rate_limit: f64,
}

impl Default for HeadCoordination {
    fn default() -> Self {
        Self {
            head_lag: 0.15,
            head_rate_limit: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    pub rate: f64,
    pub duration: f64,
}

impl Sampling {
    pub fn times(&self) -> impl Iterator<Item = f64> {
        let rate = self.rate;
        let n = (self.duration * rate).round() as usize;
        (0..=n).map(move |i| i as f64 / rate)
    }
}

fn direction(from: &Point3, to: &Point3) -> Result<Vector3<f64>, GazeError> {
    let v = Vector3::from(*to) - Vector3::from(*from);
    let n = v.norm();
    if !(n > 1e-12) {
        return Err(GazeError::Geometry(format!(
            "target {to:?} coincides with viewpoint {from:?}"
        )));
    }
    Ok(v / n)
}

/// Great-circle interpolation between unit vectors separated by `angle`.
fn slerp(a: &Vector3<f64>, b: &Vector3<f64>, angle: f64, u: f64) -> Vector3<f64> {
    if angle < 1e-9 {
        return (a + (b - a) * u).normalize();
    }
    let s = angle.sin();
    (a * (((1.0 - u) * angle).sin() / s) + b * ((u * angle).sin() / s)).normalize()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadSegment {
    /// Time the head starts turning (switch time + lag).
    pub start: f64,
    pub from: Vector3<f64>,
    pub to: Vector3<f64>,
    /// Angle between `from` and `to`, radians.
    pub angle: f64,
    /// Switch time of the gaze event that triggered this segment.
    pub switch_time: f64,
}

impl HeadSegment {
    pub fn settle_time(&self, rate_limit: f64) -> f64 {
        if rate_limit.is_infinite() {
            self.start
        } else {
            self.start + self.angle / rate_limit
        }
    }
}

/// Continuous-time head direction produced by a gaze script.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadMotion {
    pub initial: Vector3<f64>,
    pub segments: Vec<HeadSegment>,
    pub rate_limit: f64,
}

impl HeadMotion {
    pub fn new(
        script: &GazeScript,
        coord: &HeadCoordination,
        viewpoint: &Point3,
    ) -> Result<Self, GazeError> {
        if !(coord.head_lag >= 0.0) || !(coord.head_rate_limit > 0.0) {
            return Err(GazeError::Parameter(
                "head lag must be >= 0 and rate limit > 0".into(),
            ));
        }
        let initial = direction(viewpoint, &script.events[0].target.point)?;
        let mut motion = HeadMotion {
            initial,
            segments: Vec::new(),
            rate_limit: coord.head_rate_limit,
        };
        for ev in script.post_pickup() {
            let start = ev.t + coord.head_lag;
            let from = motion.direction_at(start);
            let to = direction(viewpoint, &ev.target.point)?;
            let angle = from.dot(&to).clamp(-1.0, 1.0).acos();
            motion.segments.push(HeadSegment {
                start,
                from,
                to,
                angle,
                switch_time: ev.t,
            });
        }
        Ok(motion)
    }

    pub fn direction_at(&self, t: f64) -> Vector3<f64> {
        let idx = self.segments.partition_point(|s| s.start <= t);
        if idx == 0 {
            return self.initial;
        }
        let seg = &self.segments[idx - 1];
        let travelled = if self.rate_limit.is_infinite() {
            seg.angle
        } else {
            (self.rate_limit * (t - seg.start)).min(seg.angle)
        };
        if seg.angle == 0.0 || travelled >= seg.angle {
            return seg.to;
        }
        slerp(&seg.from, &seg.to, seg.angle, travelled / seg.angle)
    }

    /// Head settle time after the first post-pickup switch.
    pub fn first_settle(&self) -> Option<f64> {
        self.segments.first().map(|s| s.settle_time(self.rate_limit))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EyeHeadTimeline {
    pub eye: Stream,
    pub head: Stream,
    pub motion: HeadMotion,
}

/// Unit eye and head direction streams seen from `viewpoint`. The eye jumps
/// to each target at its switch time; the head follows per `coord`.
pub fn eye_head_timeline(
    script: &GazeScript,
    coord: &HeadCoordination,
    _scene: &SceneGeometry,
    viewpoint: &Point3,
    sampling: Sampling,
) -> Result<EyeHeadTimeline, GazeError> {
    if !(sampling.rate > 0.0 && sampling.duration >= 0.0) {
        return Err(GazeError::Parameter("invalid sampling".into()));
    }
    let motion = HeadMotion::new(script, coord, viewpoint)?;
    let eye_dirs = script
        .events
        .iter()
        .map(|e| direction(viewpoint, &e.target.point))
        .collect::<Result<Vec<_>, _>>()?;
    let mut eye = Stream::new(EYE_STREAM, sampling.rate, 3);
    let mut head = Stream::new(crate::dataset::HEAD_STREAM, sampling.rate, 3);
    for t in sampling.times() {
        let idx = script.events.partition_point(|e| e.t <= t).saturating_sub(1);
        eye.push(t, eye_dirs[idx].as_slice().to_vec());
        head.push(t, motion.direction_at(t).as_slice().to_vec());
    }
    Ok(EyeHeadTimeline { eye, head, motion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Action, ActionLabel, Direction};
    use crate::gaze::{generate_script, GazePattern, TimingConfig};

    fn script(pattern: GazePattern, action: Action) -> GazeScript {
        generate_script(
            ActionLabel::new(action, Direction::Right),
            pattern,
            &TimingConfig::default(),
            &SceneGeometry::default(),
        )
        .unwrap()
    }

    fn angle(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        d.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn eye_leads_head_by_lag() {
        let scene = SceneGeometry::default();
        let s = script(GazePattern::GoalOnly, Action::Place);
        let coord = HeadCoordination {
            head_lag: 0.2,
            head_rate_limit: 3.0,
        };
        let tl = eye_head_timeline(&s, &coord, &scene, &scene.actor_eye, Sampling {
            rate: 1000.0,
            duration: 2.0,
        })
        .unwrap();
        let switch = s.events[1].t;
        let target = direction(&scene.actor_eye, &s.events[1].target.point).unwrap();
        let i_switch = (switch * 1000.0).round() as usize;
        assert!(angle(&tl.eye.samples[i_switch].value, target.as_slice()) < 1e-12);
        // Head is still at its initial direction until switch + lag.
        let i_before = ((switch + 0.199) * 1000.0).round() as usize;
        assert_eq!(tl.head.samples[i_before].value, tl.head.samples[0].value);
        let i_after = ((switch + 0.21) * 1000.0).round() as usize;
        assert_ne!(tl.head.samples[i_after].value, tl.head.samples[0].value);
    }

    #[test]
    fn unlimited_head_without_lag_equals_eye() {
        let scene = SceneGeometry::default();
        let s = script(GazePattern::FaceThenHand, Action::Give);
        let coord = HeadCoordination {
            head_lag: 0.0,
            head_rate_limit: f64::INFINITY,
        };
        let tl = eye_head_timeline(&s, &coord, &scene, &scene.actor_eye, Sampling {
            rate: 120.0,
            duration: 2.0,
        })
        .unwrap();
        for (e, h) in tl.eye.samples.iter().zip(&tl.head.samples) {
            assert!(angle(&e.value, &h.value) < 1e-7);
        }
    }

    #[test]
    fn slew_matches_euler_integration() {
        // Explicit Euler at 1 kHz on the scalar angle-to-target.
        let scene = SceneGeometry::default();
        let s = script(GazePattern::HandOnly, Action::Give);
        let coord = HeadCoordination::default();
        let motion = HeadMotion::new(&s, &coord, &scene.actor_eye).unwrap();
        let seg = &motion.segments[0];
        let dt = 1e-3;
        let mut theta = seg.angle;
        for step in 0..2000 {
            let t = seg.start + step as f64 * dt;
            let head = motion.direction_at(t);
            let actual = head.dot(&seg.to).clamp(-1.0, 1.0).acos();
            assert!((actual - theta).abs() < 1e-6, "t={t} {actual} vs {theta}");
            theta = (theta - coord.head_rate_limit * dt).max(0.0);
        }
    }

    #[test]
    fn viewpoint_on_target_is_geometry_error() {
        let scene = SceneGeometry::default();
        let s = script(GazePattern::GoalOnly, Action::Place);
        let r = eye_head_timeline(
            &s,
            &HeadCoordination::default(),
            &scene,
            &scene.ball_start,
            Sampling {
                rate: 60.0,
                duration: 1.0,
            },
        );
        assert!(matches!(r, Err(GazeError::Geometry(_))));
    }
}
