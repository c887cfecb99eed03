//! Minimum-jerk point-to-point reaching trajectories.
//!
//! For rest-to-rest motion the jerk-optimal path is the quintic
//! `s(τ) = 10τ³ − 15τ⁴ + 6τ⁵` in normalized time `τ = t / T`, applied along the
//! straight line from start to goal.

use serde::{Deserialize, Serialize};

use crate::dataset::{Point3, Trajectory};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MinJerkError {
    #[error("segment duration must be positive and finite, got {0}")]
    Duration(f64),
    #[error("time {t} outside [0, {duration}]")]
    Domain { t: f64, duration: f64 },
    #[error("sample rate must be positive and finite, got {0}")]
    Rate(f64),
}

/// Position and its first three time derivatives at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinJerkState {
    pub position: Point3,
    pub velocity: Point3,
    pub acceleration: Point3,
    pub jerk: Point3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinJerkSegment {
    pub start: Point3,
    pub goal: Point3,
    pub duration: f64,
}

/// `s(τ)` and its derivatives with respect to `τ`.
pub fn profile(tau: f64) -> [f64; 4] {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    [
        t3 * (10.0 - 15.0 * tau + 6.0 * t2),
        30.0 * t2 * (1.0 - 2.0 * tau + t2),
        60.0 * tau * (1.0 - 3.0 * tau + 2.0 * t2),
        60.0 - 360.0 * tau + 360.0 * t2,
    ]
}

impl MinJerkSegment {
    pub fn new(start: Point3, goal: Point3, duration: f64) -> Result<Self, MinJerkError> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(MinJerkError::Duration(duration));
        }
        Ok(Self {
            start,
            goal,
            duration,
        })
    }

    fn at_tau(&self, tau: f64) -> MinJerkState {
        let [s, ds, dds, ddds] = profile(tau);
        let t = self.duration;
        let delta = [
            self.goal[0] - self.start[0],
            self.goal[1] - self.start[1],
            self.goal[2] - self.start[2],
        ];
        let scaled = |k: f64| delta.map(|d| d * k);
        MinJerkState {
            position: [0, 1, 2].map(|k| (1.0 - s) * self.start[k] + s * self.goal[k]),
            velocity: scaled(ds / t),
            acceleration: scaled(dds / (t * t)),
            jerk: scaled(ddds / (t * t * t)),
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<MinJerkState, MinJerkError> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(MinJerkError::Domain {
                t,
                duration: self.duration,
            });
        }
        // Pin the endpoints so boundary values are exact.
        let tau = if t == self.duration { 1.0 } else { t / self.duration };
        Ok(self.at_tau(tau))
    }

    /// Position at `t`, holding the start before 0 and the goal after `T`.
    pub fn position_clamped(&self, t: f64) -> Point3 {
        let tau = (t / self.duration).clamp(0.0, 1.0);
        self.at_tau(tau).position
    }

    /// Samples on a uniform grid of `round(T·rate) + 1` points (at least two)
    /// that includes both endpoints.
    pub fn sample(&self, rate: f64) -> Result<Trajectory, MinJerkError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(MinJerkError::Rate(rate));
        }
        let n = ((self.duration * rate).round() as usize).max(1) + 1;
        let last = (n - 1) as f64;
        let mut traj = Trajectory::default();
        for i in 0..n {
            let tau = i as f64 / last;
            traj.times.push(tau * self.duration);
            traj.points.push(self.at_tau(tau).position);
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg() -> MinJerkSegment {
        MinJerkSegment::new([0.1, -0.2, 0.3], [0.5, 0.4, -0.1], 1.2).unwrap()
    }

    #[test]
    fn boundary_conditions_exact() {
        let s = seg();
        let a = s.evaluate(0.0).unwrap();
        assert_eq!(a.position, s.start);
        assert_eq!(a.velocity, [0.0; 3]);
        assert_eq!(a.acceleration, [0.0; 3]);
        let b = s.evaluate(s.duration).unwrap();
        assert_eq!(b.position, s.goal);
        assert_eq!(b.velocity.map(f64::abs), [0.0; 3]);
        assert_eq!(b.acceleration.map(f64::abs), [0.0; 3]);
    }

    #[test]
    fn midpoint_is_average() {
        assert_eq!(profile(0.5)[0], 0.5);
        let s = seg();
        let m = s.evaluate(0.6).unwrap().position;
        for k in 0..3 {
            assert!((m[k] - 0.5 * (s.start[k] + s.goal[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn domain_and_parameter_errors() {
        let s = seg();
        assert!(matches!(s.evaluate(-1e-9), Err(MinJerkError::Domain { .. })));
        assert!(matches!(s.evaluate(1.2001), Err(MinJerkError::Domain { .. })));
        assert!(MinJerkSegment::new([0.0; 3], [1.0; 3], 0.0).is_err());
        assert!(s.sample(0.0).is_err());
    }

    #[test]
    fn two_sample_grid() {
        let s = seg();
        let tr = s.sample(1.0 / s.duration).unwrap();
        assert_eq!(tr.times, vec![0.0, s.duration]);
        assert_eq!(tr.points, vec![s.start, s.goal]);
    }

    #[test]
    fn time_scaling_gives_identical_positions() {
        let a = seg();
        let b = MinJerkSegment::new(a.start, a.goal, 2.0 * a.duration).unwrap();
        let pa = a.sample(120.0).unwrap();
        let pb = b.sample(60.0).unwrap();
        assert_eq!(pa.points, pb.points);
    }

    #[test]
    fn central_difference_velocity_is_second_order() {
        // Halving the step should shrink the error by ~4.
        let s = seg();
        let err = |h: f64| {
            let mut worst: f64 = 0.0;
            let mut t = h;
            while t < s.duration - h {
                let p0 = s.evaluate(t - h).unwrap().position;
                let p1 = s.evaluate(t + h).unwrap().position;
                let v = s.evaluate(t).unwrap().velocity;
                for k in 0..3 {
                    worst = worst.max(((p1[k] - p0[k]) / (2.0 * h) - v[k]).abs());
                }
                t += 0.01;
            }
            worst
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!(e1 < 1e-4);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn progress_is_monotone_and_time_symmetric() {
        let mut prev = 0.0;
        for i in 1..1000 {
            let tau = i as f64 / 1000.0;
            let s = profile(tau)[0];
            assert!(s > prev);
            prev = s;
            assert!((s + profile(1.0 - tau)[0] - 1.0).abs() < 1e-14);
        }
    }
}
