use serde::{Deserialize, Serialize};

use super::GazeError;
use crate::dataset::Stream;

/// A dwell interval in a gaze stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub start: f64,
    pub end: f64,
    pub centroid: Vec<f64>,
    /// Sum over channels of (max − min) within the interval.
    pub dispersion: f64,
    /// Sample index range `[first, last]` in the source stream.
    pub samples: (usize, usize),
}

impl Fixation {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

pub trait FixationDetector {
    fn detect(&self, gaze: &Stream) -> Vec<Fixation>;
}

/// Dispersion-threshold identification (I-DT).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionThreshold {
    /// Maximum summed per-channel range, meters in world space.
    pub dispersion_threshold: f64,
    pub min_duration: f64,
}

impl Default for DispersionThreshold {
    fn default() -> Self {
        Self {
            dispersion_threshold: 0.03,
            min_duration: 0.1,
        }
    }
}

impl DispersionThreshold {
    pub fn new(dispersion_threshold: f64, min_duration: f64) -> Result<Self, GazeError> {
        if !(dispersion_threshold > 0.0 && min_duration > 0.0) {
            return Err(GazeError::Parameter(
                "dispersion threshold and minimum duration must be positive".into(),
            ));
        }
        Ok(Self {
            dispersion_threshold,
            min_duration,
        })
    }
}

/// Running per-channel bounds over a growing window.
struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    fn new(v: &[f64]) -> Self {
        Self {
            lo: v.to_vec(),
            hi: v.to_vec(),
        }
    }

    fn extend(&mut self, v: &[f64]) {
        for ((lo, hi), x) in self.lo.iter_mut().zip(self.hi.iter_mut()).zip(v) {
            *lo = lo.min(*x);
            *hi = hi.max(*x);
        }
    }

    fn dispersion(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).sum()
    }
}

impl FixationDetector for DispersionThreshold {
    fn detect(&self, gaze: &Stream) -> Vec<Fixation> {
        let s = &gaze.samples;
        let n = s.len();
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            // Smallest window starting at i that spans the minimum duration.
            let Some(mut j) = (i..n).find(|&j| s[j].t - s[i].t >= self.min_duration) else {
                break;
            };
            let mut b = Bounds::new(&s[i].value);
            for sample in &s[i + 1..=j] {
                b.extend(&sample.value);
            }
            if b.dispersion() > self.dispersion_threshold {
                i += 1;
                continue;
            }
            while j + 1 < n {
                let mut grown = Bounds {
                    lo: b.lo.clone(),
                    hi: b.hi.clone(),
                };
                grown.extend(&s[j + 1].value);
                if grown.dispersion() > self.dispersion_threshold {
                    break;
                }
                b = grown;
                j += 1;
            }
            let count = (j - i + 1) as f64;
            let mut centroid = vec![0.0; gaze.dim];
            for sample in &s[i..=j] {
                for (c, v) in centroid.iter_mut().zip(&sample.value) {
                    *c += v;
                }
            }
            centroid.iter_mut().for_each(|c| *c /= count);
            out.push(Fixation {
                start: s[i].t,
                end: s[j].t,
                centroid,
                dispersion: b.dispersion(),
                samples: (i, j),
            });
            i = j + 1;
        }
        out
    }
}

/// I-DT over a gaze stream. An empty stream yields no fixations.
pub fn detect_fixations(gaze: &Stream, params: &DispersionThreshold) -> Vec<Fixation> {
    params.detect(gaze)
}
