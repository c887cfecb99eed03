use serde::{Deserialize, Serialize};

use super::{DatasetError, Point3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedSample {
    pub t: f64,
    pub value: Vec<f64>,
}

/// A fixed-dimension, fixed-nominal-rate sequence of timestamped samples.
///
/// Timestamps are on the stream's local clock; `local_t + clock_offset` gives
/// the master-clock time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub name: String,
    pub nominal_rate: f64,
    pub dim: usize,
    pub samples: Vec<TimedSample>,
    pub clock_offset: f64,
}

impl Stream {
    pub fn new(name: impl Into<String>, nominal_rate: f64, dim: usize) -> Self {
        Self {
            name: name.into(),
            nominal_rate,
            dim,
            samples: Vec::new(),
            clock_offset: 0.0,
        }
    }

    pub fn with_samples(
        name: impl Into<String>,
        nominal_rate: f64,
        dim: usize,
        samples: Vec<TimedSample>,
    ) -> Self {
        Self {
            samples,
            ..Self::new(name, nominal_rate, dim)
        }
    }

    pub fn push(&mut self, t: f64, value: Vec<f64>) {
        self.samples.push(TimedSample { t, value });
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// First and last local timestamps.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    /// Checks sample times (non-negative, strictly increasing, finite) and
    /// value dimensions. Row indices in errors are zero-based sample indices.
    pub fn check(&self) -> Result<(), DatasetError> {
        let mut prev: Option<f64> = None;
        for (row, s) in self.samples.iter().enumerate() {
            let fail = |msg: String| DatasetError::Validation {
                stream: self.name.clone(),
                row,
                msg,
            };
            if !s.t.is_finite() || s.t < 0.0 {
                return Err(fail(format!("invalid timestamp {}", s.t)));
            }
            if s.value.len() != self.dim {
                return Err(fail(format!(
                    "value has {} channels, stream declares {}",
                    s.value.len(),
                    self.dim
                )));
            }
            if s.value.iter().any(|v| !v.is_finite()) {
                return Err(fail("non-finite value".into()));
            }
            if let Some(p) = prev {
                if s.t <= p {
                    return Err(fail(format!("timestamp {} not after {}", s.t, p)));
                }
            }
            prev = Some(s.t);
        }
        Ok(())
    }

    pub fn median_interval(&self) -> Option<f64> {
        if self.samples.len() < 2 {
            return None;
        }
        let mut dts: Vec<f64> = self.samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        dts.sort_by(f64::total_cmp);
        let n = dts.len();
        Some(if n % 2 == 1 {
            dts[n / 2]
        } else {
            0.5 * (dts[n / 2 - 1] + dts[n / 2])
        })
    }

    /// Rate estimate from the median inter-sample interval.
    pub fn estimated_rate(&self) -> Option<f64> {
        self.median_interval().filter(|dt| *dt > 0.0).map(|dt| 1.0 / dt)
    }

    /// Samples with `t <= cut`, as a new stream.
    pub fn truncated(&self, cut: f64) -> Stream {
        let end = self.samples.partition_point(|s| s.t <= cut);
        Stream {
            samples: self.samples[..end].to_vec(),
            ..self.clone_header()
        }
    }

    /// Index of the last sample with `t <= time`.
    pub fn last_index_at(&self, time: f64) -> Option<usize> {
        self.samples.partition_point(|s| s.t <= time).checked_sub(1)
    }

    fn clone_header(&self) -> Stream {
        Stream {
            name: self.name.clone(),
            nominal_rate: self.nominal_rate,
            dim: self.dim,
            samples: Vec::new(),
            clock_offset: self.clock_offset,
        }
    }
}

/// Time-stamped 3D hand positions, meters and seconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Point3>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_stream(&self, name: &str, rate: f64) -> Stream {
        Stream::with_samples(
            name,
            rate,
            3,
            self.times
                .iter()
                .zip(&self.points)
                .map(|(&t, p)| TimedSample {
                    t,
                    value: p.to_vec(),
                })
                .collect(),
        )
    }

    /// Reads a dim-3 stream as a trajectory; `None` when the stream is not 3D.
    pub fn from_stream(s: &Stream) -> Option<Self> {
        if s.dim != 3 {
            return None;
        }
        Some(Self {
            times: s.times().collect(),
            points: s
                .samples
                .iter()
                .map(|x| [x.value[0], x.value[1], x.value[2]])
                .collect(),
        })
    }
}
