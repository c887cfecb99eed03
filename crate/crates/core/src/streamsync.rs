//! Alignment of multi-rate streams onto one master timeline.
//!
//! Each stream carries a constant `clock_offset` (master = local + offset).
//! The master grid covers only the window where every stream has data, so no
//! value is ever extrapolated. How a stream is read at a grid time is decided
//! by an [`AlignPolicy`], looked up by name in a [`PolicyRegistry`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{Stream, HAND_STREAM};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SyncError {
    #[error("offset estimation needs at least 2 pairs, got {0}")]
    InsufficientData(usize),
    #[error("stream '{0}' is empty")]
    EmptyStream(String),
    #[error("streams do not overlap in time")]
    NoOverlap,
    #[error("unknown alignment policy '{0}'")]
    UnknownPolicy(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetEstimate {
    pub offset: f64,
    pub residual_rms: f64,
}

/// Least-squares constant offset from `(local_t, master_t)` pairs.
pub fn estimate_offset(pairs: &[(f64, f64)]) -> Result<OffsetEstimate, SyncError> {
    if pairs.len() < 2 {
        return Err(SyncError::InsufficientData(pairs.len()));
    }
    let n = pairs.len() as f64;
    let offset = pairs.iter().map(|(l, m)| m - l).sum::<f64>() / n;
    let ss: f64 = pairs
        .iter()
        .map(|(l, m)| {
            let r = m - l - offset;
            r * r
        })
        .sum();
    Ok(OffsetEstimate {
        offset,
        residual_rms: (ss / n).sqrt(),
    })
}

/// A value read from a stream at one query time, with the distance in time to
/// the sample(s) it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampled {
    pub value: Vec<f64>,
    pub error: f64,
}

pub trait AlignPolicy: Send + Sync {
    fn name(&self) -> &'static str;
    /// Reads `stream` at local time `t`, which lies within the stream's span.
    fn sample(&self, stream: &Stream, t: f64) -> Sampled;
}

/// Nearest sample in time (ties go to the earlier sample). Suited to
/// categorical channels.
#[derive(Clone, Copy, Debug, Default)]
pub struct NearestSample;

/// Linear interpolation between the bracketing samples.
#[derive(Clone, Copy, Debug, Default)]
pub struct LinearInterp;

fn bracket(stream: &Stream, t: f64) -> (usize, usize) {
    let s = &stream.samples;
    let hi = s.partition_point(|x| x.t < t).min(s.len() - 1);
    let lo = if s[hi].t > t && hi > 0 { hi - 1 } else { hi };
    (lo, hi)
}

impl AlignPolicy for NearestSample {
    fn name(&self) -> &'static str {
        "nearest"
    }

    fn sample(&self, stream: &Stream, t: f64) -> Sampled {
        let (lo, hi) = bracket(stream, t);
        let s = &stream.samples;
        let (dl, dh) = ((t - s[lo].t).abs(), (s[hi].t - t).abs());
        let pick = if dh < dl { hi } else { lo };
        Sampled {
            value: s[pick].value.clone(),
            error: dl.min(dh),
        }
    }
}

impl AlignPolicy for LinearInterp {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn sample(&self, stream: &Stream, t: f64) -> Sampled {
        let (lo, hi) = bracket(stream, t);
        let s = &stream.samples;
        if lo == hi {
            return Sampled {
                value: s[lo].value.clone(),
                error: (t - s[lo].t).abs(),
            };
        }
        let (a, b) = (&s[lo], &s[hi]);
        let u = (t - a.t) / (b.t - a.t);
        Sampled {
            value: a
                .value
                .iter()
                .zip(&b.value)
                .map(|(x, y)| x + u * (y - x))
                .collect(),
            error: (t - a.t).min(b.t - t),
        }
    }
}

/// Named alignment policies.
#[derive(Clone)]
pub struct PolicyRegistry {
    policies: BTreeMap<&'static str, Arc<dyn AlignPolicy>>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut r = Self {
            policies: BTreeMap::new(),
        };
        r.register(Arc::new(NearestSample));
        r.register(Arc::new(LinearInterp));
        r
    }
}

impl PolicyRegistry {
    pub fn register(&mut self, policy: Arc<dyn AlignPolicy>) {
        self.policies.insert(policy.name(), policy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn AlignPolicy>, SyncError> {
        self.policies
            .get(name)
            .cloned()
            .ok_or_else(|| SyncError::UnknownPolicy(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.policies.keys().copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub master_rate: f64,
    /// Stream whose first sample anchors the grid phase, when present.
    pub master_stream: String,
    pub default_policy: String,
    /// Per-stream policy names overriding the default.
    pub policy_overrides: BTreeMap<String, String>,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            master_rate: 120.0,
            master_stream: HAND_STREAM.into(),
            default_policy: "linear".into(),
            policy_overrides: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlignedStream {
    pub name: String,
    pub dim: usize,
    pub policy: String,
    /// One row per master time.
    pub values: Vec<Vec<f64>>,
    pub max_alignment_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlignedBundle {
    pub master_times: Vec<f64>,
    pub streams: Vec<AlignedStream>,
}

impl AlignedBundle {
    pub fn stream(&self, name: &str) -> Option<&AlignedStream> {
        self.streams.iter().find(|s| s.name == name)
    }

    /// Wide CSV: `t,<stream>__c0,...` in stream-name order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for s in &self.streams {
            for k in 0..s.dim {
                let _ = write!(out, ",{}__c{k}", s.name);
            }
        }
        out.push('\n');
        for (i, t) in self.master_times.iter().enumerate() {
            out.push_str(&crate::dataset::fmt_time(*t));
            for s in &self.streams {
                for v in &s.values[i] {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Aligns every stream with a single policy.
pub fn align(
    streams: &[Stream],
    master_rate: f64,
    policy: &dyn AlignPolicy,
) -> Result<AlignedBundle, SyncError> {
    let policies: Vec<&dyn AlignPolicy> = vec![policy; streams.len()];
    align_with(streams, master_rate, None, &policies)
}

/// Aligns streams using the registry and per-stream policy overrides.
pub fn align_config(
    streams: &[Stream],
    cfg: &AlignConfig,
    registry: &PolicyRegistry,
) -> Result<AlignedBundle, SyncError> {
    let resolved = streams
        .iter()
        .map(|s| {
            let name = cfg
                .policy_overrides
                .get(&s.name)
                .unwrap_or(&cfg.default_policy);
            registry.get(name)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let policies: Vec<&dyn AlignPolicy> = resolved.iter().map(|p| p.as_ref()).collect();
    let master = streams.iter().position(|s| s.name == cfg.master_stream);
    align_with(streams, cfg.master_rate, master, &policies)
}

fn align_with(
    streams: &[Stream],
    master_rate: f64,
    master: Option<usize>,
    policies: &[&dyn AlignPolicy],
) -> Result<AlignedBundle, SyncError> {
    if !(master_rate > 0.0 && master_rate.is_finite()) {
        return Err(SyncError::Parameter(format!(
            "master rate must be positive, got {master_rate}"
        )));
    }
    if streams.is_empty() {
        return Err(SyncError::Parameter("no streams to align".into()));
    }
    let mut start = f64::NEG_INFINITY;
    let mut end = f64::INFINITY;
    for s in streams {
        let (a, b) = s.span().ok_or_else(|| SyncError::EmptyStream(s.name.clone()))?;
        start = start.max(a + s.clock_offset);
        end = end.min(b + s.clock_offset);
    }
    if start > end {
        return Err(SyncError::NoOverlap);
    }

    // Grid phase: the master stream's first sample, otherwise the window start.
    let anchor_idx = master.unwrap_or_else(|| {
        (0..streams.len())
            .max_by(|&a, &b| {
                let ta = streams[a].samples[0].t + streams[a].clock_offset;
                let tb = streams[b].samples[0].t + streams[b].clock_offset;
                ta.total_cmp(&tb)
            })
            .expect("non-empty")
    });
    let anchor = &streams[anchor_idx];
    let anchor_local = anchor.samples[0].t;
    let anchor_master = anchor_local + anchor.clock_offset;
    let dt = 1.0 / master_rate;
    let slack = 1e-9;
    let i_min = ((start - anchor_master) / dt - slack).ceil() as i64;
    let i_max = ((end - anchor_master) / dt + slack).floor() as i64;
    if i_min > i_max {
        return Err(SyncError::NoOverlap);
    }
    let steps: Vec<f64> = (i_min..=i_max).map(|i| i as f64 * dt).collect();
    let master_times = steps.iter().map(|k| anchor_master + k).collect();

    let aligned = streams
        .iter()
        .zip(policies)
        .map(|(s, policy)| {
            // Local query time = anchor local time + (offset difference) + k·dt.
            let base = anchor_local + (anchor.clock_offset - s.clock_offset);
            let (lo, hi) = s.span().expect("checked non-empty");
            let mut max_err: f64 = 0.0;
            let values = steps
                .iter()
                .map(|k| {
                    let t = (base + k).clamp(lo, hi);
                    let r = policy.sample(s, t);
                    max_err = max_err.max(r.error);
                    r.value
                })
                .collect();
            AlignedStream {
                name: s.name.clone(),
                dim: s.dim,
                policy: policy.name().to_string(),
                values,
                max_alignment_error: max_err,
            }
        })
        .collect();
    Ok(AlignedBundle {
        master_times,
        streams: aligned,
    })
}
