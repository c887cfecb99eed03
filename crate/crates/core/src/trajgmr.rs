//! Gaussian mixture regression: conditional mean and covariance of the
//! output dimensions of a fitted mixture given time.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{fmt_time, ActionLabel, Point3, Trajectory};
use crate::trajgmm::{ActionModel, ActionModels, GmmModel, TimeNormalization};

/// Lower bound on the time variance of a component before inversion.
pub const TIME_VAR_FLOOR: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum GmrError {
    #[error("can only condition on a single input dimension, model has {0:?}")]
    UnsupportedConditioning(Vec<usize>),
    #[error("invalid query: {0}")]
    Query(String),
    #[error("incompatible models: {0}")]
    Incompatible(String),
    #[error("no model for label {0}")]
    MissingLabel(ActionLabel),
}

/// How per-component conditional covariances are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// Law of total variance: Σ h_k (Σ̂_k + (μ̂_k − μ̂)(μ̂_k − μ̂)ᵀ).
    #[default]
    MomentMatched,
    /// Σ h_k² Σ̂_k, ignoring the spread of the component means.
    WeightedSum,
}

impl CovarianceMode {
    pub fn name(self) -> &'static str {
        match self {
            CovarianceMode::MomentMatched => "moment_matched",
            CovarianceMode::WeightedSum => "weighted_sum",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmrQuery {
    pub times: Vec<f64>,
}

impl GmrQuery {
    pub fn new(times: Vec<f64>) -> Result<Self, GmrError> {
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(GmrError::Query(format!("non-finite time {t}")));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(GmrError::Query("times must be non-decreasing".into()));
        }
        Ok(Self { times })
    }

    /// `n` evenly spaced times from `start` to `end` inclusive.
    pub fn uniform(start: f64, end: f64, n: usize) -> Result<Self, GmrError> {
        if n < 2 {
            return Err(GmrError::Query(format!("need at least 2 points, got {n}")));
        }
        let last = (n - 1) as f64;
        let mut times: Vec<f64> = (0..n)
            .map(|i| start + (end - start) * (i as f64 / last))
            .collect();
        times[n - 1] = end;
        Self::new(times)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmrOutput {
    pub times: Vec<f64>,
    pub mean: Vec<DVector<f64>>,
    pub covariance: Vec<DMatrix<f64>>,
    pub responsibilities: Vec<Vec<f64>>,
    pub mode: CovarianceMode,
}

impl GmrOutput {
    /// `t,mean_<name>...,var_<name>...`, one row per query time.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut out = String::from("t");
        for n in names {
            write!(out, ",mean_{n}").unwrap();
        }
        for n in names {
            write!(out, ",var_{n}").unwrap();
        }
        out.push('\n');
        for ((t, m), c) in self.times.iter().zip(&self.mean).zip(&self.covariance) {
            out.push_str(&fmt_time(*t));
            for v in m.iter() {
                write!(out, ",{v}").unwrap();
            }
            for i in 0..m.len() {
                write!(out, ",{}", c[(i, i)]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

struct Conditional {
    log_prior: f64,
    mu_t: f64,
    var_t: f64,
    log_norm_t: f64,
    mu_x: DVector<f64>,
    /// Σ_xt / Σ_tt
    gain: DVector<f64>,
    cov: DMatrix<f64>,
}

fn conditionals(model: &GmmModel) -> Result<Vec<Conditional>, GmrError> {
    let [ti] = model.input_dims[..] else {
        return Err(GmrError::UnsupportedConditioning(model.input_dims.clone()));
    };
    let outs = &model.output_dims;
    Ok(model
        .components
        .iter()
        .map(|c| {
            let var_t = c.covariance[(ti, ti)].max(TIME_VAR_FLOOR);
            let cross = DVector::from_iterator(outs.len(), outs.iter().map(|&o| c.covariance[(o, ti)]));
            let gain = &cross / var_t;
            let xx = DMatrix::from_fn(outs.len(), outs.len(), |r, s| c.covariance[(outs[r], outs[s])]);
            let cov = xx - &gain * cross.transpose();
            Conditional {
                log_prior: c.prior.ln(),
                mu_t: c.mean[ti],
                var_t,
                log_norm_t: -0.5 * (2.0 * std::f64::consts::PI * var_t).ln(),
                mu_x: DVector::from_iterator(outs.len(), outs.iter().map(|&o| c.mean[o])),
                gain,
                cov: (cov.clone() + cov.transpose()) * 0.5,
            }
        })
        .collect())
}

pub fn regress(model: &GmmModel, q: &GmrQuery) -> Result<GmrOutput, GmrError> {
    regress_with(model, q, CovarianceMode::MomentMatched)
}

pub fn regress_with(
    model: &GmmModel,
    q: &GmrQuery,
    mode: CovarianceMode,
) -> Result<GmrOutput, GmrError> {
    let comps = conditionals(model)?;
    let d = model.output_dims.len();
    let mut out = GmrOutput {
        times: q.times.clone(),
        mean: Vec::with_capacity(q.times.len()),
        covariance: Vec::with_capacity(q.times.len()),
        responsibilities: Vec::with_capacity(q.times.len()),
        mode,
    };
    for &t in &q.times {
        let logw: Vec<f64> = comps
            .iter()
            .map(|c| c.log_prior + c.log_norm_t - 0.5 * (t - c.mu_t).powi(2) / c.var_t)
            .collect();
        let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut h: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= s);

        let means: Vec<DVector<f64>> = comps.iter().map(|c| &c.mu_x + &c.gain * (t - c.mu_t)).collect();
        let mut mean = DVector::zeros(d);
        for (hk, mk) in h.iter().zip(&means) {
            mean += mk * *hk;
        }
        let mut cov = DMatrix::zeros(d, d);
        for ((hk, mk), c) in h.iter().zip(&means).zip(&comps) {
            match mode {
                CovarianceMode::MomentMatched => {
                    let dm = mk - &mean;
                    cov += (&c.cov + &dm * dm.transpose()) * *hk;
                }
                CovarianceMode::WeightedSum => cov += &c.cov * (hk * hk),
            }
        }
        out.mean.push(mean);
        out.covariance.push(cov);
        out.responsibilities.push(h);
    }
    Ok(out)
}

/// A 3D mean trajectory with per-axis variance, in model time.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub trajectory: Trajectory,
    pub variance: Vec<Point3>,
    pub time_normalization: TimeNormalization,
    pub mode: CovarianceMode,
}

impl Reconstruction {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean_x,mean_y,mean_z,var_x,var_y,var_z\n");
        for ((t, p), v) in self
            .trajectory
            .times
            .iter()
            .zip(&self.trajectory.points)
            .zip(&self.variance)
        {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_time(*t),
                p[0],
                p[1],
                p[2],
                v[0],
                v[1],
                v[2]
            )
            .unwrap();
        }
        out
    }
}

/// Stacks the GMR means of an action model into a 3D trajectory on
/// `n_points` evenly spaced times from 0 to `t_end`.
pub fn reconstruct_action(
    model: &ActionModel,
    n_points: usize,
    t_end: f64,
    mode: CovarianceMode,
) -> Result<Reconstruction, GmrError> {
    let q = GmrQuery::uniform(0.0, t_end, n_points)?;
    let gmms = model.gmms();
    let tn = gmms[0].fit_meta.time_normalization;
    if gmms.iter().any(|g| g.fit_meta.time_normalization != tn) {
        return Err(GmrError::Incompatible(
            "axis models use different time normalizations".into(),
        ));
    }
    let mut points = vec![[0.0; 3]; n_points];
    let mut variance = vec![[0.0; 3]; n_points];
    match model {
        ActionModel::PerAxis(axes) => {
            for (a, g) in axes.iter().enumerate() {
                if g.output_dims.len() != 1 {
                    return Err(GmrError::Incompatible(format!(
                        "axis model {a} has {} outputs",
                        g.output_dims.len()
                    )));
                }
                let r = regress_with(g, &q, mode)?;
                for i in 0..n_points {
                    points[i][a] = r.mean[i][0];
                    variance[i][a] = r.covariance[i][(0, 0)];
                }
            }
        }
        ActionModel::Joint(g) => {
            if g.output_dims.len() != 3 {
                return Err(GmrError::Incompatible(format!(
                    "joint model has {} outputs",
                    g.output_dims.len()
                )));
            }
            let r = regress_with(g, &q, mode)?;
            for i in 0..n_points {
                for a in 0..3 {
                    points[i][a] = r.mean[i][a];
                    variance[i][a] = r.covariance[i][(a, a)];
                }
            }
        }
    }
    Ok(Reconstruction {
        trajectory: Trajectory {
            times: q.times,
            points,
        },
        variance,
        time_normalization: tn,
        mode,
    })
}

impl ActionModels {
    /// Model time at the end of a reach for `label`.
    pub fn reach_end(&self, label: ActionLabel) -> f64 {
        match self.time_normalization {
            TimeNormalization::Unit => 1.0,
            TimeNormalization::Raw => self.reach_durations.get(&label).copied().unwrap_or(1.0),
        }
    }

    pub fn reconstruct(
        &self,
        label: ActionLabel,
        n_points: usize,
        mode: CovarianceMode,
    ) -> Result<Reconstruction, GmrError> {
        let m = self.get(label).ok_or(GmrError::MissingLabel(label))?;
        reconstruct_action(m, n_points, self.reach_end(label), mode)
    }
}
