//! Time-indexed Gaussian mixture models of demonstrated hand trajectories,
//! fitted by expectation-maximization.

mod actions;
mod em;
mod file;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use actions::{
    fit_action_models, normalize_time, reach_window, training_matrix, ActionModel, ActionModels,
    AXES, REACH_SPEED_THRESHOLD,
};
pub use em::{fit, loglik, Gaussian};
pub use file::{BundleFile, GmmFile, ModelEntry, BUNDLE_FORMAT, GMM_VERSION};

use crate::dataset::{ActionLabel, DatasetError};

#[derive(Debug, thiserror::Error)]
pub enum GmmError {
    #[error("need at least {k} rows for {k} components, got {n}")]
    InsufficientData { n: usize, k: usize },
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
    #[error("row dimension {got} does not match model dimension {expected}")]
    Shape { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("covariance of component {0} is not positive definite")]
    NotPositiveDefinite(usize),
    #[error("labels without trials: {}", .0.iter().map(|l| l.token()).collect::<Vec<_>>().join(","))]
    Coverage(Vec<ActionLabel>),
    #[error("label {label}: {source}")]
    Trial {
        label: ActionLabel,
        #[source]
        source: DatasetError,
    },
    #[error("model file: {0}")]
    Format(String),
}

/// How trial time is mapped before fitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeNormalization {
    /// Reach onset..end rescaled to [0, 1].
    Unit,
    /// Seconds since reach onset.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// Seeded k-means++ on standardized rows.
    KMeansPlusPlus,
    /// Equal-width bins of the time column; ignores the seed.
    TimeBins,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub components: usize,
    /// Stop when the per-sample log-likelihood gain drops below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Diagonal regularization as a fraction of each dimension's data variance.
    pub reg_scale: f64,
    /// Absolute lower bound on the diagonal regularization.
    pub reg_floor: f64,
    pub kmeans_iters: usize,
    pub init: InitMethod,
    /// Independent k-means++ initializations; the run with the highest
    /// final log-likelihood is kept.
    pub restarts: usize,
    pub time_normalization: TimeNormalization,
    /// Rest samples included on each side of the reach window, as a
    /// fraction of the reach duration.
    pub window_margin: f64,
    /// Fit one (t, x, y, z) model per label instead of three (t, coordinate) models.
    pub joint: bool,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            components: 4,
            tol: 1e-8,
            max_iters: 2000,
            reg_scale: 1e-6,
            reg_floor: 1e-12,
            kmeans_iters: 10,
            init: InitMethod::KMeansPlusPlus,
            restarts: 1,
            time_normalization: TimeNormalization::Unit,
            window_margin: 0.1,
            joint: false,
            seed: 7,
        }
    }
}

impl EmConfig {
    pub fn check(&self) -> Result<(), GmmError> {
        if self.components == 0 {
            return Err(GmmError::Config("components must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(GmmError::Config("restarts must be >= 1".into()));
        }
        if !(self.window_margin >= 0.0 && self.window_margin.is_finite()) {
            return Err(GmmError::Config("window_margin must be >= 0".into()));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(GmmError::Config("tol must be > 0 and max_iters >= 1".into()));
        }
        if !(self.reg_scale >= 0.0 && self.reg_floor > 0.0) {
            return Err(GmmError::Config(
                "reg_scale must be >= 0 and reg_floor > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmmComponent {
    pub prior: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub iterations: usize,
    pub log_likelihood: f64,
    pub converged: bool,
    pub seed: u64,
    pub time_normalization: TimeNormalization,
    /// Log-likelihood after initialization and after every M-step.
    #[serde(skip)]
    pub loglik_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel {
    pub components: Vec<GmmComponent>,
    pub input_dims: Vec<usize>,
    pub output_dims: Vec<usize>,
    pub fit_meta: FitMeta,
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    /// Builds a model from raw parameters with time (dim 0) as the input.
    pub fn from_parts(components: Vec<GmmComponent>, time_normalization: TimeNormalization) -> Self {
        let dim = components.first().map_or(0, |c| c.mean.len());
        Self {
            components,
            input_dims: vec![0],
            output_dims: (1..dim).collect(),
            fit_meta: FitMeta {
                iterations: 0,
                log_likelihood: 0.0,
                converged: false,
                seed: 0,
                time_normalization,
                loglik_trace: Vec::new(),
            },
        }
    }

    pub fn prior_sum(&self) -> f64 {
        self.components.iter().map(|c| c.prior).sum()
    }
}

/// Joint samples `(t, x...)` with the trial each row came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    pub source: Vec<u32>,
}

impl TrainingMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let source = vec![0; rows.len()];
        Self { dim, rows, source }
    }

    pub fn push(&mut self, row: Vec<f64>, source: u32) {
        debug_assert_eq!(row.len(), self.dim);
        self.rows.push(row);
        self.source.push(source);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}
