//! Trial and stream data types, the trial CSV format, dataset validation and
//! the synthetic trial generator.

mod csv;
mod label;
mod manifest;
mod scene;
mod stream;
mod synth;
mod trial;
mod validate;

pub use csv::{fmt_time, parse_trial, serialize_trial, write_stream_section};
pub use label::{Action, ActionLabel, Direction, LabelCounts};
pub use manifest::{load_dataset, write_dataset, Manifest, ManifestEntry, MANIFEST_FILE};
pub use scene::SceneGeometry;
pub use stream::{Stream, TimedSample, Trajectory};
pub use synth::{synthesize_dataset, NoiseSpec, SynthConfig, SynthTiming};
pub use trial::{
    Dataset, TrialEvents, TrialRecord, GAZE_STREAM, HAND_STREAM, HEAD_STREAM,
};
pub use validate::{validate_dataset, StreamRate, ValidationReport, Violation, Warning};

/// 3D point or vector, meters.
pub type Point3 = [f64; 3];

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("schema error at line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("stream '{stream}' row {row}: {msg}")]
    Validation {
        stream: String,
        row: usize,
        msg: String,
    },
    #[error("unknown label token '{0}'")]
    Label(String),
    #[error("trial {trial_id} has no 3D '{stream}' stream")]
    MissingStream { trial_id: u32, stream: &'static str },
    #[error("invalid scene geometry: {0}")]
    Geometry(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("labels without trials: {}", fmt_labels(.0))]
    Coverage(Vec<ActionLabel>),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
}

fn fmt_labels(labels: &[ActionLabel]) -> String {
    labels
        .iter()
        .map(|l| l.token())
        .collect::<Vec<_>>()
        .join(",")
}
