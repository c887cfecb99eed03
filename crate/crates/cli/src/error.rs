use std::fmt;

use legible::anticipate::AnticipateError;
use legible::dataset::DatasetError;
use legible::gaze::GazeError;
use legible::streamsync::SyncError;
use legible::trajgmm::GmmError;
use legible::trajgmr::GmrError;

pub const EXIT_IO: u8 = 2;
pub const EXIT_COVERAGE: u8 = 3;
pub const EXIT_LEAKAGE: u8 = 4;
pub const EXIT_NUMERICAL: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub msg: String,
}

impl CliError {
    pub fn new(code: u8, kind: &'static str, msg: impl Into<String>) -> Self {
        Self {
            code,
            kind,
            msg: msg.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::new(EXIT_IO, "config", msg)
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::new(EXIT_IO, "io", format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // One line, so stderr can be grepped.
        write!(f, "error code={} kind={}: {}", self.code, self.kind, self.msg.replace('\n', " "))
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Coverage(_) => Self::new(EXIT_COVERAGE, "coverage", e.to_string()),
            DatasetError::Io { .. } => Self::new(EXIT_IO, "io", e.to_string()),
            _ => Self::new(EXIT_IO, "data", e.to_string()),
        }
    }
}

impl From<GmmError> for CliError {
    fn from(e: GmmError) -> Self {
        match e {
            GmmError::Coverage(_) | GmmError::InsufficientData { .. } => {
                Self::new(EXIT_COVERAGE, "coverage", e.to_string())
            }
            GmmError::NonFinite(_) | GmmError::NotPositiveDefinite(_) | GmmError::Shape { .. } => {
                Self::new(EXIT_NUMERICAL, "numerical", e.to_string())
            }
            GmmError::Trial { source, label } => {
                let mut c = CliError::from(source);
                c.msg = format!("{label}: {}", c.msg);
                c
            }
            GmmError::Config(_) => Self::config(e.to_string()),
            GmmError::Format(_) => Self::new(EXIT_IO, "format", e.to_string()),
        }
    }
}

impl From<GmrError> for CliError {
    fn from(e: GmrError) -> Self {
        match e {
            GmrError::Query(_) => Self::config(e.to_string()),
            GmrError::MissingLabel(_) => Self::new(EXIT_COVERAGE, "coverage", e.to_string()),
            _ => Self::new(EXIT_NUMERICAL, "numerical", e.to_string()),
        }
    }
}

impl From<AnticipateError> for CliError {
    fn from(e: AnticipateError) -> Self {
        match e {
            AnticipateError::Coverage(_) => Self::new(EXIT_COVERAGE, "coverage", e.to_string()),
            AnticipateError::Leakage(_) => Self::new(EXIT_LEAKAGE, "leakage", e.to_string()),
            AnticipateError::Gmr(g) => g.into(),
            AnticipateError::Design(_) | AnticipateError::Degenerate(_) => {
                Self::new(EXIT_NUMERICAL, "numerical", e.to_string())
            }
            AnticipateError::Events { .. } => Self::new(EXIT_IO, "data", e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<SyncError> for CliError {
    fn from(e: SyncError) -> Self {
        match e {
            SyncError::UnknownPolicy(_) | SyncError::Parameter(_) => Self::config(e.to_string()),
            _ => Self::new(EXIT_IO, "data", e.to_string()),
        }
    }
}

impl From<GazeError> for CliError {
    fn from(e: GazeError) -> Self {
        Self::config(e.to_string())
    }
}
