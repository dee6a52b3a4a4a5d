use std::path::PathBuf;

use distill_core::column::SimError;
use distill_core::dataset::DatasetError;
use distill_core::physics::PhysicsError;
use distill_core::thermo::ThermoError;
use distill_core::training::TrainError;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum TwinError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("checkpoint integrity check failed: {0}")]
    Integrity(String),
    #[error("simulation failed: {0}")]
    Simulation(SimError),
    #[error("dataset error: {0}")]
    Data(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl TwinError {
    pub fn category(&self) -> &'static str {
        match self {
            TwinError::Config(_) => "config",
            TwinError::MissingFile(_) => "missing_file",
            TwinError::CheckpointVersion { .. } => "checkpoint_version",
            TwinError::Integrity(_) => "integrity",
            TwinError::Simulation(_) => "simulator_instability",
            TwinError::Data(_) => "dataset",
            TwinError::Train(_) => "training",
            TwinError::Physics(_) | TwinError::Thermo(_) => "numerical",
            TwinError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            TwinError::Config(_) => 2,
            TwinError::MissingFile(_) => 3,
            TwinError::CheckpointVersion { .. } => 4,
            TwinError::Integrity(_) => 5,
            TwinError::Simulation(_) => 6,
            _ => 1,
        }
    }

    /// One-line machine-readable form written to stderr by the binary.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            error: &'a str,
            exit_code: i32,
            message: String,
        }
        serde_json::to_string(&Out {
            error: self.category(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        })
        .expect("error report serializes")
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            TwinError::MissingFile(path)
        } else {
            TwinError::Io { path, source }
        }
    }
}

impl From<SimError> for TwinError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::Schedule(_) => TwinError::Config(e.to_string()),
            other => TwinError::Simulation(other),
        }
    }
}

impl From<DatasetError> for TwinError {
    fn from(e: DatasetError) -> Self {
        TwinError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TwinError>;
