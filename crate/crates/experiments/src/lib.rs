//! Experiment harness for the OTFS predictive precoder: dataset generation,
//! training, the FER sweeps, analytic-versus-simulation validation, and
//! CSV/SVG output.
//!
//! The `otfs-bench` binary is a thin wrapper around [`cli::run`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod data;
pub mod eval;
pub mod output;

use otfs_core::channel::TrajectoryIoError;
use otfs_core::link::LinkError;
use otfs_core::net::{CheckpointError, NetError, TrainError};
use otfs_core::autodiff::AdError;
use thiserror::Error;

pub use config::{ExperimentConfig, SchemeName};
pub use output::ResultRow;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl BenchError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<TrajectoryIoError> for BenchError {
    fn from(e: TrajectoryIoError) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<CheckpointError> for BenchError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Mismatch(_) => Self::Config(e.to_string()),
            _ => Self::Io(e.to_string()),
        }
    }
}

fn numeric_ad(e: &AdError) -> bool {
    matches!(e, AdError::NonFinite { .. } | AdError::Singular { .. })
}

impl From<LinkError> for BenchError {
    fn from(e: LinkError) -> Self {
        match &e {
            LinkError::Linalg(_) => Self::Numeric(e.to_string()),
            LinkError::Autodiff(a) if numeric_ad(a) => Self::Numeric(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<NetError> for BenchError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Link(l) => l.into(),
            NetError::DegenerateNormalization => Self::Numeric(e.to_string()),
            NetError::Autodiff(ref a) if numeric_ad(a) => Self::Numeric(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<TrainError> for BenchError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => Self::Config(m),
            TrainError::NonFinite { .. } => Self::Numeric(e.to_string()),
            TrainError::Net(n) => n.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use otfs_core::linalg::LinalgError;

    #[test]
    fn exit_codes() {
        assert_eq!(BenchError::Config(String::new()).exit_code(), 2);
        let singular: BenchError = LinkError::Linalg(LinalgError::Singular { pivot: 0, magnitude: 0.0 }).into();
        assert_eq!(singular.exit_code(), 3);
        let io: BenchError = std::io::Error::other("x").into();
        assert_eq!(io.exit_code(), 4);
        let mismatch: BenchError = CheckpointError::Mismatch("K".into()).into();
        assert_eq!(mismatch.exit_code(), 2);
    }
}
