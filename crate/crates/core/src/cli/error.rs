use std::fmt::Display;

use thiserror::Error;

use crate::classifier::ClassifierError;
use crate::data::DataError;
use crate::format::FormatError;
use crate::geometry::GeometryError;
use crate::hierarchy::TaxonomyError;
use crate::metrics::MetricsError;
use crate::prototypes::PrototypeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

/// A failed command: the stage it failed in and the hash of its config.
#[derive(Debug, Error)]
#[error("{stage} failed (config {config_hash}): {message}")]
pub struct CliError {
    pub stage: &'static str,
    pub config_hash: String,
    pub kind: ErrorKind,
    pub message: String,
}

pub(crate) trait Classify: Display {
    fn kind(&self) -> ErrorKind;
}

impl Classify for std::io::Error {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for serde_json::Error {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for FormatError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for GeometryError {
    fn kind(&self) -> ErrorKind {
        match self {
            GeometryError::InvalidCurvature(_) => ErrorKind::Config,
            GeometryError::NonFinite => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for TaxonomyError {
    fn kind(&self) -> ErrorKind {
        match self {
            TaxonomyError::InvalidConfig(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for DataError {
    fn kind(&self) -> ErrorKind {
        match self {
            DataError::InvalidConfig(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for PrototypeError {
    fn kind(&self) -> ErrorKind {
        match self {
            PrototypeError::InvalidConfig { .. } => ErrorKind::Config,
            PrototypeError::Degenerate => ErrorKind::Numerical,
            PrototypeError::Geometry(g) => g.kind(),
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for ClassifierError {
    fn kind(&self) -> ErrorKind {
        match self {
            ClassifierError::InvalidConfig { .. } | ClassifierError::TopK { .. } => ErrorKind::Config,
            ClassifierError::Numerical(_) => ErrorKind::Numerical,
            ClassifierError::Data(e) => e.kind(),
            ClassifierError::Prototype(e) => e.kind(),
            ClassifierError::Taxonomy(e) => e.kind(),
            ClassifierError::Geometry(e) => e.kind(),
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for MetricsError {
    fn kind(&self) -> ErrorKind {
        match self {
            MetricsError::ZeroK | MetricsError::TooFewPredictions { .. } => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

/// Builds errors tagged with one config hash.
#[derive(Debug, Clone)]
pub(crate) struct Ctx {
    pub hash: String,
}

impl Ctx {
    pub fn err<E: Classify>(&self, stage: &'static str) -> impl FnOnce(E) -> CliError + '_ {
        move |e| CliError {
            stage,
            config_hash: self.hash.clone(),
            kind: e.kind(),
            message: e.to_string(),
        }
    }

    pub fn fail(&self, stage: &'static str, kind: ErrorKind, message: impl Into<String>) -> CliError {
        CliError {
            stage,
            config_hash: self.hash.clone(),
            kind,
            message: message.into(),
        }
    }
}
