use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no records")]
    NoRecords,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("record `{record}`: feature file {path} not found")]
    MissingFeature { record: String, path: PathBuf },

    #[error("record `{record}`: feature file {path} holds {found} bytes, expected {expected}")]
    FeatureLength {
        record: String,
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("grouping constraint unsatisfiable: {0}")]
    Unsatisfiable(String),

    #[error("operation requires objective `{expected}`, model has `{found}`")]
    WrongObjective {
        expected: &'static str,
        found: &'static str,
    },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected,
            found,
        })
    }
}
