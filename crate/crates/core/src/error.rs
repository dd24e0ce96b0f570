use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {}", fmt_shapes(.shapes))]
    Shape {
        op: &'static str,
        shapes: Vec<Vec<usize>>,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("backward root must be scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("view {view} is marked labeled but carries no label")]
    MissingLabel { view: usize },

    #[error("invalid multiview index: {0}")]
    InvalidIndex(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("memory buffer is empty")]
    EmptyMemory,

    #[error("{path}: malformed data at byte offset {offset}: {reason}")]
    Data {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report parse error at line {line}: {reason}")]
    Report { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

fn fmt_shapes(shapes: &[Vec<usize>]) -> String {
    shapes
        .iter()
        .map(|s| format!("{s:?}"))
        .collect::<Vec<_>>()
        .join(" vs ")
}

pub(crate) fn shape_err(op: &'static str, shapes: &[&[usize]]) -> Error {
    Error::Shape {
        op,
        shapes: shapes.iter().map(|s| s.to_vec()).collect(),
    }
}
