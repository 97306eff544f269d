use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed KC database: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("checkpoint not in dataset: {0}")]
    UnknownCheckpoint(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend timed out")]
    Timeout,
    #[error("backend returned HTTP {status}")]
    Http { status: u16 },
    #[error("unusable backend response: {0}")]
    BadResponse(String),
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("unparseable response: {0}")]
    Parse(String),
    #[error("invalid extractor config: {0}")]
    Config(String),
    #[error("corrupt cache file {path}: {message}")]
    CorruptCache { path: PathBuf, message: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample {which} has {len} values; at least {needed} required")]
    SampleTooSmall {
        which: &'static str,
        len: usize,
        needed: usize,
    },
    #[error("both samples have zero variance but different means; t is unbounded")]
    ZeroVariance,
    #[error("rating lists differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("no items to rate")]
    Empty,
    #[error("sample of {requested} requested but only {available} records exist")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("rater file references unknown item ids: {}", .0.join(", "))]
    UnknownItems(Vec<String>),
    #[error("invalid verdict {verdict:?} for item {item_id}")]
    InvalidVerdict { item_id: String, verdict: String },
    #[error("labeling file error: {0}")]
    File(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("set {set} has {count} green pairs; at least 2 are needed for a standard deviation")]
    TooFewGreenPairs { set: &'static str, count: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("KC database cannot drive the generator; these KCs have no stub rules: {}", .0.join(", "))]
    MissingStubRules(Vec<String>),
    #[error("stub rules are not separable: {0}")]
    NotSeparable(String),
    #[error("invalid synth config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed table {path}: {message}")]
    Table { path: PathBuf, message: String },
}
