//! Knowledge-component based evaluation of programming-assistant hints.
//!
//! The pipeline ingests autograder checkpoint logs and hint logs, extracts
//! missing KCs from code and addressed KCs from hints, and computes
//! progression, top-3 overlap and resolution metrics with supporting
//! statistics.

pub mod error;
pub mod extraction;
pub mod hint_metrics;
pub mod ingest;
pub mod model;
pub mod progression;
pub mod report;
pub mod stats;
pub mod synth;

pub use error::*;
pub use model::{
    Checkpoint, ExtractionRecord, HintEvent, KcDatabase, KnowledgeComponent, StubRules,
    SubjectKind,
};
