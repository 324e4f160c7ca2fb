//! Rank fusion, IR evaluation, and learning-to-rank over TREC-style run files.
//!
//! The crate combines ranked retrieval lists produced by several systems (for
//! example a first-stage ranker plus the checkpoints of a cyclically-trained
//! neural model) into a single consensus ranking, and evaluates or compares
//! rankings against relevance judgments.
//!
//! Modules:
//!
//! - [`runio`] — parse, validate, canonicalize and serialize TREC run files
//!   and qrels.
//! - [`metrics`] — MAP, MRR and MRR@k.
//! - [`fusion`] — score averaging, reciprocal rank fusion, MAP-weighted
//!   fusion, and positional-probability (sliding window) fusion.
//! - [`ltr`] — a gradient-boosted-tree meta-ranker trained with pairwise
//!   lambda gradients weighted by AP deltas.
//! - [`fge`] — cyclical learning-rate schedules with mid-cycle checkpoint
//!   placement, plus a triplet hinge loss.
//! - [`stats`] — paired randomization significance tests between two runs.
//!
//! All types are immutable after construction and safe to share across
//! threads; per-query work inside fusion and resampling inside the
//! significance test run on the rayon thread pool.

pub mod fge;
pub mod fusion;
pub mod ltr;
pub mod metrics;
pub mod runio;
pub mod stats;

use thiserror::Error;

/// Errors produced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A line of a run or qrels file could not be parsed.
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// Structurally valid input that violates a domain invariant.
    #[error("{0}")]
    Validation(String),

    /// An operation requiring at least one run received none.
    #[error("at least one run is required")]
    NoRuns,

    /// A run's system id has no weight in the supplied weight table.
    #[error("no weight for system '{0}'")]
    MissingWeight(String),

    /// A run's system id has no entry in the positional relevance model.
    #[error("no positional model for system '{0}'")]
    MissingModel(String),

    /// A rank position is outside the valid range for a list or model.
    #[error("position {position} out of range for {what} of length {len}")]
    PositionOutOfRange {
        position: usize,
        len: usize,
        what: &'static str,
    },

    /// The qrels contain no query with at least one relevant document.
    #[error("qrels contain no evaluable query (every query lacks relevant documents)")]
    NoEvaluableQueries,

    /// Two runs being compared share no evaluable query.
    #[error("the two runs share no evaluable query")]
    NoCommonQueries,

    /// A configuration value violates its documented constraints.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A feature vector's width does not match the model.
    #[error("feature count mismatch: model expects {expected}, got {actual}")]
    FeatureCountMismatch { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
