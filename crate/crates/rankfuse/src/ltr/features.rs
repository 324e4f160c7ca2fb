//! Feature extraction for the meta-ranker.
//!
//! A document's feature vector is assembled in fixed order from the runs
//! being combined: the first-stage score, one score per checkpoint run (in
//! input order), then the mean and population standard deviation of the
//! checkpoint scores. A document missing from some run is imputed with
//! that run's per-query minimum score; a run that does not cover the query
//! at all imputes 0.

use std::collections::HashMap;

use crate::runio::RunList;
use crate::{Error, Result};

/// Assembled features for one (query, document) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub first_stage_score: f64,
    pub checkpoint_scores: Vec<f64>,
    /// Arithmetic mean of `checkpoint_scores`.
    pub mean: f64,
    /// Population standard deviation of `checkpoint_scores`.
    pub std: f64,
}

impl FeatureVector {
    pub fn new(first_stage_score: f64, checkpoint_scores: Vec<f64>) -> Self {
        let n = checkpoint_scores.len() as f64;
        let mean = checkpoint_scores.iter().sum::<f64>() / n;
        let variance = checkpoint_scores
            .iter()
            .map(|s| (s - mean) * (s - mean))
            .sum::<f64>()
            / n;
        FeatureVector {
            first_stage_score,
            checkpoint_scores,
            mean,
            std: variance.sqrt(),
        }
    }

    /// Flat values in model order:
    /// `[first_stage, checkpoint_1..checkpoint_N, mean, std]`.
    pub fn values(&self) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.len());
        values.push(self.first_stage_score);
        values.extend_from_slice(&self.checkpoint_scores);
        values.push(self.mean);
        values.push(self.std);
        values
    }

    pub fn len(&self) -> usize {
        self.checkpoint_scores.len() + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Expected feature count for a given number of runs (one of which is the
/// first stage).
pub fn feature_count_for_runs(run_count: usize) -> usize {
    // first stage + (run_count - 1) checkpoints + mean + std
    run_count + 2
}

struct QueryScores<'a> {
    scores: HashMap<&'a str, f64>,
    min: f64,
}

impl<'a> QueryScores<'a> {
    fn build(run: &'a RunList, query_id: &str) -> Self {
        match run.entries(query_id) {
            Some(entries) if !entries.is_empty() => {
                let mut scores = HashMap::with_capacity(entries.len());
                let mut min = f64::MAX;
                for entry in entries {
                    scores.insert(entry.doc_id.as_str(), entry.score);
                    min = min.min(entry.score);
                }
                QueryScores { scores, min }
            }
            _ => QueryScores {
                scores: HashMap::new(),
                min: 0.0,
            },
        }
    }

    fn lookup(&self, doc_id: &str) -> (f64, bool) {
        match self.scores.get(doc_id) {
            Some(&score) => (score, true),
            None => (self.min, false),
        }
    }
}

/// Per-query score lookup across all runs, for featurizing many docs of
/// the same query without rescanning the runs.
pub(crate) struct FeatureContext<'a> {
    query_id: String,
    first_stage: QueryScores<'a>,
    checkpoints: Vec<QueryScores<'a>>,
}

/// Index of the run whose system id is the designated first stage.
pub(crate) fn first_stage_index(runs: &[RunList], first_stage_id: &str) -> Result<usize> {
    runs.iter()
        .position(|r| r.system_id == first_stage_id)
        .ok_or_else(|| {
            Error::Validation(format!(
                "no run has the designated first-stage system id '{first_stage_id}'"
            ))
        })
}

impl<'a> FeatureContext<'a> {
    pub(crate) fn build(runs: &'a [RunList], first_stage: usize, query_id: &str) -> Self {
        FeatureContext {
            query_id: query_id.to_string(),
            first_stage: QueryScores::build(&runs[first_stage], query_id),
            checkpoints: runs
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != first_stage)
                .map(|(_, run)| QueryScores::build(run, query_id))
                .collect(),
        }
    }

    pub(crate) fn features(&self, doc_id: &str) -> Result<FeatureVector> {
        let (first, found_first) = self.first_stage.lookup(doc_id);
        let mut found_any = found_first;
        let checkpoint_scores = self
            .checkpoints
            .iter()
            .map(|cp| {
                let (score, found) = cp.lookup(doc_id);
                found_any |= found;
                score
            })
            .collect();
        if !found_any {
            return Err(Error::Validation(format!(
                "document '{doc_id}' absent from every run for query '{}'",
                self.query_id
            )));
        }
        Ok(FeatureVector::new(first, checkpoint_scores))
    }
}

/// Build the feature vector for one (query, document) pair.
///
/// `first_stage_id` selects the first-stage run among `runs`; the rest are
/// treated as checkpoints in input order. Errors when the document is
/// absent from every run for the query.
pub fn build_features(
    runs: &[RunList],
    first_stage_id: &str,
    query_id: &str,
    doc_id: &str,
) -> Result<FeatureVector> {
    if runs.is_empty() {
        return Err(Error::NoRuns);
    }
    let first_stage = first_stage_index(runs, first_stage_id)?;
    FeatureContext::build(runs, first_stage, query_id).features(doc_id)
}
