//! Deterministic sampling of training triples from a first-stage run.
//!
//! For every query where the first stage retrieved at least one relevant
//! document, the group holds that document (the highest-ranked relevant
//! one) as the positive plus a fixed number of non-relevant documents
//! drawn uniformly without replacement from the same retrieved list.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{first_stage_index, FeatureContext, FeatureVector};
use crate::runio::{Qrels, RunList};
use crate::{Error, Result};

/// One labeled document of a training group.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub doc_id: String,
    pub features: FeatureVector,
    /// Binary relevance label.
    pub label: bool,
}

/// All labeled documents sampled for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingGroup {
    pub query_id: String,
    pub rows: Vec<TrainingRow>,
}

/// What the sampler kept and dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplingReport {
    pub sampled_queries: usize,
    /// Queries where the first stage retrieved no relevant document.
    pub skipped_no_relevant: Vec<String>,
    /// Queries where every retrieved document was relevant, leaving no
    /// negatives to sample.
    pub skipped_no_negatives: Vec<String>,
}

/// Sample per-query training groups from the designated first-stage run.
///
/// Queries are visited in lexicographic order and negatives drawn from a
/// single generator seeded with `seed`, so identical inputs and seed yield
/// identical groups. When a query's list holds fewer than
/// `per_query_negatives` non-relevant documents, all of them are taken;
/// queries with none are skipped and reported.
pub fn sample_training_groups(
    runs: &[RunList],
    first_stage_id: &str,
    qrels: &Qrels,
    per_query_negatives: usize,
    seed: u64,
) -> Result<(Vec<TrainingGroup>, SamplingReport)> {
    if runs.is_empty() {
        return Err(Error::NoRuns);
    }
    if per_query_negatives == 0 {
        return Err(Error::InvalidConfig(
            "per_query_negatives must be >= 1".to_string(),
        ));
    }
    let first_stage = first_stage_index(runs, first_stage_id)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::new();
    let mut report = SamplingReport::default();

    for (query_id, entries) in runs[first_stage].queries() {
        let Some(positive) = entries
            .iter()
            .find(|e| qrels.is_relevant(query_id, &e.doc_id))
        else {
            report.skipped_no_relevant.push(query_id.to_string());
            continue;
        };
        let negatives: Vec<&str> = entries
            .iter()
            .filter(|e| !qrels.is_relevant(query_id, &e.doc_id))
            .map(|e| e.doc_id.as_str())
            .collect();
        if negatives.is_empty() {
            report.skipped_no_negatives.push(query_id.to_string());
            continue;
        }
        let take = per_query_negatives.min(negatives.len());
        let mut picked = rand::seq::index::sample(&mut rng, negatives.len(), take).into_vec();
        picked.sort_unstable(); // keep rows in rank order

        let context = FeatureContext::build(runs, first_stage, query_id);
        let mut rows = Vec::with_capacity(take + 1);
        rows.push(TrainingRow {
            doc_id: positive.doc_id.clone(),
            features: context.features(&positive.doc_id)?,
            label: true,
        });
        for idx in picked {
            rows.push(TrainingRow {
                doc_id: negatives[idx].to_string(),
                features: context.features(negatives[idx])?,
                label: false,
            });
        }
        groups.push(TrainingGroup {
            query_id: query_id.to_string(),
            rows,
        });
        report.sampled_queries += 1;
    }
    Ok((groups, report))
}
