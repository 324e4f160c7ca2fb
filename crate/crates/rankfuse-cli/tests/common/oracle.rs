//! Brute-force reference implementations, written as direct transcriptions
//! of the fusion score definitions and of average precision. They share no
//! code with the library paths they check (only the run parser is reused
//! as plumbing).
//!
//! Per-document contributions are summed in ascending value order. The
//! formulas do not fix a summation order, but docs with identical
//! contribution multisets must come out bit-equal on both sides, or ties
//! would break differently here than in the checked implementation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rankfuse::runio::{Qrels, RunList};

pub type FusedScores = BTreeMap<String, HashMap<String, f64>>;

fn union_queries(runs: &[RunList]) -> BTreeSet<String> {
    runs.iter()
        .flat_map(|r| r.query_ids().map(str::to_string))
        .collect()
}

fn union_docs(runs: &[RunList], query: &str) -> BTreeSet<String> {
    runs.iter()
        .filter_map(|r| r.entries(query))
        .flatten()
        .map(|e| e.doc_id.clone())
        .collect()
}

fn sorted_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    values.iter().sum()
}

/// 1-based rank of a doc in a run's query list, if present.
fn rank_of(run: &RunList, query: &str, doc: &str) -> Option<usize> {
    run.entries(query)?
        .iter()
        .position(|e| e.doc_id == doc)
        .map(|p| p + 1)
}

/// Reciprocal rank fusion: sum of `1 / (k + rank)` over containing runs.
pub fn rrf(runs: &[RunList], k: f64) -> FusedScores {
    weighted_rrf(runs, k, |_| 1.0)
}

/// Weighted variant: `weight(run) / (k + rank)`.
pub fn mapfuse(runs: &[RunList], weights: &BTreeMap<String, f64>, k: f64) -> FusedScores {
    weighted_rrf(runs, k, |run| weights[&run.system_id])
}

fn weighted_rrf(runs: &[RunList], k: f64, weight: impl Fn(&RunList) -> f64) -> FusedScores {
    let mut fused = FusedScores::new();
    for query in union_queries(runs) {
        let mut scores = HashMap::new();
        for doc in union_docs(runs, &query) {
            let mut contributions = Vec::new();
            for run in runs {
                if let Some(rank) = rank_of(run, &query, &doc) {
                    contributions.push(weight(run) / (k + rank as f64));
                }
            }
            scores.insert(doc, sorted_sum(contributions));
        }
        fused.insert(query, scores);
    }
    fused
}

/// Mean of the scores of the runs containing each doc, with optional
/// per-run per-query min-max rescaling.
pub fn average(runs: &[RunList], minmax: bool) -> FusedScores {
    let mut fused = FusedScores::new();
    for query in union_queries(runs) {
        let mut scores = HashMap::new();
        for doc in union_docs(runs, &query) {
            let mut values = Vec::new();
            for run in runs {
                let Some(entries) = run.entries(&query) else {
                    continue;
                };
                let Some(entry) = entries.iter().find(|e| e.doc_id == doc) else {
                    continue;
                };
                let value = if minmax {
                    let lo = entries.iter().map(|e| e.score).fold(f64::INFINITY, f64::min);
                    let hi = entries
                        .iter()
                        .map(|e| e.score)
                        .fold(f64::NEG_INFINITY, f64::max);
                    if hi > lo {
                        (entry.score - lo) / (hi - lo)
                    } else {
                        1.0
                    }
                } else {
                    entry.score
                };
                values.push(value);
            }
            let count = values.len() as f64;
            scores.insert(doc, sorted_sum(values) / count);
        }
        fused.insert(query, scores);
    }
    fused
}

/// Positional relevance probabilities per system, recounted directly over
/// (system, position, training query) triples.
pub fn positional_probs(training_runs: &[RunList], qrels: &Qrels) -> BTreeMap<String, Vec<f64>> {
    let mut models = BTreeMap::new();
    for run in training_runs {
        let depth = run.queries().map(|(_, e)| e.len()).max().unwrap_or(0);
        let mut probs = Vec::with_capacity(depth);
        for position in 0..depth {
            let mut reached = 0u64;
            let mut relevant = 0u64;
            for (query, entries) in run.queries() {
                if let Some(entry) = entries.get(position) {
                    reached += 1;
                    if qrels.grade(query, &entry.doc_id).unwrap_or(0) > 0 {
                        relevant += 1;
                    }
                }
            }
            probs.push(if reached == 0 {
                0.0
            } else {
                relevant as f64 / reached as f64
            });
        }
        models.insert(run.system_id.clone(), probs);
    }
    models
}

/// Window mean of positional probabilities with boundary clamping.
pub fn windowed(probs: &[f64], position: usize, window: usize, n: usize) -> f64 {
    let a = position.saturating_sub(window);
    let b = if position + window < n { position + window } else { n - 1 };
    let mut total = 0.0;
    for p in probs.iter().take(b + 1).skip(a) {
        total += p;
    }
    total / (b - a + 1) as f64
}

/// Sliding-window fusion with optional per-system weights.
pub fn slidefuse(
    runs: &[RunList],
    probs: &BTreeMap<String, Vec<f64>>,
    weights: Option<&BTreeMap<String, f64>>,
    window: usize,
) -> FusedScores {
    let mut fused = FusedScores::new();
    for query in union_queries(runs) {
        let mut scores = HashMap::new();
        for doc in union_docs(runs, &query) {
            let mut contributions = Vec::new();
            for run in runs {
                if let Some(rank) = rank_of(run, &query, &doc) {
                    let n = run.entries(&query).unwrap().len();
                    let weight = weights.map_or(1.0, |w| w[&run.system_id]);
                    contributions.push(weight * windowed(&probs[&run.system_id], rank - 1, window, n));
                }
            }
            scores.insert(doc, sorted_sum(contributions));
        }
        fused.insert(query, scores);
    }
    fused
}

/// Ranking induced by fused scores: score descending, doc id ascending.
pub fn ranking_of(scores: &HashMap<String, f64>) -> Vec<String> {
    let mut docs: Vec<(&String, f64)> = scores.iter().map(|(d, &s)| (d, s)).collect();
    docs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    docs.into_iter().map(|(d, _)| d.clone()).collect()
}

/// Average precision, straight from the definition.
pub fn average_precision(ranking: &[String], relevant: &HashSet<String>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (i, doc) in ranking.iter().enumerate() {
        if relevant.contains(doc) {
            hits += 1;
            total += hits as f64 / (i + 1) as f64;
        }
    }
    total / relevant.len() as f64
}

fn relevant_set(qrels: &Qrels, query: &str) -> HashSet<String> {
    qrels
        .relevant_docs(query)
        .into_iter()
        .map(str::to_string)
        .collect()
}

/// MAP of fused scores over the evaluable queries of the qrels.
pub fn map_of_fused(fused: &FusedScores, qrels: &Qrels) -> f64 {
    let queries = qrels.evaluable_queries();
    let mut total = 0.0;
    for query in &queries {
        let relevant = relevant_set(qrels, query);
        let ap = fused
            .get(*query)
            .map(|scores| average_precision(&ranking_of(scores), &relevant))
            .unwrap_or(0.0);
        total += ap;
    }
    total / queries.len() as f64
}

/// MAP of a single run over the evaluable queries of the qrels.
pub fn map_of_run(run: &RunList, qrels: &Qrels) -> f64 {
    let queries = qrels.evaluable_queries();
    let mut total = 0.0;
    for query in &queries {
        let relevant = relevant_set(qrels, query);
        let ranking: Vec<String> = run
            .entries(query)
            .map(|entries| entries.iter().map(|e| e.doc_id.clone()).collect())
            .unwrap_or_default();
        total += average_precision(&ranking, &relevant);
    }
    total / queries.len() as f64
}
