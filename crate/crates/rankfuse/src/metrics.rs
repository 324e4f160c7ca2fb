//! Per-query and aggregate retrieval effectiveness measures: average
//! precision, reciprocal rank, and their means over a query set (MAP, MRR,
//! MRR@k).
//!
//! Relevance is binary: a judged grade > 0 counts as relevant. The AP
//! denominator is the total number of judged-relevant documents, so
//! relevant documents that are never retrieved pull the score down.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::runio::{Qrels, RunList};
use crate::{Error, Result};

/// Average precision of one ranking against a set of relevant doc ids.
///
/// `AP = (1/|relevant|) * Σ_i precision@i` over the ranks `i` at which a
/// relevant document is retrieved. Returns 0.0 for an empty ranking or an
/// empty relevant set.
pub fn average_precision(ranking: &[&str], relevant: &HashSet<&str>) -> f64 {
    if ranking.is_empty() || relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in ranking.iter().enumerate() {
        if relevant.contains(doc) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

/// Reciprocal rank of the first relevant document, or 0.0 when none is
/// retrieved within `cutoff` (`None` = unbounded).
pub fn reciprocal_rank(ranking: &[&str], relevant: &HashSet<&str>, cutoff: Option<usize>) -> f64 {
    for (i, doc) in ranking.iter().enumerate() {
        let rank = i + 1;
        if let Some(cutoff) = cutoff {
            if rank > cutoff {
                return 0.0;
            }
        }
        if relevant.contains(doc) {
            return 1.0 / rank as f64;
        }
    }
    0.0
}

/// Per-query metric values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub ap: f64,
    pub rr: f64,
    pub rr_at_k: f64,
}

/// Aggregate report over the evaluable queries of a qrels set.
///
/// Aggregates are arithmetic means of the per-query values.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    #[serde(rename = "map")]
    pub map_score: f64,
    pub mrr: f64,
    pub mrr_at_k: f64,
    pub cutoff: usize,
    #[serde(skip)]
    pub per_query: BTreeMap<String, QueryMetrics>,
}

/// Evaluate a canonical run against qrels.
///
/// Queries in the qrels with at least one relevant document are evaluated;
/// a query the run does not cover contributes 0 to every metric. Queries
/// retrieved by the run but absent from the qrels are ignored. Errors when
/// no query is evaluable.
pub fn evaluate(run: &RunList, qrels: &Qrels, cutoff: usize) -> Result<MetricReport> {
    if cutoff == 0 {
        return Err(Error::InvalidConfig("cutoff must be >= 1".to_string()));
    }
    let queries = qrels.evaluable_queries();
    if queries.is_empty() {
        return Err(Error::NoEvaluableQueries);
    }
    let mut per_query = BTreeMap::new();
    for query_id in &queries {
        let relevant = qrels.relevant_docs(query_id);
        let ranking: Vec<&str> = run
            .entries(query_id)
            .map(|entries| entries.iter().map(|e| e.doc_id.as_str()).collect())
            .unwrap_or_default();
        per_query.insert(
            query_id.to_string(),
            QueryMetrics {
                ap: average_precision(&ranking, &relevant),
                rr: reciprocal_rank(&ranking, &relevant, None),
                rr_at_k: reciprocal_rank(&ranking, &relevant, Some(cutoff)),
            },
        );
    }
    let n = per_query.len() as f64;
    Ok(MetricReport {
        map_score: per_query.values().map(|m| m.ap).sum::<f64>() / n,
        mrr: per_query.values().map(|m| m.rr).sum::<f64>() / n,
        mrr_at_k: per_query.values().map(|m| m.rr_at_k).sum::<f64>() / n,
        cutoff,
        per_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runio::parse_run_str;

    fn relevant(docs: &[&'static str]) -> HashSet<&'static str> {
        docs.iter().copied().collect()
    }

    #[test]
    fn ap_worked_example() {
        // relevant at ranks 2 and 5: (1/2 + 2/5) / 2
        let ranking = ["d1", "d2", "d3", "d4", "d5"];
        let ap = average_precision(&ranking, &relevant(&["d2", "d5"]));
        assert!((ap - 0.45).abs() < 1e-12);
    }

    #[test]
    fn ap_perfect_single_doc() {
        assert_eq!(average_precision(&["d1"], &relevant(&["d1"])), 1.0);
    }

    #[test]
    fn ap_nothing_relevant_retrieved() {
        assert_eq!(average_precision(&["d1", "d2"], &relevant(&["d9"])), 0.0);
    }

    #[test]
    fn ap_empty_ranking() {
        assert_eq!(average_precision(&[], &relevant(&["d1"])), 0.0);
    }

    #[test]
    fn ap_counts_unretrieved_relevant_in_denominator() {
        // d1 retrieved at rank 1, d9 never retrieved: (1/1) / 2
        let ap = average_precision(&["d1", "d2"], &relevant(&["d1", "d9"]));
        assert!((ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rr_basic_cases() {
        let ranking = ["a", "b", "c"];
        assert!((reciprocal_rank(&ranking, &relevant(&["c"]), None) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(reciprocal_rank(&ranking, &relevant(&["z"]), None), 0.0);
    }

    #[test]
    fn rr_respects_cutoff() {
        let ranking: Vec<String> = (1..=12).map(|i| format!("d{i}")).collect();
        let ranking: Vec<&str> = ranking.iter().map(String::as_str).collect();
        let rel = relevant(&["d12"]);
        assert_eq!(reciprocal_rank(&ranking, &rel, Some(10)), 0.0);
        assert!((reciprocal_rank(&ranking, &rel, None) - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_perfect_run() {
        let run = parse_run_str("q1 Q0 d1 1 0.9 t\nq1 Q0 d2 2 0.8 t").unwrap();
        let qrels = crate::runio::parse_qrels_str("q1 0 d1 1\nq1 0 d2 1").unwrap();
        let report = evaluate(&run, &qrels, 10).unwrap();
        assert_eq!(report.map_score, 1.0);
        assert_eq!(report.mrr, 1.0);
        assert_eq!(report.mrr_at_k, 1.0);
    }

    #[test]
    fn evaluate_means_per_query_values() {
        // q1: AP 0.45 layout; q2: perfect single doc.
        let run = parse_run_str(
            "q1 Q0 d1 1 0.9 t\nq1 Q0 d2 2 0.8 t\nq1 Q0 d3 3 0.7 t\nq1 Q0 d4 4 0.6 t\nq1 Q0 d5 5 0.5 t\nq2 Q0 d1 1 0.9 t",
        )
        .unwrap();
        let qrels = crate::runio::parse_qrels_str("q1 0 d2 1\nq1 0 d5 1\nq2 0 d1 1").unwrap();
        let report = evaluate(&run, &qrels, 10).unwrap();
        assert!((report.map_score - 0.725).abs() < 1e-12);
        assert!((report.per_query["q1"].ap - 0.45).abs() < 1e-12);
        assert_eq!(report.per_query["q2"].ap, 1.0);
    }

    #[test]
    fn evaluate_missing_query_scores_zero() {
        let run = parse_run_str("q1 Q0 d1 1 0.9 t").unwrap();
        let qrels = crate::runio::parse_qrels_str("q1 0 d1 1\nq2 0 d1 1").unwrap();
        let report = evaluate(&run, &qrels, 10).unwrap();
        let q2 = &report.per_query["q2"];
        assert_eq!((q2.ap, q2.rr, q2.rr_at_k), (0.0, 0.0, 0.0));
        assert!((report.map_score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn evaluate_ignores_unjudged_run_queries_and_irrelevant_only_queries() {
        let run = parse_run_str("q1 Q0 d1 1 0.9 t\nq9 Q0 d1 1 0.9 t").unwrap();
        // q2 has only grade-0 judgments: excluded from the mean entirely.
        let qrels = crate::runio::parse_qrels_str("q1 0 d1 1\nq2 0 d1 0").unwrap();
        let report = evaluate(&run, &qrels, 10).unwrap();
        assert_eq!(report.per_query.len(), 1);
        assert_eq!(report.map_score, 1.0);
    }

    #[test]
    fn evaluate_errors_without_evaluable_queries() {
        let run = parse_run_str("q1 Q0 d1 1 0.9 t").unwrap();
        let qrels = crate::runio::parse_qrels_str("q1 0 d1 0").unwrap();
        assert!(matches!(
            evaluate(&run, &qrels, 10),
            Err(Error::NoEvaluableQueries)
        ));
    }

    #[test]
    fn evaluate_rejects_zero_cutoff() {
        let run = parse_run_str("q1 Q0 d1 1 0.9 t").unwrap();
        let qrels = crate::runio::parse_qrels_str("q1 0 d1 1").unwrap();
        assert!(matches!(
            evaluate(&run, &qrels, 0),
            Err(Error::InvalidConfig(_))
        ));
    }
}
