//! Paired significance testing between two systems' per-query metric
//! values.
//!
//! The test is a two-sided paired randomization (sign-flip) test: per-query
//! metric differences are computed over the queries both runs cover, the
//! observed statistic is the absolute mean difference, and each resample
//! flips every difference's sign independently with probability 1/2. The
//! p-value uses add-one smoothing, `p = (exceedances + 1) / (iterations + 1)`,
//! so it is always strictly positive.
//!
//! Resamples are independent: iteration `i` draws from its own generator
//! seeded with `splitmix64(seed + i * GOLDEN_GAMMA)`, so results are
//! reproducible for a fixed seed regardless of thread count or iteration
//! order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::metrics::{average_precision, reciprocal_rank};
use crate::runio::{Qrels, RunList};
use crate::{Error, Result};

/// Which per-query value the test compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Ap,
    Rr,
    RrAtK,
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MetricKind::Ap => "ap",
            MetricKind::Rr => "rr",
            MetricKind::RrAtK => "rr_at_k",
        };
        f.write_str(name)
    }
}

/// Outcome of a paired test.
#[derive(Debug, Clone, Serialize)]
pub struct PairedTestResult {
    /// Mean of per-query differences, run A minus run B (signed).
    pub observed_mean_diff: f64,
    pub p_value: f64,
    /// Number of resamples; `2^n` in exact mode.
    pub iterations: usize,
    /// Seed used for Monte-Carlo resampling; 0 in exact mode.
    pub seed: u64,
    pub metric: MetricKind,
    /// Number of common evaluable queries the test was computed over.
    pub queries: usize,
}

impl std::fmt::Display for PairedTestResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "metric={} queries={} mean_diff={:+.6} p={:.6} iterations={} seed={}",
            self.metric, self.queries, self.observed_mean_diff, self.p_value, self.iterations, self.seed
        )
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN_GAMMA);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed.wrapping_add(
        iteration.wrapping_mul(GOLDEN_GAMMA),
    )))
}

fn metric_value(
    run: &RunList,
    query_id: &str,
    relevant: &std::collections::HashSet<&str>,
    metric: MetricKind,
    cutoff: usize,
) -> f64 {
    let ranking: Vec<&str> = run
        .entries(query_id)
        .map(|entries| entries.iter().map(|e| e.doc_id.as_str()).collect())
        .unwrap_or_default();
    match metric {
        MetricKind::Ap => average_precision(&ranking, relevant),
        MetricKind::Rr => reciprocal_rank(&ranking, relevant, None),
        MetricKind::RrAtK => reciprocal_rank(&ranking, relevant, Some(cutoff)),
    }
}

/// Per-query differences (A minus B) over the common evaluable queries:
/// queries with at least one relevant doc that both runs cover.
fn paired_differences(
    run_a: &RunList,
    run_b: &RunList,
    qrels: &Qrels,
    metric: MetricKind,
    cutoff: usize,
) -> Result<Vec<f64>> {
    let diffs: Vec<f64> = qrels
        .evaluable_queries()
        .into_iter()
        .filter(|q| run_a.entries(q).is_some() && run_b.entries(q).is_some())
        .map(|q| {
            let relevant = qrels.relevant_docs(q);
            metric_value(run_a, q, &relevant, metric, cutoff)
                - metric_value(run_b, q, &relevant, metric, cutoff)
        })
        .collect();
    if diffs.is_empty() {
        return Err(Error::NoCommonQueries);
    }
    Ok(diffs)
}

fn abs_mean(values: &[f64]) -> f64 {
    (values.iter().sum::<f64>() / values.len() as f64).abs()
}

/// Two-sided paired randomization test via Monte-Carlo sign flipping.
pub fn paired_randomization_test(
    run_a: &RunList,
    run_b: &RunList,
    qrels: &Qrels,
    metric: MetricKind,
    cutoff: usize,
    iterations: usize,
    seed: u64,
) -> Result<PairedTestResult> {
    if iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be >= 1".to_string()));
    }
    let diffs = paired_differences(run_a, run_b, qrels, metric, cutoff)?;
    let observed = abs_mean(&diffs);
    let exceedances: usize = (0..iterations as u64)
        .into_par_iter()
        .map(|iteration| {
            let mut rng = iteration_rng(seed, iteration);
            let sum: f64 = diffs
                .iter()
                .map(|&d| if rng.random::<bool>() { d } else { -d })
                .sum();
            usize::from((sum / diffs.len() as f64).abs() >= observed)
        })
        .sum();
    Ok(PairedTestResult {
        observed_mean_diff: diffs.iter().sum::<f64>() / diffs.len() as f64,
        p_value: (exceedances + 1) as f64 / (iterations + 1) as f64,
        iterations,
        seed,
        metric,
        queries: diffs.len(),
    })
}

/// Exact enumeration of all `2^n` sign patterns; usable for n <= 20
/// common queries. The all-positive pattern always matches the observed
/// statistic, so `p` is strictly positive without smoothing.
pub fn paired_exact_test(
    run_a: &RunList,
    run_b: &RunList,
    qrels: &Qrels,
    metric: MetricKind,
    cutoff: usize,
) -> Result<PairedTestResult> {
    let diffs = paired_differences(run_a, run_b, qrels, metric, cutoff)?;
    let n = diffs.len();
    if n > 20 {
        return Err(Error::Validation(format!(
            "exact enumeration supports at most 20 common queries, got {n}"
        )));
    }
    let observed = abs_mean(&diffs);
    let patterns: u64 = 1 << n;
    let exceedances: u64 = (0..patterns)
        .into_par_iter()
        .map(|mask| {
            let sum: f64 = diffs
                .iter()
                .enumerate()
                .map(|(i, &d)| if mask >> i & 1 == 0 { d } else { -d })
                .sum();
            u64::from((sum / n as f64).abs() >= observed)
        })
        .sum();
    Ok(PairedTestResult {
        observed_mean_diff: diffs.iter().sum::<f64>() / n as f64,
        p_value: exceedances as f64 / patterns as f64,
        iterations: patterns as usize,
        seed: 0,
        metric,
        queries: n,
    })
}
