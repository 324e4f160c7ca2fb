//! Unsupervised fusion of ranked lists: score averaging, reciprocal rank
//! fusion, MAP-weighted reciprocal rank fusion, and positional-probability
//! fusion with a sliding rank window (plus its MAP-weighted variant).
//!
//! All methods share the same missing-document policy: a run that does not
//! contain a document contributes nothing to its fused score. Per-document
//! contributions are summed in ascending value order, so fused scores do
//! not depend on the order in which runs are supplied. Outputs are
//! canonical runs (score descending, doc id ascending on ties, ranks
//! `1..=N`) truncated to the configured depth, carrying the raw fusion
//! values as scores.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics;
use crate::runio::{Qrels, RunList};
use crate::{Error, Result};

/// Fusion method selector, used by config-driven callers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    Average,
    Rrf,
    MapFuse,
    SlideFuse,
    MapSlideFuse,
}

impl FusionMethod {
    pub fn label(&self) -> &'static str {
        match self {
            FusionMethod::Average => "avg",
            FusionMethod::Rrf => "rrf",
            FusionMethod::MapFuse => "mapfuse",
            FusionMethod::SlideFuse => "slidefuse",
            FusionMethod::MapSlideFuse => "mapslidefuse",
        }
    }
}

/// Per-run score normalization applied before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalize {
    #[default]
    None,
    /// Per query, per run: `(score - min) / (max - min)`; a constant-score
    /// list maps to all 1.0.
    MinMax,
}

/// Shared fusion parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub method: FusionMethod,
    /// Rank smoothing constant of the reciprocal-rank family.
    pub k: f64,
    /// Half-width of the positional window used by the slide methods.
    pub window: usize,
    /// Maximum fused depth per query.
    pub output_depth: usize,
    /// Normalization for score averaging; ignored by rank-based methods.
    pub normalize: Normalize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            method: FusionMethod::Rrf,
            k: 60.0,
            window: 6,
            output_depth: 1000,
            normalize: Normalize::None,
        }
    }
}

impl FusionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::InvalidConfig(format!("k must be positive, got {}", self.k)));
        }
        if self.output_depth == 0 {
            return Err(Error::InvalidConfig("output_depth must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Per-system weights (MAP on held-out queries, or any non-negative reals).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SystemWeights(BTreeMap<String, f64>);

impl SystemWeights {
    pub fn new() -> Self {
        SystemWeights::default()
    }

    pub fn insert(&mut self, system_id: impl Into<String>, weight: f64) -> Result<()> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::Validation(format!(
                "weight must be a non-negative finite real, got {weight}"
            )));
        }
        self.0.insert(system_id.into(), weight);
        Ok(())
    }

    pub fn get(&self, system_id: &str) -> Option<f64> {
        self.0.get(system_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(s, &w)| (s.as_str(), w))
    }

    fn require(&self, system_id: &str) -> Result<f64> {
        self.get(system_id)
            .ok_or_else(|| Error::MissingWeight(system_id.to_string()))
    }

    /// Validate invariants after deserialization.
    pub fn validated(self) -> Result<Self> {
        for (system_id, &weight) in &self.0 {
            if !(weight.is_finite() && weight >= 0.0) {
                return Err(Error::Validation(format!(
                    "weight for '{system_id}' must be a non-negative finite real, got {weight}"
                )));
            }
        }
        Ok(self)
    }
}

/// Positional relevance estimates for one system: `probs[i]` is the
/// probability that the document at 0-based position `i` of the system's
/// list is relevant, and `support[i]` the number of training queries whose
/// list reached that position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPositionalModel {
    pub probs: Vec<f64>,
    pub support: Vec<u64>,
}

/// Positional relevance estimates per system, persisted as versioned JSON:
/// `{"version": 1, "systems": {"<system_id>": {"probs": [...], "support": [...]}}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionalRelevanceModel {
    pub version: u32,
    pub systems: BTreeMap<String, SystemPositionalModel>,
}

pub const POSITIONAL_MODEL_VERSION: u32 = 1;

impl PositionalRelevanceModel {
    pub fn system(&self, system_id: &str) -> Result<&SystemPositionalModel> {
        self.systems
            .get(system_id)
            .ok_or_else(|| Error::MissingModel(system_id.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: PositionalRelevanceModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.version != POSITIONAL_MODEL_VERSION {
            return Err(Error::Validation(format!(
                "unsupported positional model version {}",
                self.version
            )));
        }
        for (system_id, system) in &self.systems {
            if system.probs.len() != system.support.len() {
                return Err(Error::Validation(format!(
                    "positional model for '{system_id}' has mismatched array lengths"
                )));
            }
            for (i, (&p, &s)) in system.probs.iter().zip(&system.support).enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Validation(format!(
                        "positional model for '{system_id}' has prob {p} out of [0,1] at {i}"
                    )));
                }
                if s == 0 && p != 0.0 {
                    return Err(Error::Validation(format!(
                        "positional model for '{system_id}' has nonzero prob with zero support at {i}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sum contributions in ascending value order.
///
/// The multiset of contributions determines the result bit-for-bit, which
/// makes fused scores independent of run order.
fn sum_sorted(mut contributions: Vec<f64>) -> f64 {
    contributions.sort_by(|a, b| a.total_cmp(b));
    contributions.iter().sum()
}

/// Union of query ids across runs, in lexicographic order.
fn all_query_ids(runs: &[RunList]) -> Vec<String> {
    let set: BTreeSet<&str> = runs.iter().flat_map(|r| r.query_ids()).collect();
    set.into_iter().map(str::to_string).collect()
}

/// Run every query through `score_query` in parallel and assemble a
/// canonical, depth-truncated run.
fn fuse_per_query<F>(runs: &[RunList], cfg: &FusionConfig, label: &str, score_query: F) -> Result<RunList>
where
    F: Fn(&str) -> Result<Vec<(String, f64)>> + Sync,
{
    if runs.is_empty() {
        return Err(Error::NoRuns);
    }
    cfg.validate()?;
    let scored: BTreeMap<String, Vec<(String, f64)>> = all_query_ids(runs)
        .into_par_iter()
        .map(|query_id| {
            let docs = score_query(&query_id)?;
            Ok((query_id, docs))
        })
        .collect::<Result<_>>()?;
    Ok(RunList::from_scored_docs(label, scored, Some(cfg.output_depth)))
}

/// Rank-based fusion: per query, each run contributes
/// `contribution(run_index, position, depth)` to the doc at `position`.
fn fuse_rank_based<C>(runs: &[RunList], cfg: &FusionConfig, label: &str, contribution: C) -> Result<RunList>
where
    C: Fn(usize, usize, usize) -> Result<f64> + Sync,
{
    fuse_per_query(runs, cfg, label, |query_id| {
        let mut contributions: HashMap<&str, Vec<f64>> = HashMap::new();
        for (run_index, run) in runs.iter().enumerate() {
            let Some(entries) = run.entries(query_id) else {
                continue;
            };
            let depth = entries.len();
            for (position, entry) in entries.iter().enumerate() {
                contributions
                    .entry(entry.doc_id.as_str())
                    .or_default()
                    .push(contribution(run_index, position, depth)?);
            }
        }
        Ok(contributions
            .into_iter()
            .map(|(doc_id, values)| (doc_id.to_string(), sum_sorted(values)))
            .collect())
    })
}

/// Average each document's score over the runs that contain it.
///
/// With [`Normalize::MinMax`], every run's scores are first rescaled to
/// `[0, 1]` per query.
pub fn fuse_average(runs: &[RunList], cfg: &FusionConfig) -> Result<RunList> {
    fuse_per_query(runs, cfg, FusionMethod::Average.label(), |query_id| {
        let mut contributions: HashMap<&str, Vec<f64>> = HashMap::new();
        for run in runs {
            let Some(entries) = run.entries(query_id) else {
                continue;
            };
            let (min, max) = entries.iter().fold((f64::MAX, f64::MIN), |(lo, hi), e| {
                (lo.min(e.score), hi.max(e.score))
            });
            for entry in entries {
                let score = match cfg.normalize {
                    Normalize::None => entry.score,
                    Normalize::MinMax => {
                        if max > min {
                            (entry.score - min) / (max - min)
                        } else {
                            1.0
                        }
                    }
                };
                contributions.entry(entry.doc_id.as_str()).or_default().push(score);
            }
        }
        Ok(contributions
            .into_iter()
            .map(|(doc_id, values)| {
                let count = values.len() as f64;
                (doc_id.to_string(), sum_sorted(values) / count)
            })
            .collect())
    })
}

/// Reciprocal rank fusion: each run containing a doc at 1-based rank `r`
/// contributes `1 / (k + r)`.
pub fn fuse_rrf(runs: &[RunList], cfg: &FusionConfig) -> Result<RunList> {
    fuse_rank_based(runs, cfg, FusionMethod::Rrf.label(), |_, position, _| {
        Ok(1.0 / (cfg.k + (position + 1) as f64))
    })
}

/// Reciprocal rank fusion with each run's contribution scaled by its
/// system weight (held-out MAP): `weight_r / (k + r)`.
pub fn fuse_mapfuse(runs: &[RunList], weights: &SystemWeights, cfg: &FusionConfig) -> Result<RunList> {
    let run_weights: Vec<f64> = runs
        .iter()
        .map(|run| weights.require(&run.system_id))
        .collect::<Result<_>>()?;
    fuse_rank_based(runs, cfg, FusionMethod::MapFuse.label(), |run_index, position, _| {
        Ok(run_weights[run_index] / (cfg.k + (position + 1) as f64))
    })
}

/// Estimate per-position relevance probabilities from training runs.
///
/// For each system and 0-based position `i`: the numerator counts training
/// queries whose document at position `i` is judged relevant, the
/// denominator counts training queries whose list reaches position `i`
/// (depth >= i + 1). Positions never reached get probability 0.
pub fn estimate_positional_relevance(
    training_runs: &[RunList],
    training_qrels: &Qrels,
) -> Result<PositionalRelevanceModel> {
    if training_runs.is_empty() {
        return Err(Error::NoRuns);
    }
    let mut systems = BTreeMap::new();
    for run in training_runs {
        if run.is_empty() {
            return Err(Error::Validation(format!(
                "system '{}' has no training queries",
                run.system_id
            )));
        }
        let max_depth = run.queries().map(|(_, entries)| entries.len()).max().unwrap_or(0);
        let mut hits = vec![0u64; max_depth];
        let mut support = vec![0u64; max_depth];
        for (query_id, entries) in run.queries() {
            for (position, entry) in entries.iter().enumerate() {
                support[position] += 1;
                if training_qrels.is_relevant(query_id, &entry.doc_id) {
                    hits[position] += 1;
                }
            }
        }
        let probs = hits
            .iter()
            .zip(&support)
            .map(|(&h, &s)| if s == 0 { 0.0 } else { h as f64 / s as f64 })
            .collect();
        systems.insert(
            run.system_id.clone(),
            SystemPositionalModel { probs, support },
        );
    }
    Ok(PositionalRelevanceModel {
        version: POSITIONAL_MODEL_VERSION,
        systems,
    })
}

/// Mean positional probability over the window `[max(i-w, 0), min(i+w, n-1)]`.
///
/// `n` is the length of the list being fused and must not exceed the
/// model's array length for the system.
pub fn windowed_probability(
    model: &PositionalRelevanceModel,
    system_id: &str,
    position: usize,
    window: usize,
    n: usize,
) -> Result<f64> {
    let system = model.system(system_id)?;
    if position >= n {
        return Err(Error::PositionOutOfRange {
            position,
            len: n,
            what: "list",
        });
    }
    if n > system.probs.len() {
        return Err(Error::PositionOutOfRange {
            position: n,
            len: system.probs.len(),
            what: "positional model",
        });
    }
    let lo = position.saturating_sub(window);
    let hi = (position + window).min(n - 1);
    let sum: f64 = system.probs[lo..=hi].iter().sum();
    Ok(sum / (hi - lo + 1) as f64)
}

/// Positional-probability fusion: each run containing a doc contributes
/// the windowed probability at the doc's position in that run.
pub fn fuse_slidefuse(
    runs: &[RunList],
    model: &PositionalRelevanceModel,
    cfg: &FusionConfig,
) -> Result<RunList> {
    for run in runs {
        model.system(&run.system_id)?;
    }
    fuse_rank_based(runs, cfg, FusionMethod::SlideFuse.label(), |run_index, position, depth| {
        windowed_probability(model, &runs[run_index].system_id, position, cfg.window, depth)
    })
}

/// [`fuse_slidefuse`] with each run's contribution scaled by its system
/// weight.
pub fn fuse_map_slidefuse(
    runs: &[RunList],
    model: &PositionalRelevanceModel,
    weights: &SystemWeights,
    cfg: &FusionConfig,
) -> Result<RunList> {
    let run_weights: Vec<f64> = runs
        .iter()
        .map(|run| weights.require(&run.system_id))
        .collect::<Result<_>>()?;
    for run in runs {
        model.system(&run.system_id)?;
    }
    fuse_rank_based(
        runs,
        cfg,
        FusionMethod::MapSlideFuse.label(),
        |run_index, position, depth| {
            let p = windowed_probability(model, &runs[run_index].system_id, position, cfg.window, depth)?;
            Ok(run_weights[run_index] * p)
        },
    )
}

/// Weight each run by its MAP on held-out qrels.
pub fn compute_weights(runs: &[RunList], heldout_qrels: &Qrels) -> Result<SystemWeights> {
    if runs.is_empty() {
        return Err(Error::NoRuns);
    }
    let mut weights = SystemWeights::new();
    for run in runs {
        let report = metrics::evaluate(run, heldout_qrels, 10)?;
        weights.insert(run.system_id.clone(), report.map_score)?;
    }
    Ok(weights)
}
