//! Boosting loop: pairwise logistic lambdas weighted by AP deltas, one
//! Newton-leaf regression tree per round.
//!
//! Each round scores every row with the current ensemble, then for every
//! group and every (positive, negative) pair computes
//! `lambda = -sigma * |dAP| / (1 + exp(sigma * (s_pos - s_neg)))`, where
//! `|dAP|` is the change in the group's average precision if the two
//! documents swapped positions in the current ranking. Pairs whose swap
//! leaves AP unchanged are skipped. Per-row accumulated negative gradients
//! and second-order weights drive the tree fit; the tree joins the
//! ensemble with shrinkage `eta`.
//!
//! Rounds are strictly sequential; lambda computation runs in parallel
//! over groups and scoring in parallel over rows, neither of which affects
//! the result.

use std::collections::BTreeSet;
use std::ops::Range;

use rayon::prelude::*;

use super::features::{feature_count_for_runs, first_stage_index, FeatureContext};
use super::model::{LtrConfig, LtrModel};
use super::sampling::TrainingGroup;
use super::tree::RegressionTree;
use crate::runio::RunList;
use crate::{Error, Result};

/// AP of a binary relevance sequence with `relevant_total` as denominator.
fn ap_of_sequence(seq: &[bool], relevant_total: usize) -> f64 {
    if relevant_total == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in seq.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant_total as f64
}

/// Accumulate pairwise lambdas and hessians for one group.
///
/// `targets` receives negative gradients: positive mass pushes a row up.
/// The contribution of a pair to its positive row is exactly the negation
/// of its contribution to the negative row.
fn group_lambdas(scores: &[f64], labels: &[bool], sigma: f64, targets: &mut [f64], hessians: &mut [f64]) {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let seq: Vec<bool> = order.iter().map(|&r| labels[r]).collect();
    let mut position_of = vec![0usize; n];
    for (p, &r) in order.iter().enumerate() {
        position_of[r] = p;
    }
    let relevant_total = labels.iter().filter(|&&l| l).count();
    let ap_now = ap_of_sequence(&seq, relevant_total);

    for i in 0..n {
        if !labels[i] {
            continue;
        }
        for j in 0..n {
            if labels[j] {
                continue;
            }
            let mut swapped = seq.clone();
            swapped.swap(position_of[i], position_of[j]);
            let delta = (ap_of_sequence(&swapped, relevant_total) - ap_now).abs();
            if delta == 0.0 {
                continue;
            }
            let rho = 1.0 / (1.0 + (sigma * (scores[i] - scores[j])).exp());
            let lambda = sigma * rho * delta;
            targets[i] += lambda;
            targets[j] -= lambda;
            let weight = sigma * sigma * rho * (1.0 - rho) * delta;
            hessians[i] += weight;
            hessians[j] += weight;
        }
    }
}

struct FlatGroups {
    features: Vec<Vec<f64>>,
    labels: Vec<bool>,
    ranges: Vec<Range<usize>>,
    feature_count: usize,
}

fn flatten(groups: &[TrainingGroup]) -> Result<FlatGroups> {
    if groups.is_empty() {
        return Err(Error::Validation(
            "at least one training group is required".to_string(),
        ));
    }
    let feature_count = groups[0].rows.first().map(|r| r.features.len()).unwrap_or(0);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut ranges = Vec::with_capacity(groups.len());
    for group in groups {
        if group.rows.len() < 2 {
            return Err(Error::Validation(format!(
                "group '{}' has fewer than 2 rows",
                group.query_id
            )));
        }
        let positives = group.rows.iter().filter(|r| r.label).count();
        if positives == 0 || positives == group.rows.len() {
            return Err(Error::Validation(format!(
                "group '{}' must contain both labels",
                group.query_id
            )));
        }
        let start = features.len();
        for row in &group.rows {
            if row.features.len() != feature_count {
                return Err(Error::FeatureCountMismatch {
                    expected: feature_count,
                    actual: row.features.len(),
                });
            }
            let values = row.features.values();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "group '{}' has a non-finite feature for doc '{}'",
                    group.query_id, row.doc_id
                )));
            }
            features.push(values);
            labels.push(row.label);
        }
        ranges.push(start..features.len());
    }
    Ok(FlatGroups {
        features,
        labels,
        ranges,
        feature_count,
    })
}

fn compute_round_gradients(
    flat: &FlatGroups,
    scores: &[f64],
    sigma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = scores.len();
    let mut targets = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    // Carve disjoint per-group slices so groups can run in parallel.
    let mut jobs = Vec::with_capacity(flat.ranges.len());
    let mut target_rest = targets.as_mut_slice();
    let mut hessian_rest = hessians.as_mut_slice();
    for range in &flat.ranges {
        let (target_head, target_tail) = target_rest.split_at_mut(range.len());
        let (hessian_head, hessian_tail) = hessian_rest.split_at_mut(range.len());
        jobs.push((range.clone(), target_head, hessian_head));
        target_rest = target_tail;
        hessian_rest = hessian_tail;
    }
    jobs.into_par_iter().for_each(|(range, target, hessian)| {
        group_lambdas(
            &scores[range.clone()],
            &flat.labels[range],
            sigma,
            target,
            hessian,
        );
    });
    (targets, hessians)
}

/// Train a boosted ensemble on validated groups.
///
/// Deterministic: identical groups and config produce a byte-identical
/// serialized model.
pub fn train(groups: &[TrainingGroup], cfg: &LtrConfig) -> Result<LtrModel> {
    cfg.validate()?;
    let flat = flatten(groups)?;
    let mut model = LtrModel::empty(flat.feature_count, cfg.eta);
    let mut scores = vec![0.0f64; flat.features.len()];
    for _ in 0..cfg.rounds {
        let (targets, hessians) = compute_round_gradients(&flat, &scores, cfg.sigma);
        let tree = RegressionTree::fit(
            &flat.features,
            &targets,
            &hessians,
            cfg.max_depth,
            cfg.min_child_weight,
        );
        scores
            .par_iter_mut()
            .zip(flat.features.par_iter())
            .for_each(|(score, row)| *score += cfg.eta * tree.predict(row));
        model.trees.push(tree);
    }
    Ok(model)
}

/// Mean per-group AP of the model's ranking over training groups. Rows tie
/// on equal scores in row order, matching the trainer's view.
pub fn mean_group_ap(groups: &[TrainingGroup], model: &LtrModel) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::Validation("no groups to evaluate".to_string()));
    }
    let mut total = 0.0;
    for group in groups {
        let scores: Vec<f64> = group
            .rows
            .iter()
            .map(|row| model.predict(&row.features))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..group.rows.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let seq: Vec<bool> = order.iter().map(|&r| group.rows[r].label).collect();
        let relevant_total = group.rows.iter().filter(|r| r.label).count();
        total += ap_of_sequence(&seq, relevant_total);
    }
    Ok(total / groups.len() as f64)
}

/// Score every document in the union of the runs' lists and emit a
/// canonical run.
pub fn rerank(model: &LtrModel, runs: &[RunList], first_stage_id: &str) -> Result<RunList> {
    if runs.is_empty() {
        return Err(Error::NoRuns);
    }
    let first_stage = first_stage_index(runs, first_stage_id)?;
    let derived = feature_count_for_runs(runs.len());
    if derived != model.feature_count {
        return Err(Error::FeatureCountMismatch {
            expected: model.feature_count,
            actual: derived,
        });
    }
    let query_ids: BTreeSet<&str> = runs.iter().flat_map(|r| r.query_ids()).collect();
    let scored = query_ids
        .into_par_iter()
        .map(|query_id| {
            let context = FeatureContext::build(runs, first_stage, query_id);
            let docs: BTreeSet<&str> = runs
                .iter()
                .filter_map(|r| r.entries(query_id))
                .flatten()
                .map(|e| e.doc_id.as_str())
                .collect();
            let scored_docs = docs
                .into_iter()
                .map(|doc_id| {
                    let score = model.predict(&context.features(doc_id)?)?;
                    Ok((doc_id.to_string(), score))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((query_id.to_string(), scored_docs))
        })
        .collect::<Result<_>>()?;
    Ok(RunList::from_scored_docs("ltr", scored, None))
}
