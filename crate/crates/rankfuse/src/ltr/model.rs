//! Boosted-ensemble model: configuration, inference, and JSON persistence.

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::tree::RegressionTree;
use crate::{Error, Result};

/// Training parameters. Defaults mirror common gradient-boosting library
/// defaults: 100 rounds, depth 6, shrinkage 0.3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LtrConfig {
    pub rounds: usize,
    pub max_depth: usize,
    /// Shrinkage applied to every tree's contribution, in `(0, 1]`.
    pub eta: f64,
    /// Minimum hessian mass per child for a split to be considered.
    pub min_child_weight: f64,
    /// Steepness of the pairwise logistic.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for LtrConfig {
    fn default() -> Self {
        LtrConfig {
            rounds: 100,
            max_depth: 6,
            eta: 0.3,
            min_child_weight: 1.0,
            sigma: 1.0,
            seed: 42,
        }
    }
}

impl LtrConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".to_string()));
        }
        if !(self.eta.is_finite() && self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must be in (0, 1], got {}",
                self.eta
            )));
        }
        if !(self.min_child_weight.is_finite() && self.min_child_weight >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "min_child_weight must be >= 0, got {}",
                self.min_child_weight
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

pub const LTR_MODEL_VERSION: u32 = 1;

/// A trained gradient-boosted ensemble.
///
/// Persisted as versioned JSON with stable field order:
/// `{"version", "feature_count", "base_score", "eta", "trees": [{"nodes": [...]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtrModel {
    pub version: u32,
    pub feature_count: usize,
    pub base_score: f64,
    pub eta: f64,
    pub trees: Vec<RegressionTree>,
}

impl LtrModel {
    pub(crate) fn empty(feature_count: usize, eta: f64) -> Self {
        LtrModel {
            version: LTR_MODEL_VERSION,
            feature_count,
            base_score: 0.0,
            eta,
            trees: Vec::new(),
        }
    }

    /// Score a flat feature array: `base_score + eta * Σ tree leaf values`.
    pub fn predict_values(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.feature_count {
            return Err(Error::FeatureCountMismatch {
                expected: self.feature_count,
                actual: values.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|tree| tree.predict(values)).sum();
        Ok(self.base_score + self.eta * sum)
    }

    /// Score a feature vector.
    pub fn predict(&self, features: &FeatureVector) -> Result<f64> {
        self.predict_values(&features.values())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: LtrModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.version != LTR_MODEL_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        if self.feature_count == 0 {
            return Err(Error::Validation("feature_count must be >= 1".to_string()));
        }
        for (i, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return Err(Error::Validation(format!("tree {i} has no nodes")));
            }
            if let Some(max_feature) = tree.max_feature_index() {
                if max_feature >= self.feature_count {
                    return Err(Error::Validation(format!(
                        "tree {i} references feature {max_feature} >= feature_count {}",
                        self.feature_count
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltr::tree::TreeNode;

    fn one_split_tree() -> RegressionTree {
        RegressionTree {
            nodes: vec![
                TreeNode {
                    index: 0,
                    feature: Some(0),
                    threshold: Some(0.5),
                    left: Some(1),
                    right: Some(2),
                    leaf_value: None,
                },
                TreeNode {
                    index: 1,
                    feature: None,
                    threshold: None,
                    left: None,
                    right: None,
                    leaf_value: Some(-1.0),
                },
                TreeNode {
                    index: 2,
                    feature: None,
                    threshold: None,
                    left: None,
                    right: None,
                    leaf_value: Some(1.0),
                },
            ],
        }
    }

    #[test]
    fn empty_model_predicts_base_score() {
        let model = LtrModel::empty(4, 0.3);
        assert_eq!(model.predict_values(&[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn eta_scales_tree_output() {
        let mut model = LtrModel::empty(1, 0.3);
        model.trees.push(one_split_tree());
        assert_eq!(model.predict_values(&[0.7]).unwrap(), 0.3);
        assert_eq!(model.predict_values(&[0.2]).unwrap(), -0.3);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = LtrModel::empty(4, 0.3);
        assert!(matches!(
            model.predict_values(&[0.0; 3]),
            Err(Error::FeatureCountMismatch {
                expected: 4,
                actual: 3
            })
        ));
    }

    #[test]
    fn json_round_trip_preserves_model() {
        let mut model = LtrModel::empty(1, 0.3);
        model.trees.push(one_split_tree());
        let json = model.to_json().unwrap();
        let loaded = LtrModel::from_json(&json).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn json_rejects_bad_feature_reference() {
        let mut model = LtrModel::empty(1, 0.3);
        let mut tree = one_split_tree();
        tree.nodes[0].feature = Some(5);
        model.trees.push(tree);
        let json = serde_json::to_string(&model).unwrap();
        assert!(LtrModel::from_json(&json).is_err());
    }

    #[test]
    fn json_field_order_is_stable() {
        let model = LtrModel::empty(2, 0.3);
        let json = model.to_json().unwrap();
        let version_at = json.find("\"version\"").unwrap();
        let feature_at = json.find("\"feature_count\"").unwrap();
        let base_at = json.find("\"base_score\"").unwrap();
        let eta_at = json.find("\"eta\"").unwrap();
        let trees_at = json.find("\"trees\"").unwrap();
        assert!(version_at < feature_at && feature_at < base_at && base_at < eta_at && eta_at < trees_at);
    }
}
