//! Supervised meta-combiner: feature extraction over a first-stage run
//! plus checkpoint runs, per-query training-triple sampling, and a
//! from-scratch gradient-boosted tree learner driven by pairwise lambda
//! gradients weighted by AP deltas.

mod features;
mod model;
mod sampling;
mod train;
mod tree;

pub use features::{build_features, feature_count_for_runs, FeatureVector};
pub use model::{LtrConfig, LtrModel, LTR_MODEL_VERSION};
pub use sampling::{sample_training_groups, SamplingReport, TrainingGroup, TrainingRow};
pub use train::{mean_group_ap, rerank, train};
pub use tree::{RegressionTree, TreeNode};
