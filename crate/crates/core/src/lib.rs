//! Incremental concept formation over structured instances.
//!
//! Instances with nominal, numeric, component and relational attributes are
//! partially matched against the root concept, flattened and sorted into a
//! probabilistic categorization tree. The tree predicts missing attribute
//! values and yields hierarchical or flat clusterings.

pub mod error;
pub mod experiments;
pub mod export;
pub mod inference;
pub mod instance;
pub mod matcher;
pub mod metrics;
pub mod params;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use experiments::{
    derive_seed, generate_synthetic, run_clustering_eval, run_sequential_prediction, ClusterSpec,
    ClusteringConfig, Dataset, ExperimentReport, ReportBody, SequentialConfig, SplitAri,
    SyntheticSpec,
};
pub use export::to_dot;
pub use inference::{
    cluster_flat, cluster_two_pass, cluster_two_pass_multi, mask, predict, predict_all_missing,
    LabeledClustering, Prediction, SplitClusterer,
};
pub use instance::{Attribute, Component, FlatInstance, Instance, Mapping, Relation, Value};
pub use matcher::{best_match, mapping_objective, MatchResult, MatchState, Matcher};
pub use metrics::{accuracy_by_opportunity, adjusted_rand_index, Curve, CurvePoint};
pub use params::{NumericScale, TreeParams};
pub use stats::{category_utility, AttrStats, ConceptStats, NumericStats};
pub use tree::{ConceptId, ConceptNode, ConceptTree, Operation, TreeSnapshot};
