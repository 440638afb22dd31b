//! Shapley-value explanations for skeleton graph classifiers.
//!
//! The crate is organised along the pipeline it implements:
//!
//! - [`skeleton`]: sequences, graph topologies and their adjacency partitions,
//!   preprocessing, windowing and a synthetic generator with planted joints.
//! - [`features`]: the four kinematic input groups (position, velocity, bone,
//!   acceleration) stacked into a `[f, k, t, n, m]` tensor.
//! - [`gcn`]: a small spatial-temporal graph convolution classifier whose
//!   layers carry a per-partition edge-importance matrix.
//! - [`shap`]: exact and permutation-sampled Shapley values over key-point
//!   and feature-group players, plus the averaging/aggregation helpers.
//! - [`perturb`]: edge-importance perturbation plans and the PGI/PGU,
//!   sensitivity and specificity metrics used to test an explanation.

pub mod error;
pub mod features;
pub mod gcn;
pub mod hashing;
pub mod perturb;
pub mod selfcheck;
pub mod shap;
pub mod skeleton;

pub use error::{Error, Result};
pub use features::{assemble, FeatureConfig, FeatureGroup, FeatureTensor, Group};
pub use gcn::{Checkpoint, EdgeSet, HyperParams, Model, ModelConfig, TrainReport};
pub use perturb::{
    apply_plan, build_plan, evaluate, pgi_pgu, ConfusionCounts, MetricKind, PerturbMode, PerturbationPlan, Selection,
};
pub use shap::{Attribution, BackgroundSet, Granularity, MaskingMode, PlayerPartition, Predictor, ValueFunction};
pub use skeleton::{build_topology, GraphTopology, PartitionStrategy, SkeletonSequence};
