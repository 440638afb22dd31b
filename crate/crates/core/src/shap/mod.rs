//! Shapley-value attributions over key-point and feature-group players.
//!
//! A [`ModelGame`] turns a model, one input and a background set into a
//! cooperative game whose payoff is the vector of class probabilities.
//! [`exact_shapley`] enumerates every coalition; [`sampled_shapley`]
//! averages marginal contributions over seeded random permutations.
//! Results are collected per sample and class in [`Attribution`]s, which
//! can be spread back over the input, aggregated and ranked.

mod aggregate;
mod background;
mod explain;
mod game;
pub mod io;
mod players;
mod shapley;

pub use aggregate::{
    aggregate, class_keypoint_scores, keypoint_values, rank_keypoints, to_dense, DenseAttribution, Direction, Reduced,
    Scheme,
};
pub use background::BackgroundSet;
pub use explain::{explain_dataset, explain_sample, Attribution, Estimator, ExplainConfig};
pub use game::{compute_phi0, mask_players, MaskingMode, ModelGame, Predictor, ValueFunction};
pub use players::{Granularity, PlayerPartition};
pub use shapley::{exact_shapley, sampled_permutation, sampled_shapley, ShapleyValues, EXACT_PLAYER_CAP};
