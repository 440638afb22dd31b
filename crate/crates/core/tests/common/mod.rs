//! Shared fixture: the planted-importance dataset and training recipe.
//!
//! Class 1 moves key points 2 and 4 with a class-specific sinusoid; class 0
//! has no planted motion. The skeleton is a star around key point 0 with the
//! planted points as leaves, under the distance partition. A leaf's own
//! features then reach its own graph node only through its self-loop, the
//! edge-importance entry that perturbation targets.
#![allow(dead_code)]

pub mod tables;

use skelshap_core::gcn::{self, HyperParams, Model, ModelConfig, TrainReport};
use skelshap_core::skeleton::{build_topology, generate_synthetic, PartitionStrategy, SyntheticConfig};
use skelshap_core::{assemble, FeatureConfig, FeatureTensor, GraphTopology};

pub const PLANTED: [usize; 2] = [2, 4];
pub const TARGET_CLASS: usize = 1;

pub struct Split {
    pub x: Vec<FeatureTensor>,
    pub y: Vec<usize>,
}

pub struct Planted {
    pub topology: GraphTopology,
    pub train: Split,
    pub val: Split,
}

pub fn star_topology(n: usize) -> GraphTopology {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).collect();
    build_topology(&edges, n, PartitionStrategy::Distance, Some(0)).expect("star is a tree")
}

fn split(topology: &GraphTopology, keypoints: usize, seed: u64, count: usize) -> Split {
    let cfg = SyntheticConfig {
        n_keypoints: keypoints,
        planted_joints: vec![vec![], PLANTED.to_vec()],
        n_samples: count,
        seed,
        ..Default::default()
    };
    let seqs = generate_synthetic(&cfg).expect("valid synthetic config");
    let x = seqs.iter().map(|s| assemble(s, topology, &FeatureConfig::default()).expect("features")).collect();
    Split { x, y: seqs.iter().map(|s| s.label()).collect() }
}

/// 200 training and 100 validation samples; splits never share a seed.
pub fn planted(keypoints: usize, seed: u64) -> Planted {
    let topology = star_topology(keypoints);
    let train = split(&topology, keypoints, 2 * seed + 100, 200);
    let val = split(&topology, keypoints, 2 * seed + 101, 100);
    Planted { topology, train, val }
}

pub fn hyper() -> HyperParams {
    HyperParams { learning_rate: 5e-3, epochs: 30, batch_size: 16, ..Default::default() }
}

pub fn train_planted(data: &Planted, seed: u64) -> (Model, TrainReport) {
    let config = ModelConfig::new(data.train.x[0].shape(), 2);
    let mut model = Model::new(config, data.topology.clone(), seed).expect("model");
    let report = gcn::train(&mut model, &data.train.x, &data.train.y, Some((&data.val.x, &data.val.y)), &hyper(), seed)
        .expect("training converges");
    (model, report)
}
