use serde::{Deserialize, Serialize};

use crate::skeleton::SquareMatrix;

/// Learnable diagonals of every edge-importance matrix, indexed
/// `[block][partition][key point]`. Off-diagonal entries are 1 and are not
/// stored, so they cannot drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSet {
    diag: Vec<Vec<Vec<f64>>>,
}

impl EdgeSet {
    pub fn new(diag: Vec<Vec<Vec<f64>>>) -> Self {
        Self { diag }
    }

    pub fn ones(blocks: usize, partitions: usize, keypoints: usize) -> Self {
        Self { diag: vec![vec![vec![1.0; keypoints]; partitions]; blocks] }
    }

    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn partitions(&self) -> usize {
        self.diag.first().map_or(0, |b| b.len())
    }

    pub fn keypoints(&self) -> usize {
        self.diag.first().and_then(|b| b.first()).map_or(0, |p| p.len())
    }

    pub fn get(&self, block: usize, partition: usize, keypoint: usize) -> f64 {
        self.diag[block][partition][keypoint]
    }

    pub fn set(&mut self, block: usize, partition: usize, keypoint: usize, value: f64) {
        self.diag[block][partition][keypoint] = value;
    }

    pub fn diagonal(&self, block: usize, partition: usize) -> &[f64] {
        &self.diag[block][partition]
    }

    /// Applies `f` to key point `v`'s entry in every block and partition.
    pub fn update_keypoint(&mut self, keypoint: usize, mut f: impl FnMut(f64) -> f64) {
        for block in &mut self.diag {
            for part in block {
                part[keypoint] = f(part[keypoint]);
            }
        }
    }

    /// Full `E_j` of one block.
    pub fn matrix(&self, block: usize, partition: usize) -> SquareMatrix {
        let d = &self.diag[block][partition];
        let n = d.len();
        let mut m = SquareMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m.set(r, c, if r == c { d[r] } else { 1.0 });
            }
        }
        m
    }
}
