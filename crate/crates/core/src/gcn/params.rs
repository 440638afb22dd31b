use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::real::Real;
use super::ModelConfig;

/// Parameter classes, used for gradient checks and the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamClass {
    /// Fixed per-channel input scaling; never trained.
    InputScale,
    GcnWeight,
    EdgeDiag,
    TemporalConv,
    Classifier,
}

impl ParamClass {
    pub fn trainable(self) -> bool {
        self != ParamClass::InputScale
    }
}

/// Weights of one block: the graph convolution and the temporal convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T> {
    pub c_in: usize,
    pub c_out: usize,
    /// `W_j` per partition, stored `c_out × c_in`.
    pub gcn_w: Vec<Vec<T>>,
    /// Diagonal of `E_j` per partition.
    pub edge: Vec<Vec<T>>,
    /// Temporal kernel, `c_out × c_out × kernel`.
    pub tcn_w: Vec<T>,
    pub tcn_b: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub input_scale: Vec<T>,
    pub blocks: Vec<BlockParams<T>>,
    /// `classes × c_last`.
    pub classifier_w: Vec<T>,
    pub classifier_b: Vec<T>,
}

impl<T: Real> Params<T> {
    /// Kaiming-uniform convolution weights, unit edge diagonals, zero biases
    /// and a zero classifier.
    pub(crate) fn init(config: &ModelConfig, partitions: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut blocks = Vec::with_capacity(config.channels.len());
        let mut c_in = config.in_channels();
        for &c_out in &config.channels {
            let bound = (6.0 / c_in as f64).sqrt();
            let gcn_w = (0..partitions).map(|_| uniform(rng, c_out * c_in, bound)).collect();
            let tcn_bound = (6.0 / (c_out * config.temporal_kernel) as f64).sqrt();
            blocks.push(BlockParams {
                c_in,
                c_out,
                gcn_w,
                edge: vec![vec![T::one(); config.keypoints()]; partitions],
                tcn_w: uniform(rng, c_out * c_out * config.temporal_kernel, tcn_bound),
                tcn_b: vec![T::zero(); c_out],
            });
            c_in = c_out;
        }
        Self {
            input_scale: vec![T::one(); config.in_channels()],
            blocks,
            classifier_w: vec![T::zero(); config.num_classes * c_in],
            classifier_b: vec![T::zero(); config.num_classes],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.visit_mut(|_, _, t| t.iter_mut().for_each(|x| *x = T::zero()));
        out
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::of_f64(x.as_f64())).collect::<Vec<U>>();
        Params {
            input_scale: c(&self.input_scale),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockParams {
                    c_in: b.c_in,
                    c_out: b.c_out,
                    gcn_w: b.gcn_w.iter().map(c).collect(),
                    edge: b.edge.iter().map(c).collect(),
                    tcn_w: c(&b.tcn_w),
                    tcn_b: c(&b.tcn_b),
                })
                .collect(),
            classifier_w: c(&self.classifier_w),
            classifier_b: c(&self.classifier_b),
        }
    }

    /// Visits every tensor in serialization order.
    pub fn visit(&self, mut f: impl FnMut(&str, ParamClass, &[T])) {
        f("input_scale", ParamClass::InputScale, &self.input_scale);
        for (b, block) in self.blocks.iter().enumerate() {
            for (j, w) in block.gcn_w.iter().enumerate() {
                f(&format!("blocks.{b}.gcn.w.{j}"), ParamClass::GcnWeight, w);
            }
            for (j, e) in block.edge.iter().enumerate() {
                f(&format!("blocks.{b}.gcn.edge.{j}"), ParamClass::EdgeDiag, e);
            }
            f(&format!("blocks.{b}.tcn.w"), ParamClass::TemporalConv, &block.tcn_w);
            f(&format!("blocks.{b}.tcn.b"), ParamClass::TemporalConv, &block.tcn_b);
        }
        f("classifier.w", ParamClass::Classifier, &self.classifier_w);
        f("classifier.b", ParamClass::Classifier, &self.classifier_b);
    }

    pub fn visit_mut(&mut self, mut f: impl FnMut(&str, ParamClass, &mut [T])) {
        f("input_scale", ParamClass::InputScale, &mut self.input_scale);
        for (b, block) in self.blocks.iter_mut().enumerate() {
            for (j, w) in block.gcn_w.iter_mut().enumerate() {
                f(&format!("blocks.{b}.gcn.w.{j}"), ParamClass::GcnWeight, w);
            }
            for (j, e) in block.edge.iter_mut().enumerate() {
                f(&format!("blocks.{b}.gcn.edge.{j}"), ParamClass::EdgeDiag, e);
            }
            f(&format!("blocks.{b}.tcn.w"), ParamClass::TemporalConv, &mut block.tcn_w);
            f(&format!("blocks.{b}.tcn.b"), ParamClass::TemporalConv, &mut block.tcn_b);
        }
        f("classifier.w", ParamClass::Classifier, &mut self.classifier_w);
        f("classifier.b", ParamClass::Classifier, &mut self.classifier_b);
    }

    /// Pairs every tensor of `self` with the matching tensor of `other`.
    pub(crate) fn zip_mut(&mut self, other: &Params<T>, mut f: impl FnMut(ParamClass, &mut [T], &[T])) {
        let mut theirs = Vec::new();
        other.visit(|_, _, t| theirs.push(t.to_vec()));
        let mut i = 0;
        self.visit_mut(|_, class, t| {
            f(class, t, &theirs[i]);
            i += 1;
        });
    }

    pub fn num_values(&self) -> usize {
        let mut n = 0;
        self.visit(|_, _, t| n += t.len());
        n
    }
}

fn uniform<T: Real>(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Vec<T> {
    (0..len).map(|_| T::of_f64(rng.gen_range(-bound..bound))).collect()
}
