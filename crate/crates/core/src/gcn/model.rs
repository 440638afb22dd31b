use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{BlockParams, Params};
use super::real::{matmul, Real};
use super::EdgeSet;
use crate::features::FeatureTensor;
use crate::hashing::json_hash;
use crate::skeleton::GraphTopology;
use crate::{Error, Result};

/// Architecture of the classifier. The input shape is fixed at construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Feature tensor shape `[f, k, t, n, m]`.
    pub input_shape: [usize; 5],
    pub num_classes: usize,
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
    pub temporal_kernel: usize,
}

impl ModelConfig {
    /// Three blocks with 16, 32 and 64 channels, temporal kernel 9, stride 1.
    pub fn new(input_shape: [usize; 5], num_classes: usize) -> Self {
        Self { input_shape, num_classes, channels: vec![16, 32, 64], strides: vec![1, 1, 1], temporal_kernel: 9 }
    }

    pub fn in_channels(&self) -> usize {
        self.input_shape[0] * self.input_shape[1]
    }

    pub fn frames(&self) -> usize {
        self.input_shape[2]
    }

    pub fn keypoints(&self) -> usize {
        self.input_shape[3]
    }

    pub fn persons(&self) -> usize {
        self.input_shape[4]
    }

    pub fn hash(&self) -> String {
        json_hash(self).expect("model config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_shape.contains(&0) {
            return Err(Error::Config(format!("empty input axis in {:?}", self.input_shape)));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("a classifier needs at least 2 classes".into()));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::Config("every block needs at least one channel".into()));
        }
        if self.strides.len() != self.channels.len() || self.strides.contains(&0) {
            return Err(Error::Config("one positive stride per block is required".into()));
        }
        if self.temporal_kernel.is_multiple_of(2) {
            return Err(Error::Config("temporal kernel must be odd for same padding".into()));
        }
        Ok(())
    }

    fn frames_after(&self, block: usize) -> usize {
        self.strides[..=block].iter().fold(self.frames(), |t, &s| (t - 1) / s + 1)
    }
}

/// Spatial-temporal graph convolutional classifier.
///
/// Each block computes `Σ_j W_j X (Λ_j^{-1/2} A_j ⊙ E_j Λ_j^{-1/2})`, a
/// ReLU, a same-padded temporal convolution with bias and a second ReLU.
/// Blocks are followed by a mean over frames, key points and persons, a
/// linear classifier and a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct StGcn<T> {
    pub(crate) config: ModelConfig,
    pub(crate) topology: GraphTopology,
    pub(crate) params: Params<T>,
    pub(crate) seed: u64,
}

/// Single-precision model used for training and inference.
pub type Model = StGcn<f32>;

/// Activations kept for the backward pass.
pub(crate) struct Cache<T> {
    batch: usize,
    blocks: Vec<BlockCache<T>>,
    pooled: Vec<T>,
    probs: Vec<T>,
}

struct BlockCache<T> {
    frames_in: usize,
    frames_out: usize,
    graphs: Vec<Vec<T>>,
    input: Vec<T>,
    ys: Vec<Vec<T>>,
    spatial: Vec<T>,
    cols: Vec<T>,
    output: Vec<T>,
}

impl<T: Real> StGcn<T> {
    pub fn new(config: ModelConfig, topology: GraphTopology, seed: u64) -> Result<Self> {
        config.validate()?;
        if topology.n() != config.keypoints() {
            return Err(Error::Shape(format!(
                "topology has {} key points, model expects {}",
                topology.n(),
                config.keypoints()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = Params::init(&config, topology.num_partitions(), &mut rng);
        Ok(Self { config, topology, params, seed })
    }

    pub(crate) fn from_parts(config: ModelConfig, topology: GraphTopology, params: Params<T>, seed: u64) -> Self {
        Self { config, topology, params, seed }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn topology(&self) -> &GraphTopology {
        &self.topology
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Same weights in another precision.
    pub fn cast<U: Real>(&self) -> StGcn<U> {
        StGcn {
            config: self.config.clone(),
            topology: self.topology.clone(),
            params: self.params.cast(),
            seed: self.seed,
        }
    }

    /// Current edge-importance diagonals.
    pub fn edges(&self) -> EdgeSet {
        EdgeSet::new(
            self.params
                .blocks
                .iter()
                .map(|b| b.edge.iter().map(|e| e.iter().map(|x| x.as_f64()).collect()).collect())
                .collect(),
        )
    }

    /// A copy of the model with every `E_j` replaced; `self` is untouched.
    pub fn substitute_edges(&self, edges: &EdgeSet) -> Result<Self> {
        let blocks = self.params.blocks.len();
        let parts = self.topology.num_partitions();
        let n = self.config.keypoints();
        if edges.blocks() != blocks || edges.partitions() != parts || edges.keypoints() != n {
            return Err(Error::Shape(format!(
                "edge set is {}×{}×{}, model needs {blocks}×{parts}×{n}",
                edges.blocks(),
                edges.partitions(),
                edges.keypoints()
            )));
        }
        let mut out = self.clone();
        for (b, block) in out.params.blocks.iter_mut().enumerate() {
            for (j, e) in block.edge.iter_mut().enumerate() {
                for (v, x) in e.iter_mut().enumerate() {
                    *x = T::of_f64(edges.get(b, j, v));
                }
            }
        }
        Ok(out)
    }

    /// Relabels key points (old `v` becomes `perm[v]`) in the topology and
    /// every edge-importance diagonal. Inputs permuted the same way give
    /// the same outputs.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let topology = self.topology.permuted(perm)?;
        let mut params = self.params.clone();
        for block in &mut params.blocks {
            for e in &mut block.edge {
                let mut out = e.clone();
                for (v, &x) in e.iter().enumerate() {
                    out[perm[v]] = x;
                }
                *e = out;
            }
        }
        Ok(Self { config: self.config.clone(), topology, params, seed: self.seed })
    }

    /// Sets the fixed per-channel input scaling to `1 / std` of the given
    /// features (1 for constant channels).
    pub fn fit_input_scale(&mut self, features: &[FeatureTensor]) -> Result<()> {
        let c_total = self.config.in_channels();
        let mut sum = vec![0.0f64; c_total];
        let mut sq = vec![0.0f64; c_total];
        let mut count = 0usize;
        for x in features {
            self.check_input(x)?;
            let per = x.data().len() / c_total;
            for c in 0..c_total {
                for &v in &x.data()[c * per..(c + 1) * per] {
                    sum[c] += v as f64;
                    sq[c] += (v as f64) * (v as f64);
                }
            }
            count += per;
        }
        if count == 0 {
            return Err(Error::Data("cannot fit input scaling on an empty set".into()));
        }
        for c in 0..c_total {
            let mean = sum[c] / count as f64;
            let var = (sq[c] / count as f64 - mean * mean).max(0.0);
            let sd = var.sqrt();
            self.params.input_scale[c] = T::of_f64(if sd > 1e-12 { 1.0 / sd } else { 1.0 });
        }
        Ok(())
    }

    fn check_input(&self, x: &FeatureTensor) -> Result<()> {
        if x.shape() != self.config.input_shape {
            return Err(Error::Shape(format!(
                "features have shape {:?}, model expects {:?}",
                x.shape(),
                self.config.input_shape
            )));
        }
        Ok(())
    }

    /// Class probabilities for each input.
    pub fn predict(&self, inputs: &[FeatureTensor]) -> Result<Vec<Vec<T>>> {
        let refs: Vec<&FeatureTensor> = inputs.iter().collect();
        let (probs, _) = self.forward(&refs, false)?;
        Ok(probs)
    }

    pub fn predict_one(&self, input: &FeatureTensor) -> Result<Vec<T>> {
        let (mut probs, _) = self.forward(&[input], false)?;
        Ok(probs.pop().expect("one input gives one output"))
    }

    /// Normalized graph `Λ^{-1/2} (A_j ⊙ E_j) Λ^{-1/2}` for one block.
    fn graphs(&self, block: &BlockParams<T>) -> Vec<Vec<T>> {
        (0..self.topology.num_partitions())
            .map(|j| {
                let diag: Vec<f64> = block.edge[j].iter().map(|x| x.as_f64()).collect();
                let g = self.topology.normalized(j, Some(&diag));
                g.data().iter().map(|&x| T::of_f64(x)).collect()
            })
            .collect()
    }

    pub(crate) fn forward(&self, inputs: &[&FeatureTensor], keep: bool) -> Result<(Vec<Vec<T>>, Option<Cache<T>>)> {
        for x in inputs {
            self.check_input(x)?;
        }
        let batch = inputs.len();
        if batch == 0 {
            return Ok((Vec::new(), None));
        }
        let cfg = &self.config;
        let [_, _, t0, n, m] = cfg.input_shape;
        let s = batch * m;
        let c0 = cfg.in_channels();

        // [c][s][t][v] with s = sample * m + person.
        let mut x = vec![T::zero(); c0 * s * t0 * n];
        for (b, input) in inputs.iter().enumerate() {
            let d = input.data();
            for c in 0..c0 {
                let scale = self.params.input_scale[c];
                for t in 0..t0 {
                    for v in 0..n {
                        for p in 0..m {
                            let src = ((c * t0 + t) * n + v) * m + p;
                            let dst = ((c * s + b * m + p) * t0 + t) * n + v;
                            x[dst] = T::of_f64(d[src] as f64) * scale;
                        }
                    }
                }
            }
        }

        let mut caches = Vec::new();
        let mut frames = t0;
        for (l, block) in self.params.blocks.iter().enumerate() {
            let stride = cfg.strides[l];
            let frames_out = cfg.frames_after(l);
            let graphs = self.graphs(block);
            let (out, cache) = block_forward(block, &graphs, &x, s, frames, frames_out, n, stride, cfg.temporal_kernel);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical(format!("block {l}"), "non-finite activation"));
            }
            if keep {
                caches.push(BlockCache { graphs, input: x, ..cache });
            }
            x = out;
            frames = frames_out;
        }

        let c_last = *cfg.channels.last().expect("validated");
        let per_sample = m * frames * n;
        let mut pooled = vec![T::zero(); batch * c_last];
        let inv = T::of_f64(1.0 / per_sample as f64);
        for c in 0..c_last {
            for b in 0..batch {
                let start = (c * s + b * m) * frames * n;
                let sum = x[start..start + per_sample].iter().fold(T::zero(), |a, &v| a + v);
                pooled[b * c_last + c] = sum * inv;
            }
        }

        let classes = cfg.num_classes;
        let mut probs = vec![T::zero(); batch * classes];
        for b in 0..batch {
            let row = &mut probs[b * classes..(b + 1) * classes];
            row.copy_from_slice(&self.params.classifier_b);
            matmul(
                false,
                false,
                classes,
                1,
                c_last,
                &self.params.classifier_w,
                &pooled[b * c_last..(b + 1) * c_last],
                T::one(),
                row,
            );
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical("classifier", "non-finite logit"));
            }
            softmax(row);
        }
        let out = probs.chunks(classes).map(|r| r.to_vec()).collect();
        let cache = keep.then_some(Cache { batch, blocks: caches, pooled, probs });
        Ok((out, cache))
    }

    /// On/off state of every ReLU for a batch, used to tell when a finite
    /// difference straddles a kink.
    pub fn activation_pattern(&self, inputs: &[FeatureTensor]) -> Result<Vec<bool>> {
        let refs: Vec<&FeatureTensor> = inputs.iter().collect();
        let (_, cache) = self.forward(&refs, true)?;
        let mut out = Vec::new();
        if let Some(cache) = cache {
            for b in &cache.blocks {
                out.extend(b.spatial.iter().map(|v| *v > T::zero()));
                out.extend(b.output.iter().map(|v| *v > T::zero()));
            }
        }
        Ok(out)
    }

    /// Gradient of the mean cross-entropy over the cached batch.
    pub(crate) fn backward(&self, cache: &Cache<T>, labels: &[usize]) -> Result<Params<T>> {
        let cfg = &self.config;
        let batch = cache.batch;
        if labels.len() != batch {
            return Err(Error::Shape(format!("{} labels for a batch of {batch}", labels.len())));
        }
        let classes = cfg.num_classes;
        let [_, _, _, n, m] = cfg.input_shape;
        let s = batch * m;
        let c_last = *cfg.channels.last().expect("validated");
        let mut grads = self.params.zeros_like();

        let inv_batch = T::of_f64(1.0 / batch as f64);
        let mut dlogits = cache.probs.clone();
        for (b, &y) in labels.iter().enumerate() {
            if y >= classes {
                return Err(Error::Data(format!("label {y} out of range for {classes} classes")));
            }
            dlogits[b * classes + y] = dlogits[b * classes + y] - T::one();
        }
        dlogits.iter_mut().for_each(|v| *v = *v * inv_batch);

        // dW = dlogits^T pooled, db = column sums, dpooled = dlogits W.
        matmul(true, false, classes, c_last, batch, &dlogits, &cache.pooled, T::zero(), &mut grads.classifier_w);
        for b in 0..batch {
            for k in 0..classes {
                grads.classifier_b[k] = grads.classifier_b[k] + dlogits[b * classes + k];
            }
        }
        let mut dpooled = vec![T::zero(); batch * c_last];
        matmul(false, false, batch, c_last, classes, &dlogits, &self.params.classifier_w, T::zero(), &mut dpooled);

        let last = cache.blocks.last().expect("forward kept caches");
        let frames = last.frames_out;
        let per_sample = m * frames * n;
        let inv = T::of_f64(1.0 / per_sample as f64);
        let mut dx = vec![T::zero(); c_last * s * frames * n];
        for c in 0..c_last {
            for b in 0..batch {
                let g = dpooled[b * c_last + c] * inv;
                let start = (c * s + b * m) * frames * n;
                dx[start..start + per_sample].iter_mut().for_each(|v| *v = g);
            }
        }

        for l in (0..cache.blocks.len()).rev() {
            let bc = &cache.blocks[l];
            let need_input = l > 0;
            dx = block_backward(
                &self.params.blocks[l],
                &mut grads.blocks[l],
                bc,
                &self.topology,
                dx,
                s,
                n,
                cfg.strides[l],
                cfg.temporal_kernel,
                need_input,
            );
        }
        Ok(grads)
    }
}

fn softmax<T: Real>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    row.iter_mut().for_each(|v| *v = *v / sum);
}

#[allow(clippy::too_many_arguments)]
fn block_forward<T: Real>(
    block: &BlockParams<T>,
    graphs: &[Vec<T>],
    x: &[T],
    s: usize,
    frames: usize,
    frames_out: usize,
    n: usize,
    stride: usize,
    kernel: usize,
) -> (Vec<T>, BlockCache<T>) {
    let (c_in, c_out) = (block.c_in, block.c_out);
    let cols_n = s * frames * n;
    let rows = c_in * s * frames;

    let mut ys = Vec::with_capacity(graphs.len());
    let mut spatial = vec![T::zero(); c_out * cols_n];
    for (j, g) in graphs.iter().enumerate() {
        let mut y = vec![T::zero(); rows * n];
        matmul(false, false, rows, n, n, x, g, T::zero(), &mut y);
        matmul(false, false, c_out, cols_n, c_in, &block.gcn_w[j], &y, T::one(), &mut spatial);
        ys.push(y);
    }
    relu(&mut spatial);

    let cols = im2col(&spatial, c_out, s, frames, frames_out, n, stride, kernel);
    let out_n = s * frames_out * n;
    let mut out = vec![T::zero(); c_out * out_n];
    for (c, chunk) in out.chunks_mut(out_n).enumerate() {
        chunk.iter_mut().for_each(|v| *v = block.tcn_b[c]);
    }
    matmul(false, false, c_out, out_n, c_out * kernel, &block.tcn_w, &cols, T::one(), &mut out);
    relu(&mut out);

    let cache = BlockCache {
        frames_in: frames,
        frames_out,
        graphs: Vec::new(),
        input: Vec::new(),
        ys,
        spatial,
        cols,
        output: out.clone(),
    };
    (out, cache)
}

#[allow(clippy::too_many_arguments)]
fn block_backward<T: Real>(
    block: &BlockParams<T>,
    grad: &mut BlockParams<T>,
    cache: &BlockCache<T>,
    topology: &GraphTopology,
    mut dout: Vec<T>,
    s: usize,
    n: usize,
    stride: usize,
    kernel: usize,
    need_input: bool,
) -> Vec<T> {
    let (c_in, c_out) = (block.c_in, block.c_out);
    let frames = cache.frames_in;
    let out_n = s * cache.frames_out * n;
    relu_backward(&mut dout, &cache.output);

    matmul(false, true, c_out, c_out * kernel, out_n, &dout, &cache.cols, T::zero(), &mut grad.tcn_w);
    for (c, chunk) in dout.chunks(out_n).enumerate() {
        grad.tcn_b[c] = chunk.iter().fold(T::zero(), |a, &v| a + v);
    }
    let mut dcols = vec![T::zero(); c_out * kernel * out_n];
    matmul(true, false, c_out * kernel, out_n, c_out, &block.tcn_w, &dout, T::zero(), &mut dcols);
    let mut dspatial = col2im(&dcols, c_out, s, frames, cache.frames_out, n, stride, kernel);
    relu_backward(&mut dspatial, &cache.spatial);

    let cols_n = s * frames * n;
    let rows = c_in * s * frames;
    let mut dx = if need_input { vec![T::zero(); rows * n] } else { Vec::new() };
    for (j, g) in cache.graphs.iter().enumerate() {
        matmul(false, true, c_out, c_in, cols_n, &dspatial, &cache.ys[j], T::zero(), &mut grad.gcn_w[j]);
        let mut dy = vec![T::zero(); rows * n];
        matmul(true, false, c_in, cols_n, c_out, &block.gcn_w[j], &dspatial, T::zero(), &mut dy);
        if need_input {
            matmul(false, true, rows, n, n, &dy, g, T::one(), &mut dx);
        }
        // dG = X^T dY; only the diagonal reaches E_j.
        let mut dg = vec![T::zero(); n * n];
        matmul(true, false, n, n, rows, &cache.input, &dy, T::zero(), &mut dg);
        let a = &topology.partitions()[j];
        let lam = topology.degree_norms(j);
        for v in 0..n {
            let coef = T::of_f64(a.get(v, v) * lam[v] * lam[v]);
            grad.edge[j][v] = dg[v * n + v] * coef;
        }
    }
    dx
}

fn relu<T: Real>(x: &mut [T]) {
    x.iter_mut().for_each(|v| {
        if *v < T::zero() {
            *v = T::zero()
        }
    });
}

fn relu_backward<T: Real>(d: &mut [T], activated: &[T]) {
    for (g, &a) in d.iter_mut().zip(activated) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Rows `(channel, tap)`, columns `(s, t_out, v)`.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Real>(
    x: &[T],
    c: usize,
    s: usize,
    frames: usize,
    frames_out: usize,
    n: usize,
    stride: usize,
    kernel: usize,
) -> Vec<T> {
    let pad = kernel / 2;
    let width = s * frames_out * n;
    let mut cols = vec![T::zero(); c * kernel * width];
    for ci in 0..c {
        for q in 0..kernel {
            let row = &mut cols[(ci * kernel + q) * width..(ci * kernel + q + 1) * width];
            for si in 0..s {
                for to in 0..frames_out {
                    let t = (to * stride + q) as isize - pad as isize;
                    if t < 0 || t >= frames as isize {
                        continue;
                    }
                    let src = ((ci * s + si) * frames + t as usize) * n;
                    let dst = (si * frames_out + to) * n;
                    row[dst..dst + n].copy_from_slice(&x[src..src + n]);
                }
            }
        }
    }
    cols
}

#[allow(clippy::too_many_arguments)]
fn col2im<T: Real>(
    cols: &[T],
    c: usize,
    s: usize,
    frames: usize,
    frames_out: usize,
    n: usize,
    stride: usize,
    kernel: usize,
) -> Vec<T> {
    let pad = kernel / 2;
    let width = s * frames_out * n;
    let mut x = vec![T::zero(); c * s * frames * n];
    for ci in 0..c {
        for q in 0..kernel {
            let row = &cols[(ci * kernel + q) * width..(ci * kernel + q + 1) * width];
            for si in 0..s {
                for to in 0..frames_out {
                    let t = (to * stride + q) as isize - pad as isize;
                    if t < 0 || t >= frames as isize {
                        continue;
                    }
                    let dst = ((ci * s + si) * frames + t as usize) * n;
                    let src = (si * frames_out + to) * n;
                    for v in 0..n {
                        x[dst + v] = x[dst + v] + row[src + v];
                    }
                }
            }
        }
    }
    x
}

/// One graph convolution layer on `[c_in][t][n]` input, `W_j` given
/// `c_out × c_in`: `Σ_j W_j X (Λ_j^{-1/2} A_j ⊙ E_j Λ_j^{-1/2})`.
pub fn gcn_forward(
    topology: &GraphTopology,
    weights: &[Vec<f64>],
    edges: &[Vec<f64>],
    c_in: usize,
    c_out: usize,
    input: &[f64],
) -> Result<Vec<f64>> {
    let n = topology.n();
    let parts = topology.num_partitions();
    if weights.len() != parts || edges.len() != parts {
        return Err(Error::Shape(format!(
            "need {parts} weight and edge tensors, got {} and {}",
            weights.len(),
            edges.len()
        )));
    }
    if !input.len().is_multiple_of(c_in * n) || input.is_empty() {
        return Err(Error::Shape(format!("input of {} values is not [{c_in}][t][{n}]", input.len())));
    }
    let rows = input.len() / n;
    // Columns of the [c][t * n] view.
    let cols = rows / c_in * n;
    let mut out = vec![0.0; c_out * cols];
    for j in 0..parts {
        if weights[j].len() != c_out * c_in || edges[j].len() != n {
            return Err(Error::Shape(format!("partition {j} has mismatched weight or edge size")));
        }
        let g = topology.normalized(j, Some(&edges[j]));
        let mut y = vec![0.0; rows * n];
        matmul(false, false, rows, n, n, input, g.data(), 0.0, &mut y);
        matmul(false, false, c_out, cols, c_in, &weights[j], &y, 1.0, &mut out);
    }
    Ok(out)
}
