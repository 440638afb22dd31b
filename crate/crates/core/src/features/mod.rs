//! Input feature groups and the stacked model input tensor.
//!
//! Four groups are computed from a preprocessed sequence: positions `J`,
//! velocities `V`, bone vectors `B` and accelerations `A`. They are stacked
//! in that order into a [`FeatureTensor`] laid out `[f, k, t, n, m]`.
//!
//! Velocity and acceleration use backward differences scaled to per-second
//! units, with the warm-up frames (`lag` for velocity, `2 * lag` for
//! acceleration) set to zero. With `dual_timescale` on, `V` and `A` stack
//! the lag-1 and lag-2 variants along `k`; `J` then stacks absolute and
//! center-relative positions, and `B` is zero-padded, so every group has
//! `k = 2d`.

mod tensor;

use serde::{Deserialize, Serialize};

use crate::skeleton::{GraphTopology, SkeletonSequence};
use crate::{Error, Result};

pub use tensor::{FeatureMetadata, FeatureTensor, FEATURE_MAGIC};

/// Feature groups in stacking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    J,
    V,
    B,
    A,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::J, Group::V, Group::B, Group::A];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::J => "J",
            Group::V => "V",
            Group::B => "B",
            Group::A => "A",
        }
    }
}

/// One feature group, `[k][t][n][m]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGroup {
    pub k: usize,
    pub t: usize,
    pub n: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

impl FeatureGroup {
    fn zeros(k: usize, t: usize, n: usize, m: usize) -> Self {
        Self { k, t, n, m, data: vec![0.0; k * t * n * m] }
    }

    #[inline]
    pub fn index(&self, k: usize, t: usize, n: usize, m: usize) -> usize {
        ((k * self.t + t) * self.n + n) * self.m + m
    }

    #[inline]
    pub fn get(&self, k: usize, t: usize, n: usize, m: usize) -> f64 {
        self.data[self.index(k, t, n, m)]
    }

    fn concat_k(mut self, other: FeatureGroup) -> FeatureGroup {
        self.k += other.k;
        self.data.extend(other.data);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct FeatureConfig {
    pub dual_timescale: bool,
    /// Key point that center-relative positions refer to in dual mode;
    /// defaults to the topology center, then key point 0.
    #[serde(default)]
    pub center: Option<usize>,
}

impl FeatureConfig {
    pub fn lags(&self) -> Vec<usize> {
        if self.dual_timescale {
            vec![1, 2]
        } else {
            vec![1]
        }
    }
}

/// `J`: the coordinates themselves.
pub fn compute_position(seq: &SkeletonSequence) -> FeatureGroup {
    let [t, n, m, d] = seq.shape();
    let mut out = FeatureGroup::zeros(d, t, n, m);
    for k in 0..d {
        for ti in 0..t {
            for v in 0..n {
                for p in 0..m {
                    let i = out.index(k, ti, v, p);
                    out.data[i] = seq.get(ti, v, p, k);
                }
            }
        }
    }
    out
}

fn backward_difference(src: &FeatureGroup, lag: usize, rate: f64, warmup: usize) -> FeatureGroup {
    let mut out = FeatureGroup::zeros(src.k, src.t, src.n, src.m);
    let scale = rate / lag as f64;
    for k in 0..src.k {
        for t in warmup..src.t {
            for v in 0..src.n {
                for p in 0..src.m {
                    let i = out.index(k, t, v, p);
                    out.data[i] = (src.get(k, t, v, p) - src.get(k, t - lag, v, p)) * scale;
                }
            }
        }
    }
    out
}

/// `V[t] = (x[t] - x[t - lag]) * rate / lag`, zero for `t < lag`.
pub fn compute_velocity(seq: &SkeletonSequence, lag: usize) -> Result<FeatureGroup> {
    if lag == 0 || seq.frames() <= lag {
        return Err(Error::Data(format!("velocity with lag {lag} needs more than {lag} frames, got {}", seq.frames())));
    }
    Ok(backward_difference(&compute_position(seq), lag, seq.frame_rate(), lag))
}

/// `A[t] = (V[t] - V[t - lag]) * rate / lag`, zero for `t < 2 * lag`.
pub fn compute_acceleration(seq: &SkeletonSequence, lag: usize) -> Result<FeatureGroup> {
    if lag == 0 || seq.frames() <= 2 * lag {
        return Err(Error::Data(format!(
            "acceleration with lag {lag} needs more than {} frames, got {}",
            2 * lag,
            seq.frames()
        )));
    }
    let vel = compute_velocity(seq, lag)?;
    Ok(backward_difference(&vel, lag, seq.frame_rate(), 2 * lag))
}

/// `B` at a child key point is `x[child] - x[parent]`; roots get zero.
pub fn compute_bones(seq: &SkeletonSequence, topology: &GraphTopology) -> Result<FeatureGroup> {
    let [t, n, m, d] = seq.shape();
    if topology.n() != n {
        return Err(Error::Shape(format!("topology has {} key points, sequence has {n}", topology.n())));
    }
    let mut out = FeatureGroup::zeros(d, t, n, m);
    for v in 0..n {
        let Some(parent) = topology.parent(v) else { continue };
        for k in 0..d {
            for ti in 0..t {
                for p in 0..m {
                    let i = out.index(k, ti, v, p);
                    out.data[i] = seq.get(ti, v, p, k) - seq.get(ti, parent, p, k);
                }
            }
        }
    }
    Ok(out)
}

fn relative_to(group: &FeatureGroup, center: usize) -> FeatureGroup {
    let mut out = group.clone();
    for k in 0..group.k {
        for t in 0..group.t {
            for v in 0..group.n {
                for p in 0..group.m {
                    let i = out.index(k, t, v, p);
                    out.data[i] = group.get(k, t, v, p) - group.get(k, t, center, p);
                }
            }
        }
    }
    out
}

/// Computes and stacks `(J, V, B, A)` into a `[4, k, t, n, m]` tensor.
pub fn assemble(seq: &SkeletonSequence, topology: &GraphTopology, config: &FeatureConfig) -> Result<FeatureTensor> {
    let mut position = compute_position(seq);
    let mut bones = compute_bones(seq, topology)?;
    let mut velocity = compute_velocity(seq, 1)?;
    let mut accel = compute_acceleration(seq, 1)?;
    if config.dual_timescale {
        let center = config.center.or(topology.center()).unwrap_or(0);
        if center >= seq.keypoints() {
            return Err(Error::Config(format!("feature center {center} out of range")));
        }
        let rel = relative_to(&position, center);
        position = position.concat_k(rel);
        let pad = FeatureGroup::zeros(bones.k, bones.t, bones.n, bones.m);
        bones = bones.concat_k(pad);
        velocity = velocity.concat_k(compute_velocity(seq, 2)?);
        accel = accel.concat_k(compute_acceleration(seq, 2)?);
    }
    let [t, n, m, _] = seq.shape();
    let k = position.k;
    let mut data = Vec::with_capacity(4 * k * t * n * m);
    for group in [&position, &velocity, &bones, &accel] {
        data.extend(group.data.iter().map(|&x| x as f32));
    }
    FeatureTensor::new([4, k, t, n, m], data)
}
