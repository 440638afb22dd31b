use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeatureConfig;
use crate::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 8] = b"FEAT0001";

/// Stacked model input, `[f, k, t, n, m]` row-major in `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    shape: [usize; 5],
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(shape: [usize; 5], data: Vec<f32>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.contains(&0) {
            return Err(Error::Shape(format!("feature tensor has an empty axis: {shape:?}")));
        }
        if data.len() != len {
            return Err(Error::Shape(format!("feature tensor {shape:?} needs {len} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 5]) -> Result<Self> {
        Self::new(shape, vec![0.0; shape.iter().product()])
    }

    pub fn shape(&self) -> [usize; 5] {
        self.shape
    }

    pub fn groups(&self) -> usize {
        self.shape[0]
    }

    pub fn channels_per_group(&self) -> usize {
        self.shape[1]
    }

    /// Model input channels `f * k`.
    pub fn channels(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn frames(&self) -> usize {
        self.shape[2]
    }

    pub fn keypoints(&self) -> usize {
        self.shape[3]
    }

    pub fn persons(&self) -> usize {
        self.shape[4]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, f: usize, k: usize, t: usize, n: usize, m: usize) -> usize {
        let [_, ks, ts, ns, ms] = self.shape;
        (((f * ks + k) * ts + t) * ns + n) * ms + m
    }

    #[inline]
    pub fn get(&self, f: usize, k: usize, t: usize, n: usize, m: usize) -> f32 {
        self.data[self.index(f, k, t, n, m)]
    }

    #[inline]
    pub fn set(&mut self, f: usize, k: usize, t: usize, n: usize, m: usize, v: f32) {
        let i = self.index(f, k, t, n, m);
        self.data[i] = v;
    }

    /// Relabels key points: old key point `v` becomes `perm[v]`.
    pub fn permute_keypoints(&self, perm: &[usize]) -> Result<Self> {
        crate::skeleton::check_permutation(perm, self.keypoints())?;
        let [f, k, t, n, m] = self.shape;
        let mut out = vec![0.0; self.data.len()];
        for fi in 0..f {
            for ki in 0..k {
                for ti in 0..t {
                    for v in 0..n {
                        for p in 0..m {
                            let src = self.index(fi, ki, ti, v, p);
                            let dst = self.index(fi, ki, ti, perm[v], p);
                            out[dst] = self.data[src];
                        }
                    }
                }
            }
        }
        Self::new(self.shape, out)
    }

    /// `FEAT0001`, five little-endian `u32` dimensions, then the payload.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FEATURE_MAGIC)?;
        for &s in &self.shape {
            let s = u32::try_from(s).map_err(|_| Error::Shape(format!("axis {s} exceeds u32")))?;
            w.write_all(&s.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| Error::corrupt("feature tensor", format!("missing header: {e}")))?;
        if &magic != FEATURE_MAGIC {
            return Err(Error::corrupt("feature tensor", "bad magic"));
        }
        let mut shape = [0usize; 5];
        for s in &mut shape {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|e| Error::corrupt("feature tensor", format!("truncated shape: {e}")))?;
            *s = u32::from_le_bytes(b) as usize;
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .ok_or_else(|| Error::corrupt("feature tensor", "shape overflows"))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != len * 4 {
            return Err(Error::corrupt(
                "feature tensor",
                format!("expected {} payload bytes, found {}", len * 4, bytes.len()),
            ));
        }
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Self::new(shape, data).map_err(|e| Error::corrupt("feature tensor", e.to_string()))
    }
}

/// JSON sidecar written next to a binary feature tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMetadata {
    pub shape: [usize; 5],
    pub groups: Vec<String>,
    pub config: FeatureConfig,
    pub frame_rate: f64,
    pub topology_hash: String,
    pub label: usize,
    pub subject_id: String,
}

impl FeatureMetadata {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
