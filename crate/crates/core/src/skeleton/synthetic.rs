use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::skeleton::SkeletonSequence;
use crate::{Error, Result};

/// Synthetic skeleton data where only a few planted joints carry class
/// information.
///
/// Every joint follows a rest pose plus slow, low-amplitude sinusoidal
/// motion drawn independently of the class. A sample of class `c`
/// additionally moves each joint in `planted_joints[c]` with a large
/// sinusoid at a class-specific frequency. A class with no planted joints
/// is told apart only by the absence of those signatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_keypoints: usize,
    pub n_classes: usize,
    /// Planted joints per class; sets must be disjoint and at least one
    /// set nonempty.
    pub planted_joints: Vec<Vec<usize>>,
    pub n_samples: usize,
    pub n_frames: usize,
    pub frame_rate: f64,
    pub dims: usize,
    pub noise_amplitude: f64,
    pub signature_amplitude: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_keypoints: 6,
            n_classes: 2,
            planted_joints: vec![vec![2], vec![4]],
            n_samples: 200,
            n_frames: 16,
            frame_rate: 10.0,
            dims: 2,
            noise_amplitude: 0.05,
            signature_amplitude: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.planted_joints.len() != self.n_classes {
            return Err(Error::Config(format!(
                "need one planted joint set per class ({} classes, {} sets)",
                self.n_classes,
                self.planted_joints.len()
            )));
        }
        let mut owner = vec![None; self.n_keypoints];
        for (class, joints) in self.planted_joints.iter().enumerate() {
            for &j in joints {
                if j >= self.n_keypoints {
                    return Err(Error::Config(format!("planted joint {j} needs at least {} key points", j + 1)));
                }
                if let Some(other) = owner[j].replace(class) {
                    return Err(Error::Config(format!(
                        "joint {j} is planted for both class {other} and class {class}"
                    )));
                }
            }
        }
        if self.planted_joints.iter().all(|j| j.is_empty()) {
            return Err(Error::Config("at least one class needs planted joints".into()));
        }
        if self.dims != 2 && self.dims != 3 {
            return Err(Error::Config("synthetic data must be 2D or 3D".into()));
        }
        if self.n_frames < 2 || !(self.frame_rate > 0.0) {
            return Err(Error::Config("synthetic data needs >= 2 frames and a positive rate".into()));
        }
        Ok(())
    }

    /// Signature frequency (Hz) of class `c`.
    pub fn class_frequency(&self, class: usize) -> f64 {
        // Spread signatures below Nyquist.
        let nyquist = 0.5 * self.frame_rate;
        nyquist * (0.25 + 0.5 * (class as f64 + 0.5) / self.n_classes as f64)
    }
}

/// Generates `n_samples` sequences with labels cycling through the classes.
/// Sample `i` depends only on `(seed, i)`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<SkeletonSequence>> {
    config.validate()?;
    (0..config.n_samples).into_par_iter().map(|i| generate_one(config, i)).collect()
}

fn generate_one(cfg: &SyntheticConfig, index: usize) -> Result<SkeletonSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let label = index % cfg.n_classes;
    let (t_len, n, d) = (cfg.n_frames, cfg.n_keypoints, cfg.dims);
    let mut coords = vec![0.0; t_len * n * d];

    for v in 0..n {
        let angle = TAU * v as f64 / n as f64;
        let rest = [0.5 * angle.cos(), 0.5 * angle.sin(), 0.0];
        let planted = cfg.planted_joints[label].contains(&v);
        for dim in 0..d {
            let harmonics: Vec<(f64, f64, f64)> = (0..2)
                .map(|_| {
                    (
                        cfg.noise_amplitude * rng.gen_range(0.5..1.0),
                        rng.gen_range(0.05..0.15) * cfg.frame_rate,
                        rng.gen_range(0.0..TAU),
                    )
                })
                .collect();
            let signature = planted.then(|| {
                (cfg.signature_amplitude * rng.gen_range(0.8..1.2), cfg.class_frequency(label), rng.gen_range(0.0..TAU))
            });
            for t in 0..t_len {
                let time = t as f64 / cfg.frame_rate;
                let mut x = rest[dim];
                for &(amp, freq, phase) in &harmonics {
                    x += amp * (TAU * freq * time + phase).sin();
                }
                if let Some((amp, freq, phase)) = signature {
                    x += amp * (TAU * freq * time + phase).sin();
                }
                coords[(t * n + v) * d + dim] = x;
            }
        }
    }
    SkeletonSequence::new(coords, t_len, n, 1, d, cfg.frame_rate, label, format!("synthetic-{}-{index}", cfg.seed))
}
