//! Run configuration: a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skelshap_core::gcn::HyperParams;
use skelshap_core::hashing::json_hash;
use skelshap_core::shap::{Estimator, ExplainConfig};
use skelshap_core::skeleton::{builtin, PartitionStrategy, SyntheticConfig, TopologyFile};
use skelshap_core::{Error, FeatureConfig, Granularity, MaskingMode, PerturbMode, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetMode {
    /// Generated planted-importance data on a star skeleton.
    Synthetic,
    /// Recorded 2D sequences on the built-in 29-key-point infant skeleton.
    CpLike,
    /// Recorded 3D two-person sequences on the built-in 25-joint skeleton.
    NtuLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub mode: DatasetMode,
    /// Generator settings; its `seed` and `n_samples` are replaced per split.
    pub synthetic: SyntheticConfig,
    pub train_samples: usize,
    pub val_samples: usize,
    /// Dataset JSON files for the recorded modes.
    pub train_path: Option<PathBuf>,
    pub val_path: Option<PathBuf>,
    /// Topology JSON overriding the mode's default skeleton.
    pub topology: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            mode: DatasetMode::Synthetic,
            synthetic: SyntheticConfig { planted_joints: vec![vec![], vec![2, 4]], ..Default::default() },
            train_samples: 200,
            val_samples: 100,
            train_path: None,
            val_path: None,
            topology: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
    pub temporal_kernel: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { channels: vec![16, 32, 64], strides: vec![1, 1, 1], temporal_kernel: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSpec {
    pub granularity: Granularity,
    pub masking: MaskingMode,
    /// Background samples drawn from the training split.
    pub background: usize,
    /// Number of background chunks processed separately and averaged.
    pub chunks: usize,
    pub estimator: Estimator,
    /// Validation samples to explain, from the front; all when `None`.
    pub max_samples: Option<usize>,
    pub classes: Option<Vec<usize>>,
}

impl Default for ExplainSpec {
    fn default() -> Self {
        Self {
            granularity: Granularity::PerKeypoint,
            masking: MaskingMode::Marginal,
            background: 20,
            chunks: 1,
            estimator: Estimator::default(),
            max_samples: None,
            classes: None,
        }
    }
}

// Flattening rules out `deny_unknown_fields` here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbSpec {
    #[serde(flatten)]
    pub mode: PerturbMode,
    /// Largest k; clipped to the key-point count. `0` reports the baseline.
    pub k_max: usize,
    /// Ranked classes; every class with explained samples when `None`.
    pub classes: Option<Vec<usize>>,
    pub random_seeds: Vec<u64>,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        Self { mode: PerturbMode::Mask, k_max: 10, classes: None, random_seeds: (0..10).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Scale factors applied to the edge-importance entries.
    pub epsilons: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { epsilons: vec![1.0, 0.95, 0.85, 0.75, 0.65, 0.55] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Run directory; excluded from the config hash.
    pub out: PathBuf,
    pub dataset: DatasetConfig,
    pub features: FeatureConfig,
    pub model: ModelSpec,
    pub train: HyperParams,
    pub explain: ExplainSpec,
    pub perturb: PerturbSpec,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("run"),
            dataset: DatasetConfig::default(),
            features: FeatureConfig::default(),
            model: ModelSpec::default(),
            train: HyperParams { epochs: 30, ..Default::default() },
            explain: ExplainSpec::default(),
            perturb: PerturbSpec::default(),
            sweep: SweepSpec::default(),
        }
    }
}

/// Command-line values that replace config entries when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub k_max: Option<usize>,
    pub epsilon: Option<f64>,
    pub mode: Option<String>,
    pub players: Option<Granularity>,
    pub background: Option<usize>,
    pub chunks: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        config.apply(overrides)?;
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(k) = o.k_max {
            self.perturb.k_max = k;
        }
        let epsilon = o.epsilon.or(self.perturb.mode.epsilon());
        match o.mode.as_deref() {
            Some("mask") => self.perturb.mode = PerturbMode::Mask,
            Some("scale") => {
                let epsilon = epsilon.ok_or_else(|| Error::Config("scale mode needs --epsilon".into()))?;
                self.perturb.mode = PerturbMode::Scale { epsilon };
            }
            Some(other) => return Err(Error::Config(format!("unknown perturbation mode {other:?}"))),
            None => {
                if let Some(epsilon) = o.epsilon {
                    self.perturb.mode = PerturbMode::Scale { epsilon };
                }
            }
        }
        if let Some(g) = o.players {
            self.explain.granularity = g;
        }
        if let Some(b) = o.background {
            self.explain.background = b;
        }
        if let Some(c) = o.chunks {
            self.explain.chunks = c;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.perturb.mode.validate()?;
        if self.explain.background == 0 || self.explain.chunks == 0 {
            return Err(Error::Config("background size and chunk count must be positive".into()));
        }
        if self.explain.chunks > self.explain.background {
            return Err(Error::Config("more background chunks than background samples".into()));
        }
        if self.perturb.random_seeds.is_empty() {
            return Err(Error::Config("random control needs at least one seed".into()));
        }
        if self.sweep.epsilons.is_empty() {
            return Err(Error::Config("threshold sweep needs at least one scale factor".into()));
        }
        if self.dataset.mode == DatasetMode::Synthetic
            && (self.dataset.train_samples == 0 || self.dataset.val_samples == 0)
        {
            return Err(Error::Config("synthetic splits need at least one sample each".into()));
        }
        Ok(())
    }

    /// Paths that a recorded-data `gen` reads; each must exist.
    pub fn check_inputs(&self) -> Result<()> {
        let mut paths: Vec<&PathBuf> = self.dataset.topology.iter().collect();
        if self.dataset.mode != DatasetMode::Synthetic {
            for (name, p) in [("train_path", &self.dataset.train_path), ("val_path", &self.dataset.val_path)] {
                paths.push(
                    p.as_ref().ok_or_else(|| Error::Config(format!("dataset.{name} is required for recorded data")))?,
                );
            }
        }
        match paths.iter().find(|p| !p.exists()) {
            Some(missing) => Err(Error::Config(format!("{} does not exist", missing.display()))),
            None => Ok(()),
        }
    }

    /// Hash of everything except the output directory.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out = PathBuf::new();
        json_hash(&c)
    }

    pub fn topology_file(&self) -> Result<TopologyFile> {
        if let Some(p) = &self.dataset.topology {
            return TopologyFile::load(p);
        }
        Ok(match self.dataset.mode {
            DatasetMode::Synthetic => {
                let n = self.dataset.synthetic.n_keypoints;
                TopologyFile {
                    n,
                    edges: (1..n).map(|i| [0, i]).collect(),
                    strategy: PartitionStrategy::Distance,
                    center: Some(0),
                }
            }
            DatasetMode::CpLike => builtin::infant_29(),
            DatasetMode::NtuLike => builtin::ntu_rgbd_25(),
        })
    }

    pub fn explain_config(&self) -> ExplainConfig {
        let chunk = self.explain.background.div_ceil(self.explain.chunks);
        ExplainConfig {
            granularity: self.explain.granularity,
            masking: self.explain.masking,
            background_chunk: chunk,
            estimator: self.explain.estimator,
            classes: self.explain.classes.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_the_output_directory() {
        let a = RunConfig::default();
        let b = RunConfig { out: PathBuf::from("elsewhere"), ..RunConfig::default() };
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let c = RunConfig { seed: 1, ..RunConfig::default() };
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn overrides_replace_config_entries() {
        let o = Overrides {
            seed: Some(9),
            k_max: Some(3),
            epsilon: Some(0.65),
            players: Some(Granularity::PerKeypointGroup),
            chunks: Some(4),
            ..Default::default()
        };
        let c = RunConfig::load(None, &o).unwrap();
        assert_eq!((c.seed, c.perturb.k_max, c.explain.chunks), (9, 3, 4));
        assert_eq!(c.perturb.mode, PerturbMode::Scale { epsilon: 0.65 });
        assert_eq!(c.explain.granularity, Granularity::PerKeypointGroup);
        assert_eq!(c.explain_config().background_chunk, 5);

        let mask = Overrides { mode: Some("mask".into()), ..o };
        assert_eq!(RunConfig::load(None, &mask).unwrap().perturb.mode, PerturbMode::Mask);
    }

    #[test]
    fn perturb_mode_round_trips_through_json() {
        let text = r#"{ "perturb": { "mode": "scale", "epsilon": 0.55, "k_max": 4 } }"#;
        let c: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.perturb.mode, PerturbMode::Scale { epsilon: 0.55 });
        assert_eq!(c.perturb.k_max, 4);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
