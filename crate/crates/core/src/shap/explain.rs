use serde::{Deserialize, Serialize};

use super::game::{compute_phi0, ModelGame};
use super::shapley::{exact_shapley, sampled_shapley, ShapleyValues, EXACT_PLAYER_CAP};
use super::{BackgroundSet, Granularity, MaskingMode, PlayerPartition, Predictor};
use crate::features::FeatureTensor;
use crate::{Error, Result};

/// Shapley values of one sample for one class probability, at player
/// granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub sample_index: usize,
    pub class_index: usize,
    pub granularity: Granularity,
    pub phi: Vec<f64>,
    /// `E[f(x)]` over the background for this class.
    pub phi0: f64,
    /// Value of the empty coalition; equals `phi0` under marginal masking.
    pub base_value: f64,
    /// Model output for the unmasked sample.
    pub prediction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<Vec<f64>>,
}

impl Attribution {
    /// `prediction - base_value - Σ φ`.
    pub fn efficiency_gap(&self) -> f64 {
        self.prediction - self.base_value - self.phi.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// Exact enumeration when the game has at most 20 players, sampling
    /// otherwise.
    Auto {
        permutations: usize,
        seed: u64,
    },
    Exact,
    Sampled {
        permutations: usize,
        seed: u64,
    },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Auto { permutations: 2000, seed: 1234 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub granularity: Granularity,
    pub masking: MaskingMode,
    /// Background samples per chunk; chunk results are averaged with
    /// weights proportional to chunk size.
    pub background_chunk: usize,
    pub estimator: Estimator,
    /// Classes to explain; all when `None`.
    #[serde(default)]
    pub classes: Option<Vec<usize>>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            granularity: Granularity::PerKeypoint,
            masking: MaskingMode::Marginal,
            background_chunk: 20,
            estimator: Estimator::default(),
            classes: None,
        }
    }
}

fn solve<P: Predictor + ?Sized>(
    model: &P,
    x: &FeatureTensor,
    background: &BackgroundSet,
    partition: &PlayerPartition,
    config: &ExplainConfig,
) -> Result<ShapleyValues> {
    let game = ModelGame::new(model, x, background, partition, config.masking)?;
    match config.estimator {
        Estimator::Exact => exact_shapley(&game),
        Estimator::Sampled { permutations, seed } => sampled_shapley(&game, permutations, seed),
        Estimator::Auto { permutations, seed } => {
            if partition.n_players() <= EXACT_PLAYER_CAP {
                exact_shapley(&game)
            } else {
                sampled_shapley(&game, permutations, seed)
            }
        }
    }
}

/// Explains one sample against a background processed in chunks.
pub fn explain_sample<P: Predictor + ?Sized>(
    model: &P,
    x: &FeatureTensor,
    sample_index: usize,
    background: &BackgroundSet,
    config: &ExplainConfig,
) -> Result<Vec<Attribution>> {
    let partition = PlayerPartition::for_tensor(config.granularity, x);
    let classes: Vec<usize> = match &config.classes {
        Some(c) => c.clone(),
        None => (0..model.num_classes()).collect(),
    };
    if let Some(&bad) = classes.iter().find(|&&c| c >= model.num_classes()) {
        return Err(Error::Config(format!("class {bad} out of range")));
    }
    let chunks = background.chunks(config.background_chunk)?;
    let players = partition.n_players();
    let outputs = model.num_classes();
    let mut phi = vec![vec![0.0; players]; outputs];
    let mut var = vec![vec![0.0; players]; outputs];
    let mut base = vec![0.0; outputs];
    let mut full = vec![0.0; outputs];
    let mut sampled = false;
    let total = background.len() as f64;
    for chunk in &chunks {
        let w = chunk.len() as f64 / total;
        let sv = solve(model, x, chunk, &partition, config)?;
        for o in 0..outputs {
            base[o] += w * sv.empty_value[o];
            full[o] += w * sv.full_value[o];
            for p in 0..players {
                phi[o][p] += w * sv.phi[o][p];
            }
            if let Some(se) = &sv.std_error {
                sampled = true;
                for p in 0..players {
                    var[o][p] += w * w * se[o][p] * se[o][p];
                }
            }
        }
    }
    let phi0 = compute_phi0(model, background)?;
    Ok(classes
        .into_iter()
        .map(|c| Attribution {
            sample_index,
            class_index: c,
            granularity: config.granularity,
            phi: phi[c].clone(),
            phi0: phi0[c],
            base_value: base[c],
            prediction: full[c],
            std_error: sampled.then(|| var[c].iter().map(|v| v.sqrt()).collect()),
        })
        .collect())
}

/// One attribution per sample and explained class, sample-major.
pub fn explain_dataset<P: Predictor + ?Sized>(
    model: &P,
    samples: &[FeatureTensor],
    background: &BackgroundSet,
    config: &ExplainConfig,
) -> Result<Vec<Attribution>> {
    let mut out = Vec::new();
    for (i, x) in samples.iter().enumerate() {
        out.extend(explain_sample(model, x, i, background, config)?);
    }
    Ok(out)
}
