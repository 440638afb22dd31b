use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BackgroundSet, PlayerPartition};
use crate::features::FeatureTensor;
use crate::gcn::{Real, StGcn};
use crate::{Error, Result};

/// A cooperative game with vector-valued payoffs.
pub trait ValueFunction: Sync {
    fn n_players(&self) -> usize;
    fn n_outputs(&self) -> usize;
    /// `v(S)` for each coalition, one entry per output.
    fn values(&self, coalitions: &[Vec<bool>]) -> Result<Vec<Vec<f64>>>;
}

/// Anything that maps feature tensors to class probabilities.
pub trait Predictor: Sync {
    fn num_classes(&self) -> usize;
    fn predict_batch(&self, inputs: &[FeatureTensor]) -> Result<Vec<Vec<f64>>>;
}

/// Largest batch handed to the network at once.
const PREDICT_CHUNK: usize = 128;

impl<T: Real> Predictor for StGcn<T> {
    fn num_classes(&self) -> usize {
        self.config().num_classes
    }

    fn predict_batch(&self, inputs: &[FeatureTensor]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(PREDICT_CHUNK) {
            for p in self.predict(chunk)? {
                out.push(p.iter().map(|x| x.as_f64()).collect());
            }
        }
        Ok(out)
    }
}

/// How absent players are filled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskingMode {
    /// Absent features take the background mean; one evaluation per coalition.
    MeanImpute,
    /// Absent features take each background sample in turn and the outputs
    /// are averaged; `b` evaluations per coalition.
    #[default]
    Marginal,
}

impl std::str::FromStr for MaskingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_impute" | "mean" => Ok(Self::MeanImpute),
            "marginal" => Ok(Self::Marginal),
            other => Err(Error::Config(format!("unknown masking mode {other:?}"))),
        }
    }
}

/// `φ0 = E[f(x)]`: mean class probabilities over the background.
pub fn compute_phi0<P: Predictor + ?Sized>(model: &P, background: &BackgroundSet) -> Result<Vec<f64>> {
    let probs = model.predict_batch(background.samples())?;
    Ok(mean_rows(&probs, model.num_classes()))
}

fn mean_rows(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut acc = vec![0.0; width];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    let inv = 1.0 / rows.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

/// Copies the features of players in `coalition` from `x` onto `base`.
pub fn mask_players(
    x: &FeatureTensor,
    base: &FeatureTensor,
    partition: &PlayerPartition,
    coalition: &[bool],
) -> Result<FeatureTensor> {
    if x.shape() != base.shape() {
        return Err(Error::Shape(format!("input {:?} vs reference {:?}", x.shape(), base.shape())));
    }
    partition.check_tensor(x)?;
    if coalition.len() != partition.n_players() {
        return Err(Error::Shape(format!(
            "coalition has {} entries for {} players",
            coalition.len(),
            partition.n_players()
        )));
    }
    let owners = partition.owner_map(x.shape());
    Ok(splice(x, base, &owners, coalition))
}

fn splice(x: &FeatureTensor, base: &FeatureTensor, owners: &[usize], coalition: &[bool]) -> FeatureTensor {
    let mut out = base.clone();
    for ((o, &xv), &p) in out.data_mut().iter_mut().zip(x.data()).zip(owners) {
        if coalition[p] {
            *o = xv;
        }
    }
    out
}

/// The game "class probabilities of `model` when only the coalition's
/// features come from `x`".
pub struct ModelGame<'a, P: ?Sized> {
    model: &'a P,
    x: &'a FeatureTensor,
    background: &'a BackgroundSet,
    partition: &'a PlayerPartition,
    mode: MaskingMode,
    owners: Vec<usize>,
}

impl<'a, P: Predictor + ?Sized> ModelGame<'a, P> {
    pub fn new(
        model: &'a P,
        x: &'a FeatureTensor,
        background: &'a BackgroundSet,
        partition: &'a PlayerPartition,
        mode: MaskingMode,
    ) -> Result<Self> {
        if x.shape() != background.shape() {
            return Err(Error::Shape(format!("input {:?} vs background {:?}", x.shape(), background.shape())));
        }
        partition.check_tensor(x)?;
        let owners = partition.owner_map(x.shape());
        Ok(Self { model, x, background, partition, mode, owners })
    }

    fn coalition_inputs(&self, coalition: &[bool]) -> Vec<FeatureTensor> {
        match self.mode {
            MaskingMode::MeanImpute => vec![splice(self.x, self.background.mean(), &self.owners, coalition)],
            MaskingMode::Marginal => {
                self.background.samples().iter().map(|b| splice(self.x, b, &self.owners, coalition)).collect()
            }
        }
    }
}

/// Coalitions evaluated per parallel task.
const COALITION_CHUNK: usize = 8;

impl<P: Predictor + ?Sized> ValueFunction for ModelGame<'_, P> {
    fn n_players(&self) -> usize {
        self.partition.n_players()
    }

    fn n_outputs(&self) -> usize {
        self.model.num_classes()
    }

    fn values(&self, coalitions: &[Vec<bool>]) -> Result<Vec<Vec<f64>>> {
        let width = self.model.num_classes();
        let chunks: Vec<Result<Vec<Vec<f64>>>> = coalitions
            .par_chunks(COALITION_CHUNK)
            .map(|chunk| {
                let mut inputs = Vec::new();
                for c in chunk {
                    if c.len() != self.n_players() {
                        return Err(Error::Shape(format!(
                            "coalition has {} entries for {} players",
                            c.len(),
                            self.n_players()
                        )));
                    }
                    inputs.extend(self.coalition_inputs(c));
                }
                let probs = self.model.predict_batch(&inputs)?;
                let per = probs.len() / chunk.len();
                Ok(probs.chunks(per).map(|rows| mean_rows(rows, width)).collect())
            })
            .collect();
        let mut out = Vec::with_capacity(coalitions.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }
}
