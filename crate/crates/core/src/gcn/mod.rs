//! Spatial-temporal graph convolutional classifier with learnable
//! edge-importance diagonals, trained with hand-written reverse-mode
//! gradients.

mod checkpoint;
mod edges;
mod model;
mod params;
mod real;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use edges::EdgeSet;
pub use model::{gcn_forward, Model, ModelConfig, StGcn};
pub use params::{BlockParams, ParamClass, Params};
pub use real::Real;
pub use train::{accuracy, argmax, train, HyperParams, TrainReport};

use crate::features::FeatureTensor;
use crate::Result;

/// Loss and parameter gradient of the mean cross-entropy on one batch.
pub fn loss_and_gradient<T: Real>(
    model: &StGcn<T>,
    inputs: &[FeatureTensor],
    labels: &[usize],
) -> Result<(f64, Params<T>)> {
    let refs: Vec<&FeatureTensor> = inputs.iter().collect();
    let (probs, cache) = model.forward(&refs, true)?;
    let cache = cache.ok_or_else(|| crate::Error::Data("gradient of an empty batch".into()))?;
    let loss = probs.iter().zip(labels).map(|(p, &l)| -p.get(l).map_or(f64::NAN, |x| x.as_f64().ln())).sum::<f64>()
        / labels.len().max(1) as f64;
    let grads = model.backward(&cache, labels)?;
    Ok((loss, grads))
}
