use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamClass, Params};
use super::Model;
use crate::features::FeatureTensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop once an epoch ends with at least this training accuracy.
    #[serde(default)]
    pub stop_at_train_accuracy: Option<f64>,
    /// Lower bound kept on trained edge-importance entries.
    #[serde(default = "default_edge_floor")]
    pub edge_floor: f64,
}

fn default_edge_floor() -> f64 {
    1e-4
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            learning_rate: 5e-3,
            epochs: 50,
            batch_size: 16,
            stop_at_train_accuracy: None,
            edge_floor: default_edge_floor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs_run: usize,
    /// Mean cross-entropy per epoch.
    pub losses: Vec<f64>,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

struct Adam {
    m: Params<f32>,
    v: Params<f32>,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &Params<f32>) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }

    fn update(&mut self, params: &mut Params<f32>, grads: &Params<f32>, lr: f64, edge_floor: f64) {
        self.step += 1;
        let b1 = Self::BETA1 as f32;
        let b2 = Self::BETA2 as f32;
        self.m.zip_mut(grads, |_, m, g| {
            for (m, &g) in m.iter_mut().zip(g) {
                *m = b1 * *m + (1.0 - b1) * g;
            }
        });
        self.v.zip_mut(grads, |_, v, g| {
            for (v, &g) in v.iter_mut().zip(g) {
                *v = b2 * *v + (1.0 - b2) * g * g;
            }
        });
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let mut moments = Vec::new();
        self.m.visit(|_, _, m| moments.push(m.to_vec()));
        let mut seconds = Vec::new();
        self.v.visit(|_, _, v| seconds.push(v.to_vec()));
        let mut i = 0;
        params.visit_mut(|_, class, p| {
            if class.trainable() {
                for ((p, &m), &v) in p.iter_mut().zip(&moments[i]).zip(&seconds[i]) {
                    let mh = m as f64 / c1;
                    let vh = v as f64 / c2;
                    *p = (*p as f64 - lr * mh / (vh.sqrt() + Self::EPS)) as f32;
                }
                if class == ParamClass::EdgeDiag {
                    let floor = edge_floor as f32;
                    p.iter_mut().for_each(|e| *e = e.max(floor));
                }
            }
            i += 1;
        });
    }
}

fn check_labels(model: &Model, x: &[FeatureTensor], y: &[usize]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Data(format!("{} samples but {} labels", x.len(), y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= model.num_classes()) {
        return Err(Error::Data(format!("label {bad} out of range")));
    }
    Ok(())
}

/// Fraction of samples whose arg-max prediction equals the label.
pub fn accuracy(model: &Model, x: &[FeatureTensor], y: &[usize], batch: usize) -> Result<f64> {
    check_labels(model, x, y)?;
    if x.is_empty() {
        return Err(Error::Data("accuracy of an empty set".into()));
    }
    let mut correct = 0;
    for (xs, ys) in x.chunks(batch.max(1)).zip(y.chunks(batch.max(1))) {
        for (p, &label) in model.predict(xs)?.iter().zip(ys) {
            if argmax(p) == label {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / x.len() as f64)
}

/// Index of the largest value; ties go to the lower index.
pub fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Minibatch Adam on the mean cross-entropy. Input scaling is fitted on
/// the training set first. Deterministic for a given seed.
pub fn train(
    model: &mut Model,
    x: &[FeatureTensor],
    y: &[usize],
    val: Option<(&[FeatureTensor], &[usize])>,
    hp: &HyperParams,
    seed: u64,
) -> Result<TrainReport> {
    check_labels(model, x, y)?;
    if x.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if hp.batch_size == 0 || !hp.learning_rate.is_finite() || hp.learning_rate < 0.0 {
        return Err(Error::Config("batch size must be positive and learning rate finite and >= 0".into()));
    }
    if let Some((vx, vy)) = val {
        check_labels(model, vx, vy)?;
    }
    model.fit_input_scale(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = Adam::new(&model.params);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut losses = Vec::with_capacity(hp.epochs);
    let mut epochs_run = 0;
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        let mut correct = 0;
        for idx in order.chunks(hp.batch_size) {
            let batch: Vec<&FeatureTensor> = idx.iter().map(|&i| &x[i]).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
            let (probs, cache) = model.forward(&batch, true)?;
            for (p, &l) in probs.iter().zip(&labels) {
                loss -= (p[l].max(f32::MIN_POSITIVE) as f64).ln();
                if argmax(p) == l {
                    correct += 1;
                }
            }
            let grads = model.backward(&cache.expect("cache requested"), &labels)?;
            adam.update(&mut model.params, &grads, hp.learning_rate, hp.edge_floor);
        }
        let loss = loss / x.len() as f64;
        if !loss.is_finite() {
            return Err(Error::numerical(format!("epoch {epoch}"), "training loss diverged"));
        }
        losses.push(loss);
        epochs_run = epoch + 1;
        let epoch_accuracy = correct as f64 / x.len() as f64;
        if hp.stop_at_train_accuracy.is_some_and(|a| epoch_accuracy >= a) {
            break;
        }
    }
    let train_accuracy = accuracy(model, x, y, hp.batch_size)?;
    let val_accuracy = match val {
        Some((vx, vy)) if !vx.is_empty() => Some(accuracy(model, vx, vy, hp.batch_size)?),
        _ => None,
    };
    Ok(TrainReport { seed, epochs_run, losses, train_accuracy, val_accuracy })
}
