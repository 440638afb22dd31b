use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::FeatureTensor;
use crate::{Error, Result};

/// Reference inputs that stand in for absent players.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    samples: Vec<FeatureTensor>,
    mean: FeatureTensor,
}

impl BackgroundSet {
    pub fn new(samples: Vec<FeatureTensor>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Data("background set needs at least one sample".into()))?;
        let shape = first.shape();
        let mut acc = vec![0.0f64; first.data().len()];
        for s in &samples {
            if s.shape() != shape {
                return Err(Error::Shape(format!("background samples mix shapes {shape:?} and {:?}", s.shape())));
            }
            for (a, &v) in acc.iter_mut().zip(s.data()) {
                *a += v as f64;
            }
        }
        let inv = 1.0 / samples.len() as f64;
        let mean = FeatureTensor::new(shape, acc.iter().map(|a| (a * inv) as f32).collect())?;
        Ok(Self { samples, mean })
    }

    /// `count` distinct training samples drawn with a seeded RNG, kept in
    /// ascending index order.
    pub fn sample_from(training: &[FeatureTensor], count: usize, seed: u64) -> Result<Self> {
        if count == 0 || training.is_empty() {
            return Err(Error::Data("background needs a nonempty training split".into()));
        }
        let count = count.min(training.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, training.len(), count).into_vec();
        idx.sort_unstable();
        Self::new(idx.into_iter().map(|i| training[i].clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[FeatureTensor] {
        &self.samples
    }

    pub fn mean(&self) -> &FeatureTensor {
        &self.mean
    }

    pub fn shape(&self) -> [usize; 5] {
        self.mean.shape()
    }

    /// Consecutive chunks of at most `size` samples.
    pub fn chunks(&self, size: usize) -> Result<Vec<BackgroundSet>> {
        if size == 0 {
            return Err(Error::Config("background chunk size must be positive".into()));
        }
        self.samples.chunks(size).map(|c| Self::new(c.to_vec())).collect()
    }
}
