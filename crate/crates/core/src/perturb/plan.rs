use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gcn::Real;
use crate::gcn::StGcn;
use crate::{Error, Result};

/// Value written to a masked edge-importance entry.
pub const MASK_VALUE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PerturbMode {
    /// `e_n ← 1e-5`.
    Mask,
    /// `e_n ← e_n · epsilon`.
    Scale { epsilon: f64 },
}

impl PerturbMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PerturbMode::Mask => Ok(()),
            PerturbMode::Scale { epsilon } if epsilon > 0.0 && epsilon <= 1.0 => Ok(()),
            PerturbMode::Scale { epsilon } => Err(Error::Config(format!("scale factor {epsilon} must lie in (0, 1]"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PerturbMode::Mask => "mask",
            PerturbMode::Scale { .. } => "scale",
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            PerturbMode::Mask => None,
            PerturbMode::Scale { epsilon } => Some(epsilon),
        }
    }

    fn apply(&self, e: f64) -> f64 {
        match *self {
            PerturbMode::Mask => MASK_VALUE,
            PerturbMode::Scale { epsilon } => e * epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "selection", rename_all = "snake_case")]
pub enum Selection {
    Important,
    Unimportant,
    Random { seed: u64 },
}

impl Selection {
    pub fn name(&self) -> &'static str {
        match self {
            Selection::Important => "important",
            Selection::Unimportant => "unimportant",
            Selection::Random { .. } => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPlan {
    pub targets: Vec<usize>,
    pub mode: PerturbMode,
    pub selection: Selection,
    pub class_index: usize,
}

impl PerturbationPlan {
    pub fn k(&self) -> usize {
        self.targets.len()
    }
}

/// Picks `k` key points from a descending importance ranking: its prefix
/// for important, the prefix of its reverse for unimportant, or `k`
/// distinct seeded draws for random.
pub fn build_plan(
    ranking: &[usize],
    k: usize,
    mode: PerturbMode,
    selection: Selection,
    class_index: usize,
) -> Result<PerturbationPlan> {
    mode.validate()?;
    let n = ranking.len();
    crate::skeleton::check_permutation(ranking, n)
        .map_err(|_| Error::Config("ranking must list every key point exactly once".into()))?;
    if k == 0 || k > n {
        return Err(Error::Config(format!("k = {k} must lie in 1..={n}")));
    }
    let targets = match selection {
        Selection::Important => ranking[..k].to_vec(),
        Selection::Unimportant => ranking.iter().rev().take(k).copied().collect(),
        Selection::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample(&mut rng, n, k).into_vec()
        }
    };
    Ok(PerturbationPlan { targets, mode, selection, class_index })
}

/// A copy of the model whose edge-importance entries at the plan's key
/// points are perturbed in every block and partition.
pub fn apply_plan<T: Real>(model: &StGcn<T>, plan: &PerturbationPlan) -> Result<StGcn<T>> {
    plan.mode.validate()?;
    let mut edges = model.edges();
    let n = edges.keypoints();
    for &t in &plan.targets {
        if t >= n {
            return Err(Error::Config(format!("target key point {t} out of range 0..{n}")));
        }
        edges.update_keypoint(t, |e| plan.mode.apply(e));
    }
    model.substitute_edges(&edges)
}
