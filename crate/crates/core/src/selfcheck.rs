//! Numerical self-checks shared by the test suite and `skelshap verify`:
//! Shapley axioms, sampling accuracy, gradient checks and key-point
//! permutation equivariance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureTensor;
use crate::gcn::{loss_and_gradient, ModelConfig, ParamClass, StGcn};
use crate::shap::{
    exact_shapley, sampled_shapley, BackgroundSet, Granularity, MaskingMode, ModelGame, PlayerPartition, Predictor,
    ValueFunction,
};
use crate::skeleton::{build_topology, GraphTopology, PartitionStrategy};
use crate::{Error, Result};

/// One named check with its measured value and tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance, detail: detail.into() }
    }
}

/// A scalar game given by its value on every coalition, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGame {
    n: usize,
    values: Vec<f64>,
}

impl TableGame {
    pub fn from_fn(n: usize, f: impl Fn(usize) -> f64) -> Self {
        Self { n, values: (0..1usize << n).map(f).collect() }
    }

    /// Independent uniform values in `[-1, 1)` with `v(∅) = 0`.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let mut g = Self::from_fn(n, |_| 0.0);
        for v in g.values.iter_mut().skip(1) {
            *v = rng.gen_range(-1.0..1.0);
        }
        g
    }

    pub fn value(&self, mask: usize) -> f64 {
        self.values[mask]
    }

    /// Averages the game with its copy where players `i` and `j` swap
    /// roles, making them symmetric.
    pub fn symmetrized(&self, i: usize, j: usize) -> Self {
        let swap = |m: usize| {
            let (bi, bj) = (m >> i & 1, m >> j & 1);
            (m & !(1 << i) & !(1 << j)) | (bj << i) | (bi << j)
        };
        Self::from_fn(self.n, |m| 0.5 * (self.values[m] + self.values[swap(m)]))
    }

    /// Makes player `d` a dummy by ignoring its membership.
    pub fn with_dummy(&self, d: usize) -> Self {
        Self::from_fn(self.n, |m| self.values[m & !(1 << d)])
    }

    pub fn combine(&self, alpha: f64, other: &TableGame, beta: f64) -> Self {
        Self::from_fn(self.n, |m| alpha * self.values[m] + beta * other.values[m])
    }
}

impl ValueFunction for TableGame {
    fn n_players(&self) -> usize {
        self.n
    }

    fn n_outputs(&self) -> usize {
        1
    }

    fn values(&self, coalitions: &[Vec<bool>]) -> Result<Vec<Vec<f64>>> {
        coalitions
            .iter()
            .map(|c| {
                if c.len() != self.n {
                    return Err(Error::Shape("coalition size does not match the game".into()));
                }
                let mask = c.iter().enumerate().fold(0usize, |m, (i, &b)| m | (b as usize) << i);
                Ok(vec![self.values[mask]])
            })
            .collect()
    }
}

/// Ten-player game with additive, quadratic and pairwise terms, used to
/// check the permutation estimator against exact values.
pub fn toy_game() -> TableGame {
    const N: usize = 10;
    let w: Vec<f64> = (0..N).map(|i| 0.2 * i as f64 - 0.6).collect();
    let a: Vec<f64> = (0..N).map(|i| 0.1 + 0.05 * ((3 * i) % N) as f64).collect();
    TableGame::from_fn(N, |m| {
        let members: Vec<usize> = (0..N).filter(|i| m >> i & 1 == 1).collect();
        let additive: f64 = members.iter().map(|&i| w[i]).sum();
        let mass: f64 = members.iter().map(|&i| a[i]).sum();
        let pairs = members.windows(2).filter(|p| p[1] == p[0] + 1).count() as f64;
        additive + 0.5 * mass * mass + 0.1 * pairs
    })
}

/// Sum of two predictors' probabilities with fixed weights.
pub struct LinearCombination<'a, P: ?Sized, Q: ?Sized> {
    pub f: &'a P,
    pub alpha: f64,
    pub g: &'a Q,
    pub beta: f64,
}

impl<P: Predictor + ?Sized, Q: Predictor + ?Sized> Predictor for LinearCombination<'_, P, Q> {
    fn num_classes(&self) -> usize {
        self.f.num_classes()
    }

    fn predict_batch(&self, inputs: &[FeatureTensor]) -> Result<Vec<Vec<f64>>> {
        let a = self.f.predict_batch(inputs)?;
        let b = self.g.predict_batch(inputs)?;
        Ok(a.iter()
            .zip(&b)
            .map(|(p, q)| p.iter().zip(q).map(|(x, y)| self.alpha * x + self.beta * y).collect())
            .collect())
    }
}

/// Uniform random tensor in `[-1, 1)`.
pub fn random_tensor(shape: [usize; 5], rng: &mut impl Rng) -> FeatureTensor {
    let len = shape.iter().product();
    FeatureTensor::new(shape, (0..len).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).expect("shape is nonempty")
}

fn chain_topology(n: usize, strategy: PartitionStrategy) -> Result<GraphTopology> {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    build_topology(&edges, n, strategy, Some(n / 2))
}

/// Randomly initialized double-precision model with nonzero classifier,
/// biases and edge diagonals so every parameter class carries gradient.
pub fn random_model(
    input_shape: [usize; 5],
    classes: usize,
    strategy: PartitionStrategy,
    seed: u64,
) -> Result<StGcn<f64>> {
    let topology = chain_topology(input_shape[3], strategy)?;
    let mut model = StGcn::<f64>::new(ModelConfig::new(input_shape, classes), topology, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    model.params_mut().visit_mut(|_, class, t| match class {
        ParamClass::EdgeDiag => t.iter_mut().for_each(|x| *x = rng.gen_range(0.5..1.5)),
        ParamClass::Classifier => t.iter_mut().for_each(|x| *x = rng.gen_range(-0.5..0.5)),
        ParamClass::TemporalConv => t.iter_mut().for_each(|x| *x += rng.gen_range(-0.05..0.05)),
        _ => {}
    });
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub class: ParamClass,
    pub entries: usize,
    /// Entries left out because `θ ± h` switch a ReLU on or off, where the
    /// central difference is not a derivative estimate.
    pub skipped_at_kinks: usize,
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂)`.
    pub relative_error: f64,
}

/// Central differences with step `h` against the backward pass on a
/// 3-key-point, 8-frame model in double precision. Entries whose
/// perturbation flips any ReLU are skipped and counted.
pub fn gradient_check(seed: u64, h: f64, per_tensor: usize) -> Result<Vec<GradCheck>> {
    let shape = [4, 2, 8, 3, 1];
    let model = random_model(shape, 3, PartitionStrategy::Spatial, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let inputs: Vec<FeatureTensor> = (0..3).map(|_| random_tensor(shape, &mut rng)).collect();
    let labels = vec![0, 1, 2];
    let (_, grads) = loss_and_gradient(&model, &inputs, &labels)?;

    let mut analytic_tensors = Vec::new();
    grads.visit(|_, class, t| analytic_tensors.push((class, t.to_vec())));

    let shifted = |tensor: usize, index: usize, delta: f64| -> Result<(f64, Vec<bool>)> {
        let mut m = model.clone();
        let mut i = 0;
        m.params_mut().visit_mut(|_, _, t| {
            if i == tensor {
                t[index] += delta;
            }
            i += 1;
        });
        Ok((loss_and_gradient(&m, &inputs, &labels)?.0, m.activation_pattern(&inputs)?))
    };

    let classes = [ParamClass::GcnWeight, ParamClass::EdgeDiag, ParamClass::TemporalConv, ParamClass::Classifier];
    let mut out = Vec::new();
    for class in classes {
        let (mut diff, mut an, mut nu, mut entries, mut skipped) = (0.0, 0.0, 0.0, 0usize, 0usize);
        for (ti, (c, grad)) in analytic_tensors.iter().enumerate() {
            if *c != class {
                continue;
            }
            let picks: Vec<usize> = if grad.len() <= per_tensor {
                (0..grad.len()).collect()
            } else {
                (0..per_tensor).map(|_| rng.gen_range(0..grad.len())).collect()
            };
            for idx in picks {
                let (up, up_pattern) = shifted(ti, idx, h)?;
                let (down, down_pattern) = shifted(ti, idx, -h)?;
                if up_pattern != down_pattern {
                    skipped += 1;
                    continue;
                }
                let numeric = (up - down) / (2.0 * h);
                let a = grad[idx];
                diff += (a - numeric).powi(2);
                an += a * a;
                nu += numeric * numeric;
                entries += 1;
            }
        }
        let scale = an.sqrt().max(nu.sqrt());
        let relative_error = if scale > 0.0 { diff.sqrt() / scale } else { 0.0 };
        out.push(GradCheck { class, entries, skipped_at_kinks: skipped, relative_error });
    }
    Ok(out)
}

/// Largest probability change when key points, topology and edge
/// diagonals are permuted together (single-precision model).
pub fn equivariance_check(seed: u64, samples: usize) -> Result<f64> {
    let shape = [4, 3, 12, 7, 2];
    let model = random_model(shape, 4, PartitionStrategy::Spatial, seed)?.cast::<f32>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = random_tensor(shape, &mut rng);
        let mut perm: Vec<usize> = (0..shape[3]).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let p = model.predict_one(&x)?;
        let q = model.permuted(&perm)?.predict_one(&x.permute_keypoints(&perm)?)?;
        for (a, b) in p.iter().zip(&q) {
            worst = worst.max((a - b).abs() as f64);
        }
    }
    Ok(worst)
}

/// Worst-case axiom residuals over a suite of games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub games: usize,
    pub max_players: usize,
    pub efficiency: f64,
    pub symmetry: f64,
    pub dummy: f64,
    pub linearity: f64,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exact Shapley values on random table games with 3 to 12 players and on
/// double-precision model games, checked for efficiency, symmetry, dummy
/// and linearity.
pub fn shapley_axioms(seed: u64) -> Result<AxiomReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report =
        AxiomReport { games: 0, max_players: 0, efficiency: 0.0, symmetry: 0.0, dummy: 0.0, linearity: 0.0 };
    for n in 3..=12 {
        for _ in 0..2 {
            let g = TableGame::random(n, &mut rng);
            let h = TableGame::random(n, &mut rng);
            let phi_g = exact_shapley(&g)?;
            let phi_h = exact_shapley(&h)?;
            report.efficiency = report.efficiency.max(phi_g.efficiency_gap()[0].abs());

            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let sym = exact_shapley(&g.symmetrized(i, j))?;
            report.symmetry = report.symmetry.max((sym.phi[0][i] - sym.phi[0][j]).abs());

            let d = rng.gen_range(0..n);
            let dummy = exact_shapley(&g.with_dummy(d))?;
            report.dummy = report.dummy.max(dummy.phi[0][d].abs());

            let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let lin = exact_shapley(&g.combine(alpha, &h, beta))?;
            let want: Vec<f64> = phi_g.phi[0].iter().zip(&phi_h.phi[0]).map(|(a, b)| alpha * a + beta * b).collect();
            report.linearity = report.linearity.max(max_abs_diff(&lin.phi[0], &want));

            report.games += 4;
            report.max_players = report.max_players.max(n);
        }
    }

    for (gi, n) in [4usize, 5, 6].into_iter().enumerate() {
        let shape = [4, 2, 8, n, 1];
        let f = random_model(shape, 3, PartitionStrategy::Spatial, seed + gi as u64)?;
        let g = random_model(shape, 3, PartitionStrategy::Uniform, seed + 100 + gi as u64)?;
        let x = random_tensor(shape, &mut rng);
        let mut bg: Vec<FeatureTensor> = (0..3).map(|_| random_tensor(shape, &mut rng)).collect();
        // Key point `d` is identical in the input and every reference.
        let d = rng.gen_range(0..n);
        for b in &mut bg {
            for fi in 0..4 {
                for k in 0..2 {
                    for t in 0..8 {
                        b.set(fi, k, t, d, 0, x.get(fi, k, t, d, 0));
                    }
                }
            }
        }
        let background = BackgroundSet::new(bg)?;
        let partition = PlayerPartition::for_tensor(Granularity::PerKeypoint, &x);
        let mode = MaskingMode::Marginal;
        let phi_f = exact_shapley(&ModelGame::new(&f, &x, &background, &partition, mode)?)?;
        let phi_g = exact_shapley(&ModelGame::new(&g, &x, &background, &partition, mode)?)?;
        for gap in phi_f.efficiency_gap() {
            report.efficiency = report.efficiency.max(gap.abs());
        }
        for row in &phi_f.phi {
            report.dummy = report.dummy.max(row[d].abs());
        }
        let (alpha, beta) = (0.3, 0.7);
        let combo = LinearCombination { f: &f, alpha, g: &g, beta };
        let lin = exact_shapley(&ModelGame::new(&combo, &x, &background, &partition, mode)?)?;
        for c in 0..3 {
            let want: Vec<f64> = phi_f.phi[c].iter().zip(&phi_g.phi[c]).map(|(a, b)| alpha * a + beta * b).collect();
            report.linearity = report.linearity.max(max_abs_diff(&lin.phi[c], &want));
        }
        report.games += 3;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub players: usize,
    pub permutations: usize,
    pub seeds: usize,
    /// `max |sampled − exact| / (max φ − min φ)` for the first seed.
    pub first_seed_relative_error: f64,
    /// Largest `|mean over seeds − exact| / pooled SE` over players, where
    /// the pooled SE of the mean is `sqrt(Σ se²) / seeds`.
    pub max_pooled_z: f64,
}

/// Permutation sampling on [`toy_game`] against exact values.
pub fn sampling_accuracy(first_seed: u64, permutations: usize, seeds: usize) -> Result<SamplingReport> {
    let game = toy_game();
    let exact = exact_shapley(&game)?.phi.remove(0);
    let range = exact.iter().copied().fold(f64::MIN, f64::max) - exact.iter().copied().fold(f64::MAX, f64::min);
    let n = exact.len();
    let mut sum = vec![0.0; n];
    let mut var = vec![0.0; n];
    let mut first = 0.0;
    for s in 0..seeds {
        let est = sampled_shapley(&game, permutations, first_seed + s as u64)?;
        let phi = &est.phi[0];
        let se = &est.std_error.as_ref().expect("sampled values carry errors")[0];
        if s == 0 {
            first = max_abs_diff(phi, &exact) / range;
        }
        for p in 0..n {
            sum[p] += phi[p];
            var[p] += se[p] * se[p];
        }
    }
    let mut max_z = 0.0f64;
    for p in 0..n {
        let mean = sum[p] / seeds as f64;
        let pooled = var[p].sqrt() / seeds as f64;
        let err = (mean - exact[p]).abs();
        let z = if pooled > 0.0 {
            err / pooled
        } else if err <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        max_z = max_z.max(z);
    }
    Ok(SamplingReport { players: n, permutations, seeds, first_seed_relative_error: first, max_pooled_z: max_z })
}

/// Fast subset used by `skelshap verify`.
pub fn run_quick(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let axioms = shapley_axioms(seed)?;
    out.push(CheckOutcome::at_most("shapley efficiency", axioms.efficiency, 1e-10, format!("{} games", axioms.games)));
    out.push(CheckOutcome::at_most("shapley symmetry", axioms.symmetry, 1e-9, ""));
    out.push(CheckOutcome::at_most("shapley dummy", axioms.dummy, 1e-9, ""));
    out.push(CheckOutcome::at_most("shapley linearity", axioms.linearity, 1e-9, ""));
    let sampling = sampling_accuracy(seed, 2000, 1)?;
    out.push(CheckOutcome::at_most(
        "permutation sampling (2000 permutations)",
        sampling.first_seed_relative_error,
        0.05,
        "max error over φ range",
    ));
    for g in gradient_check(seed, 1e-4, 12)? {
        out.push(CheckOutcome::at_most(
            format!("gradient {:?}", g.class),
            g.relative_error,
            1e-4,
            format!("{} entries", g.entries),
        ));
    }
    out.push(CheckOutcome::at_most("permutation equivariance", equivariance_check(seed, 4)?, 1e-6, ""));
    Ok(out)
}
