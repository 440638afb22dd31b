use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ValueFunction;
use crate::{Error, Result};

/// Largest game solved by full coalition enumeration.
pub const EXACT_PLAYER_CAP: usize = 20;

/// Coalitions handed to the value function per call.
const EVAL_BLOCK: usize = 4096;

/// Permutations at or below this player count may be enumerated outright.
const EXHAUSTIVE_MAX_PLAYERS: usize = 8;

/// Shapley values of every output of a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    /// `[output][player]`.
    pub phi: Vec<Vec<f64>>,
    /// Standard error of each estimate; `None` for exact values.
    pub std_error: Option<Vec<Vec<f64>>>,
    /// `v(∅)` per output.
    pub empty_value: Vec<f64>,
    /// `v(F)` per output.
    pub full_value: Vec<f64>,
    /// Permutations averaged, when sampled.
    pub permutations: Option<usize>,
}

impl ShapleyValues {
    /// `v(F) - v(∅) - Σ φ` per output.
    pub fn efficiency_gap(&self) -> Vec<f64> {
        self.phi
            .iter()
            .zip(self.full_value.iter().zip(&self.empty_value))
            .map(|(phi, (full, empty))| full - empty - phi.iter().sum::<f64>())
            .collect()
    }
}

fn evaluate_all<G: ValueFunction + ?Sized>(game: &G, coalitions: &[Vec<bool>]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(coalitions.len());
    for block in coalitions.chunks(EVAL_BLOCK) {
        let vals = game.values(block)?;
        if vals.len() != block.len() || vals.iter().any(|v| v.len() != game.n_outputs()) {
            return Err(Error::Shape("value function returned the wrong number of values".into()));
        }
        out.extend(vals);
    }
    Ok(out)
}

fn mask_to_coalition(mask: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

/// Exact Shapley values by evaluating each of the `2^n` coalitions once and
/// weighting marginal contributions by `|S|! (n - |S| - 1)! / n!`.
pub fn exact_shapley<G: ValueFunction + ?Sized>(game: &G) -> Result<ShapleyValues> {
    let n = game.n_players();
    if n > EXACT_PLAYER_CAP {
        return Err(Error::TooManyPlayers { players: n, cap: EXACT_PLAYER_CAP });
    }
    if n == 0 {
        return Err(Error::Config("a game needs at least one player".into()));
    }
    let outputs = game.n_outputs();
    let total = 1usize << n;
    let mut values = Vec::with_capacity(total);
    for start in (0..total).step_by(EVAL_BLOCK) {
        let end = (start + EVAL_BLOCK).min(total);
        let block: Vec<Vec<bool>> = (start..end).map(|m| mask_to_coalition(m, n)).collect();
        values.extend(evaluate_all(game, &block)?);
    }
    // 1 / (n * C(n-1, s)) for coalition size s.
    let mut weights = vec![0.0; n];
    let mut binom = 1.0f64;
    for (s, w) in weights.iter_mut().enumerate() {
        *w = 1.0 / (n as f64 * binom);
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    let mut phi = vec![vec![0.0; n]; outputs];
    for i in 0..n {
        let bit = 1usize << i;
        for mask in 0..total {
            if mask & bit != 0 {
                continue;
            }
            let w = weights[mask.count_ones() as usize];
            let (with, without) = (&values[mask | bit], &values[mask]);
            for o in 0..outputs {
                phi[o][i] += w * (with[o] - without[o]);
            }
        }
    }
    Ok(ShapleyValues {
        phi,
        std_error: None,
        empty_value: values[0].clone(),
        full_value: values[total - 1].clone(),
        permutations: None,
    })
}

fn factorial(n: usize) -> Option<usize> {
    (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k))
}

/// All permutations of `0..n` in lexicographic order.
fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("successor exists");
        p.swap(i, j);
        p[i + 1..].reverse();
    }
}

/// Permutation `index` of the stream seeded by `seed`.
pub fn sampled_permutation(n: usize, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

/// Permutation-sampling estimate: the mean over permutations of each
/// player's marginal contribution when added after its predecessors.
///
/// Permutation `i` depends only on `(seed, i)`. When `permutations` is at
/// least `n!` for a small game, every permutation is enumerated once and
/// the result is exact.
pub fn sampled_shapley<G: ValueFunction + ?Sized>(game: &G, permutations: usize, seed: u64) -> Result<ShapleyValues> {
    let n = game.n_players();
    if permutations == 0 {
        return Err(Error::Config("need at least one permutation".into()));
    }
    if n == 0 {
        return Err(Error::Config("a game needs at least one player".into()));
    }
    let outputs = game.n_outputs();
    let ends = evaluate_all(game, &[vec![false; n], vec![true; n]])?;
    let (empty, full) = (ends[0].clone(), ends[1].clone());

    let exhaustive = n <= EXHAUSTIVE_MAX_PLAYERS && factorial(n).is_some_and(|f| permutations >= f);
    let orders: Box<dyn Fn(usize) -> Vec<usize>> = if exhaustive {
        let all = all_permutations(n);
        Box::new(move |i| all[i].clone())
    } else {
        Box::new(move |i| sampled_permutation(n, seed, i as u64))
    };
    let count = if exhaustive { factorial(n).expect("checked") } else { permutations };

    // Welford accumulators in permutation order.
    let mut mean = vec![vec![0.0; n]; outputs];
    let mut m2 = vec![vec![0.0; n]; outputs];
    let per_block = (EVAL_BLOCK / n.max(1)).max(1);
    let mut seen = 0usize;
    for start in (0..count).step_by(per_block) {
        let end = (start + per_block).min(count);
        let perms: Vec<Vec<usize>> = (start..end).map(&orders).collect();
        let mut coalitions = Vec::with_capacity(perms.len() * n.saturating_sub(1));
        for p in &perms {
            let mut c = vec![false; n];
            for &player in &p[..n - 1] {
                c[player] = true;
                coalitions.push(c.clone());
            }
        }
        let vals = evaluate_all(game, &coalitions)?;
        for (pi, p) in perms.iter().enumerate() {
            seen += 1;
            let chain = &vals[pi * (n - 1)..(pi + 1) * (n - 1)];
            for (pos, &player) in p.iter().enumerate() {
                let before = if pos == 0 { &empty } else { &chain[pos - 1] };
                let after = if pos == n - 1 { &full } else { &chain[pos] };
                for o in 0..outputs {
                    let d = after[o] - before[o];
                    let delta = d - mean[o][player];
                    mean[o][player] += delta / seen as f64;
                    m2[o][player] += delta * (d - mean[o][player]);
                }
            }
        }
    }
    let std_error = m2
        .iter()
        .map(|row| {
            row.iter()
                .map(|&m| if exhaustive || count < 2 { 0.0 } else { (m / (count - 1) as f64 / count as f64).sqrt() })
                .collect()
        })
        .collect();
    Ok(ShapleyValues {
        phi: mean,
        std_error: Some(std_error),
        empty_value: empty,
        full_value: full,
        permutations: Some(count),
    })
}
