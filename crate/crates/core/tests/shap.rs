use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skelshap_core::gcn::StGcn;
use skelshap_core::selfcheck::{random_model, random_tensor, toy_game, TableGame};
use skelshap_core::shap::{
    aggregate, compute_phi0, exact_shapley, explain_dataset, explain_sample, keypoint_values, mask_players,
    rank_keypoints, sampled_shapley, to_dense, Attribution, BackgroundSet, Direction, Estimator, ExplainConfig,
    Granularity, MaskingMode, ModelGame, PlayerPartition, Predictor, Scheme, ValueFunction,
};
use skelshap_core::skeleton::PartitionStrategy;
use skelshap_core::{Error, FeatureTensor, Result};

/// Shapley values by averaging marginal contributions over all n!
/// orderings, independent of the subset-weight formula under test.
fn permutation_oracle(n: usize, v: impl Fn(usize) -> f64) -> Vec<f64> {
    fn orderings(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            orderings(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut all = Vec::new();
    orderings(&mut (0..n).collect(), 0, &mut all);
    let mut phi = vec![0.0; n];
    for order in &all {
        let mut mask = 0usize;
        for &p in order {
            let before = v(mask);
            mask |= 1 << p;
            phi[p] += v(mask) - before;
        }
    }
    phi.iter().map(|s| s / all.len() as f64).collect()
}

/// Sum of the input tensor weighted per cell; one output.
struct Linear {
    weights: Vec<f64>,
}

impl Predictor for Linear {
    fn num_classes(&self) -> usize {
        1
    }

    fn predict_batch(&self, inputs: &[FeatureTensor]) -> Result<Vec<Vec<f64>>> {
        Ok(inputs.iter().map(|x| vec![x.data().iter().zip(&self.weights).map(|(&a, w)| a as f64 * w).sum()]).collect())
    }
}

/// Fixed output per input: the first cell value.
struct FirstCell;

impl Predictor for FirstCell {
    fn num_classes(&self) -> usize {
        2
    }

    fn predict_batch(&self, inputs: &[FeatureTensor]) -> Result<Vec<Vec<f64>>> {
        Ok(inputs.iter().map(|x| vec![x.data()[0] as f64, 1.0 - x.data()[0] as f64]).collect())
    }
}

fn constant_tensor(shape: [usize; 5], v: f32) -> FeatureTensor {
    FeatureTensor::new(shape, vec![v; shape.iter().product()]).unwrap()
}

fn small_model(seed: u64) -> StGcn<f32> {
    random_model([4, 2, 8, 5, 1], 2, PartitionStrategy::Spatial, seed).unwrap().cast()
}

fn tensors(shape: [usize; 5], count: usize, seed: u64) -> Vec<FeatureTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_tensor(shape, &mut rng)).collect()
}

#[test]
fn additive_game_returns_its_weights() {
    let w = [0.3, -1.2, 2.5, 0.0];
    let game = TableGame::from_fn(4, |mask| (0..4).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).sum());
    let sv = exact_shapley(&game).unwrap();
    for (p, wi) in sv.phi[0].iter().zip(w) {
        assert!((p - wi).abs() < 1e-15);
    }
}

#[test]
fn squared_size_game_gives_three_each() {
    let v = |mask: usize| (mask.count_ones() as f64).powi(2);
    let oracle = permutation_oracle(3, v);
    let sv = exact_shapley(&TableGame::from_fn(3, v)).unwrap();
    for (p, o) in sv.phi[0].iter().zip(&oracle) {
        assert!((p - 3.0).abs() < 1e-12 && (o - 3.0).abs() < 1e-12);
    }
}

#[test]
fn exact_matches_permutation_oracle_on_random_games() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in 1..=7 {
        let game = TableGame::random(n, &mut rng);
        let oracle = permutation_oracle(n, |m| game.value(m));
        let sv = exact_shapley(&game).unwrap();
        for (p, o) in sv.phi[0].iter().zip(&oracle) {
            assert!((p - o).abs() < 1e-12, "n={n}: {p} vs {o}");
        }
    }
}

struct Wide(usize);

impl ValueFunction for Wide {
    fn n_players(&self) -> usize {
        self.0
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn values(&self, coalitions: &[Vec<bool>]) -> Result<Vec<Vec<f64>>> {
        Ok(coalitions.iter().map(|c| vec![c.iter().filter(|&&b| b).count() as f64]).collect())
    }
}

#[test]
fn exact_refuses_games_over_the_cap() {
    assert!(matches!(exact_shapley(&Wide(21)), Err(Error::TooManyPlayers { players: 21, cap: 20 })));
    // The sampler handles the same game; each player gets exactly 1.
    let sv = sampled_shapley(&Wide(21), 50, 0).unwrap();
    assert!(sv.phi[0].iter().all(|p| (p - 1.0).abs() < 1e-12));
}

#[test]
fn exhaustive_permutations_equal_exact_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let game = TableGame::random(5, &mut rng);
    let exact = exact_shapley(&game).unwrap();
    let sampled = sampled_shapley(&game, 120, 9).unwrap();
    for (a, b) in exact.phi[0].iter().zip(&sampled.phi[0]) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn two_seeds_differ_but_stay_within_three_standard_errors() {
    let game = toy_game();
    let exact = exact_shapley(&game).unwrap();
    let a = sampled_shapley(&game, 2000, 1).unwrap();
    let b = sampled_shapley(&game, 2000, 2).unwrap();
    assert_ne!(a.phi, b.phi);
    assert_eq!(a.phi, sampled_shapley(&game, 2000, 1).unwrap().phi);
    for est in [&a, &b] {
        let se = &est.std_error.as_ref().unwrap()[0];
        for i in 0..10 {
            assert!((est.phi[0][i] - exact.phi[0][i]).abs() <= 3.0 * se[i], "player {i}");
        }
    }
}

#[test]
fn phi0_of_singleton_and_pair_backgrounds() {
    let shape = [4, 1, 2, 3, 1];
    let p = constant_tensor(shape, 0.2);
    let q = constant_tensor(shape, 0.6);
    let one = compute_phi0(&FirstCell, &BackgroundSet::new(vec![p.clone()]).unwrap()).unwrap();
    assert_eq!(one, FirstCell.predict_batch(std::slice::from_ref(&p)).unwrap()[0]);
    let two = compute_phi0(&FirstCell, &BackgroundSet::new(vec![p, q]).unwrap()).unwrap();
    assert!((two[0] - 0.4).abs() < 1e-7 && (two[1] - 0.6).abs() < 1e-7);
    assert!(BackgroundSet::new(Vec::new()).is_err());
}

#[test]
fn phi0_is_order_invariant() {
    let model = small_model(2);
    let mut bg = tensors([4, 2, 8, 5, 1], 100, 5);
    let a = compute_phi0(&model, &BackgroundSet::new(bg.clone()).unwrap()).unwrap();
    bg.reverse();
    bg.swap(3, 70);
    let b = compute_phi0(&model, &BackgroundSet::new(bg).unwrap()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn masking_full_and_empty_coalitions() {
    let shape = [4, 2, 3, 5, 1];
    let x = tensors(shape, 1, 1).remove(0);
    let bg = BackgroundSet::new(tensors(shape, 3, 2)).unwrap();
    let partition = PlayerPartition::for_tensor(Granularity::PerKeypoint, &x);
    let all = vec![true; 5];
    assert_eq!(mask_players(&x, bg.mean(), &partition, &all).unwrap(), x);
    let none = vec![false; 5];
    assert_eq!(&mask_players(&x, bg.mean(), &partition, &none).unwrap(), bg.mean());

    let model = small_model(3);
    let x = tensors([4, 2, 8, 5, 1], 1, 8).remove(0);
    let bg = BackgroundSet::new(tensors([4, 2, 8, 5, 1], 4, 9)).unwrap();
    let partition = PlayerPartition::for_tensor(Granularity::PerKeypoint, &x);
    let game = ModelGame::new(&model, &x, &bg, &partition, MaskingMode::Marginal).unwrap();
    let empty = game.values(&[vec![false; 5]]).unwrap();
    assert_eq!(empty[0], compute_phi0(&model, &bg).unwrap());
}

#[test]
fn player_partitions_cover_every_cell_once() {
    for g in [Granularity::PerKeypoint, Granularity::PerGroup, Granularity::PerKeypointGroup] {
        let p = PlayerPartition::new(g, 4, 6).unwrap();
        let mut seen = [0; 24];
        for player in 0..p.n_players() {
            for (f, n) in p.cells(player) {
                seen[f * 6 + n] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "{g:?}");
    }
}

#[test]
fn model_attributions_satisfy_efficiency_and_dummy() {
    let model = small_model(6);
    let mut bg = tensors([4, 2, 8, 5, 1], 6, 3);
    let mut x = tensors([4, 2, 8, 5, 1], 1, 4).remove(0);
    // Key point 3 is identical in x and every background sample.
    for t in bg.iter_mut().chain(std::iter::once(&mut x)) {
        for f in 0..4 {
            for k in 0..2 {
                for ti in 0..8 {
                    t.set(f, k, ti, 3, 0, 0.25);
                }
            }
        }
    }
    let bg = BackgroundSet::new(bg).unwrap();
    let cfg = ExplainConfig { estimator: Estimator::Exact, ..Default::default() };
    let attrs = explain_sample(&model, &x, 0, &bg, &cfg).unwrap();
    assert_eq!(attrs.len(), 2);
    for a in &attrs {
        assert!(a.efficiency_gap().abs() <= 1e-6, "gap {}", a.efficiency_gap());
        assert!((a.base_value - a.phi0).abs() <= 1e-9);
        assert!(a.phi[3].abs() <= 1e-6, "dummy phi {}", a.phi[3]);
    }
}

#[test]
fn chunked_background_matches_single_pass() {
    let model = small_model(8);
    let bg = BackgroundSet::new(tensors([4, 2, 8, 5, 1], 100, 10)).unwrap();
    let x = tensors([4, 2, 8, 5, 1], 1, 11);
    let chunked = ExplainConfig { background_chunk: 20, estimator: Estimator::Exact, ..Default::default() };
    let single = ExplainConfig { background_chunk: 100, ..chunked.clone() };
    let a = explain_dataset(&model, &x, &bg, &chunked).unwrap();
    let b = explain_dataset(&model, &x, &bg, &single).unwrap();
    for (p, q) in a.iter().zip(&b) {
        for (u, v) in p.phi.iter().zip(&q.phi) {
            assert!((u - v).abs() <= 1e-6);
        }
        assert!((p.phi0 - q.phi0).abs() <= 1e-6);
    }
}

#[test]
fn dataset_explanations_cover_each_sample_and_class() {
    let model = small_model(1);
    let bg = BackgroundSet::new(tensors([4, 2, 8, 5, 1], 4, 1)).unwrap();
    let cfg = ExplainConfig { classes: Some(vec![1]), ..Default::default() };
    let one = explain_dataset(&model, &tensors([4, 2, 8, 5, 1], 1, 2), &bg, &cfg).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].class_index, 1);
    assert!(explain_dataset(&model, &[], &bg, &cfg).unwrap().is_empty());
}

#[test]
fn linear_model_attributions_are_exact_differences() {
    // For a linear model under marginal masking each player's value is its
    // weighted difference from the mean background.
    let shape = [4, 1, 2, 3, 1];
    let len: usize = shape.iter().product();
    let weights: Vec<f64> = (0..len).map(|i| 0.1 * i as f64 - 0.5).collect();
    let model = Linear { weights: weights.clone() };
    let x = tensors(shape, 1, 20).remove(0);
    let bg = BackgroundSet::new(tensors(shape, 5, 21)).unwrap();
    let cfg = ExplainConfig { estimator: Estimator::Exact, ..Default::default() };
    let a = &explain_sample(&model, &x, 0, &bg, &cfg).unwrap()[0];
    let mut expected = [0.0; 3];
    for (i, w) in weights.iter().enumerate() {
        let n = i % 3;
        let mean: f64 = bg.samples().iter().map(|b| b.data()[i] as f64).sum::<f64>() / 5.0;
        expected[n] += w * (x.data()[i] as f64 - mean);
    }
    for (p, e) in a.phi.iter().zip(expected) {
        assert!((p - e).abs() < 1e-9, "{p} vs {e}");
    }
}

fn fake_attribution(granularity: Granularity, players: usize, seed: u64) -> Attribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi: Vec<f64> = (0..players).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
    Attribution {
        sample_index: 0,
        class_index: 0,
        granularity,
        phi0: 0.5,
        base_value: 0.5,
        prediction: 0.5 + phi.iter().sum::<f64>(),
        phi,
        std_error: None,
    }
}

#[test]
fn aggregation_shapes_for_both_schemes() {
    let attr = fake_attribution(Granularity::PerKeypointGroup, 4 * 25, 1);
    let dense = to_dense(&attr, [4, 6, 300, 25, 2]).unwrap();
    let ntu = aggregate(&dense, Scheme::Ntu).unwrap();
    assert_eq!(ntu.shape(), [24, 150, 25]);
    assert!(ntu.warnings.is_empty());

    let attr = fake_attribution(Granularity::PerKeypointGroup, 4 * 29, 2);
    let dense = to_dense(&attr, [4, 4, 225, 29, 1]).unwrap();
    let cp = aggregate(&dense, Scheme::Cp).unwrap();
    assert_eq!(cp.shape(), [16, 225, 29]);
    let total: f64 = attr.phi.iter().sum();
    assert!((cp.total() - total).abs() <= 1e-6);
    let groups: f64 = cp.group_totals().iter().sum();
    assert!((groups - cp.total()).abs() <= 1e-6);

    let odd = to_dense(&fake_attribution(Granularity::PerKeypoint, 3, 3), [4, 1, 7, 3, 1]).unwrap();
    let halved = aggregate(&odd, Scheme::Ntu).unwrap();
    assert_eq!(halved.shape(), [4, 3, 3]);
    assert_eq!(halved.warnings.len(), 1);
}

#[test]
fn ranking_examples() {
    assert_eq!(rank_keypoints(&[0.5, -0.2, 0.9], Direction::Important), vec![2, 0, 1]);
    assert_eq!(rank_keypoints(&[0.5, -0.2, 0.9], Direction::Unimportant), vec![1, 0, 2]);
    assert_eq!(rank_keypoints(&[0.0; 4], Direction::Important), vec![0, 1, 2, 3]);
    assert_eq!(rank_keypoints(&[0.0; 4], Direction::Unimportant), vec![0, 1, 2, 3]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_values_satisfy_efficiency(seed in any::<u64>(), n in 1usize..9) {
        let game = TableGame::random(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let sv = exact_shapley(&game).unwrap();
        let sum: f64 = sv.phi[0].iter().sum();
        prop_assert!((sum + sv.empty_value[0] - sv.full_value[0]).abs() <= 1e-10);
    }

    #[test]
    fn symmetric_players_get_equal_values(seed in any::<u64>(), n in 2usize..9) {
        let game = TableGame::random(n, &mut ChaCha8Rng::seed_from_u64(seed)).symmetrized(0, n - 1);
        let sv = exact_shapley(&game).unwrap();
        prop_assert!((sv.phi[0][0] - sv.phi[0][n - 1]).abs() <= 1e-9);
    }

    #[test]
    fn values_are_linear_in_the_game(seed in any::<u64>(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, g) = (TableGame::random(6, &mut rng), TableGame::random(6, &mut rng));
        let (pf, pg) = (exact_shapley(&f).unwrap(), exact_shapley(&g).unwrap());
        let combo = exact_shapley(&f.combine(alpha, &g, beta)).unwrap();
        for i in 0..6 {
            prop_assert!((combo.phi[0][i] - alpha * pf.phi[0][i] - beta * pg.phi[0][i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn aggregated_group_maps_sum_to_total(seed in any::<u64>(), k in 1usize..4, t in 1usize..9, n in 1usize..6) {
        let attr = fake_attribution(Granularity::PerKeypointGroup, 4 * n, seed);
        let dense = to_dense(&attr, [4, k, t, n, 1]).unwrap();
        let reduced = aggregate(&dense, Scheme::Cp).unwrap();
        let total: f64 = attr.phi.iter().sum();
        prop_assert!((reduced.total() - total).abs() <= 1e-9);
        let groups: f64 = reduced.group_totals().iter().sum();
        prop_assert!((groups - total).abs() <= 1e-9);
        let per_keypoint = keypoint_values(&attr, 4, n).unwrap();
        prop_assert!((per_keypoint.iter().sum::<f64>() - total).abs() <= 1e-9);
    }

    #[test]
    fn ranking_is_a_sorted_permutation(values in proptest::collection::vec(-3i32..3, 1..12)) {
        let scores: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let order = rank_keypoints(&scores, Direction::Important);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..scores.len()).collect::<Vec<_>>());
        for w in order.windows(2) {
            prop_assert!(scores[w[0]] > scores[w[1]] || (scores[w[0]] == scores[w[1]] && w[0] < w[1]));
        }
    }
}
