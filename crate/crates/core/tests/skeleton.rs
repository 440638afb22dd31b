use proptest::prelude::*;
use skelshap_core::skeleton::io::{read_binary, write_binary, SkeletonJson};
use skelshap_core::skeleton::{
    build_topology, builtin, generate_synthetic, preprocess, windowize, PartitionStrategy, PreprocessConfig,
    PreprocessStep, SkeletonSequence, SyntheticConfig,
};
use skelshap_core::Error;

const STRATEGIES: [PartitionStrategy; 3] =
    [PartitionStrategy::Uniform, PartitionStrategy::Distance, PartitionStrategy::Spatial];

fn star(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (0, i)).collect()
}

fn chain(n: usize) -> Vec<(usize, usize)> {
    (0..n - 1).map(|i| (i, i + 1)).collect()
}

fn wavy_sequence(frames: usize, n: usize, frame_rate: f64) -> SkeletonSequence {
    let mut coords = Vec::with_capacity(frames * n * 2);
    for t in 0..frames {
        for j in 0..n {
            let phase = 0.3 * t as f64 + j as f64;
            coords.push(j as f64 + 0.2 * phase.sin());
            coords.push(0.5 * j as f64 + 0.1 * phase.cos());
        }
    }
    SkeletonSequence::new(coords, frames, n, 1, 2, frame_rate, 0, "s").unwrap()
}

#[test]
fn distance_partitions_of_two_node_path() {
    let topo = build_topology(&[(0, 1)], 2, PartitionStrategy::Distance, None).unwrap();
    let p = topo.partitions();
    assert_eq!(p.len(), 2);
    assert_eq!(p[0].data(), &[1.0, 0.0, 0.0, 1.0]);
    assert_eq!(p[1].data(), &[0.0, 1.0, 1.0, 0.0]);
}

#[test]
fn uniform_normalization_of_two_node_path() {
    let topo = build_topology(&[(0, 1)], 2, PartitionStrategy::Uniform, None).unwrap();
    let norm = topo.normalized(0, None);
    // Both rows of A + I have degree 2, so every entry is 1/sqrt(2)^2.
    for v in norm.data() {
        assert!((v - 0.5).abs() < 1e-15);
    }
}

#[test]
fn spatial_partitions_of_star_sum_to_adjacency_plus_identity() {
    let topo = build_topology(&star(5), 5, PartitionStrategy::Spatial, Some(0)).unwrap();
    assert_eq!(topo.num_partitions(), 3);
    let sum = topo.partitions().iter().skip(1).fold(topo.partitions()[0].clone(), |a, b| a.add(b));
    for r in 0..5 {
        for c in 0..5 {
            let expected = if r == c || r == 0 || c == 0 { 1.0 } else { 0.0 };
            assert_eq!(sum.get(r, c), expected, "entry ({r},{c})");
        }
    }
}

#[test]
fn topology_errors() {
    assert!(matches!(build_topology(&[(0, 0)], 2, PartitionStrategy::Uniform, None), Err(Error::Topology(_))));
    assert!(build_topology(&[(0, 2)], 2, PartitionStrategy::Uniform, None).is_err());
    // Two components under the spatial strategy need a declared center.
    assert!(build_topology(&[(0, 1), (2, 3)], 4, PartitionStrategy::Spatial, None).is_err());
    // A cycle is not a forest.
    assert!(build_topology(&[(0, 1), (1, 2), (2, 0)], 3, PartitionStrategy::Uniform, None).is_err());
}

#[test]
fn zero_degree_rows_get_zero_normalizer() {
    // Key point 2 is isolated; in the neighbour partition its row is empty.
    let topo = build_topology(&[(0, 1)], 3, PartitionStrategy::Distance, None).unwrap();
    assert_eq!(topo.degree_norms(1)[2], 0.0);
    assert!(topo.normalized(1, None).data().iter().all(|v| v.is_finite()));
}

#[test]
fn uniform_row_sums_exceed_one_and_a_half_only_past_degree_four() {
    let hub_row = |leaves: usize| {
        let topo = build_topology(&star(leaves + 1), leaves + 1, PartitionStrategy::Uniform, None).unwrap();
        topo.normalized(0, None).row_sum(0)
    };
    let oracle = |d: f64| 1.0 / (d + 1.0) + d / (2.0 * (d + 1.0)).sqrt();
    for leaves in 1..8 {
        assert!((hub_row(leaves) - oracle(leaves as f64)).abs() < 1e-12);
    }
    assert!(hub_row(4) <= 1.5 && hub_row(5) > 1.5);
}

#[test]
fn builtin_topologies_build() {
    let ntu = builtin::ntu_rgbd_25().build().unwrap();
    assert_eq!(ntu.n(), 25);
    assert_eq!(ntu.num_partitions(), 3);
    let infant = builtin::infant_29().build().unwrap();
    assert_eq!(infant.n(), 29);
}

#[test]
fn preprocess_fixed_point_and_invariances() {
    let seq = wavy_sequence(20, 4, 30.0);
    let cfg = PreprocessConfig::centered_trunk(0, 1);
    let once = preprocess(&seq, &cfg).unwrap();
    let twice = preprocess(&once, &cfg).unwrap();
    for (a, b) in once.coords().iter().zip(twice.coords()) {
        assert!((a - b).abs() < 1e-12);
    }

    let shifted: Vec<f64> =
        seq.coords().iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 3.0 } else { 7.0 }).collect();
    let out = preprocess(&seq.with_coords(shifted).unwrap(), &cfg).unwrap();
    for (a, b) in once.coords().iter().zip(out.coords()) {
        assert!((a - b).abs() < 1e-12);
    }

    let doubled: Vec<f64> = seq.coords().iter().map(|v| 2.0 * v).collect();
    let out = preprocess(&seq.with_coords(doubled).unwrap(), &cfg).unwrap();
    for (a, b) in once.coords().iter().zip(out.coords()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn preprocess_rejects_zero_length_reference() {
    let seq = SkeletonSequence::new(vec![1.0; 2 * 2 * 2], 2, 2, 1, 2, 10.0, 0, "s").unwrap();
    let cfg = PreprocessConfig { steps: vec![PreprocessStep::Scale { from: 0, to: 1, length: 1.0 }] };
    assert!(preprocess(&seq, &cfg).is_err());
}

#[test]
fn windows_of_twenty_seconds_at_thirty_hertz() {
    let seq = wavy_sequence(600, 2, 30.0);
    let w = windowize(&seq, 5.0, 2.5).unwrap();
    assert!(!w.too_short);
    let starts: Vec<usize> = w.windows.iter().map(|w| w.start).collect();
    assert_eq!(starts, vec![0, 75, 150, 225, 300, 375, 450]);
    assert!(w.windows.iter().all(|w| w.len() == 150));

    let ten = wavy_sequence(300, 2, 30.0);
    assert_eq!(windowize(&ten, 5.0, 0.0).unwrap().windows.len(), 2);

    let four = wavy_sequence(120, 2, 30.0);
    let w = windowize(&four, 5.0, 0.0).unwrap();
    assert!(w.windows.is_empty() && w.too_short);

    assert!(windowize(&ten, 2.0, 2.0).is_err());
}

#[test]
fn synthetic_is_deterministic_and_empty_is_empty() {
    let cfg = SyntheticConfig { n_samples: 20, seed: 9, ..Default::default() };
    assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
    let empty = SyntheticConfig { n_samples: 0, ..Default::default() };
    assert!(generate_synthetic(&empty).unwrap().is_empty());
    let overlap = SyntheticConfig { planted_joints: vec![vec![1], vec![1]], ..Default::default() };
    assert!(generate_synthetic(&overlap).is_err());
}

// Temporal variance of a joint's first coordinate, averaged over samples.
fn mean_variance(seqs: &[&SkeletonSequence], joint: usize) -> f64 {
    let per: Vec<f64> = seqs
        .iter()
        .map(|s| {
            let xs: Vec<f64> = (0..s.frames()).map(|t| s.get(t, joint, 0, 0)).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
        })
        .collect();
    per.iter().sum::<f64>() / per.len() as f64
}

#[test]
fn planted_joint_variance_separates_classes() {
    let cfg = SyntheticConfig {
        n_keypoints: 8,
        planted_joints: vec![vec![2], vec![7]],
        n_samples: 200,
        seed: 3,
        ..Default::default()
    };
    let data = generate_synthetic(&cfg).unwrap();
    let class = |c: usize| data.iter().filter(|s| s.label() == c).collect::<Vec<_>>();
    let (c0, c1) = (class(0), class(1));
    let planted = mean_variance(&c0, 2) / mean_variance(&c1, 2);
    let neutral = mean_variance(&c0, 5) / mean_variance(&c1, 5);
    assert!(planted >= 4.0, "planted ratio {planted}");
    assert!((0.8..=1.25).contains(&neutral), "neutral ratio {neutral}");
}

#[test]
fn skeleton_formats_round_trip() {
    let seq = wavy_sequence(6, 3, 30.0);
    let json = SkeletonJson::from_sequence(&seq).to_sequence().unwrap();
    assert_eq!(json.coords(), seq.coords());

    let mut buf = Vec::new();
    write_binary(&mut buf, &seq).unwrap();
    assert_eq!(&buf[..8], b"SKEL0001");
    let back = read_binary(&buf[..], 30.0, 0).unwrap();
    for (a, b) in back.coords().iter().zip(seq.coords()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    assert!(read_binary(&buf[..buf.len() - 2], 30.0, 0).is_err());
}

proptest! {
    #[test]
    fn partitions_always_sum_to_adjacency_plus_identity(
        n in 2usize..12,
        parents in proptest::collection::vec(any::<u32>(), 11),
        strategy in 0usize..3,
    ) {
        // Random tree: node i > 0 attaches to an earlier node.
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (parents[i - 1] as usize % i, i)).collect();
        let topo = build_topology(&edges, n, STRATEGIES[strategy], Some(0)).unwrap();
        let sum = topo.partitions().iter().skip(1).fold(topo.partitions()[0].clone(), |a, b| a.add(b));
        let a = topo.adjacency();
        for r in 0..n {
            for c in 0..n {
                let expected = a.get(r, c) + if r == c { 1.0 } else { 0.0 };
                prop_assert_eq!(sum.get(r, c), expected);
            }
        }
        for p in topo.partitions() {
            prop_assert!(p.data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn uniform_rows_are_bounded_and_symmetric(
        n in 2usize..12,
        picks in proptest::collection::vec(any::<u32>(), 11),
    ) {
        // The 1.5 row-sum bound holds up to degree 4 (a 5-leaf star's hub
        // row sums to 1/6 + 5/sqrt(12) = 1.61), so trees are drawn with
        // that cap, which every body skeleton satisfies.
        let mut degree = vec![0usize; n];
        let mut edges = Vec::new();
        for i in 1..n {
            let open: Vec<usize> = (0..i).filter(|&v| degree[v] < 4).collect();
            let p = open[picks[i - 1] as usize % open.len()];
            degree[p] += 1;
            degree[i] += 1;
            edges.push((p, i));
        }
        let topo = build_topology(&edges, n, PartitionStrategy::Uniform, None).unwrap();
        let norm = topo.normalized(0, None);
        prop_assert!(norm.is_symmetric(1e-15));
        for r in 0..n {
            let s = norm.row_sum(r);
            prop_assert!(s > 0.0 && s <= 1.5, "row {} sums to {}", r, s);
        }
    }

    #[test]
    fn window_count_matches_formula(frames in 2usize..400, dur in 1u32..8, ov in 0u32..8) {
        prop_assume!(ov < dur);
        let seq = wavy_sequence(frames, 2, 10.0);
        let w = windowize(&seq, dur as f64, ov as f64).unwrap();
        let (width, stride) = (dur as usize * 10, (dur - ov) as usize * 10);
        let expected = if frames < width { 0 } else { (frames - width) / stride + 1 };
        prop_assert_eq!(w.windows.len(), expected);
    }

    #[test]
    fn preprocess_is_idempotent(frames in 2usize..12, scale in 0.1f64..5.0, dx in -5.0f64..5.0) {
        let base = wavy_sequence(frames, 3, 10.0);
        let moved: Vec<f64> = base.coords().iter().map(|v| scale * v + dx).collect();
        let seq = base.with_coords(moved).unwrap();
        let cfg = PreprocessConfig::aligned_spine(0, 1, 2);
        let once = preprocess(&seq, &cfg).unwrap();
        let twice = preprocess(&once, &cfg).unwrap();
        for (a, b) in once.coords().iter().zip(twice.coords()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn synthetic_is_pure_in_seed(seed in any::<u64>()) {
        let cfg = SyntheticConfig { n_samples: 3, n_frames: 8, seed, ..Default::default() };
        prop_assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
    }
}

#[test]
fn chain_helper_is_a_tree() {
    assert!(build_topology(&chain(5), 5, PartitionStrategy::Spatial, Some(2)).is_ok());
}
