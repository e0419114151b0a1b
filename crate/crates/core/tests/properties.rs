#![allow(clippy::needless_range_loop)]

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use v2v_alloc::allocation::{hare_niemeyer, is_pairwise_stable, solve_zone_matching, MatchingOptions, ZoneGame};
use v2v_alloc::clustering::{affinity, cosine_load_similarity, spectral_zones, ZonePartition};
use v2v_alloc::linalg::Matrix;
use v2v_alloc::metrics::percentile;
use v2v_alloc::scenario::{build_manhattan_grid, GridConfig, Point};

fn sorted_percentile(samples: &[f64], p: f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (rank - lo as f64) * (v[hi] - v[lo])
}

#[test]
fn percentiles_match_sort_oracle() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<f64> = (0..1000).map(|_| rng.gen_range(-40.0..120.0)).collect();
    for p in [0.0, 1.0, 25.0, 50.0, 62.5, 75.0, 99.9, 100.0] {
        assert_eq!(percentile(&samples, p).unwrap(), sorted_percentile(&samples, p), "p{p}");
    }
}

fn point_in_bounds() -> impl Strategy<Value = Point> {
    (0.0..214.0f64, 0.0..214.0f64).prop_map(|(x, y)| Point::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn los_and_distance_are_symmetric(a in point_in_bounds(), b in point_in_bounds()) {
        let g = build_manhattan_grid(&GridConfig::default()).unwrap();
        prop_assert_eq!(g.is_los(a, b), g.is_los(b, a));
        prop_assert_eq!(g.corner_count(a, b), g.corner_count(b, a));
        prop_assert!((g.distance(a, b) - g.distance(b, a)).abs() < 1e-9);
        prop_assert!(g.distance(a, b) <= 214.0 * std::f64::consts::FRAC_1_SQRT_2 + 1e-9);
    }

    #[test]
    fn apportionment_conserves_rbs(
        loads in prop::collection::vec(0.0..100.0f64, 1..10),
        extra in 0usize..12,
    ) {
        let n = loads.len() + extra;
        let seats = hare_niemeyer(&loads, n).unwrap();
        prop_assert_eq!(seats.iter().sum::<usize>(), n);
        prop_assert!(seats.iter().all(|&s| s >= 1));
        let total: f64 = loads.iter().sum();
        if total > 0.0 && seats.iter().zip(&loads).all(|(_, l)| n as f64 * l / total >= 1.0) {
            for (s, l) in seats.iter().zip(&loads) {
                let q = n as f64 * l / total;
                prop_assert!((*s as f64 - q).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn spectral_partition_is_valid(
        seed in any::<u64>(),
        histories in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 10), 1..16),
    ) {
        use rand::Rng;
        let k = histories.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = cosine_load_similarity(&histories).unwrap();
        let mut rows = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i + 1..k {
                let v = if rng.gen_bool(0.7) { rng.gen_range(0.0..1.0) } else { 0.0 };
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        let d = Matrix::from_rows(&rows).unwrap();
        let a = affinity(&c, &d, 0.3).unwrap();
        let b_max = (k / 2).max(2);
        let out = spectral_zones(&a, 2, b_max, &mut rng).unwrap();
        prop_assert!(out.partition.is_valid());
        prop_assert_eq!(out.partition.pairs(), k);
        prop_assert_eq!(&ZonePartition::from_labels(&out.partition.labels), &out.partition);
    }

    #[test]
    fn converged_matchings_have_no_blocking_swap(seed in any::<u64>(), pairs in 2usize..8, rbs in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_zone(pairs, rbs, &mut rng);
        let game = ZoneGame::new(&inst.members, &inst.rbs, &inst.snapshot, inst.weights);
        let initial = game.random_assignment(&mut rng);
        let out = solve_zone_matching(&game, initial, &MatchingOptions::default(), &mut rng).unwrap();
        prop_assert!(out.converged);
        let report = is_pairwise_stable(&game, &out.assign);
        prop_assert!(report.stable, "{:?}", report.witness);
        prop_assert!(game.is_valid(&out.assign));
    }
}
