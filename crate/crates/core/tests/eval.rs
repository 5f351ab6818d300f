use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vargan::arch::ArchConfig;
use vargan::data::{Dataset, FaceRanges};
use vargan::eval::*;
use vargan::nn::Tensor;

fn dataset(n: usize, ranges: &FaceRanges) -> Dataset {
    Dataset::generate(n, 32, 5, 11, ranges).unwrap()
}

fn normal_points(rng: &mut ChaCha8Rng, n: usize, mean: f64) -> Vec<Vec<f64>> {
    let d = Normal::new(mean, 1.0).unwrap();
    (0..n).map(|_| vec![d.sample(rng)]).collect()
}

#[test]
fn oracle_reaches_target_and_calibrates_fidelity() {
    let ds = dataset(2000, &FaceRanges::default());
    let opts = OracleOptions::default();
    let r = train_oracle(&ds, &ArchConfig::desk(), &opts).unwrap();
    assert!(r.holdout_error < opts.target_error);
    assert!(r.train_error <= r.holdout_error, "{} > {}", r.train_error, r.holdout_error);
    assert_eq!((r.train_records, r.holdout_records), (1600, 400));

    let targets = holdout_targets(&ds, opts.holdout_fraction, 16).unwrap();
    let cheat = renderer_fidelity(&ds, r.net(), &targets, 16, 3).unwrap();
    assert!(cheat <= r.holdout_error + 0.01, "renderer {cheat} vs holdout {}", r.holdout_error);
}

#[test]
fn noise_free_oracle_is_tighter() {
    let ds = dataset(5000, &FaceRanges::noise_free());
    let opts = OracleOptions {
        target_error: 0.02,
        max_steps: 8000,
        ..Default::default()
    };
    let r = train_oracle(&ds, &ArchConfig::desk(), &opts).unwrap();
    assert!(r.holdout_error < 0.02);
}

#[test]
fn permuted_targets_cannot_be_learned() {
    let ds = dataset(1000, &FaceRanges::default()).with_rotated_targets(1);
    let opts = OracleOptions {
        max_steps: 500,
        ..Default::default()
    };
    let r = fit_oracle(&ds, &ArchConfig::desk(), &opts).unwrap();
    // Error of always answering the train-set mean.
    let (train, hold) = holdout_split(&ds, opts.holdout_fraction);
    let dim = train.target_dim();
    let mean: Vec<f64> = (0..dim)
        .map(|c| (0..train.len()).map(|i| train.target(i)[c]).sum::<f64>() / train.len() as f64)
        .collect();
    let idx: Vec<usize> = (0..hold.len()).collect();
    let (_, y) = hold.batch(&idx).unwrap();
    let guess = Tensor::from_fn(y.shape(), |i| mean[i % dim]);
    let chance = landmark_error(&guess, &y).unwrap();
    assert!(r.holdout_error > 2.0 * opts.target_error, "{}", r.holdout_error);
    assert!(r.holdout_error > 0.9 * chance, "{} vs chance {chance}", r.holdout_error);
    assert!(train_oracle(&ds, &ArchConfig::desk(), &opts).is_err());
}

#[test]
fn oracle_needs_enough_records() {
    let ds = dataset(999, &FaceRanges::default());
    assert!(fit_oracle(&ds, &ArchConfig::desk(), &OracleOptions::default()).is_err());
}

#[test]
fn random_pair_error_matches_direct_average() {
    let ds = dataset(300, &FaceRanges::default());
    let targets = holdout_targets(&ds, 0.2, 4).unwrap();
    let mc = random_pair_error(&ds, &targets, 2000, 1).unwrap();
    let mut exact = 0.0;
    for t in 0..targets.batch() {
        for i in 0..ds.len() {
            let pred = Tensor::new(vec![1, 10], ds.target(i).to_vec()).unwrap();
            let want = Tensor::new(vec![1, 10], targets.sample(t).to_vec()).unwrap();
            exact += landmark_error(&pred, &want).unwrap();
        }
    }
    exact /= (targets.batch() * ds.len()) as f64;
    assert!((mc - exact).abs() < 0.01 * exact + 0.002, "{mc} vs {exact}");
}

#[test]
fn uniform_noise_diversity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Tensor::from_fn(&[200, 1, 16, 16], |_| rng.random::<f64>());
    let d = diversity_score(&x).unwrap();
    assert!((d - 1.0 / 6.0).abs() < 0.005, "{d}");
}

#[test]
fn knn_entropy_tolerates_duplicates() {
    let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![(i / 5) as f64]).collect();
    assert!(knn_entropy(&pts, 3).unwrap().is_finite());
}

#[test]
fn knn_entropy_gaussian_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = normal_points(&mut rng, 3000, 0.0);
    let g2: Vec<Vec<f64>> = g.iter().map(|p| vec![2.0 * p[0]]).collect();
    let (h, h2) = (knn_entropy(&g, 3).unwrap(), knn_entropy(&g2, 3).unwrap());
    assert!((h2 - h - 2f64.ln()).abs() < 1e-9);
    let exact = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    assert!((h - exact).abs() < 0.08, "{h}");
}

#[test]
fn jsd_of_shifted_gaussians_is_moderate() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = normal_points(&mut rng, 2000, 0.0);
    let same = normal_points(&mut rng, 2000, 0.0);
    let far = normal_points(&mut rng, 2000, 3.0);
    assert!(sample_set_jsd(&a, &same).unwrap() < 0.02);
    let v = sample_set_jsd(&a, &far).unwrap();
    assert!(v > 0.4 && v < 2f64.ln());
}

fn point_sets() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let set = |n| prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), n);
    (set(2..40usize), set(2..40usize))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jsd_symmetric_and_bounded((a, b) in point_sets()) {
        let ab = sample_set_jsd(&a, &b).unwrap();
        let ba = sample_set_jsd(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1e-15..=2f64.ln() + 1e-12).contains(&ab));
    }

    #[test]
    fn diversity_nonnegative_and_order_free(vals in prop::collection::vec(0.0f64..1.0, 5 * 9), shift in 0usize..5) {
        let x = Tensor::new(vec![5, 1, 3, 3], vals.clone()).unwrap();
        let mut rotated = vals;
        rotated.rotate_left(shift * 9);
        let y = Tensor::new(vec![5, 1, 3, 3], rotated).unwrap();
        let (dx, dy) = (diversity_score(&x).unwrap(), diversity_score(&y).unwrap());
        prop_assert!(dx >= 0.0);
        prop_assert!((dx - dy).abs() < 1e-12);
        let first = x.sample(0).to_vec();
        let same = Tensor::from_fn(&[5, 1, 3, 3], |i| first[i % 9]);
        prop_assert_eq!(diversity_score(&same).unwrap(), 0.0);
        let distinct = x.sample(1) != x.sample(0);
        prop_assert_eq!(dx > 0.0, distinct || (2..5).any(|i| x.sample(i) != x.sample(0)));
    }

    #[test]
    fn grid_is_sized_and_deterministic(n in 1usize..10, cols in 1usize..5) {
        let x = Tensor::full(&[n, 1, 4, 4], 0.5);
        let g = grid_bytes(&x, cols).unwrap();
        let c = cols.min(n);
        let r = n.div_ceil(c);
        let header = format!("P5\n{} {}\n255\n", 5 * c - 1, 5 * r - 1);
        prop_assert!(g.starts_with(header.as_bytes()));
        prop_assert_eq!(g.len(), header.len() + (5 * c - 1) * (5 * r - 1));
        prop_assert_eq!(grid_bytes(&x, cols).unwrap(), g);
    }
}
