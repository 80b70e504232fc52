use herit_core::boost::*;
use herit_core::linalg::Matrix;
use herit_core::model::{IntervalKind, PhenotypeVector};
use herit_core::rng::stream_rng;
use herit_core::simulate::{simulate_dataset, SimulationSpec};
use herit_core::stats::std_dev;
use herit_core::{Error, GenotypeMatrix};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, p: usize, seed: u64) -> Matrix {
    let mut rng = stream_rng(seed, 0);
    Matrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 1);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Residual sum of squares and rank after projecting `y` on the span of the
/// intercept and the columns, by modified Gram-Schmidt with a drop tolerance.
fn projection_oracle(x: &Matrix, y: &[f64]) -> (f64, usize) {
    let m = x.rows();
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (m as f64).sqrt(); m]];
    for j in 0..x.cols() {
        let mut v = x.col(j).to_vec();
        let scale = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..2 {
            for u in &basis {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-9 * scale.max(1.0) {
            basis.push(v.iter().map(|a| a / norm).collect());
        }
    }
    let mut r = y.to_vec();
    for u in &basis {
        let d: f64 = r.iter().zip(u).map(|(a, b)| a * b).sum();
        r.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
    }
    (r.iter().map(|a| a * a).sum(), basis.len() - 1)
}

#[test]
fn duplicated_columns_do_not_change_the_noise_variance() {
    for seed in 0..10 {
        let (m, s) = (40, 6);
        let x = gaussian(m, s, seed);
        let y = noise(m, seed);
        let dup = Matrix::from_fn(m, s + 2, |i, j| if j < s { x.get(i, j) } else { x.get(i, j - s) });
        let plain = ols_noise_variance(&x, &y).unwrap();
        let with_dup = ols_noise_variance(&dup, &y).unwrap();
        let (rss, rank) = projection_oracle(&dup, &y);
        assert_eq!(rank, s);
        let oracle = rss / (m - rank - 1) as f64;
        assert!((with_dup - oracle).abs() <= 1e-10 * oracle);
        assert!((plain - oracle).abs() <= 1e-10 * oracle);
    }
}

#[test]
fn empty_selection_gives_sample_variance() {
    let y = noise(30, 1);
    let m = y.iter().sum::<f64>() / 30.0;
    let var = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 29.0;
    let x = Matrix::from_fn(30, 0, |_, _| 0.0);
    assert!((ols_noise_variance(&x, &y).unwrap() - var).abs() <= 1e-12);
}

#[test]
fn oversized_support_is_an_error() {
    let x = gaussian(10, 9, 2);
    assert!(matches!(ols_noise_variance(&x, &noise(10, 2)), Err(Error::SupportTooLarge { .. })));
}

#[test]
fn split_halves_are_disjoint_and_exhaustive() {
    let mut rng = stream_rng(11, 0);
    for draw in 0..1000 {
        let n = 20 + draw % 37;
        let (a, b) = split_halves(n, &mut rng);
        assert_eq!(a.len(), n / 2);
        assert_eq!(b.len(), n - n / 2);
        let mut seen = vec![false; n];
        for &i in a.iter().chain(&b) {
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }
}

#[test]
fn same_seed_gives_same_split() {
    assert_eq!(split_halves(50, &mut stream_rng(4, 0)), split_halves(50, &mut stream_rng(4, 0)));
}

proptest! {
    #[test]
    fn screening_keeps_the_stated_count(p in 1usize..200, drop in 0.0f64..0.99, seed in 0u64..1000) {
        let x = gaussian(15, p, seed);
        let y = noise(15, seed);
        let kept = screen_correlation(&x, &y, drop).unwrap();
        prop_assert_eq!(kept.len(), ((1.0 - drop) * p as f64).ceil() as usize);
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn screening_keeps_a_copy_of_the_phenotype() {
    for seed in 0..20 {
        let y = noise(25, seed);
        let mut x = gaussian(25, 40, seed);
        let target = (seed as usize * 13) % 40;
        x.col_mut(target).copy_from_slice(&y);
        let kept = screen_correlation(&x, &y, 0.9).unwrap();
        assert!(kept.contains(&target));
    }
}

#[test]
fn screening_without_drop_is_identity() {
    let x = gaussian(12, 30, 5);
    assert_eq!(screen_correlation(&x, &noise(12, 5), 0.0).unwrap(), (0..30).collect::<Vec<_>>());
}

fn small_data(seed: u64) -> (GenotypeMatrix, PhenotypeVector) {
    let mut spec = SimulationSpec::penicillin_like(60, 120, seed);
    spec.causal = herit_core::simulate::CausalSpec::GeneBlocks(vec![0..10]);
    let d = simulate_dataset(&spec).unwrap();
    (d.design, d.phenotype)
}

fn cfg(replicates: usize, seed: u64) -> BoostConfig {
    BoostConfig {
        replicates,
        seed,
        ..BoostConfig::default()
    }
}

#[test]
fn boost_is_deterministic_for_a_seed() {
    let (g, y) = small_data(1);
    let a = boost_heritability(&g, &y, &cfg(8, 42)).unwrap();
    let b = boost_heritability(&g, &y, &cfg(8, 42)).unwrap();
    assert_eq!(a, b);
    let c = boost_heritability(&g, &y, &cfg(8, 43)).unwrap();
    assert_ne!(a.diagnostics.splits, c.diagnostics.splits);
}

#[test]
fn point_lies_within_the_full_range_interval() {
    for seed in 0..5 {
        let (g, y) = small_data(10 + seed);
        let mut c = cfg(10, seed);
        c.interval_quantiles = (0.0, 1.0);
        let est = boost_heritability(&g, &y, &c).unwrap();
        let iv = est.interval.unwrap();
        assert_eq!(iv.kind, IntervalKind::Reliable);
        let values: Vec<f64> = est.diagnostics.splits.iter().map(|s| s.h2).collect();
        assert_eq!(values.len(), 20);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((iv.lo, iv.hi), (lo, hi));
        assert!(lo <= est.h2 && est.h2 <= hi);
        let cap = 60 / 2 - 2;
        assert!(est.diagnostics.splits.iter().all(|s| s.support_size <= cap && (0.0..=1.0).contains(&s.h2)));
    }
}

#[test]
fn more_replicates_stabilize_the_estimate() {
    let (g, y) = small_data(3);
    let spread = |b: usize| {
        let points: Vec<f64> = (0..20)
            .map(|seed| boost_heritability(&g, &y, &cfg(b, 1000 + seed)).unwrap().h2)
            .collect();
        std_dev(&points)
    };
    let (sd10, sd100) = (spread(10), spread(100));
    assert!(sd100 < sd10, "sd at B=100 {sd100}, at B=10 {sd10}");
}
