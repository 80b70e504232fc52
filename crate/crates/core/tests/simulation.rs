use herit_core::model::{oracle_estimate, phenotypic_variance, VarianceConvention};
use herit_core::rng::stream_rng;
use herit_core::simulate::*;
use herit_core::stats::{mean, std_dev, variance};

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

fn spec_with(n: usize, p: usize, blocks: usize, corr: f64, clusters: usize, seed: u64) -> SimulationSpec {
    let mut spec = SimulationSpec::penicillin_like(n, p, seed);
    spec.genotype.n_blocks = blocks;
    spec.genotype.block_corr = corr;
    spec.genotype.n_clusters = clusters;
    spec
}

#[test]
fn independent_columns_are_nearly_uncorrelated() {
    let mut total = 0.0;
    let mut count = 0usize;
    for seed in 0..20 {
        let spec = spec_with(500, 20, 4, 0.0, 1, seed);
        let g = simulate_genotypes(&spec, &mut stream_rng(seed, 0)).unwrap();
        let x = g.matrix();
        for a in 0..20 {
            for b in a + 1..20 {
                total += correlation(x.col(a), x.col(b)).abs();
                count += 1;
            }
        }
    }
    assert!(total / (count as f64) < 0.1);
}

#[test]
fn strong_blocks_correlate_within_more_than_between() {
    let spec = spec_with(500, 40, 4, 0.9, 1, 3);
    let g = simulate_genotypes(&spec, &mut stream_rng(3, 0)).unwrap();
    let x = g.matrix();
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0, 0.0, 0);
    for a in 0..40 {
        for b in a + 1..40 {
            let r = correlation(x.col(a), x.col(b)).abs();
            if a / 10 == b / 10 {
                within += r;
                nw += 1;
            } else {
                between += r;
                nb += 1;
            }
        }
    }
    assert!(within / nw as f64 > between / nb as f64);
}

#[test]
fn gaussian_effects_have_unit_scale() {
    let causal: Vec<usize> = (0..10_000).collect();
    let beta = draw_effects(10_000, &causal, EffectDistribution::Gaussian, &mut stream_rng(5, 1));
    let v = beta.values();
    assert!(mean(v).abs() <= 0.05);
    assert!((variance(v) - 1.0).abs() <= 0.05);
}

fn kurtosis(v: &[f64]) -> f64 {
    let m = mean(v);
    let s2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / v.len() as f64;
    m4 / (s2 * s2)
}

#[test]
fn student_t_effects_are_heavier_tailed() {
    let causal: Vec<usize> = (0..10_000).collect();
    let g = draw_effects(10_000, &causal, EffectDistribution::Gaussian, &mut stream_rng(6, 1));
    let t = draw_effects(10_000, &causal, EffectDistribution::StudentT3, &mut stream_rng(6, 1));
    assert!(kurtosis(t.values()) > kurtosis(g.values()));
}

#[test]
fn null_phenotype_is_unit_noise() {
    let mut spec = SimulationSpec::penicillin_like(500, 200, 7);
    spec.causal = CausalSpec::Null;
    let d = simulate_dataset(&spec).unwrap();
    assert_eq!(d.true_h2, 0.0);
    assert_eq!(d.true_effects.support_size(), 0);
    let v = phenotypic_variance(&d.phenotype.center(), VarianceConvention::Unbiased).unwrap();
    assert!((v - 1.0).abs() <= 0.15);
}

#[test]
fn gcta_phenotype_has_unit_expected_variance() {
    let vars: Vec<f64> = (0..20)
        .map(|seed| {
            let mut spec = SimulationSpec::penicillin_like(300, 400, seed);
            spec.model = PhenotypeModel::GctaMixed;
            spec.target_h2 = 0.5;
            let d = simulate_dataset(&spec).unwrap();
            phenotypic_variance(&d.phenotype.center(), VarianceConvention::Unbiased).unwrap()
        })
        .collect();
    assert!((mean(&vars) - 1.0).abs() <= 0.1);
}

#[test]
fn rescaled_fixed_effects_hit_target_exactly() {
    let d = simulate_dataset(&SimulationSpec::penicillin_like(200, 500, 8)).unwrap();
    assert!((d.true_h2 - 0.8).abs() < 1e-12);
    assert_eq!(d.causal.len(), 150);
    assert!(d.true_effects.support().iter().all(|j| d.causal.contains(j)));
}

#[test]
fn oracle_is_calibrated_at_full_scale() {
    let estimates: Vec<f64> = (0..50)
        .map(|seed| {
            let d = simulate_dataset(&SimulationSpec::penicillin_like(3051, 5000, 100 + seed)).unwrap();
            oracle_estimate(&d.phenotype.center(), d.sigma2_eps).unwrap().h2
        })
        .collect();
    assert!((mean(&estimates) - 0.8).abs() <= 0.05);
    assert!(std_dev(&estimates) < 0.05);
    assert!(estimates.iter().filter(|h| (0.75..=0.85).contains(*h)).count() >= 45);
}
