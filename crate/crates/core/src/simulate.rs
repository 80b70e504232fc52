//! Synthetic genotypes with block LD and clonal population structure, and
//! phenotypes simulated at an exactly controlled heritability.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};

use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::linalg::{norm_sq, Matrix};
use crate::model::{EffectVector, PhenotypeVector};
use crate::rng::{stream_rng, SimRng};
use crate::stats::normal_quantile;

#[derive(Clone, Debug, PartialEq)]
pub struct GenotypeSpec {
    /// Number of contiguous LD blocks the variants are split into.
    pub n_blocks: usize,
    /// Latent correlation between variants of the same block, in `[0, 1)`.
    pub block_corr: f64,
    /// Number of clonal clusters the samples are split into.
    pub n_clusters: usize,
    /// Standard deviation of the per-cluster shift of each variant's latent threshold.
    pub cluster_divergence: f64,
    /// Per-variant minor allele frequencies are drawn uniformly from this range.
    pub maf_range: (f64, f64),
}

impl Default for GenotypeSpec {
    fn default() -> Self {
        Self {
            n_blocks: 40,
            block_corr: 0.5,
            n_clusters: 5,
            cluster_divergence: 0.3,
            maf_range: (0.1, 0.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CausalSpec {
    /// Every variant in each of the given column ranges is causal.
    GeneBlocks(Vec<Range<usize>>),
    /// `k` variants chosen uniformly at random.
    RandomK(usize),
    /// No causal variants; the phenotype is pure noise.
    Null,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffectDistribution {
    Gaussian,
    StudentT3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhenotypeModel {
    FixedEffect,
    GctaMixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationSpec {
    pub n: usize,
    pub p: usize,
    pub genotype: GenotypeSpec,
    pub causal: CausalSpec,
    pub effect_dist: EffectDistribution,
    pub target_h2: f64,
    pub sigma2_eps: f64,
    pub model: PhenotypeModel,
    pub seed: u64,
}

/// Three gene-sized causal blocks of `width` variants spread over `p` columns.
pub fn default_causal_blocks(p: usize, width: usize) -> Vec<Range<usize>> {
    let width = width.min(p / 3).max(1);
    [p / 5, p / 2, (4 * p) / 5]
        .iter()
        .map(|&c| {
            let start = c.saturating_sub(width / 2).min(p - width);
            start..start + width
        })
        .collect()
}

impl SimulationSpec {
    /// Penicillin-resistance-like architecture: LD blocks of 50 variants,
    /// three causal blocks of 50, `h^2 = 0.8`, unit noise variance.
    pub fn penicillin_like(n: usize, p: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            genotype: GenotypeSpec {
                n_blocks: (p / 50).max(1),
                ..GenotypeSpec::default()
            },
            causal: CausalSpec::GeneBlocks(default_causal_blocks(p, 50)),
            effect_dist: EffectDistribution::Gaussian,
            target_h2: 0.8,
            sigma2_eps: 1.0,
            model: PhenotypeModel::FixedEffect,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.genotype;
        if self.n < 2 || self.p < 1 {
            return Err(Error::Spec("need n >= 2 and p >= 1".into()));
        }
        if g.n_blocks == 0 || self.p < g.n_blocks {
            return Err(Error::Spec(alloc::format!(
                "p = {} is smaller than n_blocks = {}",
                self.p,
                g.n_blocks
            )));
        }
        if !(0.0..1.0).contains(&g.block_corr) {
            return Err(Error::Spec("block_corr must lie in [0, 1)".into()));
        }
        if g.n_clusters == 0 || g.n_clusters > self.n {
            return Err(Error::Spec("n_clusters must lie in [1, n]".into()));
        }
        if !(g.cluster_divergence >= 0.0 && g.cluster_divergence.is_finite()) {
            return Err(Error::Spec("cluster_divergence must be >= 0".into()));
        }
        let (lo, hi) = g.maf_range;
        if !(lo > 0.0 && lo <= hi && hi <= 0.5) {
            return Err(Error::Spec("maf_range must satisfy 0 < lo <= hi <= 0.5".into()));
        }
        if !(self.target_h2 > 0.0 && self.target_h2 < 1.0) {
            return Err(Error::Spec("target_h2 must lie in (0, 1)".into()));
        }
        if !(self.sigma2_eps > 0.0 && self.sigma2_eps.is_finite()) {
            return Err(Error::Spec("sigma2_eps must be positive".into()));
        }
        if self.model == PhenotypeModel::FixedEffect {
            match &self.causal {
                CausalSpec::GeneBlocks(blocks) => {
                    if blocks.iter().all(|b| b.is_empty()) {
                        return Err(Error::Spec("causal set is empty".into()));
                    }
                    if blocks.iter().any(|b| b.end > self.p) {
                        return Err(Error::Spec("causal block exceeds p".into()));
                    }
                }
                CausalSpec::RandomK(k) => {
                    if *k == 0 || *k > self.p {
                        return Err(Error::Spec("random causal k must lie in [1, p]".into()));
                    }
                }
                CausalSpec::Null => {}
            }
        }
        Ok(())
    }

    /// Causal column indices (sorted, deduplicated).
    pub fn causal_indices(&self, rng: &mut SimRng) -> Vec<usize> {
        let mut idx: Vec<usize> = match &self.causal {
            CausalSpec::GeneBlocks(blocks) => blocks.iter().flat_map(|b| b.clone()).collect(),
            CausalSpec::RandomK(k) => {
                rand::seq::index::sample(rng, self.p, *k).into_iter().collect()
            }
            CausalSpec::Null => Vec::new(),
        };
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

/// Binary haploid genotypes from a thresholded Gaussian copula.
///
/// Within each contiguous block the latent variables share a common factor
/// with loading `sqrt(block_corr)`. Each sample belongs to one cluster, and
/// each cluster shifts every variant's threshold by an independent
/// `N(0, cluster_divergence^2)` amount, which produces cluster-specific allele
/// frequencies.
pub fn simulate_genotypes(spec: &SimulationSpec, rng: &mut SimRng) -> Result<GenotypeMatrix> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let g = &spec.genotype;

    let maf = Uniform::new_inclusive(g.maf_range.0, g.maf_range.1)
        .map_err(|e| Error::Spec(alloc::format!("{e}")))?;
    let thresholds: Vec<f64> = (0..p).map(|_| normal_quantile(1.0 - maf.sample(rng))).collect();

    let mut cluster_of: Vec<usize> = (0..n).map(|i| i % g.n_clusters).collect();
    cluster_of.shuffle(rng);
    let shifts: Vec<f64> = (0..g.n_clusters * p)
        .map(|_| g.cluster_divergence * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let load = libm::sqrt(g.block_corr);
    let idio = libm::sqrt(1.0 - g.block_corr);
    let mut x = Matrix::zeros(n, p);
    let mut factor = vec![0.0; n];
    for b in 0..g.n_blocks {
        let start = b * p / g.n_blocks;
        let end = (b + 1) * p / g.n_blocks;
        factor.iter_mut().for_each(|f| *f = rng.sample(StandardNormal));
        for j in start..end {
            let col = x.col_mut(j);
            for i in 0..n {
                let e: f64 = rng.sample(StandardNormal);
                let z = load * factor[i] + idio * e;
                let t = thresholds[j] + shifts[cluster_of[i] * p + j];
                col[i] = if z > t { 1.0 } else { 0.0 };
            }
        }
    }
    GenotypeMatrix::from_matrix(x)
}

/// Effects on the causal set, zero elsewhere. An empty causal set gives the
/// null (all-zero) effect vector.
pub fn draw_effects(
    p: usize,
    causal: &[usize],
    dist: EffectDistribution,
    rng: &mut SimRng,
) -> EffectVector {
    let mut beta = vec![0.0; p];
    let t3 = StudentT::new(3.0).expect("3 degrees of freedom is valid");
    for &j in causal {
        beta[j] = match dist {
            EffectDistribution::Gaussian => rng.sample(StandardNormal),
            EffectDistribution::StudentT3 => t3.sample(rng),
        };
        // A draw of exactly zero would silently shrink the support.
        if beta[j] == 0.0 {
            beta[j] = f64::MIN_POSITIVE;
        }
    }
    EffectVector::new(beta)
}

/// `beta^T Sigma_bar beta`, with `Sigma_bar` the sample covariance (divisor
/// `n - 1`) of the centered columns; computed as the sample variance of `X beta`
/// so only the support is touched.
pub fn genetic_variance(g: &GenotypeMatrix, beta: &EffectVector) -> Result<f64> {
    let x = g.require_centered()?;
    if beta.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            found: beta.len(),
        });
    }
    let fitted = x.mul_vec(beta.values());
    Ok(norm_sq(&fitted) / (x.rows() - 1) as f64)
}

/// Scales `beta0` so that `q / (q + sigma2_eps) = target_h2` exactly, where
/// `q` is the genetic variance under the sample covariance.
pub fn rescale_effects(
    beta0: &EffectVector,
    g: &GenotypeMatrix,
    target_h2: f64,
    sigma2_eps: f64,
) -> Result<EffectVector> {
    if !(target_h2 > 0.0 && target_h2 < 1.0) {
        return Err(Error::Spec("target_h2 must lie in (0, 1)".into()));
    }
    let q = genetic_variance(g, beta0)?;
    if !(q > 0.0) {
        return Err(Error::DegenerateCausal);
    }
    Ok(beta0.scaled(rescale_factor(q, target_h2, sigma2_eps)))
}

/// `sqrt(sigma2 * h2 / (q * (1 - h2)))`
pub fn rescale_factor(q: f64, target_h2: f64, sigma2_eps: f64) -> f64 {
    libm::sqrt(sigma2_eps * target_h2 / (q * (1.0 - target_h2)))
}

/// `y = X beta + eps`, `eps ~ N(0, sigma2_eps)` iid.
pub fn simulate_phenotype_fixed(
    g: &GenotypeMatrix,
    beta: &EffectVector,
    sigma2_eps: f64,
    rng: &mut SimRng,
) -> Result<PhenotypeVector> {
    let x = g.require_centered()?;
    if beta.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            found: beta.len(),
        });
    }
    if !(sigma2_eps >= 0.0) {
        return Err(Error::Spec("sigma2_eps must be >= 0".into()));
    }
    let sd = libm::sqrt(sigma2_eps);
    let mut y = x.mul_vec(beta.values());
    for v in y.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += sd * e;
    }
    PhenotypeVector::new(y)
}

/// Phenotype drawn under the random-effects (GCTA) model.
#[derive(Clone, Debug)]
pub struct GctaPhenotype {
    pub phenotype: PhenotypeVector,
    pub sigma2_eps: f64,
    /// Unit-variance genotypes the phenotype was generated from.
    pub standardized: GenotypeMatrix,
    pub effects: EffectVector,
}

/// Standardizes the columns, draws `beta_j ~ N(0, h2 / p)` for every variant and
/// `eps ~ N(0, 1 - h2)`.
pub fn simulate_phenotype_gcta(
    g: &GenotypeMatrix,
    target_h2: f64,
    rng: &mut SimRng,
) -> Result<GctaPhenotype> {
    if !(0.0..=1.0).contains(&target_h2) {
        return Err(Error::Spec("target_h2 must lie in [0, 1]".into()));
    }
    g.require_centered()?;
    let standardized = g.standardize()?;
    let p = standardized.p();
    let effect_sd = libm::sqrt(target_h2 / p as f64);
    let beta: Vec<f64> = (0..p)
        .map(|_| effect_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let effects = EffectVector::new(beta);
    let sigma2_eps = 1.0 - target_h2;
    let phenotype = simulate_phenotype_fixed(&standardized, &effects, sigma2_eps, rng)?;
    Ok(GctaPhenotype {
        phenotype,
        sigma2_eps,
        standardized,
        effects,
    })
}

#[derive(Clone, Debug)]
pub struct SimulatedDataset {
    /// Raw 0/1 genotypes, as they would be exported.
    pub genotypes: GenotypeMatrix,
    /// Centered (fixed-effect model) or standardized (GCTA model) genotypes
    /// the phenotype was generated from.
    pub design: GenotypeMatrix,
    pub phenotype: PhenotypeVector,
    pub true_effects: EffectVector,
    pub causal: Vec<usize>,
    pub true_h2: f64,
    pub sigma2_eps: f64,
}

/// `q / (q + sigma2_eps)` under the sample covariance of `design`.
pub fn true_h2(dataset: &SimulatedDataset) -> Result<f64> {
    true_h2_of(&dataset.design, &dataset.true_effects, dataset.sigma2_eps)
}

pub fn true_h2_of(g: &GenotypeMatrix, beta: &EffectVector, sigma2_eps: f64) -> Result<f64> {
    let q = genetic_variance(g, beta)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok(q / (q + sigma2_eps))
}

/// A phenotype simulated on a fixed genotype matrix.
#[derive(Clone, Debug)]
pub struct SimulatedTrait {
    pub design: GenotypeMatrix,
    pub phenotype: PhenotypeVector,
    pub true_effects: EffectVector,
    pub causal: Vec<usize>,
    pub true_h2: f64,
    pub sigma2_eps: f64,
}

/// Draws effects and noise on the centered genotypes `centered` following the
/// phenotype part of `spec` (model, causal set, effect law, target, noise).
/// The causal set refers to the columns of `centered`.
pub fn simulate_trait(spec: &SimulationSpec, centered: &GenotypeMatrix, rng: &mut SimRng) -> Result<SimulatedTrait> {
    centered.require_centered()?;
    match spec.model {
        PhenotypeModel::FixedEffect => {
            let mut spec = spec.clone();
            spec.p = centered.p();
            let causal = spec.causal_indices(rng);
            if causal.iter().any(|&j| j >= spec.p) {
                return Err(Error::Spec("causal index beyond the number of variants".into()));
            }
            let beta = if causal.is_empty() {
                EffectVector::zeros(spec.p)
            } else {
                let beta0 = draw_effects(spec.p, &causal, spec.effect_dist, rng);
                rescale_effects(&beta0, centered, spec.target_h2, spec.sigma2_eps)?
            };
            let phenotype = simulate_phenotype_fixed(centered, &beta, spec.sigma2_eps, rng)?;
            let h2 = true_h2_of(centered, &beta, spec.sigma2_eps)?;
            Ok(SimulatedTrait {
                design: centered.clone(),
                phenotype,
                true_effects: beta,
                causal,
                true_h2: h2,
                sigma2_eps: spec.sigma2_eps,
            })
        }
        PhenotypeModel::GctaMixed => {
            let sim = simulate_phenotype_gcta(centered, spec.target_h2, rng)?;
            let h2 = true_h2_of(&sim.standardized, &sim.effects, sim.sigma2_eps)?;
            Ok(SimulatedTrait {
                causal: (0..centered.p()).collect(),
                design: sim.standardized,
                phenotype: sim.phenotype,
                true_effects: sim.effects,
                true_h2: h2,
                sigma2_eps: sim.sigma2_eps,
            })
        }
    }
}

/// Full simulation from a specification; a pure function of the spec (seed included).
pub fn simulate_dataset(spec: &SimulationSpec) -> Result<SimulatedDataset> {
    spec.validate()?;
    let mut geno_rng = stream_rng(spec.seed, 0);
    let genotypes = simulate_genotypes(spec, &mut geno_rng)?;
    let centered = genotypes.impute_and_center();
    let t = simulate_trait(spec, &centered, &mut stream_rng(spec.seed, 1))?;
    Ok(SimulatedDataset {
        genotypes,
        design: t.design,
        phenotype: t.phenotype,
        true_effects: t.true_effects,
        causal: t.causal,
        true_h2: t.true_h2,
        sigma2_eps: t.sigma2_eps,
    })
}

/// `k` distinct row indices drawn without replacement, in ascending order.
pub fn subsample_rows(n: usize, k: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut rows: Vec<usize> = rand::seq::index::sample(rng, n, k.min(n)).into_iter().collect();
    rows.sort_unstable();
    rows
}
