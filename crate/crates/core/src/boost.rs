//! Boosting heritability: correlation screening followed by repeated random
//! sample splitting. In every split one half selects variants with a
//! cross-validated elastic net and the other half estimates the noise variance
//! by least squares on the selected variants; the halves then swap roles.
//!
//! Replicates only depend on `(data, seed, replicate index)`, so they can be
//! evaluated in any order or concurrently (see [`boost_replicate`] and
//! [`aggregate`]) and still give bit-identical results.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::enet::{self, PenaltySpec, SolverOptions};
use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::linalg::{dot, least_squares, norm_sq, Matrix};
use crate::model::{
    clamp_unit, phenotypic_variance, HeritabilityEstimate, IntervalKind, Method, PhenotypeVector,
    SplitEstimate, SplitHalf, VarianceConvention,
};
use crate::rng::{mix_seed, stream_rng, SimRng};
use crate::sparse::DEFAULT_ALPHA_MIX;
use crate::stats::quantile_sorted;

#[derive(Clone, Debug, PartialEq)]
pub struct BoostConfig {
    /// Number of split replicates `B`; each yields two split estimates.
    pub replicates: usize,
    /// Fraction of the least correlated variants removed before splitting.
    pub drop_frac: f64,
    pub enet: PenaltySpec,
    pub interval_quantiles: (f64, f64),
    /// Largest support carried into least squares; `None` means `floor(n/2) - 2`.
    pub max_support: Option<usize>,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            replicates: 100,
            drop_frac: 0.25,
            enet: PenaltySpec::cross_validated(DEFAULT_ALPHA_MIX),
            interval_quantiles: (0.025, 0.975),
            max_support: None,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Spec("need at least one replicate".into()));
        }
        if !(0.0..1.0).contains(&self.drop_frac) {
            return Err(Error::Spec("drop_frac must lie in [0, 1)".into()));
        }
        let (lo, hi) = self.interval_quantiles;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Spec("interval quantiles must satisfy 0 <= lo < hi <= 1".into()));
        }
        self.enet.validate()
    }

    pub fn support_cap(&self, n: usize) -> usize {
        self.max_support.unwrap_or((n / 2).saturating_sub(2))
    }
}

/// Indices (ascending) of the `ceil((1 - drop_frac) p)` columns with the
/// largest `|corr(x_j, y)|`. Zero-variance columns count as zero correlation;
/// ties go to the lower index.
pub fn screen_correlation(x: &Matrix, y: &[f64], drop_frac: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&drop_frac) {
        return Err(Error::Spec("drop_frac must lie in [0, 1)".into()));
    }
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    let p = x.cols();
    let keep = libm::ceil((1.0 - drop_frac) * p as f64) as usize;
    let y_norm = libm::sqrt(norm_sq(y));
    let score: Vec<f64> = (0..p)
        .map(|j| {
            let col = x.col(j);
            let denom = libm::sqrt(norm_sq(col)) * y_norm;
            if denom > 0.0 {
                (dot(col, y) / denom).abs()
            } else {
                0.0
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let mut kept = order[..keep.min(p)].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// Uniformly random partition into halves of sizes `floor(n/2)` and
/// `ceil(n/2)`, each sorted.
pub fn split_halves(n: usize, rng: &mut SimRng) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let (a, b) = order.split_at(n / 2);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Noise variance `RSS / (m - r - 1)` of the least-squares fit (with
/// intercept) of `y` on the columns of `x`, where `r` is the numerical rank
/// of the centered design.
pub fn ols_noise_variance(x: &Matrix, y: &[f64]) -> Result<f64> {
    let m = x.rows();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: y.len(),
        });
    }
    if m < 2 || m <= x.cols() + 1 {
        return Err(Error::SupportTooLarge {
            rows: m,
            support: x.cols(),
        });
    }
    let ym = y.iter().sum::<f64>() / m as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    if x.cols() == 0 {
        return Ok(norm_sq(&yc) / (m - 1) as f64);
    }
    let mut xc = x.clone();
    xc.center_columns();
    let fit = least_squares(&xc, &yc)?;
    let dof = m - fit.rank - 1;
    Ok(fit.rss.max(0.0) / dof as f64)
}

/// Elastic-net selection on one half: returns the support (ascending), after
/// keeping only the `cap` largest-magnitude coefficients.
pub fn select_support(
    x_half: &Matrix,
    y_half: &[f64],
    spec: &PenaltySpec,
    cap: usize,
    rng: &mut SimRng,
) -> Result<Vec<usize>> {
    let mut xc = x_half.clone();
    xc.center_columns();
    let ym = y_half.iter().sum::<f64>() / y_half.len() as f64;
    let yc: Vec<f64> = y_half.iter().map(|v| v - ym).collect();
    let fit = enet::elastic_net(&xc, &yc, spec, rng, SolverOptions::default())?;
    let beta = fit.beta.values();
    let mut support = fit.beta.support();
    if support.len() > cap {
        support.sort_by(|&a, &b| beta[b].abs().total_cmp(&beta[a].abs()).then(a.cmp(&b)));
        support.truncate(cap);
        support.sort_unstable();
    }
    Ok(support)
}

#[allow(clippy::too_many_arguments)]
fn split_estimate(
    x: &Matrix,
    y: &[f64],
    select_rows: &[usize],
    estimate_rows: &[usize],
    var_y: f64,
    cfg: &BoostConfig,
    rng: &mut SimRng,
    half: SplitHalf,
    replicate: usize,
) -> Result<SplitEstimate> {
    let cap = cfg.support_cap(x.rows());
    let y_sel: Vec<f64> = select_rows.iter().map(|&i| y[i]).collect();
    let support = select_support(&x.select_rows(select_rows), &y_sel, &cfg.enet, cap, rng)?;
    let x_est = x.select_rows(estimate_rows).select_columns(&support);
    let y_est: Vec<f64> = estimate_rows.iter().map(|&i| y[i]).collect();
    let sigma2_hat = ols_noise_variance(&x_est, &y_est)?;
    Ok(SplitEstimate {
        replicate,
        half,
        support_size: support.len(),
        sigma2_hat,
        h2: clamp_unit(1.0 - sigma2_hat / var_y),
    })
}

/// One replicate (split, both selection directions) on screened data.
/// `var_y` is the full-sample phenotypic variance.
pub fn boost_replicate(
    x: &Matrix,
    y: &[f64],
    var_y: f64,
    cfg: &BoostConfig,
    replicate: usize,
) -> Result<[SplitEstimate; 2]> {
    let seed = mix_seed(cfg.seed, replicate as u64);
    let (a, b) = split_halves(x.rows(), &mut stream_rng(seed, 0));
    let first = split_estimate(
        x,
        y,
        &a,
        &b,
        var_y,
        cfg,
        &mut stream_rng(seed, 1),
        SplitHalf::ASelectBEstimate,
        replicate,
    )?;
    let second = split_estimate(
        x,
        y,
        &b,
        &a,
        var_y,
        cfg,
        &mut stream_rng(seed, 2),
        SplitHalf::BSelectAEstimate,
        replicate,
    )?;
    Ok([first, second])
}

/// Data prepared for the replicate loop: screened design, centered phenotype
/// and its variance.
#[derive(Clone, Debug)]
pub struct BoostInput {
    pub design: Matrix,
    pub phenotype: Vec<f64>,
    pub var_y: f64,
    pub kept_columns: Vec<usize>,
}

pub fn prepare(g: &GenotypeMatrix, y: &PhenotypeVector, cfg: &BoostConfig) -> Result<BoostInput> {
    cfg.validate()?;
    let x = g.require_centered()?;
    if x.rows() < 20 {
        return Err(Error::UnsupportedShape {
            n: x.rows(),
            p: x.cols(),
            reason: "boosting needs at least 20 samples",
        });
    }
    let y = y.center();
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    let var_y = phenotypic_variance(&y, VarianceConvention::Unbiased)?;
    if !(var_y > 0.0) {
        return Err(Error::DegeneratePhenotype(var_y));
    }
    let kept_columns = screen_correlation(x, y.values(), cfg.drop_frac)?;
    Ok(BoostInput {
        design: x.select_columns(&kept_columns),
        phenotype: y.values().to_vec(),
        var_y,
        kept_columns,
    })
}

/// Combines replicate outcomes (in replicate order) into the final estimate:
/// mean of all split values and their empirical quantile interval.
pub fn aggregate(
    outcomes: Vec<Result<[SplitEstimate; 2]>>,
    cfg: &BoostConfig,
) -> Result<HeritabilityEstimate> {
    let total = outcomes.len();
    let mut splits = Vec::with_capacity(2 * total);
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(pair) => splits.extend(pair),
            Err(e) => failures.push((r, e)),
        }
    }
    let ok = splits.len() / 2;
    let required = total.div_ceil(2);
    if ok == 0 || ok < required {
        return Err(Error::InsufficientReplicates { ok, required });
    }
    let mut values: Vec<f64> = splits.iter().map(|s| s.h2).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    let (ql, qh) = cfg.interval_quantiles;
    let lo = quantile_sorted(&values, ql);
    let hi = quantile_sorted(&values, qh);
    let mean_support =
        splits.iter().map(|s| s.support_size as f64).sum::<f64>() / splits.len() as f64;
    let mut est = HeritabilityEstimate::new(Method::BoostHer, mean)
        .with_interval(lo, hi, IntervalKind::Reliable)
        .with_iterations(total)
        .with_value("replicates_ok", ok as f64)
        .with_value("replicates_failed", failures.len() as f64)
        .with_value("mean_support", mean_support)
        .with_value("seed", cfg.seed as f64);
    est.diagnostics.splits = splits;
    for (r, e) in failures {
        est = est.flag(alloc::format!("replicate {r} failed: {e}"));
    }
    Ok(est)
}

/// Sequential BoostHer.
pub fn boost_heritability(
    g: &GenotypeMatrix,
    y: &PhenotypeVector,
    cfg: &BoostConfig,
) -> Result<HeritabilityEstimate> {
    let input = prepare(g, y, cfg)?;
    let outcomes = (0..cfg.replicates)
        .map(|r| boost_replicate(&input.design, &input.phenotype, input.var_y, cfg, r))
        .collect();
    aggregate(outcomes, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn split(replicate: usize, h2: f64) -> SplitEstimate {
        SplitEstimate {
            replicate,
            half: SplitHalf::ASelectBEstimate,
            support_size: 3,
            sigma2_hat: 1.0 - h2,
            h2,
        }
    }

    #[test]
    fn screening_counts_and_ties() {
        let x = Matrix::from_row_major(4, 4, &[
            1.0, 1.0, 0.0, 2.0, //
            -1.0, -1.0, 0.0, 1.0, //
            1.0, 1.0, 0.0, -1.0, //
            -1.0, -1.0, 0.0, -2.0,
        ])
        .unwrap();
        let y = [1.0, -1.0, 1.0, -1.0];
        // Columns 0 and 1 are tied at |corr| = 1, column 2 is constant.
        assert_eq!(screen_correlation(&x, &y, 0.25).unwrap(), vec![0, 1, 3]);
        assert_eq!(screen_correlation(&x, &y, 0.5).unwrap(), vec![0, 1]);
        assert_eq!(screen_correlation(&x, &y, 0.0).unwrap(), vec![0, 1, 2, 3]);
        assert!(screen_correlation(&x, &y, 1.0).is_err());
    }

    #[test]
    fn halves_for_odd_n() {
        let (a, b) = split_halves(11, &mut stream_rng(1, 0));
        assert_eq!((a.len(), b.len()), (5, 6));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert_eq!(split_halves(11, &mut stream_rng(1, 0)), (a, b));
    }

    #[test]
    fn ols_empty_support_is_sample_variance() {
        let y = [1.0, 2.0, 4.0, 7.0];
        let x = Matrix::zeros(4, 0);
        let v = ols_noise_variance(&x, &y).unwrap();
        assert!((v - crate::stats::variance(&y)).abs() < 1e-15);
    }

    #[test]
    fn ols_exact_fit_has_zero_noise() {
        let x = Matrix::from_row_major(5, 1, &[1.0, 2.0, 3.0, 4.0, 6.0]).unwrap();
        let y: Vec<f64> = x.col(0).iter().map(|v| 3.0 * v - 1.0).collect();
        assert!(ols_noise_variance(&x, &y).unwrap() < 1e-24);
    }

    #[test]
    fn ols_rejects_oversized_support() {
        let x = Matrix::zeros(4, 3);
        assert!(matches!(
            ols_noise_variance(&x, &[1.0, 2.0, 3.0, 4.0]),
            Err(Error::SupportTooLarge { rows: 4, support: 3 })
        ));
    }

    #[test]
    fn constant_splits_aggregate_to_a_point() {
        let cfg = BoostConfig::default();
        let outcomes = (0..4).map(|r| Ok([split(r, 0.6), split(r, 0.6)])).collect();
        let est = aggregate(outcomes, &cfg).unwrap();
        assert_eq!(est.h2, 0.6);
        let iv = est.interval.unwrap();
        assert_eq!((iv.lo, iv.hi), (0.6, 0.6));
        assert_eq!(iv.kind, IntervalKind::Reliable);
        assert_eq!(est.diagnostics.splits.len(), 8);
    }

    #[test]
    fn too_many_failures() {
        let cfg = BoostConfig::default();
        let outcomes = vec![
            Ok([split(0, 0.5), split(0, 0.5)]),
            Err(Error::DegenerateFit),
            Err(Error::DegenerateFit),
        ];
        assert_eq!(
            aggregate(outcomes, &cfg).unwrap_err(),
            Error::InsufficientReplicates { ok: 1, required: 2 }
        );
    }

    #[test]
    fn support_cap_truncates_by_magnitude() {
        let mut rng = stream_rng(3, 0);
        let n = 60;
        let mut x = Matrix::from_fn(n, 30, |_, _| rng.sample(StandardNormal));
        x.center_columns();
        let y: Vec<f64> = (0..n)
            .map(|i| 3.0 * x.get(i, 2) + 2.0 * x.get(i, 7) + x.get(i, 11) + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let spec = PenaltySpec::fixed(1.0, 0.05);
        let s = select_support(&x, &y, &spec, 2, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(s, vec![2, 7]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = BoostConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.interval_quantiles = (0.9, 0.1);
        assert!(cfg.validate().is_err());
        cfg = BoostConfig {
            replicates: 0,
            ..BoostConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(BoostConfig::default().support_cap(500), 248);
    }
}
