//! Plug-in heritability estimators built on penalized regression: the
//! elastic-net signal-variance estimator and the scaled (square-root) lasso
//! noise-variance estimator.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::direct::LOG_HALF_MAGNITUDE;
use crate::enet::{self, CoordinateDescent, PenaltySpec, SolverOptions};
use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::linalg::{norm_sq, Matrix};
use crate::model::{
    phenotypic_variance, raw_heritability_from_noise, EffectVector, HeritabilityEstimate,
    IntervalKind, Method, PhenotypeVector, VarianceConvention,
};
use crate::rng::stream_rng;

/// Default elastic-net mixing weight for the plug-in estimator and BoostHer.
pub const DEFAULT_ALPHA_MIX: f64 = 0.01;

/// Variance (divisor `n - 1`) of the fitted values `X beta` on centered columns.
pub fn fitted_variance(x: &Matrix, beta: &[f64]) -> f64 {
    let n = x.rows();
    let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    if support.is_empty() || n < 2 {
        return 0.0;
    }
    let mut fitted = vec![0.0; n];
    for &j in &support {
        crate::linalg::axpy(beta[j], x.col(j), &mut fitted);
    }
    let m = fitted.iter().sum::<f64>() / n as f64;
    fitted.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Elastic net with a cross-validated penalty, then `h2 = Var(X_S beta_S) / Var(y)`.
/// Fold assignment is drawn from `seed`. No interval is produced.
pub fn enet_heritability(
    g: &GenotypeMatrix,
    y: &PhenotypeVector,
    spec: &PenaltySpec,
    seed: u64,
) -> Result<HeritabilityEstimate> {
    let x = g.require_centered()?;
    let y = y.center();
    let var_y = phenotypic_variance(&y, VarianceConvention::Unbiased)?;
    let mut rng = stream_rng(seed, 0);
    let fit = enet::elastic_net(x, y.values(), spec, &mut rng, SolverOptions::default())?;
    let k = fit.beta.support_size();
    let signal = fitted_variance(x, fit.beta.values());
    if !(var_y > 0.0) {
        return Err(Error::DegeneratePhenotype(var_y));
    }
    let est = HeritabilityEstimate::new(Method::Enet, signal / var_y)
        .with_support(k)
        .with_objective(fit.objective)
        .with_value("lambda", fit.lambda)
        .with_value("kkt_residual", fit.kkt_residual)
        .with_value("cv_seed", seed as f64);
    Ok(if k == 0 { est.flag("empty support") } else { est })
}

/// Outer iteration cap of the scaled lasso.
pub const SCALED_LASSO_MAX_ITER: usize = 100;
/// Relative change in the noise level that ends the scaled-lasso iteration.
pub const SCALED_LASSO_TOL: f64 = 1e-6;
/// Inner lasso KKT tolerance, relative to the root mean square of `y`.
pub const SCALED_LASSO_INNER_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ScaledLassoFit {
    pub beta: EffectVector,
    pub sigma_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lambda0: f64,
}

/// `sqrt(2 log p / n)`
pub fn default_lambda0(n: usize, p: usize) -> f64 {
    sqrt(2.0 * libm::log(p as f64) / n as f64)
}

/// Jointly estimates effects and noise level by alternating a lasso at
/// penalty `lambda0 * sigma` with `sigma = ||y - X beta|| / sqrt(n)`.
/// The penalty acts on column-normalized variants, so `lambda0` keeps its
/// usual calibration whatever the genotype coding.
pub fn scaled_lasso_raw(x: &Matrix, y: &[f64], lambda0: Option<f64>) -> Result<ScaledLassoFit> {
    let n = x.rows();
    let p = x.cols();
    if n < 2 || p == 0 {
        return Err(Error::UnsupportedShape {
            n,
            p,
            reason: "scaled lasso needs at least two samples and one variant",
        });
    }
    let lambda0 = lambda0.unwrap_or_else(|| default_lambda0(n, p.max(2)));
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(Error::Spec("lambda0 must be positive".into()));
    }
    let scale = sqrt(norm_sq(y) / n as f64);
    if !(scale > 0.0) {
        return Err(Error::DegeneratePhenotype(scale * scale));
    }
    // Penalize on unit-norm columns (`||z_j||^2 = n`) and map back.
    let col_scale: Vec<f64> = (0..p).map(|j| sqrt(norm_sq(x.col(j)) / n as f64)).collect();
    let z = Matrix::from_fn(n, p, |i, j| {
        if col_scale[j] > 0.0 {
            x.get(i, j) / col_scale[j]
        } else {
            0.0
        }
    });
    let cd = CoordinateDescent::new(
        &z,
        SolverOptions {
            kkt_tol: SCALED_LASSO_INNER_TOL * scale,
            ..SolverOptions::default()
        },
    );
    let mut beta = vec![0.0; p];
    let mut resid = y.to_vec();
    let mut sigma = scale;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < SCALED_LASSO_MAX_ITER {
        iterations += 1;
        cd.solve(lambda0 * sigma, 1.0, &mut beta, &mut resid, None, None)?;
        let next = sqrt(norm_sq(&resid) / n as f64);
        if next <= 1e-10 * scale {
            return Err(Error::DegenerateFit);
        }
        let change = (next - sigma).abs() / sigma;
        sigma = next;
        if change <= SCALED_LASSO_TOL {
            converged = true;
            break;
        }
    }
    for (b, &c) in beta.iter_mut().zip(&col_scale) {
        if *b != 0.0 {
            *b /= c;
        }
    }
    Ok(ScaledLassoFit {
        beta: EffectVector::new(beta),
        sigma_hat: sigma,
        iterations,
        converged,
        lambda0,
    })
}

pub fn scaled_lasso(g: &GenotypeMatrix, y: &PhenotypeVector, lambda0: Option<f64>) -> Result<ScaledLassoFit> {
    let x = g.require_centered()?;
    scaled_lasso_raw(x, y.center().values(), lambda0)
}

/// Half-width `|log(1/2)| (k sqrt(p) / n + 1 / sqrt(n))` of the honest interval.
pub fn honest_half_width(k: usize, n: usize, p: usize) -> f64 {
    let n = n as f64;
    LOG_HALF_MAGNITUDE * (k as f64 * sqrt(p as f64) / n + 1.0 / sqrt(n))
}

/// `h2 = 1 - sigma_hat^2 / Var(y)` from the scaled lasso, with the honest
/// interval. `alpha` does not enter the interval.
pub fn slasso_heritability(g: &GenotypeMatrix, y: &PhenotypeVector, _alpha: f64) -> Result<HeritabilityEstimate> {
    let x = g.require_centered()?;
    let y = y.center();
    let var_y = phenotypic_variance(&y, VarianceConvention::Unbiased)?;
    let fit = scaled_lasso_raw(x, y.values(), None)?;
    let k = fit.beta.support_size();
    let raw = raw_heritability_from_noise(fit.sigma_hat * fit.sigma_hat, var_y)?;
    let est = HeritabilityEstimate::new(Method::SLasso, raw)
        .with_symmetric_interval(honest_half_width(k, x.rows(), x.cols()), IntervalKind::Honest)
        .with_support(k)
        .with_iterations(fit.iterations)
        .with_value("sigma_hat", fit.sigma_hat)
        .with_value("lambda0", fit.lambda0);
    Ok(if fit.converged {
        est
    } else {
        est.flag("scaled lasso hit the iteration cap")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = stream_rng(seed, 0);
        let mut x = Matrix::from_fn(n, p, |_, _| rng.sample(StandardNormal));
        x.center_columns();
        x
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 1);
        let mut y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let m = y.iter().sum::<f64>() / n as f64;
        y.iter_mut().for_each(|v| *v -= m);
        y
    }

    #[test]
    fn fitted_variance_matches_quadratic_form() {
        let x = gaussian(30, 6, 1);
        let beta = [0.5, 0.0, -1.0, 0.0, 0.25, 0.0];
        let s = [0usize, 2, 4];
        let mut quad = 0.0;
        for &a in &s {
            for &b in &s {
                let cov: f64 = x.col(a).iter().zip(x.col(b)).map(|(u, v)| u * v).sum::<f64>() / 29.0;
                quad += beta[a] * cov * beta[b];
            }
        }
        assert!((fitted_variance(&x, &beta) - quad).abs() <= 1e-10 * quad);
        assert_eq!(fitted_variance(&x, &[0.0; 6]), 0.0);
    }

    #[test]
    fn honest_width_is_linear_in_support() {
        let base = honest_half_width(0, 100, 400);
        let one = honest_half_width(5, 100, 400) - base;
        let two = honest_half_width(10, 100, 400) - base;
        assert!((two - 2.0 * one).abs() < 1e-15);
        assert!((base - LOG_HALF_MAGNITUDE / 10.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_lasso_fixed_point_and_equivariance() {
        let x = gaussian(60, 120, 2);
        let mut y = noise(60, 3);
        for i in 0..60 {
            y[i] += 2.0 * x.get(i, 5) - 1.5 * x.get(i, 17);
        }
        let fit = scaled_lasso_raw(&x, &y, None).unwrap();
        assert!(fit.converged);
        let fitted = x.mul_vec(fit.beta.values());
        let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!((fit.sigma_hat - sqrt(rss / 60.0)).abs() <= 1e-6 * fit.sigma_hat);

        let c = 7.5;
        let scaled: Vec<f64> = y.iter().map(|v| c * v).collect();
        let other = scaled_lasso_raw(&x, &scaled, None).unwrap();
        assert!((other.sigma_hat - c * fit.sigma_hat).abs() <= 1e-8 * c * fit.sigma_hat);
        for (a, b) in other.beta.values().iter().zip(fit.beta.values()) {
            assert!((a - c * b).abs() <= 1e-8 * c * (1.0 + b.abs()));
        }
    }

    #[test]
    fn perfect_fit_is_degenerate() {
        let x = gaussian(10, 40, 4);
        let y: Vec<f64> = (0..10).map(|i| x.get(i, 0)).collect();
        assert_eq!(scaled_lasso_raw(&x, &y, Some(1e-6)).unwrap_err(), Error::DegenerateFit);
    }

    #[test]
    fn zero_selection_gives_zero_heritability() {
        let x = gaussian(50, 20, 5);
        let y = noise(50, 6);
        let g = GenotypeMatrix::from_centered(x).unwrap();
        let y = PhenotypeVector::centered(y).unwrap();
        // A huge penalty keeps the support empty, so sigma^2 = ||y||^2 / n.
        let fit = scaled_lasso(&g, &y, Some(1e6)).unwrap();
        assert_eq!(fit.beta.support_size(), 0);
        let var_y = phenotypic_variance(&y, VarianceConvention::Unbiased).unwrap();
        let expected = var_y * 49.0 / 50.0;
        assert!((fit.sigma_hat * fit.sigma_hat - expected).abs() < 1e-12 * expected);
    }
}
