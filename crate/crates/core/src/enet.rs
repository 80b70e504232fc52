//! Elastic net by cyclic coordinate descent, with warm-started regularization
//! paths and K-fold cross-validation of the penalty level.
//!
//! The objective is
//!
//! ```text
//! (1/2n) ||y - X b||^2 + lambda * ((1 - alpha)/2 ||b||^2 + alpha ||b||_1)
//! ```
//!
//! on centered data without intercept. The solver iterates on the current
//! active set until it settles, then certifies the subgradient (KKT)
//! conditions on every coordinate; violators join the active set and the loop
//! repeats.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::linalg::{axpy, dot, norm_sq, Matrix};
use crate::model::{EffectVector, PhenotypeVector};
use crate::rng::SimRng;

/// How the overall penalty level is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    CrossValidated,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltySpec {
    /// 1 is the lasso, 0 is ridge.
    pub alpha_mix: f64,
    pub lambda: LambdaChoice,
    pub cv_folds: usize,
}

impl PenaltySpec {
    pub fn fixed(alpha_mix: f64, lambda: f64) -> Self {
        Self {
            alpha_mix,
            lambda: LambdaChoice::Fixed(lambda),
            cv_folds: 10,
        }
    }

    pub fn cross_validated(alpha_mix: f64) -> Self {
        Self {
            alpha_mix,
            lambda: LambdaChoice::CrossValidated,
            cv_folds: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha_mix) {
            return Err(Error::Spec("alpha_mix must lie in [0, 1]".into()));
        }
        if let LambdaChoice::Fixed(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Spec("lambda must be positive".into()));
            }
        }
        if self.cv_folds < 2 {
            return Err(Error::Spec("need at least two folds".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Largest tolerated subgradient violation at return, in gradient units.
    pub kkt_tol: f64,
    /// Cap on coordinate sweeps (active-set sweeps plus certification passes).
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-6,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ElasticNetFit {
    pub beta: EffectVector,
    pub lambda: f64,
    pub sweeps: usize,
    pub kkt_residual: f64,
    pub objective: f64,
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub fn enet_objective(x: &Matrix, y: &[f64], beta: &[f64], lambda: f64, alpha: f64) -> f64 {
    let fitted = x.mul_vec(beta);
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    rss / (2.0 * x.rows() as f64) + lambda * ((1.0 - alpha) / 2.0 * norm_sq(beta) + alpha * l1)
}

/// Largest KKT violation of `beta` (with residual `resid = y - X beta`).
pub fn kkt_residual(x: &Matrix, resid: &[f64], beta: &[f64], lambda: f64, alpha: f64) -> f64 {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| coordinate_violation(dot(x.col(j), resid) / n, beta[j], lambda, alpha))
        .fold(0.0, f64::max)
}

#[inline]
fn coordinate_violation(grad: f64, b: f64, lambda: f64, alpha: f64) -> f64 {
    let l1 = lambda * alpha;
    let l2 = lambda * (1.0 - alpha);
    if b == 0.0 {
        (grad.abs() - l1).max(0.0)
    } else {
        (grad - l2 * b - l1 * b.signum()).abs()
    }
}

/// Coordinate-descent engine bound to one design matrix.
pub struct CoordinateDescent<'a> {
    x: &'a Matrix,
    /// `||x_j||^2 / n`
    col_sq: Vec<f64>,
    pub options: SolverOptions,
}

/// Optional per-sweep record of the objective, used to check monotonicity.
pub type ObjectiveTrace = Vec<f64>;

impl<'a> CoordinateDescent<'a> {
    pub fn new(x: &'a Matrix, options: SolverOptions) -> Self {
        let n = x.rows() as f64;
        let col_sq = (0..x.cols()).map(|j| norm_sq(x.col(j)) / n).collect();
        Self { x, col_sq, options }
    }

    /// Minimizes the objective at `lambda`, starting from `beta` whose
    /// residual is `resid`. Both are updated in place. Returns the number of
    /// sweeps and the certified KKT residual.
    pub fn solve(
        &self,
        lambda: f64,
        alpha: f64,
        beta: &mut [f64],
        resid: &mut [f64],
        mut trace: Option<&mut ObjectiveTrace>,
        y_for_trace: Option<&[f64]>,
    ) -> Result<(usize, f64)> {
        let x = self.x;
        let n = x.rows() as f64;
        let p = x.cols();
        let l1 = lambda * alpha;
        let l2 = lambda * (1.0 - alpha);
        let tol = self.options.kkt_tol;

        let mut in_active = vec![false; p];
        let mut active: Vec<usize> = Vec::new();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                in_active[j] = true;
                active.push(j);
            }
        }
        let mut sweeps = 0;
        loop {
            // Iterate on the active set until the coordinate moves are small
            // relative to the certification tolerance.
            loop {
                if active.is_empty() {
                    break;
                }
                sweeps += 1;
                if sweeps > self.options.max_sweeps {
                    return Err(Error::SolverFailed(alloc::format!(
                        "coordinate descent did not converge in {} sweeps",
                        self.options.max_sweeps
                    )));
                }
                let mut max_move = 0.0f64;
                for &j in &active {
                    let v = self.col_sq[j];
                    let denom = v + l2;
                    if denom <= 0.0 {
                        continue;
                    }
                    let col = x.col(j);
                    let old = beta[j];
                    let rho = dot(col, resid) / n + v * old;
                    let new = soft_threshold(rho, l1) / denom;
                    if new != old {
                        axpy(old - new, col, resid);
                        beta[j] = new;
                        max_move = max_move.max(denom * (new - old).abs());
                    }
                }
                if let (Some(t), Some(y)) = (trace.as_deref_mut(), y_for_trace) {
                    t.push(enet_objective(x, y, beta, lambda, alpha));
                }
                if max_move <= tol {
                    break;
                }
            }

            // Certification pass over every coordinate.
            sweeps += 1;
            let mut worst = 0.0f64;
            let mut added = false;
            for j in 0..p {
                let grad = dot(x.col(j), resid) / n;
                let viol = coordinate_violation(grad, beta[j], lambda, alpha);
                worst = worst.max(viol);
                if viol > tol && !in_active[j] {
                    in_active[j] = true;
                    active.push(j);
                    added = true;
                }
            }
            if worst <= tol {
                return Ok((sweeps, worst));
            }
            if sweeps > self.options.max_sweeps {
                return Err(Error::SolverFailed(alloc::format!(
                    "coordinate descent did not converge in {} sweeps",
                    self.options.max_sweeps
                )));
            }
            if !added {
                // Violations only on active coordinates: the inner loop stopped
                // too early, so keep sweeping.
                continue;
            }
            active.sort_unstable();
        }
    }
}

/// Fits at a fixed penalty on raw centered data.
pub fn fit_fixed(
    x: &Matrix,
    y: &[f64],
    alpha: f64,
    lambda: f64,
    options: SolverOptions,
) -> Result<ElasticNetFit> {
    let cd = CoordinateDescent::new(x, options);
    let mut beta = vec![0.0; x.cols()];
    let mut resid = y.to_vec();
    let (sweeps, kkt) = cd.solve(lambda, alpha, &mut beta, &mut resid, None, None)?;
    Ok(ElasticNetFit {
        objective: enet_objective(x, y, &beta, lambda, alpha),
        beta: EffectVector::new(beta),
        lambda,
        sweeps,
        kkt_residual: kkt,
    })
}

/// Same as [`fit_fixed`], also recording the objective after every active-set sweep.
pub fn fit_traced(
    x: &Matrix,
    y: &[f64],
    alpha: f64,
    lambda: f64,
    options: SolverOptions,
) -> Result<(ElasticNetFit, ObjectiveTrace)> {
    let cd = CoordinateDescent::new(x, options);
    let mut beta = vec![0.0; x.cols()];
    let mut resid = y.to_vec();
    let mut trace = vec![enet_objective(x, y, &beta, lambda, alpha)];
    let (sweeps, kkt) = cd.solve(lambda, alpha, &mut beta, &mut resid, Some(&mut trace), Some(y))?;
    Ok((
        ElasticNetFit {
            objective: enet_objective(x, y, &beta, lambda, alpha),
            beta: EffectVector::new(beta),
            lambda,
            sweeps,
            kkt_residual: kkt,
        },
        trace,
    ))
}

/// `max_j |x_j^T y| / (n * max(alpha, 0.001))`, the smallest penalty with an
/// all-zero solution (for `alpha >= 0.001`).
pub fn lambda_max(x: &Matrix, y: &[f64], alpha: f64) -> f64 {
    let n = x.rows() as f64;
    let g = (0..x.cols())
        .map(|j| dot(x.col(j), y).abs())
        .fold(0.0, f64::max);
    g / (n * alpha.max(0.001))
}

/// Number of penalty values on the cross-validation grid.
pub const GRID_LEN: usize = 100;
/// Smallest grid value relative to `lambda_max`.
pub const GRID_RATIO: f64 = 1e-3;

/// Logarithmic grid from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, len: usize, ratio: f64) -> Vec<f64> {
    if len == 1 {
        return vec![lambda_max];
    }
    let step = libm::log(ratio) / (len - 1) as f64;
    (0..len)
        .map(|k| lambda_max * libm::exp(step * k as f64))
        .collect()
}

/// Warm-started solutions along a decreasing penalty sequence.
pub fn enet_path(
    x: &Matrix,
    y: &[f64],
    alpha: f64,
    lambdas: &[f64],
    options: SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    let cd = CoordinateDescent::new(x, options);
    let mut beta = vec![0.0; x.cols()];
    let mut resid = y.to_vec();
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        cd.solve(lambda, alpha, &mut beta, &mut resid, None, None)?;
        out.push(beta.clone());
    }
    Ok(out)
}

/// KKT tolerance of the fits inside cross-validation, relative to the root
/// mean square of `y`. Only the error curve is used from those fits.
pub const CV_RELATIVE_TOL: f64 = 1e-4;

pub fn cv_options(y: &[f64]) -> SolverOptions {
    let rms = libm::sqrt(norm_sq(y) / y.len().max(1) as f64);
    SolverOptions {
        kkt_tol: (CV_RELATIVE_TOL * rms).max(f64::MIN_POSITIVE),
        ..SolverOptions::default()
    }
}

/// Fold label of every sample: a shuffled order cut into contiguous blocks
/// whose sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut label = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        label[i] = k * folds / n;
    }
    label
}

#[derive(Clone, Debug)]
pub struct CvResult {
    pub lambda: f64,
    pub index: usize,
    pub lambdas: Vec<f64>,
    /// Pooled out-of-fold mean squared error per grid value.
    pub cv_error: Vec<f64>,
}

/// Column means and centered copy of a row subset.
fn centered_rows(x: &Matrix, y: &[f64], rows: &[usize]) -> (Matrix, Vec<f64>, Vec<f64>, f64) {
    let mut xs = x.select_rows(rows);
    let means = xs.center_columns();
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    (xs, ys.iter().map(|v| v - ym).collect(), means, ym)
}

/// K-fold cross-validation of the penalty over the standard grid.
pub fn cv_lambda(
    x: &Matrix,
    y: &[f64],
    alpha: f64,
    folds: usize,
    rng: &mut SimRng,
    options: SolverOptions,
) -> Result<CvResult> {
    let n = x.rows();
    if folds < 2 || n < folds {
        return Err(Error::Spec(alloc::format!(
            "cross-validation needs 2 <= folds <= n, got folds = {folds}, n = {n}"
        )));
    }
    let lambdas = lambda_grid(lambda_max(x, y, alpha), GRID_LEN, GRID_RATIO);
    let labels = fold_assignment(n, folds, rng);
    let mut sse = vec![0.0; lambdas.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| labels[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| labels[i] == f).collect();
        let (xt, yt, means, ym) = centered_rows(x, y, &train);
        let path = enet_path(&xt, &yt, alpha, &lambdas, options)?;
        for (k, beta) in path.iter().enumerate() {
            let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
            let offset: f64 = support.iter().map(|&j| means[j] * beta[j]).sum();
            for &i in &test {
                let pred: f64 =
                    ym - offset + support.iter().map(|&j| x.get(i, j) * beta[j]).sum::<f64>();
                let e = y[i] - pred;
                sse[k] += e * e;
            }
        }
    }
    let cv_error: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let index = cv_error
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &e)| if e < acc.1 { (k, e) } else { acc })
        .0;
    Ok(CvResult {
        lambda: lambdas[index],
        index,
        lambdas,
        cv_error,
    })
}

/// Elastic net on prepared data with the penalty level fixed or chosen by CV.
/// For the CV case the final fit follows the grid down to the chosen value
/// with warm starts.
pub fn elastic_net(
    x: &Matrix,
    y: &[f64],
    spec: &PenaltySpec,
    rng: &mut SimRng,
    options: SolverOptions,
) -> Result<ElasticNetFit> {
    spec.validate()?;
    let alpha = spec.alpha_mix;
    match spec.lambda {
        LambdaChoice::Fixed(lambda) => fit_fixed(x, y, alpha, lambda, options),
        LambdaChoice::CrossValidated => {
            let cv = cv_lambda(x, y, alpha, spec.cv_folds, rng, cv_options(y))?;
            let path = enet_path(x, y, alpha, &cv.lambdas[..=cv.index], options)?;
            let beta = path.into_iter().last().expect("non-empty path");
            let fitted = x.mul_vec(&beta);
            let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
            Ok(ElasticNetFit {
                kkt_residual: kkt_residual(x, &resid, &beta, cv.lambda, alpha),
                objective: enet_objective(x, y, &beta, cv.lambda, alpha),
                beta: EffectVector::new(beta),
                lambda: cv.lambda,
                sweeps: 0,
            })
        }
    }
}

/// Elastic net on a centered genotype matrix with a fixed penalty.
pub fn elastic_net_fit(g: &GenotypeMatrix, y: &PhenotypeVector, spec: &PenaltySpec) -> Result<ElasticNetFit> {
    let x = g.require_centered()?;
    let y = y.center();
    spec.validate()?;
    match spec.lambda {
        LambdaChoice::Fixed(lambda) => {
            fit_fixed(x, y.values(), spec.alpha_mix, lambda, SolverOptions::default())
        }
        LambdaChoice::CrossValidated => Err(Error::Spec(
            "elastic_net_fit needs a fixed lambda; use elastic_net with an rng for CV".into(),
        )),
    }
}
