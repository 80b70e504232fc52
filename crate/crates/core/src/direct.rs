//! Selection-free estimators: Eigenprism, the spectral maximum-likelihood
//! estimator and the method of moments.
//!
//! All three only touch the `n x n` row Gram matrix `X X^T`. Eigenprism and
//! the MLE further reduce the data to the spectrum of `X X^T / p` and the
//! rotated phenotype `z = U^T y`, so one [`SpectralDecomposition`] can feed both.

use alloc::vec::Vec;

use libm::{fabs, log, sqrt};

use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::linalg::{dot, norm_sq, symmetric_eigen, Matrix};
use crate::model::{
    phenotypic_variance, HeritabilityEstimate, IntervalKind, Method, PhenotypeVector,
    VarianceConvention,
};
use crate::stats::two_sided_z;

/// `|log(1/2)|`, the half-width constant of the moment and scaled-lasso intervals.
pub const LOG_HALF_MAGNITUDE: f64 = core::f64::consts::LN_2;

/// Eigenvalues of `X X^T / p` (descending) and `z = U^T y`. For centered
/// `X` and `y` the constant direction is left out, so there are `n - 1`
/// coordinates.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub rotated: Vec<f64>,
    /// Number of samples.
    pub n: usize,
    pub p: usize,
}

impl SpectralDecomposition {
    pub fn new(x: &Matrix, y: &[f64]) -> Result<Self> {
        Self::from_gram(&x.row_gram(), x.cols(), y)
    }

    /// From a precomputed row Gram matrix `X X^T` of a design with `p` columns.
    pub fn from_gram(gram: &Matrix, p: usize, y: &[f64]) -> Result<Self> {
        let n = gram.rows();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        let mut scaled = gram.clone();
        let inv_p = 1.0 / p as f64;
        for j in 0..n {
            scaled.col_mut(j).iter_mut().for_each(|v| *v *= inv_p);
        }
        // Centered data live in the complement of the constant vector, which
        // is an exact null direction of X X^T. Lift it above the spectrum and
        // drop it so the likelihood is taken over n - 1 informative coordinates.
        let centered = is_centered_gram(&scaled) && is_centered(y);
        if centered {
            let top = (0..n).map(|j| scaled.col(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
            let lift = (2.0 * top + 1.0) / n as f64;
            scaled.as_mut_slice().iter_mut().for_each(|v| *v += lift);
        }
        let eig = symmetric_eigen(&scaled)?;
        let skip = usize::from(centered);
        let eigenvalues = eig.values[skip..].iter().map(|&v| v.max(0.0)).collect();
        let rotated = (skip..n).map(|k| dot(eig.vectors.col(k), y)).collect();
        Ok(Self {
            eigenvalues,
            rotated,
            n,
            p,
        })
    }
}

fn is_centered_gram(k: &Matrix) -> bool {
    let n = k.rows();
    let scale: f64 = (0..n).map(|i| k.get(i, i)).sum::<f64>().max(f64::MIN_POSITIVE);
    (0..n).all(|j| k.col(j).iter().sum::<f64>().abs() <= 1e-10 * scale)
}

fn is_centered(y: &[f64]) -> bool {
    let scale = libm::sqrt(norm_sq(y) * y.len() as f64).max(f64::MIN_POSITIVE);
    y.iter().sum::<f64>().abs() <= 1e-10 * scale
}

/// Optimal weights of the Eigenprism program
///
/// ```text
/// minimize    max(sum w_i^2, sum w_i^2 lambda_i^2)
/// subject to  sum w_i = 0,  sum w_i lambda_i = 1
/// ```
#[derive(Clone, Debug)]
pub struct P1Solution {
    pub weights: Vec<f64>,
    /// `P1*`, the optimal value.
    pub objective: f64,
    /// Dual weight on `sum w_i^2`; `1 - theta` sits on `sum w_i^2 lambda_i^2`.
    pub theta: f64,
    pub iterations: usize,
    /// `|sum w_i|`
    pub sum_residual: f64,
    /// `|sum w_i lambda_i - 1|`
    pub moment_residual: f64,
    /// Relative gap between the two quadratics at an interior optimum (0 when
    /// the optimum sits at `theta = 1`).
    pub kkt_residual: f64,
}

/// Feasibility tolerance on both equality constraints.
pub const P1_FEASIBILITY_TOL: f64 = 1e-8;
/// Convergence tolerance on the relative KKT residual.
pub const P1_KKT_TOL: f64 = 1e-8;
/// Dual weights below this are treated as the boundary `theta = 0`.
const P1_THETA_FLOOR: f64 = 1e-12;
/// Iteration cap of the P1 solver.
pub const P1_MAX_ITER: usize = 10_000;

/// `max(sum w^2, sum w^2 lambda^2)`
pub fn p1_objective(w: &[f64], lambdas: &[f64]) -> f64 {
    let a = norm_sq(w);
    let b: f64 = w.iter().zip(lambdas).map(|(wi, l)| wi * wi * l * l).sum();
    a.max(b)
}

/// Weighted minimum-norm point of the constraint set for the dual weight
/// `theta`: minimizes `sum d_i w_i^2` with `d_i = theta + (1 - theta) lambda_i^2`.
fn p1_weights(lambdas: &[f64], theta: f64) -> Option<Vec<f64>> {
    let d: Vec<f64> = lambdas
        .iter()
        .map(|l| theta + (1.0 - theta) * l * l)
        .collect();
    if d.iter().any(|&di| !(di > 0.0)) {
        return None;
    }
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (l, di) in lambdas.iter().zip(&d) {
        s0 += 1.0 / di;
        s1 += l / di;
        s2 += l * l / di;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let (c0, c1) = (-s1 / det, s0 / det);
    let mut w: Vec<f64> = lambdas
        .iter()
        .zip(&d)
        .map(|(l, di)| (c0 + c1 * l) / di)
        .collect();
    project_onto_constraints(&mut w, lambdas);
    Some(w)
}

/// Euclidean projection onto `{sum w = 0, sum w lambda = 1}`; removes the
/// rounding left by the closed form.
fn project_onto_constraints(w: &mut [f64], lambdas: &[f64]) {
    let n = w.len() as f64;
    let sl: f64 = lambdas.iter().sum();
    let sll = norm_sq(lambdas);
    let det = n * sll - sl * sl;
    if !(det > 0.0) {
        return;
    }
    for _ in 0..2 {
        let r0: f64 = w.iter().sum();
        let r1 = dot(w, lambdas) - 1.0;
        let a0 = (sll * r0 - sl * r1) / det;
        let a1 = (n * r1 - sl * r0) / det;
        for (wi, l) in w.iter_mut().zip(lambdas) {
            *wi -= a0 + a1 * l;
        }
    }
}

/// Solves P1 through its concave one-dimensional dual.
///
/// For a fixed `theta` the inner problem is a weighted least-norm problem with
/// a closed form; the dual function is concave in `theta` and its derivative
/// is `sum w^2 - sum w^2 lambda^2`, so bisection on the sign of that
/// derivative finds the saddle point.
pub fn solve_p1(lambdas: &[f64]) -> Result<P1Solution> {
    let n = lambdas.len();
    if n < 2 {
        return Err(Error::SolverFailed("P1 needs at least two eigenvalues".into()));
    }
    let spread = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(spread > 0.0) {
        return Err(Error::SolverFailed(
            "P1 is infeasible: all eigenvalues are equal".into(),
        ));
    }
    let gap = |w: &[f64]| {
        let a = norm_sq(w);
        let b: f64 = w.iter().zip(lambdas).map(|(wi, l)| wi * wi * l * l).sum();
        (a, b)
    };

    let mut iterations = 1;
    let w1 = p1_weights(lambdas, 1.0)
        .ok_or_else(|| Error::SolverFailed("singular constraint system".into()))?;
    let (a1, b1) = gap(&w1);
    let (w, theta, kkt) = if b1 <= a1 {
        (w1, 1.0, 0.0)
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        loop {
            iterations += 1;
            if iterations > P1_MAX_ITER {
                return Err(Error::SolverFailed(
                    "P1 dual bisection did not converge".into(),
                ));
            }
            let mid = 0.5 * (lo + hi);
            let w = p1_weights(lambdas, mid)
                .ok_or_else(|| Error::SolverFailed("singular constraint system".into()))?;
            let (a, b) = gap(&w);
            let rel = fabs(a - b) / a.max(b);
            if a > b {
                lo = mid;
            } else {
                hi = mid;
            }
            if rel <= P1_KKT_TOL || hi - lo <= f64::EPSILON * hi {
                break (w, mid, rel);
            }
            if hi <= P1_THETA_FLOOR && a <= b {
                // Optimum on the boundary theta = 0: only `sum w^2 lambda^2`
                // is active, and the slackness residual is theta times the gap.
                break (w, mid, mid * rel);
            }
        }
    };
    if kkt > P1_KKT_TOL {
        return Err(Error::SolverFailed(alloc::format!(
            "P1 KKT residual {kkt:e} above tolerance"
        )));
    }
    let sum_residual = fabs(w.iter().sum::<f64>());
    let moment_residual = fabs(dot(&w, lambdas) - 1.0);
    if sum_residual > P1_FEASIBILITY_TOL || moment_residual > P1_FEASIBILITY_TOL {
        return Err(Error::SolverFailed(alloc::format!(
            "P1 constraint residuals ({sum_residual:e}, {moment_residual:e}) above tolerance"
        )));
    }
    Ok(P1Solution {
        objective: p1_objective(&w, lambdas),
        weights: w,
        theta,
        iterations,
        sum_residual,
        moment_residual,
        kkt_residual: kkt,
    })
}

/// Analytic feasible point `(lambda_i - mean) / sum_j (lambda_j - mean) lambda_j`.
pub fn p1_reference_point(lambdas: &[f64]) -> Vec<f64> {
    let m = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
    let denom: f64 = lambdas.iter().map(|l| (l - m) * l).sum();
    lambdas.iter().map(|l| (l - m) / denom).collect()
}

pub fn eigenprism(g: &GenotypeMatrix, y: &PhenotypeVector, alpha: f64) -> Result<HeritabilityEstimate> {
    let x = g.require_centered()?;
    if x.cols() <= x.rows() {
        return Err(Error::UnsupportedShape {
            n: x.rows(),
            p: x.cols(),
            reason: "Eigenprism requires p > n",
        });
    }
    let y = y.center();
    let spectral = SpectralDecomposition::new(x, y.values())?;
    eigenprism_from_spectrum(&spectral, &y, alpha)
}

/// Eigenprism on a precomputed decomposition of the same (centered) data.
pub fn eigenprism_from_spectrum(
    spectral: &SpectralDecomposition,
    y: &PhenotypeVector,
    alpha: f64,
) -> Result<HeritabilityEstimate> {
    if spectral.p <= spectral.n {
        return Err(Error::UnsupportedShape {
            n: spectral.n,
            p: spectral.p,
            reason: "Eigenprism requires p > n",
        });
    }
    let y = y.center();
    let denom = phenotypic_variance(&y, VarianceConvention::MeanSquare)?;
    if !(denom > 0.0) {
        return Err(Error::DegeneratePhenotype(denom));
    }
    let sol = solve_p1(&spectral.eigenvalues)?;
    let signal: f64 = sol
        .weights
        .iter()
        .zip(&spectral.rotated)
        .map(|(w, z)| w * z * z)
        .sum();
    let raw = signal / denom;
    let half = two_sided_z(alpha) * sqrt(2.0 * sol.objective);
    Ok(HeritabilityEstimate::new(Method::Eigenprism, raw)
        .with_symmetric_interval(half, IntervalKind::Confidence)
        .with_objective(sol.objective)
        .with_iterations(sol.iterations)
        .with_value("p1_star", sol.objective)
        .with_value("theta", sol.theta)
        .with_value("sum_residual", sol.sum_residual)
        .with_value("moment_residual", sol.moment_residual)
        .with_value("kkt_residual", sol.kkt_residual))
}

/// Upper end of the search bracket for the variance ratio `eta`.
pub const MLE_ETA_MAX: f64 = 1e6;
const MLE_ETA_MIN_GRID: f64 = 1e-8;
const MLE_GRID: usize = 200;
const MLE_REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct MleFit {
    pub eta: f64,
    pub sigma2: f64,
    /// Profiled log-likelihood per sample at `eta` (constants dropped).
    pub objective: f64,
    pub iterations: usize,
    pub at_upper_bound: bool,
}

/// `sigma2_hat(eta) = (1/m) sum z_i^2 / (eta lambda_i + 1)` over the `m`
/// retained coordinates.
pub fn mle_sigma2(spectral: &SpectralDecomposition, eta: f64) -> f64 {
    spectral
        .eigenvalues
        .iter()
        .zip(&spectral.rotated)
        .map(|(l, z)| z * z / (eta * l + 1.0))
        .sum::<f64>()
        / spectral.eigenvalues.len() as f64
}

/// Profiled objective `-log(sigma2_hat(eta))/2 - (1/2m) sum log(eta lambda_i + 1) - 1/2`.
pub fn mle_profile_objective(spectral: &SpectralDecomposition, eta: f64) -> f64 {
    let logdet: f64 = spectral
        .eigenvalues
        .iter()
        .map(|l| libm::log1p(eta * l))
        .sum();
    -0.5 * log(mle_sigma2(spectral, eta)) - logdet / (2.0 * spectral.eigenvalues.len() as f64) - 0.5
}

/// Maximizes the profiled likelihood over `eta` in `[0, MLE_ETA_MAX]`: a
/// logarithmic grid locates the bracket, which is then refined.
pub fn fit_mle(spectral: &SpectralDecomposition) -> Result<MleFit> {
    let f = |eta: f64| mle_profile_objective(spectral, eta);
    let log_lo = log(MLE_ETA_MIN_GRID);
    let log_hi = log(MLE_ETA_MAX);
    let grid: Vec<f64> = (0..MLE_GRID)
        .map(|k| libm::exp(log_lo + (log_hi - log_lo) * k as f64 / (MLE_GRID - 1) as f64))
        .collect();
    let values: Vec<f64> = grid.iter().map(|&e| f(e)).collect();
    let at_zero = f(0.0);
    if !at_zero.is_finite() || values.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("non-finite MLE objective".into()));
    }
    let mut iterations = MLE_GRID + 1;
    let (k, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });

    let (eta, obj) = if k == MLE_GRID - 1 {
        (MLE_ETA_MAX, values[k])
    } else {
        let lo = if k == 0 { 0.0 } else { grid[k - 1] };
        let hi = grid[k + 1];
        let (eta, it) = refine_mle(spectral, lo, hi);
        iterations += it;
        (eta, f(eta))
    };
    let (eta, obj) = if at_zero >= obj { (0.0, at_zero) } else { (eta, obj) };
    let sigma2 = mle_sigma2(spectral, eta);
    if !sigma2.is_finite() || !obj.is_finite() {
        return Err(Error::Numerical("non-finite MLE objective".into()));
    }
    Ok(MleFit {
        eta,
        sigma2,
        objective: obj,
        iterations,
        at_upper_bound: eta >= MLE_ETA_MAX * (1.0 - 1e-12),
    })
}

/// Derivative of [`mle_profile_objective`] in `eta`.
pub fn mle_profile_derivative(spectral: &SpectralDecomposition, eta: f64) -> f64 {
    let m = spectral.eigenvalues.len() as f64;
    let (mut q, mut dq, mut trace) = (0.0, 0.0, 0.0);
    for (l, z) in spectral.eigenvalues.iter().zip(&spectral.rotated) {
        let d = 1.0 / (eta * l + 1.0);
        q += z * z * d;
        dq += z * z * l * d * d;
        trace += l * d;
    }
    0.5 * dq / q - 0.5 * trace / m
}

/// Maximizer inside `[lo, hi]`: bisection on the sign of the derivative when
/// it brackets a root, golden-section search otherwise.
fn refine_mle(spectral: &SpectralDecomposition, lo: f64, hi: f64) -> (f64, usize) {
    let df = |eta: f64| mle_profile_derivative(spectral, eta);
    if lo == 0.0 && df(lo) <= 0.0 {
        return (0.0, 1);
    }
    if df(lo) > 0.0 && df(hi) < 0.0 {
        let (mut a, mut b) = (lo, hi);
        let mut it = 0;
        while it < 200 {
            it += 1;
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if df(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        return (0.5 * (a + b), it);
    }
    let f = |eta: f64| mle_profile_objective(spectral, eta);
    let (eta, _, it) = golden_max(&f, lo, hi, |a, b| b - a <= MLE_REL_TOL * b.max(MLE_ETA_MIN_GRID));
    (eta, it)
}

fn golden_max(
    f: &impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    done: impl Fn(f64, f64) -> bool,
) -> (f64, f64, usize) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut it = 2;
    while !done(a, b) && it < 500 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        it += 1;
    }
    if fc >= fd {
        (c, fc, it)
    } else {
        (d, fd, it)
    }
}

pub fn mle_heritability(g: &GenotypeMatrix, y: &PhenotypeVector, alpha: f64) -> Result<HeritabilityEstimate> {
    let x = g.require_centered()?;
    if x.rows() < 10 {
        return Err(Error::UnsupportedShape {
            n: x.rows(),
            p: x.cols(),
            reason: "MLE needs at least 10 samples",
        });
    }
    let y = y.center();
    let spectral = SpectralDecomposition::new(x, y.values())?;
    mle_from_spectrum(&spectral, &y, alpha)
}

pub fn mle_from_spectrum(
    spectral: &SpectralDecomposition,
    y: &PhenotypeVector,
    alpha: f64,
) -> Result<HeritabilityEstimate> {
    let var_y = phenotypic_variance(y, VarianceConvention::Unbiased)?;
    let fit = fit_mle(spectral)?;
    let raw = crate::model::raw_heritability_from_noise(fit.sigma2, var_y)?;
    let half = two_sided_z(alpha) / sqrt(2.0 * spectral.n as f64);
    let est = HeritabilityEstimate::new(Method::Mle, raw)
        .with_symmetric_interval(half, IntervalKind::Confidence)
        .with_objective(fit.objective)
        .with_iterations(fit.iterations)
        .with_value("eta_hat", fit.eta)
        .with_value("sigma2_hat", fit.sigma2);
    Ok(if fit.at_upper_bound {
        est.flag("eta at search upper bound")
    } else {
        est
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentStatistics {
    pub m1_hat: f64,
    pub m2_hat: f64,
    pub sigma2_tilde: f64,
    pub tau2_tilde: f64,
}

impl MomentStatistics {
    /// From the three Gram-route quantities: `tr(S)`, `tr(S^2)` and `||X^T y||^2`,
    /// with `S = X^T X / n`.
    pub fn from_traces(n: usize, p: usize, tr_s: f64, tr_s2: f64, xty_sq: f64, y_sq: f64) -> Result<Self> {
        let (nf, pf) = (n as f64, p as f64);
        let m1 = tr_s / pf;
        let m2 = tr_s2 / pf - pf / nf * m1 * m1;
        // m2 is a difference of two comparable terms; treat cancellation down
        // to rounding level as zero.
        if !(m2 > 1e-12 * tr_s2 / pf) || !m2.is_finite() {
            return Err(Error::IllConditionedSpectrum(m2));
        }
        let c = pf * m1 * m1 / ((nf + 1.0) * m2);
        let d = m1 / (nf * (nf + 1.0) * m2);
        let ms = y_sq / nf;
        Ok(Self {
            m1_hat: m1,
            m2_hat: m2,
            sigma2_tilde: (1.0 + c) * ms - d * xty_sq,
            tau2_tilde: -c * ms + d * xty_sq,
        })
    }

    /// Gram route: `tr(S) = tr(XX^T)/n` and `tr(S^2) = ||XX^T||_F^2 / n^2`;
    /// the `p x p` matrix `S` is never formed.
    pub fn from_gram(gram: &Matrix, p: usize, y: &[f64]) -> Result<Self> {
        let n = gram.rows();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        let nf = n as f64;
        let tr_g: f64 = (0..n).map(|i| gram.get(i, i)).sum();
        let gy: Vec<f64> = (0..n).map(|j| dot(gram.col(j), y)).collect();
        Self::from_traces(
            n,
            p,
            tr_g / nf,
            gram.frobenius_sq() / (nf * nf),
            dot(&gy, y),
            norm_sq(y),
        )
    }

    pub fn new(x: &Matrix, y: &[f64]) -> Result<Self> {
        Self::from_gram(&x.row_gram(), x.cols(), y)
    }
}

pub fn moment_heritability(g: &GenotypeMatrix, y: &PhenotypeVector, alpha: f64) -> Result<HeritabilityEstimate> {
    let x = g.require_centered()?;
    let y = y.center();
    let stats = MomentStatistics::new(x, y.values())?;
    moment_from_statistics(&stats, x.rows(), x.cols(), alpha)
}

/// The interval is fixed-width; `alpha` is accepted for a uniform signature
/// but does not enter it.
pub fn moment_from_statistics(
    stats: &MomentStatistics,
    n: usize,
    p: usize,
    _alpha: f64,
) -> Result<HeritabilityEstimate> {
    let total = stats.tau2_tilde + stats.sigma2_tilde;
    if !(total > 0.0) {
        return Err(Error::EstimatorFailed(alloc::format!(
            "moment variance estimates sum to {total}"
        )));
    }
    let raw = stats.tau2_tilde / total;
    let half = LOG_HALF_MAGNITUDE * sqrt(p as f64) / n as f64;
    Ok(HeritabilityEstimate::new(Method::Moment, raw)
        .with_symmetric_interval(half, IntervalKind::Confidence)
        .with_value("m1_hat", stats.m1_hat)
        .with_value("m2_hat", stats.m2_hat)
        .with_value("sigma2_tilde", stats.sigma2_tilde)
        .with_value("tau2_tilde", stats.tau2_tilde))
}
