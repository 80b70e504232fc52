use herit_core::direct::*;
use herit_core::linalg::Matrix;
use herit_core::model::PhenotypeVector;
use herit_core::rng::stream_rng;
use herit_core::simulate::{simulate_dataset, CausalSpec, PhenotypeModel, SimulationSpec};
use herit_core::stats::{mean, std_dev, two_sided_z};
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

/// Moment statistics from the explicit `p x p` matrix `S = X^T X / n`.
fn explicit_moments(x: &Matrix, y: &[f64]) -> [f64; 4] {
    let (n, p) = (x.rows(), x.cols());
    let (nf, pf) = (n as f64, p as f64);
    let mut s = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            s[a][b] = (0..n).map(|i| x.get(i, a) * x.get(i, b)).sum::<f64>() / nf;
        }
    }
    let tr_s: f64 = (0..p).map(|a| s[a][a]).sum();
    let mut tr_s2 = 0.0;
    for a in 0..p {
        for b in 0..p {
            tr_s2 += s[a][b] * s[b][a];
        }
    }
    let xty: Vec<f64> = (0..p).map(|a| (0..n).map(|i| x.get(i, a) * y[i]).sum()).collect();
    let xty_sq: f64 = xty.iter().map(|v| v * v).sum();
    let y_sq: f64 = y.iter().map(|v| v * v).sum();
    let m1 = tr_s / pf;
    let m2 = tr_s2 / pf - pf / nf * m1 * m1;
    let sigma2 = (1.0 + pf * m1 * m1 / ((nf + 1.0) * m2)) * y_sq / nf
        - m1 / (nf * (nf + 1.0) * m2) * xty_sq;
    let tau2 = -(pf * m1 * m1 / ((nf + 1.0) * m2)) * y_sq / nf + m1 / (nf * (nf + 1.0) * m2) * xty_sq;
    [m1, m2, sigma2, tau2]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn gram_route_matches_explicit_covariance() {
    for seed in 0..20 {
        let x = gaussian(20, 50, seed);
        let y = noise(20, seed);
        let s = MomentStatistics::new(&x, &y).unwrap();
        let [m1, m2, sigma2, tau2] = explicit_moments(&x, &y);
        assert!(rel(s.m1_hat, m1) <= 1e-10);
        assert!(rel(s.m2_hat, m2) <= 1e-10);
        assert!(rel(s.sigma2_tilde, sigma2) <= 1e-10);
        assert!(rel(s.tau2_tilde, tau2) <= 1e-10);
        let y_sq: f64 = y.iter().map(|v| v * v).sum::<f64>() / 20.0;
        assert!(rel(s.sigma2_tilde + s.tau2_tilde, y_sq) <= 1e-12);
    }
}

#[test]
fn gaussian_design_moments_follow_marchenko_pastur() {
    let x = gaussian(200, 1000, 11);
    let s = MomentStatistics::new(&x, &noise(200, 11)).unwrap();
    assert!((s.m1_hat - 1.0).abs() <= 0.05);
    assert!((s.m2_hat - 1.0).abs() <= 0.15);
}

fn null_data(n: usize, p: usize, seed: u64) -> (GenotypeMatrix, PhenotypeVector) {
    let mut spec = SimulationSpec::penicillin_like(n, p, seed);
    spec.causal = CausalSpec::Null;
    let d = simulate_dataset(&spec).unwrap();
    (d.design, d.phenotype)
}

#[test]
fn moment_null_mean_is_small() {
    let h: Vec<f64> = (0..50)
        .map(|seed| {
            let (g, y) = null_data(300, 1000, 500 + seed);
            moment_heritability(&g, &y, 0.05).unwrap().h2
        })
        .collect();
    assert!(mean(&h) <= 0.15);
}

#[test]
fn eigenprism_null_mean_is_small() {
    let h: Vec<f64> = (0..50)
        .map(|seed| {
            let (g, y) = null_data(100, 400, 600 + seed);
            eigenprism(&g, &y, 0.05).unwrap().h2
        })
        .collect();
    assert!(mean(&h) <= 0.15, "mean clamped h2 {}", mean(&h));
}

#[test]
fn eigenprism_null_raw_estimate_is_unbiased_and_calibrated() {
    let mut raw = Vec::new();
    let mut predicted = Vec::new();
    for seed in 0..50 {
        let (g, y) = null_data(100, 400, 600 + seed);
        let est = eigenprism(&g, &y, 0.05).unwrap();
        raw.push(est.diagnostics.raw_h2);
        predicted.push((2.0 * est.diagnostics.values["p1_star"]).sqrt());
    }
    let se = std_dev(&raw) / (raw.len() as f64).sqrt();
    assert!(mean(&raw).abs() <= 3.0 * se, "raw mean {} se {}", mean(&raw), se);
    let ratio = std_dev(&raw) / mean(&predicted);
    assert!((0.7..=1.3).contains(&ratio), "sd ratio {ratio}");
}

fn mle_null_fits() -> (Vec<f64>, Vec<f64>) {
    let mut etas = Vec::new();
    let mut hs = Vec::new();
    for seed in 0..50 {
        let (g, y) = null_data(300, 1000, 700 + seed);
        let est = mle_heritability(&g, &y, 0.05).unwrap();
        etas.push(est.diagnostics.values["eta_hat"]);
        hs.push(est.h2);
    }
    (etas, hs)
}

#[test]
fn mle_null_heritability_is_small() {
    let (etas, hs) = mle_null_fits();
    assert!(mean(&hs) <= 0.05, "mean h2 {}", mean(&hs));
    let at_zero = etas.iter().filter(|e| **e == 0.0).count();
    assert!(at_zero >= 15, "{at_zero} of 50 fits at eta = 0");
}

#[test]
fn mle_null_eta_is_near_zero() {
    let (etas, _) = mle_null_fits();
    assert!(mean(&etas) <= 1e-3, "mean eta {}", mean(&etas));
}

#[test]
fn mle_is_accurate_under_its_own_model() {
    let h: Vec<f64> = (0..50)
        .map(|seed| {
            let mut spec = SimulationSpec::penicillin_like(500, 2000, 800 + seed);
            spec.model = PhenotypeModel::GctaMixed;
            let d = simulate_dataset(&spec).unwrap();
            mle_heritability(&d.design, &d.phenotype, 0.05).unwrap().h2
        })
        .collect();
    assert!((mean(&h) - 0.8).abs() <= 0.08, "mean {}", mean(&h));
}

#[test]
fn mle_optimum_dominates_a_grid() {
    let x = gaussian(60, 150, 3);
    let mut y = noise(60, 3);
    for i in 0..60 {
        y[i] += x.get(i, 0) + x.get(i, 1);
    }
    let y = PhenotypeVector::new(y).unwrap().center();
    let spectral = SpectralDecomposition::new(&x, y.values()).unwrap();
    let fit = fit_mle(&spectral).unwrap();
    for k in 0..100 {
        let eta = 10f64.powf(-4.0 + 8.0 * k as f64 / 99.0);
        assert!(fit.objective >= mle_profile_objective(&spectral, eta) - 1e-12);
    }
}

fn orthogonal(p: usize, seed: u64) -> Matrix {
    // Gram-Schmidt on a Gaussian matrix.
    let a = gaussian(p, p, seed);
    let mut q: Vec<Vec<f64>> = Vec::new();
    for j in 0..p {
        let mut v = a.col(j).to_vec();
        for _ in 0..2 {
            for u in &q {
                let d: f64 = v.iter().zip(u).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        q.push(v);
    }
    Matrix::from_fn(p, p, |i, j| q[j][i])
}

#[test]
fn estimates_are_invariant_to_column_rotation() {
    let (n, p) = (25, 60);
    let mut x = gaussian(n, p, 21);
    x.center_columns();
    let mut y = noise(n, 21);
    for i in 0..n {
        y[i] += 0.5 * x.get(i, 3) - 0.7 * x.get(i, 9);
    }
    let q = orthogonal(p, 22);
    let xq = Matrix::from_fn(n, p, |i, j| (0..p).map(|k| x.get(i, k) * q.get(k, j)).sum());
    let y = PhenotypeVector::new(y).unwrap();
    let g1 = GenotypeMatrix::from_centered(x).unwrap();
    let g2 = GenotypeMatrix::from_centered(xq).unwrap();
    let e1 = eigenprism(&g1, &y, 0.05).unwrap();
    let e2 = eigenprism(&g2, &y, 0.05).unwrap();
    assert!((e1.diagnostics.raw_h2 - e2.diagnostics.raw_h2).abs() <= 1e-8);
    let m1 = mle_heritability(&g1, &y, 0.05).unwrap();
    let m2 = mle_heritability(&g2, &y, 0.05).unwrap();
    assert!((m1.diagnostics.raw_h2 - m2.diagnostics.raw_h2).abs() <= 1e-8);
}

#[test]
fn intervals_have_closed_form_widths() {
    let (n, p) = (40, 120);
    let mut x = gaussian(n, p, 31);
    x.center_columns();
    let y = PhenotypeVector::new(noise(n, 31)).unwrap();
    let g = GenotypeMatrix::from_centered(x).unwrap();
    let z = two_sided_z(0.05);
    let mle = mle_heritability(&g, &y, 0.05).unwrap();
    let (lo, hi) = mle.diagnostics.raw_interval.unwrap();
    assert!(((hi - lo) - 2.0 * z / (2.0 * n as f64).sqrt()).abs() < 1e-14);
    let ep = eigenprism(&g, &y, 0.05).unwrap();
    let (lo, hi) = ep.diagnostics.raw_interval.unwrap();
    let p1 = ep.diagnostics.values["p1_star"];
    assert!(((hi - lo) - 2.0 * z * (2.0 * p1).sqrt()).abs() < 1e-14);
    let mo = moment_heritability(&g, &y, 0.05).unwrap();
    let (lo, hi) = mo.diagnostics.raw_interval.unwrap();
    assert!(((hi - lo) - 2.0 * std::f64::consts::LN_2 * (p as f64).sqrt() / n as f64).abs() < 1e-14);
}

#[test]
fn failures_are_reported_not_fabricated() {
    let g = GenotypeMatrix::from_centered(gaussian(30, 20, 41)).unwrap();
    let y = PhenotypeVector::new(noise(30, 41)).unwrap();
    assert!(matches!(eigenprism(&g, &y, 0.05), Err(Error::UnsupportedShape { .. })));
    let small = GenotypeMatrix::from_centered(gaussian(8, 20, 42)).unwrap();
    let y8 = PhenotypeVector::new(noise(8, 42)).unwrap();
    assert!(matches!(mle_heritability(&small, &y8, 0.05), Err(Error::UnsupportedShape { .. })));
    let raw = GenotypeMatrix::from_matrix(gaussian(30, 20, 43)).unwrap();
    assert!(matches!(moment_heritability(&raw, &y, 0.05), Err(Error::Data(_))));
}

fn spectrum() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..50.0, 3..60).prop_filter("distinct values", |v| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|l| (l - m) * (l - m)).sum::<f64>() > 1e-6
    })
}

proptest! {
    #[test]
    fn p1_solution_is_feasible_and_beats_reference(mut lambdas in spectrum()) {
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let sol = solve_p1(&lambdas).unwrap();
        prop_assert!(sol.sum_residual <= P1_FEASIBILITY_TOL);
        prop_assert!(sol.moment_residual <= P1_FEASIBILITY_TOL);
        let sum: f64 = sol.weights.iter().sum();
        let first: f64 = sol.weights.iter().zip(&lambdas).map(|(w, l)| w * l).sum();
        prop_assert!(sum.abs() <= P1_FEASIBILITY_TOL);
        prop_assert!((first - 1.0).abs() <= P1_FEASIBILITY_TOL);
        let reference = p1_reference_point(&lambdas);
        prop_assert!(sol.objective <= p1_objective(&reference, &lambdas) * (1.0 + 1e-12));
    }
}
