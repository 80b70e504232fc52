use std::time::Instant;

use herit_core::boost::{aggregate, boost_replicate, prepare, BoostConfig};
use herit_core::direct::{eigenprism, mle_heritability, moment_heritability};
use herit_core::enet::PenaltySpec;
use herit_core::model::oracle_estimate;
use herit_core::rng::mix_seed;
use herit_core::sparse::{enet_heritability, slasso_heritability};
use herit_core::{Error, GenotypeMatrix, HeritabilityEstimate, Method, PhenotypeVector};
use rayon::prelude::*;

/// BoostHer with the replicates spread over the current rayon pool. The
/// result does not depend on the number of threads.
pub fn boost_parallel(
    g: &GenotypeMatrix,
    y: &PhenotypeVector,
    cfg: &BoostConfig,
) -> herit_core::Result<HeritabilityEstimate> {
    let input = prepare(g, y, cfg)?;
    let outcomes = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| boost_replicate(&input.design, &input.phenotype, input.var_y, cfg, r))
        .collect();
    aggregate(outcomes, cfg)
}

/// Everything an estimator call needs beyond the data.
#[derive(Clone, Debug)]
pub struct EstimatorSettings {
    pub alpha: f64,
    pub enet: PenaltySpec,
    /// Template for BoostHer; its seed is replaced per call.
    pub boost: BoostConfig,
}

/// Runs one estimator on centered genotypes. `sigma2_eps` is the true noise
/// variance, needed only by the oracle; `seed` drives the randomized methods.
pub fn run_method(
    method: Method,
    g: &GenotypeMatrix,
    y: &PhenotypeVector,
    sigma2_eps: Option<f64>,
    settings: &EstimatorSettings,
    seed: u64,
) -> herit_core::Result<HeritabilityEstimate> {
    let alpha = settings.alpha;
    match method {
        Method::Oracle => {
            let s2 = sigma2_eps.ok_or_else(|| Error::Spec("the oracle needs the true noise variance".into()))?;
            oracle_estimate(&y.center(), s2)
        }
        Method::Eigenprism => eigenprism(g, y, alpha),
        Method::Mle => mle_heritability(g, y, alpha),
        Method::Moment => moment_heritability(g, y, alpha),
        Method::SLasso => slasso_heritability(g, y, alpha),
        Method::Enet => enet_heritability(g, y, &settings.enet, mix_seed(seed, 1)),
        Method::BoostHer => {
            let cfg = BoostConfig {
                seed: mix_seed(seed, 2),
                ..settings.boost.clone()
            };
            boost_parallel(g, y, &cfg)
        }
    }
}

/// Runs `f`, returning its value and the elapsed seconds (0 when `timing` is off).
pub fn timed<T>(timing: bool, f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    let secs = if timing { start.elapsed().as_secs_f64() } else { 0.0 };
    (out, secs)
}
