//! TOML configuration files. Every table rejects unknown keys.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use herit_core::boost::BoostConfig;
use herit_core::enet::PenaltySpec;
use herit_core::simulate::{
    default_causal_blocks, CausalSpec, EffectDistribution, GenotypeSpec, PhenotypeModel, SimulationSpec,
};
use herit_core::Method;
use serde::Deserialize;

use crate::error::{io_err, CliError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    #[default]
    FixedEffect,
    GctaMixed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectName {
    #[default]
    Gaussian,
    StudentT3,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalName {
    #[default]
    GeneBlocks,
    RandomK,
    Null,
}

fn d_h2() -> f64 {
    0.8
}
fn d_one() -> f64 {
    1.0
}
fn d_width() -> usize {
    50
}
fn d_block_corr() -> f64 {
    0.5
}
fn d_clusters() -> usize {
    5
}
fn d_divergence() -> f64 {
    0.3
}
fn d_maf_low() -> f64 {
    0.1
}
fn d_maf_high() -> f64 {
    0.5
}

/// Simulation parameters. `n` and `p` are required when genotypes are simulated.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default = "d_h2")]
    pub target_h2: f64,
    #[serde(default = "d_one")]
    pub sigma2_eps: f64,
    #[serde(default)]
    pub model: ModelName,
    #[serde(default)]
    pub effect_dist: EffectName,
    #[serde(default)]
    pub causal: CausalName,
    /// Half-open `[start, end)` column ranges; defaults to three blocks of
    /// `causal_block_width` spread over the variants.
    pub causal_blocks: Option<Vec<[usize; 2]>>,
    #[serde(default = "d_width")]
    pub causal_block_width: usize,
    pub causal_k: Option<usize>,
    /// Number of LD blocks; defaults to `p / 50`.
    pub n_blocks: Option<usize>,
    #[serde(default = "d_block_corr")]
    pub block_corr: f64,
    #[serde(default = "d_clusters")]
    pub n_clusters: usize,
    #[serde(default = "d_divergence")]
    pub cluster_divergence: f64,
    #[serde(default = "d_maf_low")]
    pub maf_low: f64,
    #[serde(default = "d_maf_high")]
    pub maf_high: f64,
}

impl SimulationConfig {
    /// Builds the core specification for an `n x p` genotype matrix. `n` and
    /// `p` are taken from the arguments, which lets a loaded matrix override them.
    pub fn to_spec_with(&self, n: usize, p: usize, seed: u64) -> Result<SimulationSpec> {
        let causal = match self.causal {
            CausalName::GeneBlocks => CausalSpec::GeneBlocks(match &self.causal_blocks {
                Some(blocks) => blocks.iter().map(|[a, b]| *a..*b).collect(),
                None => default_causal_blocks(p, self.causal_block_width),
            }),
            CausalName::RandomK => CausalSpec::RandomK(
                self.causal_k
                    .ok_or_else(|| CliError::Config("causal = \"random_k\" needs causal_k".into()))?,
            ),
            CausalName::Null => CausalSpec::Null,
        };
        if let CausalSpec::GeneBlocks(blocks) = &causal {
            if let Some(b) = blocks.iter().find(|b| b.start >= b.end || b.end > p) {
                return Err(CliError::Config(format!(
                    "causal block [{}, {}) is empty or exceeds p = {p}",
                    b.start, b.end
                )));
            }
        }
        let spec = SimulationSpec {
            n,
            p,
            genotype: GenotypeSpec {
                n_blocks: self.n_blocks.unwrap_or((p / 50).max(1)),
                block_corr: self.block_corr,
                n_clusters: self.n_clusters,
                cluster_divergence: self.cluster_divergence,
                maf_range: (self.maf_low, self.maf_high),
            },
            causal,
            effect_dist: match self.effect_dist {
                EffectName::Gaussian => EffectDistribution::Gaussian,
                EffectName::StudentT3 => EffectDistribution::StudentT3,
            },
            target_h2: self.target_h2,
            sigma2_eps: self.sigma2_eps,
            model: match self.model {
                ModelName::FixedEffect => PhenotypeModel::FixedEffect,
                ModelName::GctaMixed => PhenotypeModel::GctaMixed,
            },
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_spec(&self, seed: u64) -> Result<SimulationSpec> {
        let n = self.n.ok_or_else(|| CliError::Config("simulation needs n".into()))?;
        let p = self.p.ok_or_else(|| CliError::Config("simulation needs p".into()))?;
        self.to_spec_with(n, p, seed)
    }
}

fn d_maf_min() -> f64 {
    herit_core::genotype::DEFAULT_MAF_MIN
}
fn d_missing_max() -> f64 {
    herit_core::genotype::DEFAULT_MISSING_MAX
}

/// Variant quality control applied to loaded genotypes.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "d_maf_min")]
    pub maf_min: f64,
    #[serde(default = "d_missing_max")]
    pub missing_max: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            maf_min: d_maf_min(),
            missing_max: d_missing_max(),
        }
    }
}

fn d_alpha_mix() -> f64 {
    herit_core::sparse::DEFAULT_ALPHA_MIX
}
fn d_folds() -> usize {
    10
}
fn d_boost_reps() -> usize {
    100
}
fn d_drop() -> f64 {
    0.25
}
fn d_quantiles() -> [f64; 2] {
    [0.025, 0.975]
}

/// Tuning of the penalized estimators.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "d_alpha_mix")]
    pub enet_alpha_mix: f64,
    #[serde(default = "d_folds")]
    pub cv_folds: usize,
    #[serde(default = "d_boost_reps")]
    pub boost_replicates: usize,
    #[serde(default = "d_drop")]
    pub boost_drop_frac: f64,
    #[serde(default = "d_quantiles")]
    pub boost_interval: [f64; 2],
    pub boost_max_support: Option<usize>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            enet_alpha_mix: d_alpha_mix(),
            cv_folds: d_folds(),
            boost_replicates: d_boost_reps(),
            boost_drop_frac: d_drop(),
            boost_interval: d_quantiles(),
            boost_max_support: None,
        }
    }
}

impl EstimatorConfig {
    pub fn penalty(&self) -> PenaltySpec {
        PenaltySpec {
            cv_folds: self.cv_folds,
            ..PenaltySpec::cross_validated(self.enet_alpha_mix)
        }
    }

    pub fn boost(&self, seed: u64) -> Result<BoostConfig> {
        let cfg = BoostConfig {
            replicates: self.boost_replicates,
            drop_frac: self.boost_drop_frac,
            enet: self.penalty(),
            interval_quantiles: (self.boost_interval[0], self.boost_interval[1]),
            max_support: self.boost_max_support,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Optional configuration of the `estimate` command.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub estimators: EstimatorConfig,
}

fn d_replicates() -> usize {
    50
}
fn d_methods() -> Vec<String> {
    Method::ALL.iter().map(|m| m.as_str().to_string()).collect()
}
fn d_settings() -> Vec<String> {
    ["wholegenes", "causalgenes", "subsample1500", "subsample500", "t_effect", "gcta_model"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}
fn d_alpha() -> f64 {
    0.05
}
fn d_parallelism() -> usize {
    1
}
fn d_true() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default = "d_replicates")]
    pub replicates: usize,
    #[serde(default = "d_methods")]
    pub methods: Vec<String>,
    #[serde(default = "d_settings")]
    pub settings: Vec<String>,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "d_parallelism")]
    pub parallelism: usize,
    /// Record wall-clock times; when off the time column is 0 and the rows
    /// file is byte-reproducible.
    #[serde(default = "d_true")]
    pub timing: bool,
    /// Real genotypes to use instead of simulated ones (relative to the config file).
    pub genotype_csv: Option<PathBuf>,
    #[serde(default)]
    pub filter: FilterConfig,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub estimators: EstimatorConfig,
}

/// Benchmark setting: which data each estimator sees in a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Setting {
    WholeGenes,
    /// Only the causal columns are passed to the estimators.
    CausalGenes,
    /// A random subset of this many samples (see [`Setting::subsample_size`]).
    Subsample(usize),
    TEffect,
    GctaModel,
}

/// Sample size of the reference data set the subsample settings were defined on.
pub const REFERENCE_SAMPLE_SIZE: usize = 3051;

impl Setting {
    pub fn name(&self) -> String {
        match self {
            Setting::WholeGenes => "wholegenes".into(),
            Setting::CausalGenes => "causalgenes".into(),
            Setting::Subsample(k) => format!("subsample{k}"),
            Setting::TEffect => "t_effect".into(),
            Setting::GctaModel => "gcta_model".into(),
        }
    }

    /// Rows drawn for a subsample setting on `n` samples: `k` when `k < n`,
    /// otherwise the same fraction of `n` that `k` is of the reference size.
    pub fn subsample_size(k: usize, n: usize) -> usize {
        if k < n {
            k
        } else {
            ((n * k) as f64 / REFERENCE_SAMPLE_SIZE as f64).round().max(1.0).min(n as f64) as usize
        }
    }
}

impl FromStr for Setting {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wholegenes" => Ok(Setting::WholeGenes),
            "causalgenes" => Ok(Setting::CausalGenes),
            "t_effect" => Ok(Setting::TEffect),
            "gcta_model" => Ok(Setting::GctaModel),
            _ => s
                .strip_prefix("subsample")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k > 0)
                .map(Setting::Subsample)
                .ok_or_else(|| CliError::Config(format!("unknown setting '{s}'"))),
        }
    }
}

pub fn parse_methods<S: AsRef<str>>(names: &[S]) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in names {
        let m: Method = name.as_ref().parse().map_err(|e: herit_core::Error| CliError::Usage(e.to_string()))?;
        if out.contains(&m) {
            return Err(CliError::Usage(format!("method '{m}' listed twice")));
        }
        out.push(m);
    }
    if out.is_empty() {
        return Err(CliError::Usage("no methods given".into()));
    }
    Ok(out)
}

/// Splits a `--methods` comma list.
pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
