//! Replicated simulation benchmark over settings and methods.
//!
//! The genotype matrix is fixed for the whole run. Every `(setting,
//! replicate)` cell draws fresh effects and noise from a seed derived from the
//! base seed, the setting name and the replicate index, so results do not
//! depend on the worker count or on the order of the settings list.

use std::path::Path;

use herit_core::rng::{mix_seed, stream_rng};
use herit_core::simulate::{
    simulate_genotypes, simulate_trait, subsample_rows, true_h2_of, EffectDistribution, PhenotypeModel, SimulationSpec,
};
use herit_core::{GenotypeMatrix, Method, PhenotypeVector};
use rayon::prelude::*;

use crate::config::{parse_methods, BenchmarkConfig, Setting};
use crate::error::{CliError, Result};
use crate::io::read_genotypes;
use crate::methods::{run_method, timed, EstimatorSettings};
use crate::report::{
    render_table, rows_header, summarize, write_csv, FailureRow, LongRow, Row, Status, SummaryRow, FAILURE_HEADER,
    LONG_HEADER, SUMMARY_HEADER,
};

#[derive(Clone, Debug)]
pub struct BenchmarkPlan {
    pub settings: Vec<Setting>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub base_seed: u64,
    pub timing: bool,
    /// Phenotype model; its `n` and `p` match `genotypes`.
    pub spec: SimulationSpec,
    /// Filtered, imputed and centered genotypes shared by all cells.
    pub genotypes: GenotypeMatrix,
    pub estimators: EstimatorSettings,
}

impl BenchmarkPlan {
    /// Builds the plan; relative paths in the config resolve against `config_dir`.
    pub fn from_config(cfg: &BenchmarkConfig, config_dir: &Path) -> Result<Self> {
        if cfg.replicates == 0 {
            return Err(CliError::Config("replicates must be at least 1".into()));
        }
        if cfg.settings.is_empty() {
            return Err(CliError::Config("no settings given".into()));
        }
        let settings = cfg.settings.iter().map(|s| s.parse()).collect::<Result<Vec<Setting>>>()?;
        let methods = parse_methods(&cfg.methods)?;
        let sim = &cfg.simulation;
        let raw = match &cfg.genotype_csv {
            Some(path) => read_genotypes(&config_dir.join(path))?,
            None => {
                let spec = sim.to_spec(sim.seed.unwrap_or(cfg.base_seed))?;
                simulate_genotypes(&spec, &mut stream_rng(spec.seed, 0))?
            }
        };
        let genotypes = raw.filter_variants(cfg.filter.maf_min, cfg.filter.missing_max)?.impute_and_center();
        let spec = sim.to_spec_with(genotypes.n(), genotypes.p(), cfg.base_seed)?;
        if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
            return Err(CliError::Config("alpha must lie in (0, 1)".into()));
        }
        Ok(Self {
            settings,
            methods,
            replicates: cfg.replicates,
            base_seed: cfg.base_seed,
            timing: cfg.timing,
            spec,
            genotypes,
            estimators: EstimatorSettings {
                alpha: cfg.alpha,
                enet: cfg.estimators.penalty(),
                boost: cfg.estimators.boost(0)?,
            },
        })
    }
}

/// FNV-1a hash of a setting name.
fn name_key(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn cell_seed(base_seed: u64, setting: Setting, replicate: usize) -> u64 {
    mix_seed(mix_seed(base_seed, name_key(&setting.name())), replicate as u64)
}

/// Data the estimators see in one cell, with the truth of that cell.
#[derive(Clone, Debug)]
pub struct CellData {
    pub design: GenotypeMatrix,
    pub phenotype: PhenotypeVector,
    pub sigma2_eps: f64,
    pub true_h2: f64,
}

pub fn cell_data(plan: &BenchmarkPlan, setting: Setting, replicate: usize) -> herit_core::Result<CellData> {
    let seed = cell_seed(plan.base_seed, setting, replicate);
    let mut spec = plan.spec.clone();
    match setting {
        Setting::TEffect => spec.effect_dist = EffectDistribution::StudentT3,
        Setting::GctaModel => spec.model = PhenotypeModel::GctaMixed,
        _ => {}
    }
    let t = simulate_trait(&spec, &plan.genotypes, &mut stream_rng(seed, 0))?;
    match setting {
        Setting::CausalGenes => {
            if t.causal.is_empty() {
                return Err(herit_core::Error::Spec("causalgenes needs causal variants".into()));
            }
            Ok(CellData {
                design: t.design.select_columns(&t.causal),
                phenotype: t.phenotype,
                sigma2_eps: t.sigma2_eps,
                true_h2: t.true_h2,
            })
        }
        Setting::Subsample(k) => {
            let n = t.design.n();
            let rows = subsample_rows(n, Setting::subsample_size(k, n), &mut stream_rng(seed, 1));
            let design = t.design.select_rows(&rows);
            let true_h2 = true_h2_of(&design, &t.true_effects, t.sigma2_eps)?;
            Ok(CellData {
                phenotype: t.phenotype.subset(&rows)?,
                design,
                sigma2_eps: t.sigma2_eps,
                true_h2,
            })
        }
        _ => Ok(CellData {
            design: t.design,
            phenotype: t.phenotype,
            sigma2_eps: t.sigma2_eps,
            true_h2: t.true_h2,
        }),
    }
}

#[derive(Clone, Debug, Default)]
pub struct BenchmarkReport {
    pub rows: Vec<Row>,
    pub summary: Vec<SummaryRow>,
    pub long: Vec<LongRow>,
    pub failures: Vec<FailureRow>,
}

struct CellOutcome {
    rows: Vec<Row>,
    long: Vec<LongRow>,
    failures: Vec<FailureRow>,
}

fn failed_row(setting: &str, replicate: usize, method: Method, secs: f64) -> Row {
    Row {
        setting: setting.to_string(),
        replicate,
        method: method.to_string(),
        h2: None,
        lo: None,
        hi: None,
        status: Status::Failed,
        wall_time_s: secs,
        support_size: None,
    }
}

fn run_cell(plan: &BenchmarkPlan, setting: Setting, replicate: usize) -> CellOutcome {
    let name = setting.name();
    let mut out = CellOutcome {
        rows: Vec::new(),
        long: Vec::new(),
        failures: Vec::new(),
    };
    let data = match cell_data(plan, setting, replicate) {
        Ok(d) => d,
        Err(e) => {
            for &m in &plan.methods {
                out.rows.push(failed_row(&name, replicate, m, 0.0));
                out.failures.push(FailureRow {
                    setting: name.clone(),
                    replicate,
                    method: m.to_string(),
                    error: format!("data generation: {e}"),
                });
            }
            return out;
        }
    };
    let seed = cell_seed(plan.base_seed, setting, replicate);
    for &m in &plan.methods {
        let (result, secs) = timed(plan.timing, || {
            run_method(m, &data.design, &data.phenotype, Some(data.sigma2_eps), &plan.estimators, seed)
        });
        match result {
            Ok(est) => {
                out.rows.push(Row {
                    setting: name.clone(),
                    replicate,
                    method: m.to_string(),
                    h2: Some(est.h2),
                    lo: est.interval.map(|i| i.lo),
                    hi: est.interval.map(|i| i.hi),
                    status: Status::Ok,
                    wall_time_s: secs,
                    support_size: est.diagnostics.support_size,
                });
                out.long.push(LongRow {
                    setting: name.clone(),
                    method: m.to_string(),
                    replicate,
                    h2: est.h2,
                    true_h2: data.true_h2,
                });
            }
            Err(e) => {
                out.rows.push(failed_row(&name, replicate, m, secs));
                out.failures.push(FailureRow {
                    setting: name.clone(),
                    replicate,
                    method: m.to_string(),
                    error: e.to_string(),
                });
            }
        }
    }
    out
}

/// Runs every cell on a pool of `parallelism` threads. Rows come out ordered
/// by setting, replicate and method as listed in the plan.
pub fn run_benchmark(plan: &BenchmarkPlan, parallelism: usize) -> Result<BenchmarkReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let cells: Vec<(Setting, usize)> = plan
        .settings
        .iter()
        .flat_map(|&s| (0..plan.replicates).map(move |r| (s, r)))
        .collect();
    let outcomes: Vec<CellOutcome> =
        pool.install(|| cells.par_iter().map(|&(s, r)| run_cell(plan, s, r)).collect());
    let mut report = BenchmarkReport::default();
    for o in outcomes {
        report.rows.extend(o.rows);
        report.long.extend(o.long);
        report.failures.extend(o.failures);
    }
    report.summary = summarize(&report.rows);
    Ok(report)
}

/// Writes `rows.csv`, `summary.csv`, `summary.txt`, `long.csv` and `failures.csv`.
pub fn write_report(dir: &Path, report: &BenchmarkReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(crate::error::io_err(dir))?;
    write_csv(&dir.join("rows.csv"), &report.rows, &rows_header())?;
    write_csv(&dir.join("summary.csv"), &report.summary, &SUMMARY_HEADER)?;
    write_csv(&dir.join("long.csv"), &report.long, &LONG_HEADER)?;
    write_csv(&dir.join("failures.csv"), &report.failures, &FAILURE_HEADER)?;
    let table = render_table(&report.summary);
    std::fs::write(dir.join("summary.txt"), table).map_err(crate::error::io_err(dir.join("summary.txt")))
}
