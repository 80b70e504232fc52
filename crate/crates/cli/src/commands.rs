//! The four subcommands as library functions.

use std::path::{Path, PathBuf};

use herit_core::simulate::{simulate_dataset, PhenotypeModel};
use herit_core::Method;

use crate::bench::{run_benchmark, write_report, BenchmarkPlan, BenchmarkReport};
use crate::config::{load_toml, parse_methods, split_list, BenchmarkConfig, EstimateConfig, SimulationConfig};
use crate::error::{io_err, CliError, Result};
use crate::io::{align_phenotype, create, read_genotypes, read_phenotypes, read_truth, write_genotypes, write_phenotypes, write_truth, Truth};
use crate::methods::{run_method, timed, EstimatorSettings};
use crate::report::{read_rows, render_table, summarize, write_csv, write_csv_to, SUMMARY_HEADER};

pub const GENOTYPE_FILE: &str = "genotypes.csv";
pub const PHENOTYPE_FILE: &str = "phenotypes.csv";
pub const TRUTH_FILE: &str = "truth.toml";

/// Simulates one data set from a simulation config and writes the genotype,
/// phenotype and truth files into `out`. `seed` overrides the config seed.
pub fn cmd_simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<Truth> {
    let cfg: SimulationConfig = load_toml(config)?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let spec = cfg.to_spec(seed)?;
    let d = simulate_dataset(&spec)?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    write_genotypes(create(&out.join(GENOTYPE_FILE))?, &d.genotypes)?;
    write_phenotypes(create(&out.join(PHENOTYPE_FILE))?, d.genotypes.sample_ids(), d.phenotype.values())?;
    let support = d.true_effects.support();
    let truth = Truth {
        true_h2: d.true_h2,
        target_h2: spec.target_h2,
        sigma2_eps: d.sigma2_eps,
        seed,
        model: match spec.model {
            PhenotypeModel::FixedEffect => "fixed_effect".into(),
            PhenotypeModel::GctaMixed => "gcta_mixed".into(),
        },
        causal_variants: support.iter().map(|&j| d.genotypes.variant_ids()[j].clone()).collect(),
        causal_effects: support.iter().map(|&j| d.true_effects.values()[j]).collect(),
    };
    write_truth(&out.join(TRUTH_FILE), &truth)?;
    Ok(truth)
}

#[derive(Clone, Debug)]
pub struct EstimateArgs {
    pub genotypes: PathBuf,
    pub phenotypes: PathBuf,
    pub truth: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub methods: Option<String>,
    pub seed: u64,
    pub alpha: f64,
    pub out: Option<PathBuf>,
    pub parallelism: usize,
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct EstimateRow {
    pub method: String,
    pub h2: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub kind: Option<String>,
    pub status: crate::report::Status,
    pub wall_time_s: f64,
    pub support_size: Option<usize>,
    pub error: Option<String>,
}

pub const ESTIMATE_HEADER: [&str; 9] = ["method", "h2", "lo", "hi", "kind", "status", "wall_time_s", "support_size", "error"];

/// Runs the requested estimators on a genotype/phenotype file pair after
/// variant filtering, imputation and centering. Writes `estimate.csv` into
/// `out` when given. A failing estimator yields a failed row, not an error.
pub fn cmd_estimate(args: &EstimateArgs) -> Result<Vec<EstimateRow>> {
    let cfg: EstimateConfig = match &args.config {
        Some(p) => load_toml(p)?,
        None => EstimateConfig::default(),
    };
    let methods: Vec<Method> = match &args.methods {
        Some(list) => parse_methods(&split_list(list))?,
        None => Method::ALL.iter().copied().filter(|m| *m != Method::Oracle || args.truth.is_some()).collect(),
    };
    if methods.contains(&Method::Oracle) && args.truth.is_none() {
        return Err(CliError::Usage("the oracle needs the true noise variance: pass --truth".into()));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage("alpha must lie in (0, 1)".into()));
    }
    let sigma2 = match &args.truth {
        Some(p) => Some(read_truth(p)?.sigma2_eps),
        None => None,
    };
    let raw = read_genotypes(&args.genotypes)?;
    let table = read_phenotypes(&args.phenotypes)?;
    let y = align_phenotype(&raw, &table)?;
    let g = raw.filter_variants(cfg.filter.maf_min, cfg.filter.missing_max)?.impute_and_center();
    let settings = EstimatorSettings {
        alpha: args.alpha,
        enet: cfg.estimators.penalty(),
        boost: cfg.estimators.boost(0)?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.parallelism.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let rows: Vec<EstimateRow> = pool.install(|| {
        methods
            .iter()
            .map(|&m| {
                let (res, secs) = timed(args.timing, || run_method(m, &g, &y, sigma2, &settings, args.seed));
                match res {
                    Ok(est) => EstimateRow {
                        method: m.to_string(),
                        h2: Some(est.h2),
                        lo: est.interval.map(|i| i.lo),
                        hi: est.interval.map(|i| i.hi),
                        kind: est.interval.map(|i| i.kind.as_str().to_string()),
                        status: crate::report::Status::Ok,
                        wall_time_s: secs,
                        support_size: est.diagnostics.support_size,
                        error: None,
                    },
                    Err(e) => EstimateRow {
                        method: m.to_string(),
                        h2: None,
                        lo: None,
                        hi: None,
                        kind: None,
                        status: crate::report::Status::Failed,
                        wall_time_s: secs,
                        support_size: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_csv(&dir.join("estimate.csv"), &rows, &ESTIMATE_HEADER)?;
    }
    Ok(rows)
}

pub fn write_estimate_rows<W: std::io::Write>(out: W, rows: &[EstimateRow]) -> Result<()> {
    write_csv_to(out, rows, &ESTIMATE_HEADER)
}

/// Command-line overrides of benchmark config values.
#[derive(Clone, Debug, Default)]
pub struct BenchmarkOverrides {
    pub methods: Option<String>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
}

pub fn load_benchmark(config: &Path, o: &BenchmarkOverrides) -> Result<(BenchmarkConfig, PathBuf)> {
    let mut cfg: BenchmarkConfig = load_toml(config)?;
    if let Some(m) = &o.methods {
        cfg.methods = split_list(m);
    }
    if let Some(s) = o.seed {
        cfg.base_seed = s;
    }
    if let Some(a) = o.alpha {
        cfg.alpha = a;
    }
    if let Some(p) = o.parallelism {
        cfg.parallelism = p;
    }
    let dir = config.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(out) = &o.out {
        cfg.output_dir = Some(out.clone());
    } else if let Some(out) = &cfg.output_dir {
        cfg.output_dir = Some(dir.join(out));
    }
    Ok((cfg, dir))
}

/// Runs a benchmark config and writes its report files.
pub fn cmd_benchmark(config: &Path, overrides: &BenchmarkOverrides) -> Result<BenchmarkReport> {
    let (cfg, dir) = load_benchmark(config, overrides)?;
    let out = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Usage("no output directory: set output_dir or pass --out".into()))?;
    let plan = BenchmarkPlan::from_config(&cfg, &dir)?;
    let report = run_benchmark(&plan, cfg.parallelism)?;
    write_report(&out, &report)?;
    Ok(report)
}

/// Recomputes the summary of a rows file. Writes `summary.csv` and
/// `summary.txt` into `out` when given and returns the text table.
pub fn cmd_summarize(rows_path: &Path, out: Option<&Path>) -> Result<String> {
    let rows = read_rows(rows_path)?;
    let summary = summarize(&rows);
    let table = render_table(&summary);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_csv(&dir.join("summary.csv"), &summary, &SUMMARY_HEADER)?;
        std::fs::write(dir.join("summary.txt"), &table).map_err(io_err(dir.join("summary.txt")))?;
    }
    Ok(table)
}
