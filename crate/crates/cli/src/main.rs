use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use herit::commands::{
    cmd_benchmark, cmd_estimate, cmd_simulate, cmd_summarize, write_estimate_rows, BenchmarkOverrides, EstimateArgs,
};
use herit::report::{render_table, Status};

#[derive(Parser)]
#[command(name = "herit", version, about = "Heritability estimation for high-dimensional genotype data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a data set: genotype, phenotype and truth files.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate heritability from a genotype and a phenotype file.
    Estimate {
        #[arg(long)]
        genotypes: PathBuf,
        #[arg(long)]
        phenotypes: PathBuf,
        /// Truth file of a simulated data set (enables the oracle).
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated method list.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Write 0 instead of wall-clock times.
        #[arg(long)]
        no_timing: bool,
    },
    /// Run a replicated simulation benchmark.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Recompute the summary of a benchmark rows file.
    Summarize {
        rows: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> herit::Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let truth = cmd_simulate(&config, seed, &out)?;
            println!("true h2 {} written to {}", truth.true_h2, out.display());
        }
        Command::Estimate {
            genotypes,
            phenotypes,
            truth,
            config,
            methods,
            seed,
            alpha,
            out,
            parallelism,
            no_timing,
        } => {
            let rows = cmd_estimate(&EstimateArgs {
                genotypes,
                phenotypes,
                truth,
                config,
                methods,
                seed,
                alpha,
                out,
                parallelism,
                timing: !no_timing,
            })?;
            write_estimate_rows(std::io::stdout().lock(), &rows)?;
            if !rows.iter().any(|r| r.status == Status::Ok) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Benchmark {
            config,
            methods,
            seed,
            alpha,
            out,
            parallelism,
        } => {
            let report = cmd_benchmark(
                &config,
                &BenchmarkOverrides {
                    methods,
                    seed,
                    alpha,
                    out,
                    parallelism,
                },
            )?;
            print!("{}", render_table(&report.summary));
        }
        Command::Summarize { rows, out } => {
            print!("{}", cmd_summarize(&rows, out.as_deref())?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
