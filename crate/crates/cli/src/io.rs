//! CSV genotype and phenotype files, and the truth file of simulated data.
//!
//! Genotypes: first row `sample_id,<variant ids>`, then one row per sample;
//! entries are numbers or `NA`. Phenotypes: `sample_id,value`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use herit_core::linalg::Matrix;
use herit_core::{GenotypeMatrix, PhenotypeVector};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

pub const MISSING_TOKEN: &str = "NA";

fn parse_error(source: &str, line: usize, column: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        source_name: source.to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn record_line(rec: &csv::StringRecord, fallback: usize) -> usize {
    rec.position().map_or(fallback, |p| p.line() as usize)
}

/// Parses a genotype table; `source` names the input in error messages.
pub fn parse_genotypes<R: Read>(input: R, source: &str) -> Result<GenotypeMatrix> {
    let mut rdr = reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(parse_error(source, 1, 0, "empty file")),
        Some(r) => r?,
    };
    if header.len() < 2 {
        return Err(parse_error(source, 1, 0, "header needs a sample id column and at least one variant"));
    }
    let variant_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (j, id) in variant_ids.iter().enumerate() {
        if id.is_empty() {
            return Err(parse_error(source, 1, j + 2, "empty variant id"));
        }
        if let Some(first) = seen.insert(id, j + 2) {
            return Err(parse_error(source, 1, j + 2, format!("duplicate variant id '{id}' (first in column {first})")));
        }
    }
    let p = variant_ids.len();
    let mut sample_ids: Vec<String> = Vec::new();
    let mut sample_pos: HashMap<String, usize> = HashMap::new();
    let mut values: Vec<f64> = Vec::new();
    for (k, rec) in records.enumerate() {
        let rec = rec?;
        let line = record_line(&rec, k + 2);
        if rec.len() != p + 1 {
            return Err(parse_error(
                source,
                line,
                rec.len().min(p + 1) + 1,
                format!("expected {} fields, found {}", p + 1, rec.len()),
            ));
        }
        let id = &rec[0];
        if id.is_empty() {
            return Err(parse_error(source, line, 1, "empty sample id"));
        }
        if let Some(first) = sample_pos.insert(id.to_string(), line) {
            return Err(parse_error(source, line, 1, format!("duplicate sample id '{id}' (first on line {first})")));
        }
        sample_ids.push(id.to_string());
        for (j, tok) in rec.iter().skip(1).enumerate() {
            let v = if tok == MISSING_TOKEN {
                f64::NAN
            } else {
                match tok.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        return Err(parse_error(
                            source,
                            line,
                            j + 2,
                            format!("invalid genotype '{tok}' for variant '{}'", variant_ids[j]),
                        ))
                    }
                }
            };
            values.push(v);
        }
    }
    let n = sample_ids.len();
    if n == 0 {
        return Err(parse_error(source, 2, 0, "no samples"));
    }
    let x = Matrix::from_fn(n, p, |i, j| values[i * p + j]);
    Ok(GenotypeMatrix::new(x, variant_ids, sample_ids)?)
}

pub fn read_genotypes(path: &Path) -> Result<GenotypeMatrix> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_genotypes(BufReader::new(file), &path.display().to_string())
}

/// Sample ids and values of a phenotype table, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct PhenotypeTable {
    pub sample_ids: Vec<String>,
    pub values: Vec<f64>,
}

pub fn parse_phenotypes<R: Read>(input: R, source: &str) -> Result<PhenotypeTable> {
    let mut rdr = reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(parse_error(source, 1, 0, "empty file")),
        Some(r) => r?,
    };
    if header.len() != 2 {
        return Err(parse_error(source, 1, 0, format!("expected header 'sample_id,value', found {} fields", header.len())));
    }
    let mut table = PhenotypeTable {
        sample_ids: Vec::new(),
        values: Vec::new(),
    };
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (k, rec) in records.enumerate() {
        let rec = rec?;
        let line = record_line(&rec, k + 2);
        if rec.len() != 2 {
            return Err(parse_error(source, line, rec.len().min(2) + 1, format!("expected 2 fields, found {}", rec.len())));
        }
        let id = &rec[0];
        if id.is_empty() {
            return Err(parse_error(source, line, 1, "empty sample id"));
        }
        if let Some(first) = seen.insert(id.to_string(), line) {
            return Err(parse_error(source, line, 1, format!("duplicate sample id '{id}' (first on line {first})")));
        }
        let v = match rec[1].parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => return Err(parse_error(source, line, 2, format!("invalid phenotype value '{}'", &rec[1]))),
        };
        table.sample_ids.push(id.to_string());
        table.values.push(v);
    }
    if table.values.is_empty() {
        return Err(parse_error(source, 2, 0, "no samples"));
    }
    Ok(table)
}

pub fn read_phenotypes(path: &Path) -> Result<PhenotypeTable> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_phenotypes(BufReader::new(file), &path.display().to_string())
}

/// Phenotype in the sample order of `g`. Both files must list exactly the same ids.
pub fn align_phenotype(g: &GenotypeMatrix, table: &PhenotypeTable) -> Result<PhenotypeVector> {
    let by_id: HashMap<&str, f64> = table
        .sample_ids
        .iter()
        .map(String::as_str)
        .zip(table.values.iter().copied())
        .collect();
    let mut y = Vec::with_capacity(g.n());
    for id in g.sample_ids() {
        match by_id.get(id.as_str()) {
            Some(&v) => y.push(v),
            None => return Err(CliError::Alignment(format!("sample '{id}' has genotypes but no phenotype"))),
        }
    }
    if table.sample_ids.len() != g.n() {
        let geno: std::collections::HashSet<&str> = g.sample_ids().iter().map(String::as_str).collect();
        let extra = table
            .sample_ids
            .iter()
            .find(|id| !geno.contains(id.as_str()))
            .expect("more phenotype ids than genotype ids");
        return Err(CliError::Alignment(format!("sample '{extra}' has a phenotype but no genotypes")));
    }
    Ok(PhenotypeVector::new(y)?)
}

fn format_entry(v: f64) -> String {
    if v.is_nan() {
        MISSING_TOKEN.to_string()
    } else {
        v.to_string()
    }
}

pub fn write_genotypes<W: Write>(out: W, g: &GenotypeMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let x = g.matrix();
    let mut header = vec!["sample_id".to_string()];
    header.extend(g.variant_ids().iter().cloned());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(g.p() + 1);
    for (i, id) in g.sample_ids().iter().enumerate() {
        row.clear();
        row.push(id.clone());
        row.extend((0..g.p()).map(|j| format_entry(x.get(i, j))));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err("genotype output"))?;
    Ok(())
}

pub fn write_phenotypes<W: Write>(out: W, sample_ids: &[String], y: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_id", "value"])?;
    for (id, v) in sample_ids.iter().zip(y) {
        w.write_record([id.as_str(), &v.to_string()])?;
    }
    w.flush().map_err(io_err("phenotype output"))?;
    Ok(())
}

/// Ground truth of a simulated data set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub true_h2: f64,
    pub target_h2: f64,
    pub sigma2_eps: f64,
    pub seed: u64,
    pub model: String,
    /// Variants with a nonzero effect and their effects, on the scale of the
    /// design the phenotype was generated from.
    pub causal_variants: Vec<String>,
    pub causal_effects: Vec<f64>,
}

pub fn write_truth(path: &Path, truth: &Truth) -> Result<()> {
    let text = toml::to_string(truth).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_truth(path: &Path) -> Result<Truth> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}
