//! Linear-model data types and the two heritability identities.
//!
//! Every estimator in the crate ends in one of two places: an estimate of the
//! genetic variance divided by the phenotypic variance, or one minus an
//! estimate of the noise variance divided by the phenotypic variance. Both
//! live here, together with the result type they produce.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::stats;

/// Trait values for `n` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct PhenotypeVector {
    values: Vec<f64>,
    mean_removed: bool,
    original_mean: f64,
}

impl PhenotypeVector {
    /// Wraps raw trait values without centering them.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Data("a phenotype needs at least two samples".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(alloc::format!("non-finite phenotype at sample {i}")));
        }
        Ok(Self {
            values,
            mean_removed: false,
            original_mean: 0.0,
        })
    }

    /// Wraps raw trait values and removes their mean.
    pub fn centered(values: Vec<f64>) -> Result<Self> {
        Ok(Self::new(values)?.center())
    }

    /// Returns a mean-removed copy; already centered vectors are returned as is.
    pub fn center(&self) -> Self {
        if self.mean_removed {
            return self.clone();
        }
        let m = stats::mean(&self.values);
        Self {
            values: self.values.iter().map(|v| v - m).collect(),
            mean_removed: true,
            original_mean: m,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_centered(&self) -> bool {
        self.mean_removed
    }

    /// Mean removed at centering time (0 for raw vectors).
    pub fn original_mean(&self) -> f64 {
        self.original_mean
    }

    /// Restriction to the given samples, re-centered.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Self::centered(rows.iter().map(|&i| self.values[i]).collect())
    }
}

/// Convention for the phenotypic variance denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceConvention {
    /// `||y||^2 / n`, only meaningful for centered phenotypes.
    MeanSquare,
    /// Sample variance with divisor `n - 1`.
    Unbiased,
}

pub fn phenotypic_variance(y: &PhenotypeVector, convention: VarianceConvention) -> Result<f64> {
    match convention {
        VarianceConvention::MeanSquare => {
            if !y.is_centered() {
                return Err(Error::Data(
                    "the mean-square convention requires a centered phenotype".into(),
                ));
            }
            Ok(crate::linalg::norm_sq(y.values()) / y.len() as f64)
        }
        VarianceConvention::Unbiased => Ok(stats::variance(y.values())),
    }
}

fn check_var_y(var_y: f64) -> Result<()> {
    if !var_y.is_finite() {
        return Err(Error::Data("non-finite phenotypic variance".into()));
    }
    if var_y <= 0.0 {
        return Err(Error::DegeneratePhenotype(var_y));
    }
    Ok(())
}

/// `1 - sigma2 / var_y`, unclamped.
pub fn raw_heritability_from_noise(sigma2_hat: f64, var_y: f64) -> Result<f64> {
    check_var_y(var_y)?;
    Ok(1.0 - sigma2_hat / var_y)
}

/// `clamp(1 - sigma2 / var_y, 0, 1)`
pub fn heritability_from_noise(sigma2_hat: f64, var_y: f64) -> Result<f64> {
    raw_heritability_from_noise(sigma2_hat, var_y).map(clamp_unit)
}

/// `clamp(signal_var / var_y, 0, 1)`
pub fn heritability_from_signal(signal_var: f64, var_y: f64) -> Result<f64> {
    check_var_y(var_y)?;
    Ok(clamp_unit(signal_var / var_y))
}

/// Clamps to `[0, 1]`; NaN stays NaN.
#[inline]
pub fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Heritability computed from the simulator's true noise variance. Only
/// usable on synthetic data, where it serves as the benchmark reference.
pub fn oracle_estimate(y: &PhenotypeVector, sigma2_true: f64) -> Result<HeritabilityEstimate> {
    let var_y = phenotypic_variance(y, VarianceConvention::Unbiased)?;
    let raw = raw_heritability_from_noise(sigma2_true, var_y)?;
    Ok(HeritabilityEstimate::new(Method::Oracle, raw))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Oracle,
    Eigenprism,
    Mle,
    Moment,
    SLasso,
    Enet,
    BoostHer,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Oracle,
        Method::Eigenprism,
        Method::Mle,
        Method::Moment,
        Method::SLasso,
        Method::Enet,
        Method::BoostHer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Eigenprism => "eigenprism",
            Method::Mle => "mle",
            Method::Moment => "moment",
            Method::SLasso => "slasso",
            Method::Enet => "enet",
            Method::BoostHer => "boosther",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == lower)
            .ok_or_else(|| Error::Spec(alloc::format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntervalKind {
    Confidence,
    Honest,
    Reliable,
}

impl IntervalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalKind::Confidence => "confidence",
            IntervalKind::Honest => "honest",
            IntervalKind::Reliable => "reliable",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub kind: IntervalKind,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Per-split record of the sample-splitting estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitEstimate {
    pub replicate: usize,
    pub half: SplitHalf,
    pub support_size: usize,
    pub sigma2_hat: f64,
    pub h2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitHalf {
    /// Select on the first half, estimate on the second.
    ASelectBEstimate,
    /// Roles swapped.
    BSelectAEstimate,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// Number of selected variants `k` for the sparse estimators.
    pub support_size: Option<usize>,
    pub iterations: Option<usize>,
    pub objective: Option<f64>,
    /// Estimate before clamping to `[0, 1]`.
    pub raw_h2: f64,
    /// Interval before clamping to `[0, 1]`.
    pub raw_interval: Option<(f64, f64)>,
    pub splits: Vec<SplitEstimate>,
    /// Method specific scalars (e.g. `eta_hat`, `p1_star`, `lambda`).
    pub values: BTreeMap<&'static str, f64>,
    pub flags: Vec<String>,
}

/// A point estimate of `h^2` with an optional interval.
#[derive(Clone, Debug, PartialEq)]
pub struct HeritabilityEstimate {
    pub method: Method,
    pub h2: f64,
    pub interval: Option<Interval>,
    pub diagnostics: Diagnostics,
}

impl HeritabilityEstimate {
    /// Builds an estimate from an unclamped value; the raw value is kept in
    /// the diagnostics.
    pub fn new(method: Method, raw_h2: f64) -> Self {
        Self {
            method,
            h2: clamp_unit(raw_h2),
            interval: None,
            diagnostics: Diagnostics {
                raw_h2,
                ..Diagnostics::default()
            },
        }
    }

    /// `raw_h2 ± half_width`, clamped to `[0, 1]`.
    pub fn with_symmetric_interval(self, half_width: f64, kind: IntervalKind) -> Self {
        let raw = self.diagnostics.raw_h2;
        self.with_interval(raw - half_width, raw + half_width, kind)
    }

    pub fn with_interval(mut self, lo: f64, hi: f64, kind: IntervalKind) -> Self {
        self.diagnostics.raw_interval = Some((lo, hi));
        let lo = clamp_unit(lo).min(self.h2);
        let hi = clamp_unit(hi).max(self.h2);
        self.interval = Some(Interval { lo, hi, kind });
        self
    }

    pub fn with_value(mut self, key: &'static str, v: f64) -> Self {
        self.diagnostics.values.insert(key, v);
        self
    }

    pub fn with_support(mut self, k: usize) -> Self {
        self.diagnostics.support_size = Some(k);
        self
    }

    pub fn with_iterations(mut self, it: usize) -> Self {
        self.diagnostics.iterations = Some(it);
        self
    }

    pub fn with_objective(mut self, obj: f64) -> Self {
        self.diagnostics.objective = Some(obj);
        self
    }

    pub fn flag(mut self, f: impl Into<String>) -> Self {
        self.diagnostics.flags.push(f.into());
        self
    }
}

/// Per-variant additive effects. The support is derived from the values so
/// it can never disagree with them.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectVector {
    values: Vec<f64>,
}

impl EffectVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            values: alloc::vec![0.0; p],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}
