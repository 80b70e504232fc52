//! Genotype matrices and the filtering / imputation / centering steps applied
//! before any estimator sees the data.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default minimum minor allele frequency kept by [`GenotypeMatrix::filter_variants`].
pub const DEFAULT_MAF_MIN: f64 = 0.05;
/// Default maximum missing fraction kept by [`GenotypeMatrix::filter_variants`].
pub const DEFAULT_MISSING_MAX: f64 = 0.10;

/// `n x p` genotype matrix. Missing entries are stored as NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct GenotypeMatrix {
    entries: Matrix,
    variant_ids: Vec<String>,
    sample_ids: Vec<String>,
    maf: Vec<f64>,
    missing_frac: Vec<f64>,
    centered: bool,
}

/// Minor allele frequency and missing fraction of one column, computed from
/// observed entries only. Values above 1 mean diploid dosage coding (0/1/2).
pub fn column_stats(col: &[f64]) -> (f64, f64) {
    let n = col.len();
    let observed: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
    let missing = if n == 0 {
        0.0
    } else {
        (n - observed.len()) as f64 / n as f64
    };
    if observed.is_empty() {
        return (0.0, missing);
    }
    let ploidy = if observed.iter().any(|&v| v > 1.0) { 2.0 } else { 1.0 };
    let freq = (observed.iter().sum::<f64>() / observed.len() as f64 / ploidy).clamp(0.0, 1.0);
    (freq.min(1.0 - freq), missing)
}

impl GenotypeMatrix {
    /// Builds a raw (uncentered) matrix; NaN marks a missing call.
    pub fn new(entries: Matrix, variant_ids: Vec<String>, sample_ids: Vec<String>) -> Result<Self> {
        if variant_ids.len() != entries.cols() {
            return Err(Error::DimensionMismatch {
                expected: entries.cols(),
                found: variant_ids.len(),
            });
        }
        if sample_ids.len() != entries.rows() {
            return Err(Error::DimensionMismatch {
                expected: entries.rows(),
                found: sample_ids.len(),
            });
        }
        if entries.as_slice().iter().any(|v| v.is_infinite()) {
            return Err(Error::Data("infinite genotype entry".into()));
        }
        let (maf, missing_frac) = (0..entries.cols()).map(|j| column_stats(entries.col(j))).unzip();
        Ok(Self {
            entries,
            variant_ids,
            sample_ids,
            maf,
            missing_frac,
            centered: false,
        })
    }

    /// Raw matrix with generated ids `s1..sn` and `v1..vp`.
    pub fn from_matrix(entries: Matrix) -> Result<Self> {
        let variant_ids = (1..=entries.cols()).map(|j| alloc::format!("v{j}")).collect();
        let sample_ids = (1..=entries.rows()).map(|i| alloc::format!("s{i}")).collect();
        Self::new(entries, variant_ids, sample_ids)
    }

    /// Wraps an already centered, fully observed matrix.
    pub fn from_centered(entries: Matrix) -> Result<Self> {
        let mut g = Self::from_matrix(entries)?;
        if g.entries.as_slice().iter().any(|v| v.is_nan()) {
            return Err(Error::Data("centered matrix cannot contain missing entries".into()));
        }
        g.entries.center_columns();
        g.centered = true;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn p(&self) -> usize {
        self.entries.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn variant_ids(&self) -> &[String] {
        &self.variant_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn maf(&self) -> &[f64] {
        &self.maf
    }

    pub fn missing_frac(&self) -> &[f64] {
        &self.missing_frac
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Keeps columns with `maf >= maf_min` and `missing_frac <= missing_max`,
    /// in their original order. Both bounds are inclusive.
    pub fn filter_variants(&self, maf_min: f64, missing_max: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..self.p())
            .filter(|&j| self.maf[j] >= maf_min && self.missing_frac[j] <= missing_max)
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        Ok(self.select_columns(&keep))
    }

    /// Replaces missing calls with the column mean of the observed calls, then
    /// removes each column mean.
    pub fn impute_and_center(&self) -> Self {
        let mut entries = self.entries.clone();
        for j in 0..entries.cols() {
            let col = entries.col_mut(j);
            let (sum, count) = col
                .iter()
                .filter(|v| !v.is_nan())
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            let fill = if count == 0 { 0.0 } else { sum / count as f64 };
            col.iter_mut().filter(|v| v.is_nan()).for_each(|v| *v = fill);
        }
        entries.center_columns();
        Self {
            entries,
            variant_ids: self.variant_ids.clone(),
            sample_ids: self.sample_ids.clone(),
            maf: self.maf.clone(),
            missing_frac: self.missing_frac.clone(),
            centered: true,
        }
    }

    /// Rescales each centered column to unit sample variance (divisor `n - 1`).
    pub fn standardize(&self) -> Result<Self> {
        let base = if self.centered {
            self.clone()
        } else {
            self.impute_and_center()
        };
        let mut entries = base.entries;
        let n = entries.rows();
        if n < 2 {
            return Err(Error::Data("standardization needs at least two samples".into()));
        }
        for j in 0..entries.cols() {
            let col = entries.col_mut(j);
            let var = col.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
            if var <= 1e-12 {
                return Err(Error::ZeroVarianceColumn(j));
            }
            let s = 1.0 / libm::sqrt(var);
            col.iter_mut().for_each(|v| *v *= s);
        }
        Ok(Self {
            entries,
            centered: true,
            ..base
        })
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            entries: self.entries.select_columns(cols),
            variant_ids: cols.iter().map(|&j| self.variant_ids[j].clone()).collect(),
            sample_ids: self.sample_ids.clone(),
            maf: cols.iter().map(|&j| self.maf[j]).collect(),
            missing_frac: cols.iter().map(|&j| self.missing_frac[j]).collect(),
            centered: self.centered,
        }
    }

    /// Row subset. A centered matrix is re-centered on the retained rows; the
    /// per-variant metadata of the full matrix is kept.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut entries = self.entries.select_rows(rows);
        if self.centered {
            entries.center_columns();
        }
        Self {
            entries,
            variant_ids: self.variant_ids.clone(),
            sample_ids: rows.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            maf: self.maf.clone(),
            missing_frac: self.missing_frac.clone(),
            centered: self.centered,
        }
    }

    pub(crate) fn require_centered(&self) -> Result<&Matrix> {
        if !self.centered {
            return Err(Error::Data(
                "genotypes must be imputed and centered before estimation".into(),
            ));
        }
        Ok(&self.entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn raw(rows: usize, cols: usize, row_major: &[f64]) -> GenotypeMatrix {
        GenotypeMatrix::from_matrix(Matrix::from_row_major(rows, cols, row_major).unwrap()).unwrap()
    }

    #[test]
    fn missing_fraction_and_monomorphic_maf() {
        let g = raw(3, 2, &[0.0, 1.0, 1.0, 1.0, f64::NAN, 1.0]);
        assert!((g.missing_frac()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.maf()[1], 0.0);
        assert_eq!(g.maf()[0], 0.5);
    }

    #[test]
    fn filter_boundaries() {
        // 100 samples: column 0 has maf 0.04, column 1 missing 0.10 with maf 0.3,
        // column 2 missing 0.11.
        let mut data = vec![0.0; 300];
        for i in 0..100 {
            data[i * 3] = if i < 4 { 1.0 } else { 0.0 };
            data[i * 3 + 1] = if i < 10 { f64::NAN } else if i < 37 { 1.0 } else { 0.0 };
            data[i * 3 + 2] = if i < 11 { f64::NAN } else if i < 50 { 1.0 } else { 0.0 };
        }
        let g = raw(100, 3, &data);
        let f = g.filter_variants(DEFAULT_MAF_MIN, DEFAULT_MISSING_MAX).unwrap();
        assert_eq!(f.variant_ids(), &["v2".to_string()]);
    }

    #[test]
    fn filter_everything_is_an_error() {
        let g = raw(2, 1, &[1.0, 1.0]);
        assert_eq!(g.filter_variants(0.05, 0.1), Err(Error::EmptyMatrix));
    }

    #[test]
    fn impute_then_center() {
        let g = raw(3, 1, &[0.0, 1.0, f64::NAN]);
        let c = g.impute_and_center();
        assert!(c.is_centered());
        assert_eq!(c.matrix().col(0), &[-0.5, 0.5, 0.0]);
    }

    #[test]
    fn constant_column_centers_to_zero() {
        let g = raw(3, 1, &[1.0, 1.0, 1.0]);
        assert_eq!(g.impute_and_center().matrix().col(0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn standardize_rejects_constant_columns() {
        let g = raw(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(g.standardize(), Err(Error::ZeroVarianceColumn(0)));
    }

    fn arb_genotypes() -> impl Strategy<Value = GenotypeMatrix> {
        (3usize..30, 1usize..8).prop_flat_map(|(n, p)| {
            proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), Just(f64::NAN)], n * p)
                .prop_map(move |d| raw(n, p, &d))
        })
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(g in arb_genotypes()) {
            if let Ok(once) = g.filter_variants(0.05, 0.3) {
                let twice = once.filter_variants(0.05, 0.3).unwrap();
                prop_assert_eq!(once.variant_ids(), twice.variant_ids());
            }
        }

        #[test]
        fn centered_columns_sum_to_zero(g in arb_genotypes()) {
            let c = g.impute_and_center();
            for j in 0..c.p() {
                let col = c.matrix().col(j);
                prop_assert!(col.iter().all(|v| !v.is_nan()));
                prop_assert!(col.iter().sum::<f64>().abs() <= 1e-8 * c.n() as f64);
            }
        }

        #[test]
        fn maf_ignores_missing(col in proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), Just(f64::NAN)], 1..50)) {
            let observed: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            prop_assert_eq!(column_stats(&col).0, column_stats(&observed).0);
            let maf = column_stats(&col).0;
            prop_assert!((0.0..=0.5).contains(&maf));
        }
    }
}
