use alloc::string::String;

/// Errors raised by the estimators, the simulator and the data preparation steps.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("data error: {0}")]
    Data(String),
    #[error("phenotype variance must be positive, got {0}")]
    DegeneratePhenotype(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no variants left after filtering")]
    EmptyMatrix,
    #[error("unsupported shape n={n}, p={p}: {reason}")]
    UnsupportedShape {
        n: usize,
        p: usize,
        reason: &'static str,
    },
    #[error("solver failed: {0}")]
    SolverFailed(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("ill-conditioned spectrum: m2_hat = {0}")]
    IllConditionedSpectrum(f64),
    #[error("estimator failed: {0}")]
    EstimatorFailed(String),
    #[error("zero variance column {0}")]
    ZeroVarianceColumn(usize),
    #[error("causal effects have zero genetic variance")]
    DegenerateCausal,
    #[error("degenerate fit: residual scale collapsed to zero")]
    DegenerateFit,
    #[error("support of size {support} too large for {rows} rows")]
    SupportTooLarge { rows: usize, support: usize },
    #[error("only {ok} of {required} required replicates succeeded")]
    InsufficientReplicates { ok: usize, required: usize },
    #[error("invalid specification: {0}")]
    Spec(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
