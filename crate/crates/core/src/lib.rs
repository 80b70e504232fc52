//! Heritability estimation for the high-dimensional linear model
//! `y = X beta + eps`.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the numerical side of
//! the toolkit: data preparation, simulation and seven estimators of the
//! narrow-sense heritability `h^2 = beta' Sigma beta / (beta' Sigma beta + sigma^2)`.
//! File formats, the command line and parallel drivers live in the `herit` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod boost;
pub mod direct;
pub mod enet;
pub mod error;
pub mod genotype;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};
pub use genotype::GenotypeMatrix;
pub use linalg::Matrix;
pub use model::{
    EffectVector, HeritabilityEstimate, Interval, IntervalKind, Method, PhenotypeVector,
};
