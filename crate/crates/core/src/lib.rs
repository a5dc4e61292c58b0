//! Nonparametric kernel classification for batch and streaming data.
//!
//! The offline classifier reduces features with batch PCA and estimates class
//! posteriors with a Nadaraya-Watson average under an adaptive,
//! cross-validated bandwidth. The online classifier reduces features with
//! incremental PCA and refines posteriors one observation at a time with a
//! stochastic-approximation recursion. LDA, QDA and kNN baselines, metrics and
//! a replicated benchmark harness complete the toolkit.

pub mod baselines;
pub mod bench;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod linalg;
pub mod online;
pub mod pca;
pub mod rng;

pub use error::{Error, Result};
