//! Dimension reduction: batch PCA and reduced-rank incremental PCA.

mod batch;
mod online;

pub use batch::{fit_batch_pca, ExplainedVariance, PcaModel};
pub use online::{
    init_streaming_pca, update_mean, CovRecursionState, StreamingPcaState,
    ORTHONORMALITY_GUARD, RESIDUAL_THRESHOLD,
};

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, SymMatrix};

/// Largest principal angle (radians) between the column spans of two
/// orthonormal bases of equal rank.
pub fn principal_angle(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    let m = a.t().dot(&b);
    let gram = SymMatrix::from_array(m.t().dot(&m))?;
    let eig = sym_eigen(&gram)?;
    let smallest = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let sigma = smallest.max(0.0).sqrt().min(1.0);
    Ok(sigma.acos())
}
