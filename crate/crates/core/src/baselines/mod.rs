//! Parametric and nearest-neighbour comparison classifiers.

mod knn;
mod lda;
mod qda;

pub use knn::{default_k_grid, knn_cv_select_k, KnnModel};
pub use lda::{fit_lda, LdaModel};
pub use qda::{fit_qda, QdaModel};

use ndarray::{Array1, Array2, ArrayView1};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Relative ridge added to every covariance before inversion.
pub const RIDGE: f64 = 1e-8;

pub(crate) fn class_means(train: &Dataset) -> Result<(Array2<f64>, Vec<usize>)> {
    let counts = train.class_counts();
    if let Some(g) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Degenerate(format!(
            "class {} is absent from the training sample",
            train.class_names()[g]
        )));
    }
    let mut means = Array2::zeros((train.n_classes(), train.n_features()));
    for (row, &y) in train.features().rows().into_iter().zip(train.labels()) {
        let mut m = means.row_mut(y);
        m += &row;
    }
    for (mut m, &c) in means.rows_mut().into_iter().zip(&counts) {
        m /= c as f64;
    }
    Ok((means, counts))
}

/// Per-class scatter matrices `Σ_i (x_i − μ_g)(x_i − μ_g)ᵀ`.
pub(crate) fn class_scatters(train: &Dataset, means: &Array2<f64>) -> Vec<SymMatrix> {
    let q = train.n_features();
    let mut scatters = vec![SymMatrix::zeros(q); train.n_classes()];
    for (row, &y) in train.features().rows().into_iter().zip(train.labels()) {
        let centered = &row - &means.row(y);
        scatters[y].add_outer(1.0, centered.view());
    }
    scatters
}

/// Adds `ε = RIDGE · trace / q` to the diagonal and inverts; returns the
/// precision and log-determinant.
pub(crate) fn regularized_inverse(mut cov: SymMatrix) -> Result<(SymMatrix, f64)> {
    let q = cov.order() as f64;
    let eps = RIDGE * cov.trace() / q;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Degenerate("covariance has zero trace".into()));
    }
    cov.add_diagonal(eps);
    cov.inverse_and_logdet(eps)
}

pub(crate) fn log_priors(counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect()
}

pub(crate) fn quad_form(p: &SymMatrix, v: ArrayView1<'_, f64>) -> f64 {
    let pv: Array1<f64> = p.view().dot(&v);
    v.dot(&pv)
}

pub(crate) fn check_dim(expected: usize, x: ArrayView1<'_, f64>) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}
