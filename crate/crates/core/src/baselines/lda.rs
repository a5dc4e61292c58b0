use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::{check_dim, class_means, class_scatters, log_priors, regularized_inverse};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::argmax;
use crate::linalg::SymMatrix;

/// Linear discriminant with a pooled within-class covariance.
#[derive(Debug, Clone)]
pub struct LdaModel {
    class_means: Array2<f64>,
    pooled_precision: SymMatrix,
    log_priors: Vec<f64>,
    /// Row g holds `Σ⁻¹ μ_g`.
    weights: Array2<f64>,
    offsets: Vec<f64>,
}

pub fn fit_lda(train: &Dataset) -> Result<LdaModel> {
    let (means, counts) = class_means(train)?;
    if let Some(g) = counts.iter().position(|&c| c < 2) {
        return Err(Error::Degenerate(format!(
            "class {} has fewer than two training rows",
            train.class_names()[g]
        )));
    }
    let n = train.n_rows();
    let g_count = train.n_classes();
    if n <= g_count {
        return Err(Error::Degenerate("not enough rows for a pooled covariance".into()));
    }
    let mut pooled = SymMatrix::zeros(train.n_features());
    for s in class_scatters(train, &means) {
        pooled.blend(1.0, 1.0, &s);
    }
    pooled.scale(1.0 / (n - g_count) as f64);
    let (precision, _) = regularized_inverse(pooled)?;
    LdaModel::from_parts(means, precision, log_priors(&counts))
}

impl LdaModel {
    pub fn from_parts(class_means: Array2<f64>, pooled_precision: SymMatrix, log_priors: Vec<f64>) -> Result<Self> {
        if class_means.ncols() != pooled_precision.order() || class_means.nrows() != log_priors.len() {
            return Err(Error::DimensionMismatch {
                expected: pooled_precision.order(),
                got: class_means.ncols(),
            });
        }
        let weights = class_means.dot(&pooled_precision.view());
        let offsets = weights
            .rows()
            .into_iter()
            .zip(class_means.rows())
            .map(|(w, m)| -0.5 * w.dot(&m))
            .collect();
        Ok(Self {
            class_means,
            pooled_precision,
            log_priors,
            weights,
            offsets,
        })
    }

    pub fn class_means(&self) -> ArrayView2<'_, f64> {
        self.class_means.view()
    }

    pub fn pooled_precision(&self) -> &SymMatrix {
        &self.pooled_precision
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    /// `δ_g(x) = xᵀΣ⁻¹μ_g − ½μ_gᵀΣ⁻¹μ_g + log π_g`
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        check_dim(self.class_means.ncols(), x)?;
        let lin: Array1<f64> = self.weights.dot(&x);
        Ok(lin
            .iter()
            .zip(&self.offsets)
            .zip(&self.log_priors)
            .map(|((l, o), p)| l + o + p)
            .collect())
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }
}
