use ndarray::{Array2, ArrayView1};

use super::{check_dim, class_means, class_scatters, log_priors, quad_form, regularized_inverse};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::argmax;
use crate::linalg::SymMatrix;

/// Quadratic discriminant with one covariance per class.
#[derive(Debug, Clone)]
pub struct QdaModel {
    means: Array2<f64>,
    precisions: Vec<SymMatrix>,
    log_dets: Vec<f64>,
    log_priors: Vec<f64>,
}

/// Fits class covariances with the `n_g − 1` denominator. A class with
/// fewer than `q + 1` rows is shrunk toward the pooled covariance with
/// weight `(n_g − 1) / q` on its own estimate.
pub fn fit_qda(train: &Dataset) -> Result<QdaModel> {
    let (means, counts) = class_means(train)?;
    let q = train.n_features();
    let n = train.n_rows();
    let g_count = train.n_classes();
    let scatters = class_scatters(train, &means);

    let mut pooled = SymMatrix::zeros(q);
    for s in &scatters {
        pooled.blend(1.0, 1.0, s);
    }
    let needs_pooled = counts.iter().any(|&c| c < q + 1);
    if needs_pooled {
        if n <= g_count {
            return Err(Error::Degenerate(
                "classes too small for a covariance even after pooling".into(),
            ));
        }
        pooled.scale(1.0 / (n - g_count) as f64);
    }

    let mut precisions = Vec::with_capacity(g_count);
    let mut log_dets = Vec::with_capacity(g_count);
    for (mut cov, &c) in scatters.into_iter().zip(&counts) {
        if c >= 2 {
            cov.scale(1.0 / (c - 1) as f64);
        }
        if c < q + 1 {
            let w = (c - 1) as f64 / q as f64;
            cov.blend(w, 1.0 - w, &pooled);
        }
        let (p, ld) = regularized_inverse(cov)?;
        precisions.push(p);
        log_dets.push(ld);
    }
    QdaModel::from_parts(means, precisions, log_dets, log_priors(&counts))
}

impl QdaModel {
    pub fn from_parts(
        means: Array2<f64>,
        precisions: Vec<SymMatrix>,
        log_dets: Vec<f64>,
        log_priors: Vec<f64>,
    ) -> Result<Self> {
        let g = means.nrows();
        if precisions.len() != g || log_dets.len() != g || log_priors.len() != g {
            return Err(Error::DimensionMismatch {
                expected: g,
                got: precisions.len(),
            });
        }
        if let Some(p) = precisions.iter().find(|p| p.order() != means.ncols()) {
            return Err(Error::DimensionMismatch {
                expected: means.ncols(),
                got: p.order(),
            });
        }
        Ok(Self {
            means,
            precisions,
            log_dets,
            log_priors,
        })
    }

    pub fn log_dets(&self) -> &[f64] {
        &self.log_dets
    }

    /// `δ_g(x) = −½ log|Σ_g| − ½ (x − μ_g)ᵀ Σ_g⁻¹ (x − μ_g) + log π_g`
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        check_dim(self.means.ncols(), x)?;
        Ok((0..self.means.nrows())
            .map(|g| {
                let centered = &x - &self.means.row(g);
                -0.5 * self.log_dets[g] - 0.5 * quad_form(&self.precisions[g], centered.view())
                    + self.log_priors[g]
            })
            .collect())
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }
}
