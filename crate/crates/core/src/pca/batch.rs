use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{covariance, sym_eigen};

/// Top-q principal subspace of a fixed sample.
///
/// The basis columns are the leading eigenvectors of the 1/n covariance;
/// `residual_loss` is the projection loss, i.e. the sum of the discarded
/// eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Array1<f64>,
    basis: Array2<f64>,
    eigenvalues: Array1<f64>,
    total_variance: f64,
    residual_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainedVariance {
    pub eigenvalues: Vec<f64>,
    pub ratios: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl ExplainedVariance {
    pub(crate) fn from_eigenvalues(eigenvalues: &[f64], total: f64) -> Result<Self> {
        if !(total > 0.0) {
            return Err(Error::Degenerate("total variance is zero".into()));
        }
        let ratios: Vec<f64> = eigenvalues.iter().map(|l| l / total).collect();
        let cumulative = ratios
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            eigenvalues: eigenvalues.to_vec(),
            ratios,
            cumulative,
        })
    }
}

pub fn fit_batch_pca(data: ArrayView2<'_, f64>, q: usize) -> Result<PcaModel> {
    let (n, d) = data.dim();
    if q == 0 || q > d {
        return Err(Error::invalid("q", format!("{q} is not in 1..={d}")));
    }
    if n < 2 {
        return Err(Error::invalid("data", "batch PCA needs at least two rows"));
    }
    let (mean, cov) = covariance(data);
    let total_variance = cov.trace();
    let eig = sym_eigen(&cov)?;
    let values = eig.values.mapv(|v| v.max(0.0));
    Ok(PcaModel {
        mean,
        basis: eig.vectors.slice(s![.., ..q]).to_owned(),
        eigenvalues: values.slice(s![..q]).to_owned(),
        total_variance,
        residual_loss: values.slice(s![q..]).sum(),
    })
}

impl PcaModel {
    pub(crate) fn from_parts(
        mean: Array1<f64>,
        basis: Array2<f64>,
        eigenvalues: Array1<f64>,
        total_variance: f64,
    ) -> Self {
        let residual_loss = (total_variance - eigenvalues.sum()).max(0.0);
        Self {
            mean,
            basis,
            eigenvalues,
            total_variance,
            residual_loss,
        }
    }

    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    /// d×q, columns are the principal directions.
    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    pub fn eigenvalues(&self) -> ArrayView1<'_, f64> {
        self.eigenvalues.view()
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn residual_loss(&self) -> f64 {
        self.residual_loss
    }

    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn n_components(&self) -> usize {
        self.basis.ncols()
    }

    /// Centered scores `(x - mean)ᵀ u_j`.
    pub fn project(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok((&x - &self.mean).dot(&self.basis))
    }

    pub fn project_rows(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if rows.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: rows.ncols(),
            });
        }
        Ok((&rows - &self.mean).dot(&self.basis))
    }

    pub fn explained_variance(&self) -> Result<ExplainedVariance> {
        ExplainedVariance::from_eigenvalues(
            self.eigenvalues.as_slice().expect("contiguous"),
            self.total_variance,
        )
    }
}
