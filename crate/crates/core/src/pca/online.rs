use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use super::batch::{fit_batch_pca, ExplainedVariance, PcaModel};
use crate::error::{Error, Result};
use crate::linalg::{canonical_sign, covariance, orthonormality_residual, sym_eigen, SymMatrix};

/// Relative size below which the out-of-span residual is treated as zero.
pub const RESIDUAL_THRESHOLD: f64 = 1e-10;
/// Orthonormality drift that triggers a Gram-Schmidt pass.
pub const ORTHONORMALITY_GUARD: f64 = 1e-8;

/// `μ_{n+1} = n/(n+1) μ_n + 1/(n+1) x`
pub fn update_mean(mean: ArrayView1<'_, f64>, n: usize, x: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = n as f64;
    let a = n / (n + 1.0);
    let b = 1.0 / (n + 1.0);
    ndarray::Zip::from(&mean)
        .and(&x)
        .map_collect(|&m, &xi| a * m + b * xi)
}

/// Full covariance carried by the perturbation recursion
/// `Σ_{n+1} = n/(n+1) Σ_n + n/(n+1)² (x - μ_n)(x - μ_n)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovRecursionState {
    pub count: usize,
    pub mean: Array1<f64>,
    pub cov: SymMatrix,
}

impl CovRecursionState {
    pub fn from_points(points: ArrayView2<'_, f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::invalid("points", "need at least one point"));
        }
        let (mean, cov) = covariance(points);
        Ok(Self {
            count: points.nrows(),
            mean,
            cov,
        })
    }

    pub fn update(&mut self, x: ArrayView1<'_, f64>) -> Result<()> {
        check_dim(self.mean.len(), x.len())?;
        let n = self.count as f64;
        let centered = &x - &self.mean;
        self.cov.scale(n / (n + 1.0));
        self.cov.add_outer(n / ((n + 1.0) * (n + 1.0)), centered.view());
        self.mean = update_mean(self.mean.view(), self.count, x);
        self.count += 1;
        Ok(())
    }
}

/// Rank-q eigenbasis `V_n` and eigenvalues `D_n` approximating the stream
/// covariance, updated one observation at a time through a (q+1)×(q+1)
/// symmetric eigenproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamingPcaState {
    count: usize,
    mean: Array1<f64>,
    basis: Array2<f64>,
    eigenvalues: Array1<f64>,
    total_variance: f64,
}

/// Seeds the stream with a batch PCA of the first `n₀` rows.
pub fn init_streaming_pca(head: ArrayView2<'_, f64>, q: usize) -> Result<StreamingPcaState> {
    if head.nrows() < q + 1 {
        return Err(Error::invalid(
            "n0",
            format!("head has {} rows, needs at least q+1 = {}", head.nrows(), q + 1),
        ));
    }
    let model = fit_batch_pca(head, q)?;
    Ok(StreamingPcaState {
        count: head.nrows(),
        mean: model.mean().to_owned(),
        basis: model.basis().to_owned(),
        eigenvalues: model.eigenvalues().to_owned(),
        total_variance: model.total_variance(),
    })
}

impl StreamingPcaState {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    pub fn eigenvalues(&self) -> ArrayView1<'_, f64> {
        self.eigenvalues.view()
    }

    pub fn q(&self) -> usize {
        self.basis.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Trace of the exact stream covariance, tracked alongside the low-rank part.
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// `Ξ_n = V_n D_n V_nᵀ`
    pub fn low_rank_covariance(&self) -> Array2<f64> {
        let scaled = &self.basis * &self.eigenvalues;
        scaled.dot(&self.basis.t())
    }

    pub fn to_model(&self) -> PcaModel {
        PcaModel::from_parts(
            self.mean.clone(),
            self.basis.clone(),
            self.eigenvalues.clone(),
            self.total_variance,
        )
    }

    pub fn project(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.input_dim(), x.len())?;
        Ok((&x - &self.mean).dot(&self.basis))
    }

    pub fn explained_variance(&self) -> Result<ExplainedVariance> {
        ExplainedVariance::from_eigenvalues(
            self.eigenvalues.as_slice().expect("contiguous"),
            self.total_variance,
        )
    }

    /// Absorbs one observation.
    pub fn update(&mut self, x: ArrayView1<'_, f64>) -> Result<()> {
        check_dim(self.input_dim(), x.len())?;
        let q = self.q();
        let n = self.count as f64;
        let factor = n / ((n + 1.0) * (n + 1.0));

        let centered = &x - &self.mean;
        let coords = self.basis.t().dot(&centered);
        let residual = &centered - &self.basis.dot(&coords);
        let r = residual.dot(&residual).sqrt();
        let centered_norm = centered.dot(&centered).sqrt();
        let in_span = r < RESIDUAL_THRESHOLD * (1.0 + centered_norm);

        let k = if in_span { q } else { q + 1 };
        let mut p = Array2::zeros((k, k));
        for i in 0..q {
            p[[i, i]] = (n + 1.0) * self.eigenvalues[i];
            for j in 0..q {
                p[[i, j]] += coords[i] * coords[j];
            }
        }
        if !in_span {
            for i in 0..q {
                p[[i, q]] = r * coords[i];
                p[[q, i]] = r * coords[i];
            }
            p[[q, q]] = r * r;
        }
        p.mapv_inplace(|v| v * factor);

        let eig = sym_eigen(&SymMatrix::from_array(p)?)?;
        let rotation = eig.vectors.slice(s![.., ..q]);
        let new_basis = if in_span {
            self.basis.dot(&rotation)
        } else {
            let mut augmented = Array2::zeros((self.input_dim(), q + 1));
            augmented.slice_mut(s![.., ..q]).assign(&self.basis);
            augmented.column_mut(q).assign(&(&residual / r));
            augmented.dot(&rotation)
        };
        self.basis = new_basis;
        self.eigenvalues = eig.values.slice(s![..q]).mapv(|v| v.max(0.0));
        for mut col in self.basis.columns_mut() {
            let mut owned = col.to_owned();
            canonical_sign(&mut owned);
            col.assign(&owned);
        }
        if orthonormality_residual(self.basis.view()) > ORTHONORMALITY_GUARD {
            gram_schmidt(&mut self.basis);
        }

        self.total_variance =
            n / (n + 1.0) * self.total_variance + factor * centered.dot(&centered);
        self.mean = update_mean(self.mean.view(), self.count, x);
        self.count += 1;
        Ok(())
    }
}

/// Modified Gram-Schmidt on the columns, in place.
fn gram_schmidt(basis: &mut Array2<f64>) {
    let q = basis.ncols();
    for j in 0..q {
        for i in 0..j {
            let prev = basis.column(i).to_owned();
            let proj = prev.dot(&basis.column(j));
            basis.column_mut(j).scaled_add(-proj, &prev);
        }
        let norm = basis.column(j).dot(&basis.column(j)).sqrt();
        if norm > 0.0 {
            basis.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pca::principal_angle;
    use ndarray::{array, Axis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut ChaCha8Rng, n: usize, scales: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn((n, scales.len()), |(_, j)| {
            scales[j] * rng.sample::<f64, _>(StandardNormal)
        })
    }

    fn max_abs_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
        (&a - &b).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn mean_examples() {
        assert_eq!(update_mean(array![0.0].view(), 1, array![2.0].view()), array![1.0]);
        let m = array![1.5, -2.0];
        assert_eq!(update_mean(m.view(), 7, m.view()), m);
    }

    #[test]
    fn streamed_mean_matches_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = gaussian(&mut rng, 100, &[1.0, 5.0, 0.1]);
        let mut mean = xs.row(0).to_owned();
        for (i, row) in xs.rows().into_iter().enumerate().skip(1) {
            mean = update_mean(mean.view(), i, row);
        }
        let batch = xs.mean_axis(Axis(0)).unwrap();
        for (a, b) in mean.iter().zip(batch.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cov_recursion_examples() {
        let mut st = CovRecursionState::from_points(array![[0.0, 0.0]].view()).unwrap();
        st.update(array![2.0, 0.0].view()).unwrap();
        assert_eq!(st.cov.view(), array![[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(st.mean, array![1.0, 0.0]);

        let before = st.cov.clone();
        let mean = st.mean.clone();
        st.update(mean.view()).unwrap();
        let mut shrunk = before;
        shrunk.scale(2.0 / 3.0);
        assert_eq!(st.cov, shrunk);
    }

    #[test]
    fn cov_recursion_matches_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs = gaussian(&mut rng, 200, &[1.0, 2.0, 3.0, 0.5]);
        let mut st = CovRecursionState::from_points(xs.slice(s![..1, ..])).unwrap();
        for row in xs.rows().into_iter().skip(1) {
            st.update(row).unwrap();
        }
        let (_, batch) = covariance(xs.view());
        assert!(max_abs_diff(st.cov.view(), batch.view()) < 1e-10);
    }

    #[test]
    fn init_rank_one_head() {
        let head = array![[1.0, 2.0], [2.0, 4.0], [-1.0, -2.0], [0.0, 0.0]];
        let st = init_streaming_pca(head.view(), 1).unwrap();
        let batch = fit_batch_pca(head.view(), 2).unwrap();
        assert!((st.eigenvalues()[0] - batch.eigenvalues()[0]).abs() < 1e-12);
        assert!(batch.eigenvalues()[1].abs() < 1e-12);
        assert_eq!(st.count(), 4);
    }

    #[test]
    fn init_full_rank_reproduces_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let head = gaussian(&mut rng, 12, &[3.0, 2.0, 1.0]);
        let st = init_streaming_pca(head.view(), 3).unwrap();
        let (_, cov) = covariance(head.view());
        assert!(max_abs_diff(st.low_rank_covariance().view(), cov.view()) < 1e-12);
    }

    #[test]
    fn minimal_head_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let head = gaussian(&mut rng, 3, &[1.0, 1.0, 1.0, 1.0]);
        assert!(init_streaming_pca(head.view(), 2).is_ok());
        assert!(init_streaming_pca(head.view(), 3).is_err());
    }

    #[test]
    fn in_span_update_stays_in_span() {
        // Data lives in the xy-plane of R³; q = 2 spans it exactly.
        let head = array![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [-1.0, -1.0, 0.0], [0.5, 0.3, 0.0]];
        let mut st = init_streaming_pca(head.view(), 2).unwrap();
        let mut cov = CovRecursionState::from_points(head.view()).unwrap();
        let x = array![3.0, -2.0, 0.0];
        st.update(x.view()).unwrap();
        cov.update(x.view()).unwrap();
        assert!(st.basis().row(2).iter().all(|v| v.abs() < 1e-12));
        assert!(max_abs_diff(st.low_rank_covariance().view(), cov.cov.view()) < 1e-12);
        assert!(orthonormality_residual(st.basis()) < 1e-12);
    }

    #[test]
    fn full_rank_tracks_covariance_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs = gaussian(&mut rng, 300, &[4.0, 1.0, 2.0, 0.3, 1.5]);
        let mut st = init_streaming_pca(xs.slice(s![..10, ..]), 5).unwrap();
        let mut cov = CovRecursionState::from_points(xs.slice(s![..10, ..])).unwrap();
        for row in xs.rows().into_iter().skip(10) {
            st.update(row).unwrap();
            cov.update(row).unwrap();
            assert!(max_abs_diff(st.low_rank_covariance().view(), cov.cov.view()) <= 1e-8);
        }
        assert_eq!(st.count(), 300);
        assert!((st.total_variance() - cov.cov.trace()).abs() < 1e-10);
    }

    #[test]
    fn planted_subspace_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xs = gaussian(&mut rng, 500, &[5.0, 4.0, 0.5, 0.4, 0.3, 0.2]);
        let mut st = init_streaming_pca(xs.slice(s![..20, ..]), 2).unwrap();
        for row in xs.rows().into_iter().skip(20) {
            st.update(row).unwrap();
            assert!(orthonormality_residual(st.basis()) <= 1e-8);
            assert!(st.eigenvalues().iter().all(|&l| l >= 0.0));
            assert!(st.eigenvalues()[0] >= st.eigenvalues()[1]);
        }
        let batch = fit_batch_pca(xs.view(), 2).unwrap();
        let angle = principal_angle(st.basis(), batch.basis()).unwrap();
        assert!(angle <= 0.1, "angle {angle}");
    }

    #[test]
    fn dimension_checks() {
        let head = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let mut st = init_streaming_pca(head.view(), 1).unwrap();
        assert!(st.update(array![1.0].view()).is_err());
        assert!(st.project(array![1.0, 2.0, 3.0].view()).is_err());
    }
}
