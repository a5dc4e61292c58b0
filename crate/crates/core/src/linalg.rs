//! Dense symmetric linear algebra: covariance accumulation and a cyclic
//! Jacobi eigensolver. Orders here are small (tens at most).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm, relative to the norm of the input, at which
/// the Jacobi iteration stops.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Square matrix whose two triangles are bitwise equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: Array2<f64>,
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        Self {
            data: Array2::zeros((order, order)),
        }
    }

    pub fn identity(order: usize) -> Self {
        Self {
            data: Array2::eye(order),
        }
    }

    /// Builds from a square matrix, averaging the two triangles.
    pub fn from_array(a: Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, got: c });
        }
        let mut data = a;
        for i in 0..r {
            for j in (i + 1)..r {
                let v = 0.5 * (data[[i, j]] + data[[j, i]]);
                data[[i, j]] = v;
                data[[j, i]] = v;
            }
        }
        Ok(Self { data })
    }

    pub fn order(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[[i, j]]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.diag().sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.mapv_inplace(|v| v * factor);
    }

    pub fn add_diagonal(&mut self, eps: f64) {
        self.data.diag_mut().mapv_inplace(|v| v + eps);
    }

    /// `self += alpha * v vᵀ`
    pub fn add_outer(&mut self, alpha: f64, v: ArrayView1<'_, f64>) {
        let m = self.order();
        for i in 0..m {
            let ai = alpha * v[i];
            for j in i..m {
                let x = self.data[[i, j]] + ai * v[j];
                self.data[[i, j]] = x;
                self.data[[j, i]] = x;
            }
        }
    }

    /// `self = a * self + b * other`
    pub fn blend(&mut self, a: f64, b: f64, other: &SymMatrix) {
        self.data.zip_mut_with(&other.data, |x, &y| *x = a * *x + b * y);
    }

    /// Inverse through the eigendecomposition with eigenvalues floored at
    /// `floor`, together with the log-determinant under the same floor.
    pub fn inverse_and_logdet(&self, floor: f64) -> Result<(SymMatrix, f64)> {
        if !(floor > 0.0) {
            return Err(Error::Degenerate(format!(
                "eigenvalue floor {floor} must be positive"
            )));
        }
        let eig = sym_eigen(self)?;
        let m = self.order();
        let mut inv = Array2::zeros((m, m));
        let mut logdet = 0.0;
        for (k, &lambda) in eig.values.iter().enumerate() {
            let l = lambda.max(floor);
            logdet += l.ln();
            let u = eig.vectors.column(k);
            for i in 0..m {
                let ui = u[i] / l;
                for j in 0..m {
                    inv[[i, j]] += ui * u[j];
                }
            }
        }
        Ok((SymMatrix::from_array(inv)?, logdet))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Descending.
    pub values: Array1<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Array2<f64>,
}

/// Mean and 1/n covariance of the rows of `points`.
pub fn covariance(points: ArrayView2<'_, f64>) -> (Array1<f64>, SymMatrix) {
    let (n, m) = points.dim();
    assert!(n >= 1, "covariance of an empty point set");
    let mean = points.sum_axis(ndarray::Axis(0)) / n as f64;
    let mut cov = SymMatrix::zeros(m);
    let mut centered = Array1::zeros(m);
    for row in points.rows() {
        centered.assign(&(&row - &mean));
        cov.add_outer(1.0, centered.view());
    }
    cov.scale(1.0 / n as f64);
    (mean, cov)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted descending. Each eigenvector is signed so that its
/// largest-magnitude component is positive, preferring the lowest index among
/// components that tie (to within a relative 1e-9).
pub fn sym_eigen(a: &SymMatrix) -> Result<EigenDecomposition> {
    let m = a.order();
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("matrix has non-finite entries".into()));
    }
    let mut w = a.data.clone();
    let mut v = Array2::<f64>::eye(m);
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_TOLERANCE * norm;

    let mut converged = norm == 0.0;
    let mut sweeps = 0;
    while !converged {
        let off = off_diagonal_norm(&w);
        if off <= threshold {
            converged = true;
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NonConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..m {
            for q in (p + 1)..m {
                rotate(&mut w, &mut v, p, q);
            }
        }
    }
    debug_assert!(converged);

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| w[[j, j]].total_cmp(&w[[i, i]]));
    let values = order.iter().map(|&i| w[[i, i]]).collect();
    let mut vectors = Array2::zeros((m, m));
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).to_owned();
        canonical_sign(&mut col);
        vectors.column_mut(dst).assign(&col);
    }
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_norm(w: &Array2<f64>) -> f64 {
    let m = w.nrows();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                s += w[[i, j]] * w[[i, j]];
            }
        }
    }
    s.sqrt()
}

/// One rotation in the (p, q) plane annihilating w[p][q].
fn rotate(w: &mut Array2<f64>, v: &mut Array2<f64>, p: usize, q: usize) {
    let apq = w[[p, q]];
    if apq == 0.0 {
        return;
    }
    let m = w.nrows();
    let theta = (w[[q, q]] - w[[p, p]]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..m {
        let (akp, akq) = (w[[k, p]], w[[k, q]]);
        w[[k, p]] = c * akp - s * akq;
        w[[k, q]] = s * akp + c * akq;
    }
    for k in 0..m {
        let (apk, aqk) = (w[[p, k]], w[[q, k]]);
        w[[p, k]] = c * apk - s * aqk;
        w[[q, k]] = s * apk + c * aqk;
    }
    w[[p, q]] = 0.0;
    w[[q, p]] = 0.0;
    for k in 0..m {
        let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
        v[[k, p]] = c * vkp - s * vkq;
        v[[k, q]] = s * vkp + c * vkq;
    }
}

pub(crate) fn canonical_sign(col: &mut Array1<f64>) {
    let max = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let lead = col
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-9))
        .expect("some component attains the maximum");
    if col[lead] < 0.0 {
        col.mapv_inplace(|x| -x);
    }
}

/// Largest entry of |AᵀA - I|.
pub fn orthonormality_residual(a: ArrayView2<'_, f64>) -> f64 {
    let g = a.t().dot(&a);
    let mut worst = 0.0f64;
    for ((i, j), &x) in g.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((x - target).abs());
    }
    worst
}
