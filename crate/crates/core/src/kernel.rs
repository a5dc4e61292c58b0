//! Offline kernel classifier.
//!
//! Posteriors are Nadaraya-Watson averages of class indicators with a
//! per-query bandwidth `h = c · max_i ‖X_i − x‖ · n^(−ν)`. The constants
//! `(c, ν)` are chosen per class by minimizing the leave-one-out Brier score
//! `CV_g(c, ν) = (1/n) Σ_j (1{Y_j = g} − P̂_g^(−j)(X_j))²` over a grid.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelId {
    Epanechnikov,
}

impl KernelId {
    /// `K(u)` for a normalized distance `u ≥ 0`.
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelId::Epanechnikov => epanechnikov(u),
        }
    }

    /// `K(√u2)`, avoiding the square root where the kernel allows it.
    #[inline]
    pub fn eval_sq(self, u2: f64) -> f64 {
        match self {
            KernelId::Epanechnikov => {
                if u2 < 1.0 {
                    0.75 * (1.0 - u2)
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelId::Epanechnikov => f.write_str("epanechnikov"),
        }
    }
}

impl FromStr for KernelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(KernelId::Epanechnikov),
            other => Err(Error::invalid("kernel", format!("unknown kernel `{other}`"))),
        }
    }
}

/// `¾(1 − u²)` on `|u| < 1`, zero elsewhere.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthParams {
    pub c: f64,
    pub nu: f64,
}

impl BandwidthParams {
    /// Requires `0 < c < 10` and `0 < ν < 1`.
    pub fn new(c: f64, nu: f64) -> Result<Self> {
        if !(c > 0.0 && c < 10.0) {
            return Err(Error::invalid("c", format!("{c} is not in (0, 10)")));
        }
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::invalid("nu", format!("{nu} is not in (0, 1)")));
        }
        Ok(Self { c, nu })
    }

    /// Bandwidth for a sample of size `n` whose farthest point lies at `max_distance`.
    #[inline]
    pub fn bandwidth(&self, max_distance: f64, n: usize) -> f64 {
        self.c * max_distance * (n as f64).powf(-self.nu)
    }
}

/// The 19 × 19 default search grid: c ∈ {0.5, 1, …, 9.5}, ν ∈ {0.05, …, 0.95}.
pub fn default_grid() -> Vec<BandwidthParams> {
    let mut grid = Vec::with_capacity(361);
    for ci in 1..=19 {
        for ni in 1..=19 {
            grid.push(BandwidthParams {
                c: 0.5 * ci as f64,
                nu: 0.05 * ni as f64,
            });
        }
    }
    grid
}

/// Cross-validation scheme for bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvMode {
    LeaveOneOut,
    /// Observation j sits in fold `j mod k`.
    KFold(usize),
}

impl CvMode {
    fn fold_of(self, j: usize) -> usize {
        match self {
            CvMode::LeaveOneOut => j,
            CvMode::KFold(k) => j % k,
        }
    }
}

pub fn adaptive_bandwidth(
    params: &BandwidthParams,
    train_features: ArrayView2<'_, f64>,
    x_query: ArrayView1<'_, f64>,
) -> Result<f64> {
    let n = train_features.nrows();
    if n == 0 {
        return Err(Error::invalid("train_features", "empty training sample"));
    }
    if train_features.ncols() != x_query.len() {
        return Err(Error::DimensionMismatch {
            expected: train_features.ncols(),
            got: x_query.len(),
        });
    }
    let max_d2 = train_features
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, x_query))
        .fold(0.0f64, f64::max);
    if max_d2 == 0.0 {
        return Err(Error::Degenerate(
            "every training point coincides with the query".into(),
        ));
    }
    Ok(params.bandwidth(max_d2.sqrt(), n))
}

#[inline]
pub(crate) fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the largest value; the lowest index wins ties. NaN never wins.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best
}

/// Training points seen from one query: squared distances sorted ascending
/// (stable, so equal distances keep training order) with their labels.
struct Neighborhood {
    d2: Vec<f64>,
    labels: Vec<usize>,
    max_d2: f64,
}

impl Neighborhood {
    fn build(
        features: ArrayView2<'_, f64>,
        labels: &[usize],
        x: ArrayView1<'_, f64>,
        keep: impl Fn(usize) -> bool,
    ) -> Self {
        let mut pairs: Vec<(f64, usize)> = features
            .rows()
            .into_iter()
            .zip(labels)
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, (row, &y))| (sq_dist(row, x), y))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let max_d2 = pairs.last().map_or(0.0, |p| p.0);
        let (d2, labels) = pairs.into_iter().unzip();
        Self { d2, labels, max_d2 }
    }

    fn len(&self) -> usize {
        self.d2.len()
    }

    /// Kernel mass inside bandwidth `h`: total and per class.
    fn weights(&self, h: f64, kernel: KernelId, numerators: &mut [f64]) -> f64 {
        numerators.iter_mut().for_each(|v| *v = 0.0);
        if !(h > 0.0) {
            return 0.0;
        }
        let inv_h2 = 1.0 / (h * h);
        let mut total = 0.0;
        for (&d2, &y) in self.d2.iter().zip(&self.labels) {
            let u2 = d2 * inv_h2;
            if u2 >= 1.0 && kernel == KernelId::Epanechnikov {
                break;
            }
            let w = kernel.eval_sq(u2);
            total += w;
            numerators[y] += w;
        }
        total
    }
}

fn class_frequencies(labels: impl Iterator<Item = usize>, n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_classes];
    let mut n = 0.0;
    for y in labels {
        counts[y] += 1.0;
        n += 1.0;
    }
    if n > 0.0 {
        counts.iter_mut().for_each(|c| *c /= n);
    }
    counts
}

/// Fitted offline classifier over a (reduced) training sample.
#[derive(Debug, Clone)]
pub struct OfflineClassifier {
    train: Dataset,
    params: Vec<BandwidthParams>,
    kernel: KernelId,
    priors: Vec<f64>,
}

impl OfflineClassifier {
    /// Classifier with fixed per-class bandwidth constants.
    pub fn new(train: Dataset, params: Vec<BandwidthParams>, kernel: KernelId) -> Result<Self> {
        if params.len() != train.n_classes() {
            return Err(Error::DimensionMismatch {
                expected: train.n_classes(),
                got: params.len(),
            });
        }
        for p in &params {
            BandwidthParams::new(p.c, p.nu)?;
        }
        let priors = class_frequencies(train.labels().iter().copied(), train.n_classes());
        Ok(Self {
            train,
            params,
            kernel,
            priors,
        })
    }

    /// Selects `(c, ν)` per class by cross-validation, then fits.
    pub fn fit(
        train: Dataset,
        grid: &[BandwidthParams],
        kernel: KernelId,
        mode: CvMode,
    ) -> Result<Self> {
        let scores = cv_scores(&train, grid, kernel, mode)?;
        let params = (0..train.n_classes())
            .map(|g| grid[scores.argmin_class(g)])
            .collect();
        Self::new(train, params, kernel)
    }

    pub fn params(&self) -> &[BandwidthParams] {
        &self.params
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn kernel(&self) -> KernelId {
        self.kernel
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn n_classes(&self) -> usize {
        self.train.n_classes()
    }

    /// Estimated `P(Y = g | x)` for every class. A class whose kernel window
    /// holds no training mass falls back to its prior.
    pub fn posterior(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        if x.len() != self.train.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.train.n_features(),
                got: x.len(),
            });
        }
        let nb = Neighborhood::build(self.train.features(), self.train.labels(), x, |_| true);
        Ok(posterior_from(&nb, &self.params, self.kernel, &self.priors))
    }

    pub fn posteriors(&self, queries: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let rows: Vec<Vec<f64>> = queries
            .rows()
            .into_iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|x| self.posterior(x))
            .collect::<Result<_>>()?;
        let g = self.n_classes();
        Ok(Array2::from_shape_fn((rows.len(), g), |(i, k)| rows[i][k]))
    }

    pub fn classify(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax(&self.posterior(x)?))
    }
}

fn posterior_from(
    nb: &Neighborhood,
    params: &[BandwidthParams],
    kernel: KernelId,
    priors: &[f64],
) -> Vec<f64> {
    let n_classes = priors.len();
    let mut num = vec![0.0; n_classes];
    let mut out = Vec::with_capacity(n_classes);
    let max_d = nb.max_d2.sqrt();
    for (g, p) in params.iter().enumerate() {
        let h = p.bandwidth(max_d, nb.len());
        let den = nb.weights(h, kernel, &mut num);
        out.push(if den > 0.0 { num[g] / den } else { priors[g] });
    }
    out
}

/// Posterior at training point `j` with pair `j` left out of both sums.
pub fn loo_posterior(
    train: &Dataset,
    j: usize,
    params: &[BandwidthParams],
    kernel: KernelId,
) -> Result<Vec<f64>> {
    if params.len() != train.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: train.n_classes(),
            got: params.len(),
        });
    }
    let labels = train.labels();
    let nb = Neighborhood::build(train.features(), labels, train.row(j), |i| i != j);
    let priors = class_frequencies(
        labels.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &y)| y),
        train.n_classes(),
    );
    Ok(posterior_from(&nb, params, kernel, &priors))
}

/// Cross-validation criterion for every (class, grid point).
#[derive(Debug, Clone, PartialEq)]
pub struct CvScores {
    pub grid: Vec<BandwidthParams>,
    /// `scores[g][k]` is `CV_g(grid[k])`.
    pub scores: Vec<Vec<f64>>,
}

impl CvScores {
    /// First grid index minimizing `CV_g`.
    pub fn argmin_class(&self, g: usize) -> usize {
        first_argmin(&self.scores[g])
    }

    /// First grid index minimizing `Σ_g CV_g`, for a bandwidth shared by all classes.
    pub fn argmin_shared(&self) -> usize {
        let totals: Vec<f64> = (0..self.grid.len())
            .map(|k| self.scores.iter().map(|s| s[k]).sum())
            .collect();
        first_argmin(&totals)
    }
}

fn first_argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Evaluates the cross-validation criterion of every class over the grid.
///
/// Cost is O(n² · |grid|): for each held-out point the distances to the
/// retained points are computed once and reused across the grid.
pub fn cv_scores(
    train: &Dataset,
    grid: &[BandwidthParams],
    kernel: KernelId,
    mode: CvMode,
) -> Result<CvScores> {
    let n = train.n_rows();
    let g_count = train.n_classes();
    if grid.is_empty() {
        return Err(Error::invalid("grid", "bandwidth grid is empty"));
    }
    if n < 3 {
        return Err(Error::invalid("train", "cross-validation needs at least three rows"));
    }
    if let CvMode::KFold(k) = mode {
        if k < 2 || k > n {
            return Err(Error::invalid("folds", format!("{k} folds for {n} rows")));
        }
    }
    let labels = train.labels();
    let features = train.features();

    // Fixed-size chunks summed in order keep the result independent of the
    // thread count.
    const CHUNK: usize = 32;
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partials: Vec<Vec<f64>> = starts
        .into_par_iter()
        .map(|start| {
            let mut acc = vec![0.0; g_count * grid.len()];
            let mut num = vec![0.0; g_count];
            for j in start..(start + CHUNK).min(n) {
                let fold = mode.fold_of(j);
                let keep = |i: usize| mode.fold_of(i) != fold;
                let nb = Neighborhood::build(features, labels, features.row(j), keep);
                let priors = class_frequencies(
                    labels
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| keep(i))
                        .map(|(_, &y)| y),
                    g_count,
                );
                let max_d = nb.max_d2.sqrt();
                for (k, p) in grid.iter().enumerate() {
                    let h = p.bandwidth(max_d, nb.len());
                    let den = nb.weights(h, kernel, &mut num);
                    for g in 0..g_count {
                        let est = if den > 0.0 { num[g] / den } else { priors[g] };
                        let target = if labels[j] == g { 1.0 } else { 0.0 };
                        acc[g * grid.len() + k] += (target - est) * (target - est);
                    }
                }
            }
            acc
        })
        .collect();

    let mut totals = vec![0.0; g_count * grid.len()];
    for part in &partials {
        for (t, p) in totals.iter_mut().zip(part) {
            *t += p;
        }
    }
    let scores = (0..g_count)
        .map(|g| {
            totals[g * grid.len()..(g + 1) * grid.len()]
                .iter()
                .map(|s| s / n as f64)
                .collect()
        })
        .collect();
    Ok(CvScores {
        grid: grid.to_vec(),
        scores,
    })
}

/// Grid point minimizing `CV_g` for class `g` (first in grid order on ties).
pub fn loo_cv_select(
    train: &Dataset,
    g: usize,
    grid: &[BandwidthParams],
    kernel: KernelId,
) -> Result<BandwidthParams> {
    if g >= train.n_classes() {
        return Err(Error::invalid("class", format!("class index {g} out of range")));
    }
    let scores = cv_scores(train, grid, kernel, CvMode::LeaveOneOut)?;
    Ok(grid[scores.argmin_class(g)])
}

/// Grid point minimizing the criterion summed over classes.
pub fn loo_cv_select_shared(
    train: &Dataset,
    grid: &[BandwidthParams],
    kernel: KernelId,
) -> Result<BandwidthParams> {
    let scores = cv_scores(train, grid, kernel, CvMode::LeaveOneOut)?;
    Ok(grid[scores.argmin_shared()])
}
