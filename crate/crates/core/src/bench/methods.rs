use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::Serialize;
use serde_json::json;

use super::{BenchConfig, Method};
use crate::baselines::{fit_lda, fit_qda, knn_cv_select_k, KnnModel};
use crate::data::{standardize, Dataset, Split};
use crate::error::Result;
use crate::kernel::{loo_cv_select_shared, CvMode, OfflineClassifier};
use crate::online::{init_online, tune_c_gamma, StepSchedule};
use crate::pca::{fit_batch_pca, init_streaming_pca, StreamingPcaState};

/// Range of posterior estimates seen by a kernel method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorBounds {
    pub min: f64,
    pub max: f64,
    /// Largest `|Σ_g P̂_g − 1|`; only tracked where the estimator keeps the
    /// sum at one.
    pub max_sum_deviation: Option<f64>,
}

impl PosteriorBounds {
    fn of(estimates: ArrayView2<'_, f64>, track_sum: bool) -> Self {
        let min = estimates.iter().copied().fold(f64::INFINITY, f64::min);
        let max = estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dev = estimates
            .rows()
            .into_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max);
        Self {
            min,
            max,
            max_sum_deviation: track_sum.then_some(dev),
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
            max_sum_deviation: match (self.max_sum_deviation, other.max_sum_deviation) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
        }
    }
}

/// Output of one method on one split.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub predictions: Vec<usize>,
    /// Per-class scores of every test row (posteriors, discriminants or vote shares).
    pub scores: Array2<f64>,
    pub truth: Vec<usize>,
    pub seconds: f64,
    pub tuning: serde_json::Value,
    pub bounds: Option<PosteriorBounds>,
}

fn pc_names(q: usize) -> Vec<String> {
    (1..=q).map(|j| format!("pc{j}")).collect()
}

fn project_with(state: &StreamingPcaState, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((rows.nrows(), state.q()));
    for (i, r) in rows.rows().into_iter().enumerate() {
        out.row_mut(i).assign(&state.project(r)?);
    }
    Ok(out)
}

/// Incremental PCA over the training stream: batch PCA on the first `n0`
/// rows, one update per later row. Test rows use the final basis; training
/// rows use it too unless `streaming_projection` asks for the basis current
/// when each row arrived.
pub fn reduce_streaming(
    train: &Dataset,
    test: &Dataset,
    q: usize,
    n0: usize,
    streaming_projection: bool,
) -> Result<(Dataset, Dataset, StreamingPcaState)> {
    let x = train.features();
    let head = x.slice(ndarray::s![..n0, ..]);
    let mut state = init_streaming_pca(head, q)?;
    let mut train_z = if streaming_projection {
        let mut z = Array2::zeros((train.n_rows(), q));
        z.slice_mut(ndarray::s![..n0, ..]).assign(&project_with(&state, head)?);
        Some(z)
    } else {
        None
    };
    for i in n0..train.n_rows() {
        state.update(x.row(i))?;
        if let Some(z) = train_z.as_mut() {
            z.row_mut(i).assign(&state.project(x.row(i))?);
        }
    }
    let train_z = match train_z {
        Some(z) => z,
        None => project_with(&state, x)?,
    };
    let test_z = project_with(&state, test.features())?;
    Ok((
        train.with_features(train_z, pc_names(q))?,
        test.with_features(test_z, pc_names(q))?,
        state,
    ))
}

fn reduce_batch(train: &Dataset, test: &Dataset, q: usize) -> Result<(Dataset, Dataset)> {
    let model = fit_batch_pca(train.features(), q)?;
    Ok((
        train.with_features(model.project_rows(train.features())?, pc_names(q))?,
        test.with_features(model.project_rows(test.features())?, pc_names(q))?,
    ))
}

fn rows_to_scores(test: &Dataset, g: usize, f: impl Fn(ndarray::ArrayView1<'_, f64>) -> Result<Vec<f64>>) -> Result<Array2<f64>> {
    let mut scores = Array2::zeros((test.n_rows(), g));
    for (i, r) in test.features().rows().into_iter().enumerate() {
        let s = f(r)?;
        scores.row_mut(i).assign(&ndarray::ArrayView1::from(&s[..]));
    }
    Ok(scores)
}

fn argmax_rows(scores: &Array2<f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|r| crate::kernel::argmax(r.as_slice().expect("row-major")))
        .collect()
}

/// Fits `method` on the training part of `split` and scores the test part.
/// The reported time covers standardization, reduction, tuning, fitting and
/// prediction.
pub fn run_method(method: Method, split: &Split, cfg: &BenchConfig) -> Result<MethodRun> {
    let start = Instant::now();
    let (train, test) = if cfg.standardize {
        let (train, params) = standardize(&split.train)?;
        let test = params.apply_dataset(&split.test)?;
        (train, test)
    } else {
        (split.train.clone(), split.test.clone())
    };
    let g = train.n_classes();

    let (scores, tuning, bounds) = match method {
        Method::Offline => {
            let (train_z, test_z) = reduce_batch(&train, &test, cfg.q)?;
            let clf = OfflineClassifier::fit(train_z, &cfg.bandwidth_grid, cfg.kernel, CvMode::LeaveOneOut)?;
            let post = clf.posteriors(test_z.features())?;
            let bounds = PosteriorBounds::of(post.view(), false);
            (post, json!({ "bandwidths": clf.params() }), Some(bounds))
        }
        Method::Online => {
            let (train_z, test_z, _) = reduce_streaming(&train, &test, cfg.q, cfg.n0, cfg.streaming_projection)?;
            let head = train_z.head(cfg.n0)?;
            let head_bw = loo_cv_select_shared(&head, &cfg.bandwidth_grid, cfg.kernel)?;
            let tuned = tune_c_gamma(&head, &cfg.c_gamma_grid, cfg.q, cfg.kernel)?;
            let sched = StepSchedule::new(tuned.selected, cfg.q, cfg.kernel)?;
            let mut state = init_online(&head, test_z.features(), cfg.kernel, head_bw)?;
            let mut lo = PosteriorBounds::of(state.estimates(), true);
            for i in cfg.n0..train_z.n_rows() {
                state.update(&sched, train_z.row(i), train_z.labels()[i])?;
                lo = lo.merge(PosteriorBounds::of(state.estimates(), true));
            }
            (
                state.estimates().to_owned(),
                json!({ "c_gamma": tuned.selected, "head_bandwidth": head_bw, "n0": cfg.n0 }),
                Some(lo),
            )
        }
        Method::Lda | Method::Qda | Method::Knn => {
            let (train_z, test_z, _) = reduce_streaming(&train, &test, cfg.q, cfg.n0, cfg.streaming_projection)?;
            match method {
                Method::Lda => {
                    let m = fit_lda(&train_z)?;
                    (rows_to_scores(&test_z, g, |x| m.scores(x))?, json!({}), None)
                }
                Method::Qda => {
                    let m = fit_qda(&train_z)?;
                    (rows_to_scores(&test_z, g, |x| m.scores(x))?, json!({}), None)
                }
                _ => {
                    let k = knn_cv_select_k(&train_z, &cfg.k_grid, cfg.knn_folds)?;
                    let m = KnnModel::new(train_z, k)?;
                    (rows_to_scores(&test_z, g, |x| m.scores(x))?, json!({ "k": k }), None)
                }
            }
        }
    };
    let predictions = argmax_rows(&scores);
    Ok(MethodRun {
        predictions,
        scores,
        truth: test.labels().to_vec(),
        seconds: start.elapsed().as_secs_f64(),
        tuning,
        bounds,
    })
}
