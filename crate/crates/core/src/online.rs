//! Online kernel classifier.
//!
//! For each tracked query `x` the class posteriors follow the
//! stochastic-approximation recursion
//!
//! ```text
//! P̂_{g,n}(x) = P̂_{g,n−1}(x) + θ_n · (1{Y_n = g} − P̂_{g,n−1}(x))
//! θ_n        = c_γ · n^(−4/(d+4)) · K(n^(1/(d+4)) · ‖X_n − x‖)
//! ```
//!
//! started from the offline estimate on the first `n₀` observations.
//! `θ_n` is clamped to `[0, 1]`, so every update is a convex combination and
//! estimates stay in `[0, 1]`. One `θ_n` per (query, observation) is shared
//! by all classes, which preserves `Σ_g P̂_g = 1`.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{argmax, sq_dist, BandwidthParams, KernelId, OfflineClassifier};

pub const SNAPSHOT_VERSION: u32 = 1;

/// Gain sequence of the recursion.
pub trait StepRule {
    /// Step for the `n`-th observation (1-based) at distance `distance` from the query.
    fn step(&self, n: usize, distance: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub c_gamma: f64,
    /// Dimension of the space the recursion runs in (after reduction).
    pub d_eff: usize,
    pub kernel: KernelId,
}

impl StepSchedule {
    pub fn new(c_gamma: f64, d_eff: usize, kernel: KernelId) -> Result<Self> {
        if !(c_gamma > 0.0 && c_gamma.is_finite()) {
            return Err(Error::invalid("c_gamma", format!("{c_gamma} must be positive")));
        }
        if d_eff == 0 {
            return Err(Error::invalid("d_eff", "must be at least 1"));
        }
        Ok(Self {
            c_gamma,
            d_eff,
            kernel,
        })
    }

    /// Unclamped factor `n^(−4/(d+4)) · K(n^(1/(d+4)) · distance)`; the
    /// step is `c_γ` times this.
    pub fn unit_step(&self, n: usize, distance: f64) -> f64 {
        unit_step(self.d_eff, self.kernel, n, distance)
    }

    pub fn step_size(&self, n: usize, distance: f64) -> f64 {
        (self.c_gamma * self.unit_step(n, distance)).clamp(0.0, 1.0)
    }
}

fn unit_step(d_eff: usize, kernel: KernelId, n: usize, distance: f64) -> f64 {
    let n = n.max(1) as f64;
    let d = d_eff as f64;
    let inv_h = n.powf(1.0 / (d + 4.0));
    n.powf(-4.0 / (d + 4.0)) * kernel.eval(inv_h * distance)
}

impl StepRule for StepSchedule {
    fn step(&self, n: usize, distance: f64) -> f64 {
        self.step_size(n, distance)
    }
}

/// Posterior estimates for a fixed set of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlinePosteriorState {
    queries: Array2<f64>,
    estimates: Array2<f64>,
    count: usize,
}

/// Offline estimate on the head sample at every query, using one bandwidth
/// for all classes.
pub fn init_online(
    head: &Dataset,
    queries: ArrayView2<'_, f64>,
    kernel: KernelId,
    head_bandwidth: BandwidthParams,
) -> Result<OnlinePosteriorState> {
    if queries.nrows() == 0 {
        return Err(Error::invalid("queries", "no query points"));
    }
    if head.n_rows() < 2 {
        return Err(Error::invalid("n0", "the head needs at least two observations"));
    }
    if queries.ncols() != head.n_features() {
        return Err(Error::DimensionMismatch {
            expected: head.n_features(),
            got: queries.ncols(),
        });
    }
    let clf = OfflineClassifier::new(head.clone(), vec![head_bandwidth; head.n_classes()], kernel)?;
    let estimates = clf.posteriors(queries)?;
    Ok(OnlinePosteriorState {
        queries: queries.to_owned(),
        estimates,
        count: head.n_rows(),
    })
}

impl OnlinePosteriorState {
    /// State with explicit initial estimates (each row one query's class vector).
    pub fn from_parts(queries: Array2<f64>, estimates: Array2<f64>, count: usize) -> Result<Self> {
        if queries.nrows() == 0 {
            return Err(Error::invalid("queries", "no query points"));
        }
        if estimates.nrows() != queries.nrows() {
            return Err(Error::DimensionMismatch {
                expected: queries.nrows(),
                got: estimates.nrows(),
            });
        }
        if estimates.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("estimates", "every estimate must lie in [0, 1]"));
        }
        Ok(Self {
            queries,
            estimates,
            count,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn n_queries(&self) -> usize {
        self.queries.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.estimates.ncols()
    }

    pub fn queries(&self) -> ArrayView2<'_, f64> {
        self.queries.view()
    }

    pub fn estimates(&self) -> ArrayView2<'_, f64> {
        self.estimates.view()
    }

    /// Absorbs observation `(x, y)` as the `count + 1`-th of the stream.
    pub fn update(&mut self, rule: &impl StepRule, x: ArrayView1<'_, f64>, y: usize) -> Result<()> {
        if x.len() != self.queries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.queries.ncols(),
                got: x.len(),
            });
        }
        if y >= self.n_classes() {
            return Err(Error::invalid("label", format!("class index {y} out of range")));
        }
        self.count += 1;
        let n = self.count;
        for (query, mut est) in self.queries.rows().into_iter().zip(self.estimates.rows_mut()) {
            let theta = rule.step(n, sq_dist(query, x).sqrt());
            if theta == 0.0 {
                continue;
            }
            for (g, p) in est.iter_mut().enumerate() {
                let target = if g == y { 1.0 } else { 0.0 };
                *p += theta * (target - *p);
            }
        }
        Ok(())
    }

    pub fn classify(&self, query: usize) -> Result<usize> {
        if query >= self.n_queries() {
            return Err(Error::invalid(
                "query",
                format!("index {query} but only {} queries", self.n_queries()),
            ));
        }
        let row = self.estimates.row(query);
        Ok(argmax(row.as_slice().expect("row-major")))
    }

    pub fn classify_all(&self) -> Vec<usize> {
        (0..self.n_queries())
            .map(|i| self.classify(i).expect("index in range"))
            .collect()
    }

    pub fn snapshot(&self, schedule: StepSchedule) -> OnlineSnapshot {
        OnlineSnapshot {
            schema_version: SNAPSHOT_VERSION,
            count: self.count,
            queries: self.queries.rows().into_iter().map(|r| r.to_vec()).collect(),
            estimates: self.estimates.rows().into_iter().map(|r| r.to_vec()).collect(),
            schedule,
        }
    }
}

/// Serializable checkpoint of a stream in progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineSnapshot {
    pub schema_version: u32,
    pub count: usize,
    pub queries: Vec<Vec<f64>>,
    pub estimates: Vec<Vec<f64>>,
    pub schedule: StepSchedule,
}

impl OnlineSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let snap: Self = serde_json::from_str(s)
            .map_err(|e| Error::invalid("snapshot", e.to_string()))?;
        if snap.schema_version != SNAPSHOT_VERSION {
            return Err(Error::invalid(
                "snapshot",
                format!("unsupported schema_version {}", snap.schema_version),
            ));
        }
        Ok(snap)
    }

    pub fn restore(&self) -> Result<(OnlinePosteriorState, StepSchedule)> {
        let rows = |v: &Vec<Vec<f64>>, field: &'static str| -> Result<Array2<f64>> {
            let cols = v.first().map_or(0, Vec::len);
            if v.iter().any(|r| r.len() != cols) {
                return Err(Error::invalid(field, "ragged rows"));
            }
            Ok(Array2::from_shape_vec((v.len(), cols), v.concat()).expect("rectangular"))
        };
        let state = OnlinePosteriorState::from_parts(
            rows(&self.queries, "queries")?,
            rows(&self.estimates, "estimates")?,
            self.count,
        )?;
        let schedule = StepSchedule::new(self.schedule.c_gamma, self.schedule.d_eff, self.schedule.kernel)?;
        Ok((state, schedule))
    }
}

/// Outcome of the `c_γ` search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CGammaTuning {
    pub selected: f64,
    /// `(candidate, head misclassification rate)` in grid order.
    pub curve: Vec<(f64, f64)>,
}

/// `n` points log-spaced on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Default search grid for `c_γ`: 60 log-spaced points on [0.5, 120].
pub fn default_c_gamma_grid() -> Vec<f64> {
    log_grid(0.5, 120.0, 60)
}

/// Picks `c_γ` by progressive validation on the head sample.
///
/// For each candidate the recursion runs through the head in order, starting
/// from uniform posteriors; observation `i` is classified with the estimate
/// built from observations `1..i−1` before it is absorbed. The candidate
/// with the fewest head errors wins, the smallest one on ties.
pub fn tune_c_gamma(
    head: &Dataset,
    grid: &[f64],
    q: usize,
    kernel: KernelId,
) -> Result<CGammaTuning> {
    if grid.is_empty() {
        return Err(Error::invalid("c_gamma_grid", "grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::invalid("c_gamma_grid", format!("candidate {bad} is not positive")));
    }
    if head.n_features() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: head.n_features(),
        });
    }
    if head.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Degenerate("the head sample contains a single class".into()));
    }
    let n0 = head.n_rows();
    let g_count = head.n_classes();
    let labels = head.labels();

    // unit[i][k]: unclamped step factor of observation k (1-based index k+1)
    // seen from query i, for k < i.
    let unit: Vec<Vec<f64>> = (0..n0)
        .map(|i| {
            (0..i)
                .map(|k| {
                    let dist = sq_dist(head.row(i), head.row(k)).sqrt();
                    unit_step(q, kernel, k + 1, dist)
                })
                .collect()
        })
        .collect();

    let mut curve = Vec::with_capacity(grid.len());
    let mut est = vec![0.0; g_count];
    for &c in grid {
        let mut errors = 0usize;
        for i in 0..n0 {
            est.iter_mut().for_each(|p| *p = 1.0 / g_count as f64);
            for (k, &u) in unit[i].iter().enumerate() {
                let theta = (c * u).clamp(0.0, 1.0);
                if theta == 0.0 {
                    continue;
                }
                for (g, p) in est.iter_mut().enumerate() {
                    let target = if g == labels[k] { 1.0 } else { 0.0 };
                    *p += theta * (target - *p);
                }
            }
            if argmax(&est) != labels[i] {
                errors += 1;
            }
        }
        curve.push((c, errors as f64 / n0 as f64));
    }

    let mut best = 0;
    for (i, &(c, msr)) in curve.iter().enumerate() {
        let (bc, bm) = curve[best];
        if msr < bm || (msr == bm && c < bc) {
            best = i;
        }
    }
    Ok(CGammaTuning {
        selected: curve[best].0,
        curve,
    })
}
