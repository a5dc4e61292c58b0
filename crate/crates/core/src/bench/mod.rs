//! Replicated benchmark: repeated stratified splits, every method fitted and
//! scored on each, plus the artifact files summarizing the run.

mod methods;
mod output;

pub use methods::{reduce_streaming, run_method, MethodRun, PosteriorBounds};
pub use output::{load_external_predictions, write_artifacts, write_cgamma_curve, write_explained_variance, write_scores};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::default_k_grid;
use crate::data::{stratified_split, Dataset, Split, TrainSize};
use crate::error::{Error, Result};
use crate::eval::{class_metrics, msr, roc_auc, summarize, weighted_f1, ClassMetrics, ConfusionMatrix, RocCurve, Summary};
use crate::kernel::{default_grid, BandwidthParams, KernelId};
use crate::online::default_c_gamma_grid;
use crate::rng::SeededRng;

pub const RESULTS_VERSION: u32 = 1;

/// Per-class training counts of the reference CTG split (Normal, Suspect, Pathologic).
pub const CTG_TRAIN_COUNTS: [usize; 3] = [1153, 205, 130];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lda,
    Qda,
    Knn,
    Online,
    Offline,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Lda, Method::Qda, Method::Knn, Method::Online, Method::Offline];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lda => "lda",
            Method::Qda => "qda",
            Method::Knn => "knn",
            Method::Online => "online",
            Method::Offline => "offline",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid("methods", format!("unknown method `{s}`")))
    }
}

/// Everything that determines a benchmark run apart from the data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub q: usize,
    pub train_size: TrainSizeConfig,
    pub replications: usize,
    pub seed: u64,
    pub n0: usize,
    pub c_gamma_grid: Vec<f64>,
    pub bandwidth_grid: Vec<BandwidthParams>,
    pub kernel: KernelId,
    pub standardize: bool,
    /// Project each training row with the basis current at its arrival
    /// instead of the final basis.
    pub streaming_projection: bool,
    pub k_grid: Vec<usize>,
    pub knn_folds: usize,
    /// Run replications one after another instead of in parallel.
    #[serde(skip)]
    pub serial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainSizeConfig {
    Fraction(f64),
    Counts(Vec<usize>),
}

impl From<&TrainSizeConfig> for TrainSize {
    fn from(c: &TrainSizeConfig) -> Self {
        match c {
            TrainSizeConfig::Fraction(f) => TrainSize::Fraction(*f),
            TrainSizeConfig::Counts(v) => TrainSize::Counts(v.clone()),
        }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            q: 5,
            train_size: TrainSizeConfig::Counts(CTG_TRAIN_COUNTS.to_vec()),
            replications: 100,
            seed: 2024,
            n0: 300,
            c_gamma_grid: default_c_gamma_grid(),
            bandwidth_grid: default_grid(),
            kernel: KernelId::Epanechnikov,
            standardize: true,
            streaming_projection: false,
            k_grid: default_k_grid(),
            knn_folds: 10,
            serial: false,
        }
    }
}

impl BenchConfig {
    /// Checks the configuration against the data it will run on.
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "at least one method is required"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::invalid("methods", format!("`{m}` listed twice")));
            }
        }
        if self.replications == 0 {
            return Err(Error::invalid("m", "at least one replication is required"));
        }
        if self.q == 0 || self.q > data.n_features() {
            return Err(Error::invalid(
                "q",
                format!("{} outside 1..={}", self.q, data.n_features()),
            ));
        }
        let counts = crate::data::train_counts(&(&self.train_size).into(), &data.class_counts())?;
        let n_train: usize = counts.iter().sum();
        let streams = self
            .methods
            .iter()
            .any(|m| !matches!(m, Method::Offline));
        if streams && (self.n0 < self.q + 1 || self.n0 >= n_train) {
            return Err(Error::invalid(
                "n0",
                format!("{} must lie in {}..{n_train}", self.n0, self.q + 1),
            ));
        }
        if self.c_gamma_grid.is_empty() || self.c_gamma_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("c_gamma_grid", "candidates must be positive and finite"));
        }
        if self.bandwidth_grid.is_empty() {
            return Err(Error::invalid("bandwidth_grid", "grid is empty"));
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::invalid("k_grid", "candidates must be positive"));
        }
        if self.knn_folds < 2 {
            return Err(Error::invalid("knn_folds", "at least two folds are required"));
        }
        Ok(())
    }
}

/// Metrics of one method on the first replication's test set.
#[derive(Debug, Clone, Serialize)]
pub struct FirstReplication {
    pub predictions: Vec<usize>,
    pub confusion: ConfusionMatrix,
    pub class_metrics: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub weighted_f1: f64,
    /// One-vs-rest AUC per class; `None` when the class is absent from the test set.
    pub auc: Vec<Option<f64>>,
    #[serde(skip)]
    pub roc: Vec<Option<RocCurve>>,
    pub tuning: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub replication: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: Method,
    /// `None` for failed replications.
    pub msr: Vec<Option<f64>>,
    pub summary: Option<Summary>,
    pub failures: Vec<Failure>,
    pub first: Option<FirstReplication>,
    pub posterior_bounds: Option<PosteriorBounds>,
    /// Wall-clock seconds of the first replication (tuning, training and
    /// prediction). Kept out of `results.json` so repeated runs are identical.
    #[serde(skip)]
    pub seconds: Option<f64>,
}

/// Predictions produced elsewhere for the first replication's test set.
#[derive(Debug, Clone, Serialize)]
pub struct ExternalReport {
    pub label: String,
    pub confusion: ConfusionMatrix,
    pub class_metrics: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub config: BenchConfig,
    pub class_names: Vec<String>,
    pub n_rows: usize,
    pub n_features: usize,
    /// Data-row indices (0-based) of the first replication's test set.
    pub test_manifest: Vec<usize>,
    pub test_labels: Vec<usize>,
    pub methods: Vec<MethodReport>,
    pub external: Vec<ExternalReport>,
}

impl BenchReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn has_failures(&self) -> bool {
        self.methods.iter().any(|m| !m.failures.is_empty())
    }

    /// Scores externally produced predictions aligned with `test_manifest`.
    pub fn merge_external(&mut self, label: &str, predictions: &[usize]) -> Result<()> {
        if predictions.len() != self.test_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.test_labels.len(),
                got: predictions.len(),
            });
        }
        let g = self.class_names.len();
        let cm = ConfusionMatrix::from_predictions(&self.test_labels, predictions, g)?;
        self.external.push(ExternalReport {
            label: label.to_string(),
            class_metrics: (0..g).map(|k| class_metrics(&cm, k)).collect::<Result<_>>()?,
            accuracy: cm.accuracy(),
            weighted_f1: weighted_f1(&cm),
            confusion: cm,
        });
        Ok(())
    }
}

fn split_for(data: &Dataset, cfg: &BenchConfig, master: &SeededRng, replication: usize) -> Result<Split> {
    stratified_split(data, &(&cfg.train_size).into(), &master.substream(replication as u64))
}

fn first_replication(run: &MethodRun, test_labels: &[usize], g: usize) -> Result<FirstReplication> {
    let cm = ConfusionMatrix::from_predictions(test_labels, &run.predictions, g)?;
    let mut roc = Vec::with_capacity(g);
    for k in 0..g {
        let scores: Vec<f64> = run.scores.column(k).to_vec();
        let present = test_labels.contains(&k) && test_labels.iter().any(|&y| y != k);
        roc.push(if present { Some(roc_auc(&scores, test_labels, k)?) } else { None });
    }
    Ok(FirstReplication {
        predictions: run.predictions.clone(),
        class_metrics: (0..g).map(|k| class_metrics(&cm, k)).collect::<Result<_>>()?,
        accuracy: cm.accuracy(),
        weighted_f1: weighted_f1(&cm),
        auc: roc.iter().map(|r| r.as_ref().map(|r| r.auc)).collect(),
        roc,
        confusion: cm,
        tuning: run.tuning.clone(),
    })
}

/// Runs every configured method on `replications` seeded splits.
///
/// Replication 1 runs first, one method at a time, and supplies the timings;
/// the others may run concurrently. A method failing on a replication is
/// recorded in its report without stopping the rest.
pub fn run_bench(data: &Dataset, cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate(data)?;
    let master = SeededRng::new(cfg.seed);
    let g = data.n_classes();

    let first_split = split_for(data, cfg, &master, 1)?;
    let test_labels = first_split.test.labels().to_vec();
    let first_runs: Vec<Result<MethodRun>> = cfg
        .methods
        .iter()
        .map(|&m| run_method(m, &first_split, cfg))
        .collect();

    let replicate = |k: usize| -> Result<Vec<Result<MethodRun>>> {
        let split = split_for(data, cfg, &master, k)?;
        Ok(cfg.methods.iter().map(|&m| run_method(m, &split, cfg)).collect())
    };
    let rest: Vec<Vec<Result<MethodRun>>> = if cfg.serial {
        (2..=cfg.replications).map(replicate).collect::<Result<_>>()?
    } else {
        (2..=cfg.replications)
            .into_par_iter()
            .map(replicate)
            .collect::<Result<_>>()?
    };

    let mut methods = Vec::with_capacity(cfg.methods.len());
    for (slot, &method) in cfg.methods.iter().enumerate() {
        let mut report = MethodReport {
            method,
            msr: Vec::with_capacity(cfg.replications),
            summary: None,
            failures: Vec::new(),
            first: None,
            posterior_bounds: None,
            seconds: None,
        };
        let runs = std::iter::once(&first_runs[slot]).chain(rest.iter().map(|r| &r[slot]));
        for (i, run) in runs.enumerate() {
            let k = i + 1;
            match run {
                Ok(run) => {
                    report.msr.push(Some(msr(&run.truth, &run.predictions)?));
                    if let Some(b) = run.bounds {
                        report.posterior_bounds = Some(match report.posterior_bounds {
                            Some(acc) => acc.merge(b),
                            None => b,
                        });
                    }
                    if k == 1 {
                        report.first = Some(first_replication(run, &test_labels, g)?);
                        report.seconds = Some(run.seconds);
                    }
                }
                Err(e) => {
                    report.msr.push(None);
                    report.failures.push(Failure {
                        replication: k,
                        error: e.to_string(),
                    });
                }
            }
        }
        let ok: Vec<f64> = report.msr.iter().flatten().copied().collect();
        if !ok.is_empty() {
            report.summary = Some(summarize(&ok)?);
        }
        methods.push(report);
    }

    Ok(BenchReport {
        schema_version: RESULTS_VERSION,
        config: cfg.clone(),
        class_names: data.class_names().to_vec(),
        n_rows: data.n_rows(),
        n_features: data.n_features(),
        test_manifest: first_split.test_indices.clone(),
        test_labels,
        methods,
        external: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| [0, 0, 0, 1, 2][i % 5]).collect();
        let feats = Array2::from_shape_fn((n, 4), |(i, j)| {
            let c = labels[i] as f64;
            c * if j < 2 { 2.0 } else { 0.5 } + rng.random_range(-1.0..1.0)
        });
        Dataset::new(
            feats,
            labels,
            (0..4).map(|j| format!("x{j}")).collect(),
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap()
    }

    fn small_config() -> BenchConfig {
        BenchConfig {
            q: 2,
            train_size: TrainSizeConfig::Fraction(0.7),
            replications: 3,
            n0: 40,
            c_gamma_grid: vec![1.0, 10.0, 60.0],
            bandwidth_grid: default_grid().into_iter().step_by(20).collect(),
            ..BenchConfig::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("forest".parse::<Method>().is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let data = blobs(100, 1);
        let field = |cfg: BenchConfig| match cfg.validate(&data) {
            Err(Error::InvalidArgument { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field(BenchConfig { methods: vec![], ..small_config() }), "methods");
        assert_eq!(field(BenchConfig { q: 9, ..small_config() }), "q");
        assert_eq!(field(BenchConfig { replications: 0, ..small_config() }), "m");
        assert_eq!(field(BenchConfig { n0: 2, ..small_config() }), "n0");
        assert_eq!(field(BenchConfig { c_gamma_grid: vec![-1.0], ..small_config() }), "c_gamma_grid");
        assert_eq!(field(BenchConfig { methods: vec![Method::Lda, Method::Lda], ..small_config() }), "methods");
        small_config().validate(&data).unwrap();
    }

    #[test]
    fn report_shape_and_determinism() {
        let data = blobs(150, 2);
        let cfg = small_config();
        let a = run_bench(&data, &cfg).unwrap();
        let b = run_bench(&data, &BenchConfig { serial: true, ..cfg.clone() }).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.methods.len(), 5);
        for m in &a.methods {
            assert!(m.failures.is_empty(), "{:?}", m.failures);
            assert_eq!(m.msr.len(), 3);
            let first = m.first.as_ref().unwrap();
            assert!((first.accuracy - (1.0 - m.msr[0].unwrap())).abs() < 1e-15);
            assert!(m.msr.iter().all(|v| (0.0..=1.0).contains(&v.unwrap())));
            assert!(m.seconds.unwrap() >= 0.0);
        }
        let online = a.method(Method::Online).unwrap().posterior_bounds.unwrap();
        assert!(online.min >= 0.0 && online.max <= 1.0);
        assert!(online.max_sum_deviation.unwrap() <= 1e-9);
        let offline = a.method(Method::Offline).unwrap().posterior_bounds.unwrap();
        assert!(offline.min >= 0.0 && offline.max <= 1.0);
    }

    #[test]
    fn single_replication_summary() {
        let data = blobs(100, 3);
        let cfg = BenchConfig {
            methods: vec![Method::Lda],
            replications: 1,
            ..small_config()
        };
        let r = run_bench(&data, &cfg).unwrap();
        let m = &r.methods[0];
        let s = m.summary.unwrap();
        let v = m.msr[0].unwrap();
        assert_eq!((s.min, s.q1, s.median, s.mean, s.q3, s.max), (v, v, v, v, v, v));
    }

    #[test]
    fn failures_are_recorded_per_method() {
        // A class missing from every training split breaks LDA but not kNN.
        let data = blobs(60, 4);
        let cfg = BenchConfig {
            methods: vec![Method::Lda, Method::Knn],
            train_size: TrainSizeConfig::Counts(vec![20, 1, 5]),
            n0: 10,
            replications: 2,
            ..small_config()
        };
        let r = run_bench(&data, &cfg).unwrap();
        assert_eq!(r.method(Method::Lda).unwrap().failures.len(), 2);
        assert!(r.method(Method::Lda).unwrap().summary.is_none());
        assert!(r.method(Method::Knn).unwrap().failures.is_empty());
        assert!(r.has_failures());
    }

    #[test]
    fn external_predictions_are_scored() {
        let data = blobs(100, 5);
        let cfg = BenchConfig {
            methods: vec![Method::Lda],
            replications: 1,
            ..small_config()
        };
        let mut r = run_bench(&data, &cfg).unwrap();
        let truth = r.test_labels.clone();
        r.merge_external("oracle", &truth).unwrap();
        assert_eq!(r.external[0].accuracy, 1.0);
        assert!(r.merge_external("short", &truth[1..]).is_err());
    }
}
