use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use npclass::bench::{
    load_external_predictions, reduce_streaming, run_bench, write_artifacts, write_cgamma_curve,
    write_explained_variance, write_scores, BenchConfig, Method, TrainSizeConfig, CTG_TRAIN_COUNTS,
};
use npclass::data::{load_csv, standardize, stratified_split, Dataset, Schema};
use npclass::kernel::KernelId;
use npclass::online::{default_c_gamma_grid, tune_c_gamma};
use npclass::pca::{fit_batch_pca, init_streaming_pca};
use npclass::rng::SeededRng;
use npclass::{Error, Result};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "NPCLASS_THREADS";

#[derive(Parser)]
#[command(name = "npclass", version, about = "Nonparametric kernel classification benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicated benchmark of the selected methods.
    Bench(BenchArgs),
    /// Head-sample search for the online step constant.
    TuneCgamma(TuneArgs),
    /// Explained variance and component scores.
    Pca(PcaArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaName {
    Ctg,
    FetalHealth,
    Infer,
}

#[derive(Args)]
struct DataArgs {
    /// Labeled CSV file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "ctg")]
    schema: SchemaName,
    /// Label column when the schema is inferred.
    #[arg(long, default_value = "label")]
    label: String,
    /// Skip feature standardization.
    #[arg(long)]
    no_standardize: bool,
}

impl DataArgs {
    fn schema(&self) -> Result<Schema> {
        match self.schema {
            SchemaName::Ctg => Ok(Schema::ctg()),
            SchemaName::FetalHealth => Ok(Schema::fetal_health()),
            SchemaName::Infer => Schema::infer(&self.input, &self.label),
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    /// Per-class training counts, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "train_fraction")]
    train_counts: Option<Vec<usize>>,
    /// Per-class training fraction.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

impl SplitArgs {
    fn train_size(&self, schema: SchemaName) -> TrainSizeConfig {
        match (&self.train_counts, self.train_fraction) {
            (Some(c), _) => TrainSizeConfig::Counts(c.clone()),
            (None, Some(f)) => TrainSizeConfig::Fraction(f),
            (None, None) => match schema {
                SchemaName::Infer => TrainSizeConfig::Fraction(0.7),
                _ => TrainSizeConfig::Counts(CTG_TRAIN_COUNTS.to_vec()),
            },
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Methods to run, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "lda,qda,knn,online,offline")]
    methods: Vec<String>,
    /// Number of principal components kept.
    #[arg(long, default_value_t = 5)]
    q: usize,
    /// Number of replications.
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Head size for incremental PCA and the online classifier.
    #[arg(long, default_value_t = 300)]
    n0: usize,
    /// Candidate step constants, comma separated (default: 60 log-spaced on [0.5, 120]).
    #[arg(long, value_delimiter = ',')]
    c_gamma_grid: Option<Vec<f64>>,
    #[arg(long, default_value = "epanechnikov")]
    kernel: String,
    /// Project training rows with the basis current at their arrival.
    #[arg(long)]
    streaming_projection: bool,
    /// Candidate neighbour counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,9,11,13,15,17,19,21,23,25,27,29,31")]
    k_grid: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    knn_folds: usize,
    /// Run replications sequentially.
    #[arg(long)]
    serial: bool,
    /// Score predictions made elsewhere: `<label>:<csv>` aligned with test_manifest.csv.
    #[arg(long = "merge-predictions")]
    merge_predictions: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 5)]
    q: usize,
    #[arg(long, default_value_t = 300)]
    n0: usize,
    #[arg(long, value_delimiter = ',')]
    c_gamma_grid: Option<Vec<f64>>,
    #[arg(long, default_value = "epanechnikov")]
    kernel: String,
    #[arg(long)]
    streaming_projection: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PcaMode {
    Batch,
    Streaming,
    Both,
}

#[derive(Args)]
struct PcaArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Components kept (default: all).
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, value_enum, default_value = "batch")]
    mode: PcaMode,
    /// Head size of the streaming mode.
    #[arg(long, default_value_t = 300)]
    n0: usize,
    /// Also write per-row scores on the first two components.
    #[arg(long)]
    scores: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load(data: &DataArgs) -> Result<(Dataset, Schema)> {
    let schema = data.schema()?;
    Ok((load_csv(&data.input, &schema)?, schema))
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let (data, schema) = load(&args.data)?;
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>>>()?;
    let cfg = BenchConfig {
        methods,
        q: args.q,
        train_size: args.split.train_size(args.data.schema),
        replications: args.m,
        seed: args.split.seed,
        n0: args.n0,
        c_gamma_grid: args.c_gamma_grid.unwrap_or_else(default_c_gamma_grid),
        kernel: args.kernel.parse::<KernelId>()?,
        standardize: !args.data.no_standardize,
        streaming_projection: args.streaming_projection,
        k_grid: args.k_grid,
        knn_folds: args.knn_folds,
        serial: args.serial,
        ..BenchConfig::default()
    };
    let mut report = run_bench(&data, &cfg)?;
    for spec in &args.merge_predictions {
        let (label, path) = spec.split_once(':').ok_or_else(|| Error::InvalidArgument {
            field: "merge_predictions",
            message: format!("`{spec}` is not <label>:<csv>"),
        })?;
        let preds = load_external_predictions(Path::new(path), &schema)?;
        report.merge_external(label, &preds)?;
    }
    write_artifacts(&report, &args.out)?;

    for m in &report.methods {
        match &m.summary {
            Some(s) => println!(
                "{:<8} median MSR {:6.2}%  mean {:6.2}%  ({} ok, {} failed)",
                m.method.name(),
                100.0 * s.median,
                100.0 * s.mean,
                m.msr.iter().flatten().count(),
                m.failures.len()
            ),
            None => println!("{:<8} all {} replications failed", m.method.name(), m.failures.len()),
        }
    }
    if report.has_failures() {
        for m in &report.methods {
            for f in &m.failures {
                eprintln!("{} replication {}: {}", m.method, f.replication, f.error);
            }
        }
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn tune(args: TuneArgs) -> Result<ExitCode> {
    let (data, _) = load(&args.data)?;
    let size = args.split.train_size(args.data.schema);
    let split = stratified_split(&data, &(&size).into(), &SeededRng::new(args.split.seed).substream(1))?;
    let (train, test) = if args.data.no_standardize {
        (split.train, split.test)
    } else {
        let (train, params) = standardize(&split.train)?;
        let test = params.apply_dataset(&split.test)?;
        (train, test)
    };
    if args.n0 < args.q + 1 || args.n0 >= train.n_rows() {
        return Err(Error::InvalidArgument {
            field: "n0",
            message: format!("{} must lie in {}..{}", args.n0, args.q + 1, train.n_rows()),
        });
    }
    let (train_z, _, _) = reduce_streaming(&train, &test, args.q, args.n0, args.streaming_projection)?;
    let head = train_z.head(args.n0)?;
    let grid = args.c_gamma_grid.unwrap_or_else(default_c_gamma_grid);
    let tuning = tune_c_gamma(&head, &grid, args.q, args.kernel.parse()?)?;
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    write_cgamma_curve(&args.out.join("cgamma_curve.csv"), &tuning)?;
    println!("selected c_gamma {}", tuning.selected);
    Ok(ExitCode::SUCCESS)
}

fn pca(args: PcaArgs) -> Result<ExitCode> {
    let (data, _) = load(&args.data)?;
    let data = if args.data.no_standardize {
        data
    } else {
        standardize(&data)?.0
    };
    let d = data.n_features();
    let q = args.q.unwrap_or(d);
    if q == 0 || q > d {
        return Err(Error::InvalidArgument {
            field: "q",
            message: format!("{q} outside 1..={d}"),
        });
    }
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    let x = data.features();
    let keep = q.min(2);
    if matches!(args.mode, PcaMode::Batch | PcaMode::Both) {
        let model = fit_batch_pca(x, q)?;
        let ev = model.explained_variance()?;
        write_explained_variance(&args.out.join("explained_variance_batch.csv"), &ev)?;
        if let Some(c) = ev.cumulative.get(1) {
            println!("batch: first two components explain {:.2}%", 100.0 * c);
        }
        if args.scores {
            let z = model.project_rows(x)?;
            let z = z.slice(ndarray::s![.., ..keep]);
            write_scores(&args.out.join("scores_batch.csv"), z, data.labels(), data.class_names())?;
        }
    }
    if matches!(args.mode, PcaMode::Streaming | PcaMode::Both) {
        if args.n0 < q + 1 || args.n0 > data.n_rows() {
            return Err(Error::InvalidArgument {
                field: "n0",
                message: format!("{} must lie in {}..={}", args.n0, q + 1, data.n_rows()),
            });
        }
        let mut state = init_streaming_pca(x.slice(ndarray::s![..args.n0, ..]), q)?;
        for i in args.n0..data.n_rows() {
            state.update(x.row(i))?;
        }
        let ev = state.explained_variance()?;
        write_explained_variance(&args.out.join("explained_variance_streaming.csv"), &ev)?;
        if let Some(c) = ev.cumulative.get(1) {
            println!("streaming: first two components explain {:.2}%", 100.0 * c);
        }
        if args.scores {
            let model = state.to_model();
            let z = model.project_rows(x)?;
            let z = z.slice(ndarray::s![.., ..keep]);
            write_scores(&args.out.join("scores_streaming.csv"), z, data.labels(), data.class_names())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Error::InvalidArgument {
        field: "NPCLASS_THREADS",
        message: format!("`{raw}` is not a positive integer"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument {
            field: "NPCLASS_THREADS",
            message: e.to_string(),
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Bench(a) => bench(a),
        Command::TuneCgamma(a) => tune(a),
        Command::Pca(a) => pca(a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
