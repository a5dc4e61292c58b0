use std::fs;
use std::path::Path;

use ndarray::ArrayView2;

use super::BenchReport;
use crate::data::Schema;
use crate::error::{Error, Result};
use crate::online::CGammaTuning;
use crate::pca::ExplainedVariance;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// Writes the full artifact set of a benchmark run into `dir`.
///
/// Every file except `timing.csv` depends only on the data and configuration.
pub fn write_artifacts(report: &BenchReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let json = serde_json::to_string_pretty(report).map_err(|e| io_err(dir, e))? + "\n";
    let path = dir.join("results.json");
    fs::write(&path, json).map_err(|source| Error::Io { path, source })?;

    let table3: Vec<Vec<String>> = report
        .methods
        .iter()
        .map(|m| {
            let pct = |f: fn(&crate::eval::Summary) -> f64| m.summary.as_ref().map(|s| 100.0 * f(s));
            vec![
                m.method.to_string(),
                m.msr.iter().flatten().count().to_string(),
                m.failures.len().to_string(),
                opt(pct(|s| s.min)),
                opt(pct(|s| s.q1)),
                opt(pct(|s| s.median)),
                opt(pct(|s| s.mean)),
                opt(pct(|s| s.q3)),
                opt(pct(|s| s.max)),
            ]
        })
        .collect();
    write_rows(
        &dir.join("table3.csv"),
        &["method", "replications", "failures", "min_pct", "q1_pct", "median_pct", "mean_pct", "q3_pct", "max_pct"],
        &table3,
    )?;

    let mut msr_header = vec!["replication".to_string()];
    msr_header.extend(report.methods.iter().map(|m| m.method.to_string()));
    let n_rep = report.config.replications;
    let msr_rows: Vec<Vec<String>> = (0..n_rep)
        .map(|k| {
            let mut row = vec![(k + 1).to_string()];
            row.extend(report.methods.iter().map(|m| opt(m.msr[k])));
            row
        })
        .collect();
    let header: Vec<&str> = msr_header.iter().map(String::as_str).collect();
    write_rows(&dir.join("msr_replications.csv"), &header, &msr_rows)?;

    let mut table4 = Vec::new();
    let mut table5 = Vec::new();
    let firsts = report
        .methods
        .iter()
        .filter_map(|m| m.first.as_ref().map(|f| (m.method.to_string(), &f.class_metrics, f.accuracy, f.weighted_f1)));
    let externals = report
        .external
        .iter()
        .map(|e| (e.label.clone(), &e.class_metrics, e.accuracy, e.weighted_f1));
    for (label, metrics, accuracy, f1) in firsts.chain(externals) {
        for (g, cm) in metrics.iter().enumerate() {
            table4.push(vec![
                label.clone(),
                report.class_names[g].clone(),
                opt(cm.recall),
                opt(cm.specificity),
                opt(cm.balanced_accuracy),
                opt(cm.precision),
                opt(cm.f1),
            ]);
        }
        table5.push(vec![label, num(accuracy), num(f1)]);
    }
    write_rows(
        &dir.join("table4.csv"),
        &["method", "class", "recall", "specificity", "balanced_accuracy", "precision", "f1"],
        &table4,
    )?;
    write_rows(&dir.join("table5.csv"), &["method", "accuracy", "weighted_f1"], &table5)?;

    let mut timing: Vec<Vec<String>> = report
        .methods
        .iter()
        .map(|m| vec![m.method.to_string(), opt(m.seconds)])
        .collect();
    let secs = |m| report.method(m).and_then(|r| r.seconds);
    if let (Some(off), Some(on)) = (secs(super::Method::Offline), secs(super::Method::Online)) {
        timing.push(vec!["offline_over_online".into(), num(off / on)]);
    }
    write_rows(&dir.join("timing.csv"), &["method", "seconds"], &timing)?;

    for m in &report.methods {
        let Some(first) = &m.first else { continue };
        for (g, roc) in first.roc.iter().enumerate() {
            let Some(roc) = roc else { continue };
            let rows: Vec<Vec<String>> = (0..roc.fpr.len())
                .map(|i| vec![num(roc.thresholds[i]), num(roc.fpr[i]), num(roc.tpr[i])])
                .collect();
            let name = format!("roc_{}_{}.csv", m.method, slug(&report.class_names[g]));
            write_rows(&dir.join(name), &["threshold", "fpr", "tpr"], &rows)?;
        }
    }

    let manifest: Vec<Vec<String>> = report
        .test_manifest
        .iter()
        .zip(&report.test_labels)
        .enumerate()
        .map(|(pos, (&row, &y))| vec![pos.to_string(), row.to_string(), report.class_names[y].clone()])
        .collect();
    write_rows(&dir.join("test_manifest.csv"), &["position", "row", "label"], &manifest)
}

/// Head misclassification rate of every `c_γ` candidate.
pub fn write_cgamma_curve(path: &Path, tuning: &CGammaTuning) -> Result<()> {
    let rows: Vec<Vec<String>> = tuning
        .curve
        .iter()
        .map(|&(c, m)| vec![num(c), num(m)])
        .collect();
    write_rows(path, &["c_gamma", "head_msr"], &rows)
}

pub fn write_explained_variance(path: &Path, ev: &ExplainedVariance) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..ev.eigenvalues.len())
        .map(|j| vec![(j + 1).to_string(), num(ev.eigenvalues[j]), num(ev.ratios[j]), num(ev.cumulative[j])])
        .collect();
    write_rows(path, &["component", "eigenvalue", "ratio", "cumulative"], &rows)
}

/// Per-row component scores with the row's class name.
pub fn write_scores(path: &Path, scores: ArrayView2<'_, f64>, labels: &[usize], class_names: &[String]) -> Result<()> {
    let mut header = vec!["row".to_string(), "label".to_string()];
    header.extend((1..=scores.ncols()).map(|j| format!("pc{j}")));
    let rows: Vec<Vec<String>> = scores
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![i.to_string(), class_names[labels[i]].clone()];
            row.extend(r.iter().map(|&v| num(v)));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(path, &header, &rows)
}

/// Reads a `predicted` column of class names or label values.
pub fn load_external_predictions(path: &Path, schema: &Schema) -> Result<Vec<usize>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let headers = reader.headers().map_err(|e| Error::Csv { row: 0, message: e.to_string() })?.clone();
    let col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("predicted"))
        .ok_or_else(|| Error::MissingColumn("predicted".into()))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv { row: i + 1, message: e.to_string() })?;
        let raw = rec.get(col).unwrap_or("");
        let g = schema.resolve_class(raw).ok_or_else(|| Error::UnknownLabel {
            row: i + 1,
            value: raw.to_string(),
        })?;
        out.push(g);
    }
    Ok(out)
}
