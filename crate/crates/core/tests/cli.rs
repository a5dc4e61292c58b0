mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn npclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npclass"))
        .args(args)
        .env("NPCLASS_THREADS", "2")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn data_file(dir: &Path, n: usize) -> String {
    let p = dir.join("ctg.csv");
    common::write_ctg_like(&p, n, 17);
    p.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

const SMALL: [&str; 8] = ["--train-fraction", "0.7", "--n0", "60", "--c-gamma-grid", "1,10,60", "--seed", "7"];

#[test]
fn smoke_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let input = data_file(dir.path(), 300);
    let out = dir.path().join("out");
    let mut args = vec!["bench", "--input", &input, "--methods", "online,offline", "--m", "1", "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    let o = npclass(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    for f in ["results.json", "table3.csv", "table4.csv", "table5.csv", "timing.csv", "test_manifest.csv", "msr_replications.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    for m in ["online", "offline"] {
        for c in ["normal", "suspect", "pathologic"] {
            assert!(out.join(format!("roc_{m}_{c}.csv")).exists());
        }
    }
    let json: Value = serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["methods"].as_array().unwrap().len(), 2);
    assert_eq!(json["class_names"][2], "Pathologic");

    // Tables agree with the JSON report they summarize.
    let t3 = read_csv(&out.join("table3.csv"));
    for (row, m) in t3.iter().zip(json["methods"].as_array().unwrap()) {
        assert_eq!(row[0], m["method"].as_str().unwrap());
        let median: f64 = row[5].parse().unwrap();
        assert_eq!(median, 100.0 * m["summary"]["median"].as_f64().unwrap());
    }
    let t5 = read_csv(&out.join("table5.csv"));
    let acc: f64 = t5[0][1].parse().unwrap();
    assert_eq!(acc, json["methods"][0]["first"]["accuracy"].as_f64().unwrap());
    let manifest = read_csv(&out.join("test_manifest.csv"));
    assert_eq!(manifest.len(), json["test_manifest"].as_array().unwrap().len());
    let roc = read_csv(&out.join("roc_online_normal.csv"));
    assert_eq!(roc.last().unwrap()[1..], ["1".to_string(), "1".to_string()]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = data_file(dir.path(), 250);
    let run = |name: &str, serial: bool| {
        let out = dir.path().join(name);
        let mut args = vec!["bench", "--input", &input, "--methods", "lda,knn,online", "--m", "3", "--out", out.to_str().unwrap()];
        args.extend(SMALL);
        if serial {
            args.push("--serial");
        }
        assert_eq!(code(&npclass(&args)), 0);
        out
    };
    let a = run("a", false);
    let b = run("b", true);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        if name == "timing.csv" {
            continue;
        }
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = data_file(dir.path(), 200);
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();

    let bad_method = npclass(&["bench", "--input", &input, "--methods", "forest", "--out", o]);
    assert_eq!(code(&bad_method), 2);
    assert!(String::from_utf8_lossy(&bad_method.stderr).contains("methods"));

    let bad_q = npclass(&["bench", "--input", &input, "--q", "30", "--train-fraction", "0.7", "--out", o]);
    assert_eq!(code(&bad_q), 2);
    assert!(String::from_utf8_lossy(&bad_q.stderr).contains("`q`"));

    let missing = npclass(&["bench", "--input", "/nonexistent/ctg.csv", "--out", o]);
    assert_eq!(code(&missing), 3);

    let broken = dir.path().join("broken.csv");
    fs::write(&broken, "a,b\n1,2\n").unwrap();
    assert_eq!(code(&npclass(&["pca", "--input", broken.to_str().unwrap(), "--out", o])), 3);

    assert_eq!(code(&npclass(&["pca", "--input", &input, "--q", "22", "--out", o])), 2);
    assert_eq!(code(&npclass(&["bench"])), 2);

    let bad_threads = Command::new(env!("CARGO_BIN_EXE_npclass"))
        .args(["pca", "--input", &input, "--out", o])
        .env("NPCLASS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&bad_threads), 2);
}

#[test]
fn failed_replications_exit_numeric() {
    // One Suspect row in training makes LDA fail on every replication.
    let dir = tempfile::tempdir().unwrap();
    let input = data_file(dir.path(), 200);
    let out = dir.path().join("o");
    let o = npclass(&[
        "bench", "--input", &input, "--methods", "lda,knn", "--m", "2", "--train-counts", "100,1,8", "--n0", "30",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 4);
    let json: Value = serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(json["methods"][0]["failures"].as_array().unwrap().len(), 2);
    assert!(json["methods"][1]["summary"]["median"].is_number());
}

#[test]
fn merged_predictions_join_the_tables() {
    let dir = tempfile::tempdir().unwrap();
    let input = data_file(dir.path(), 200);
    let first = dir.path().join("first");
    let mut args = vec!["bench", "--input", &input, "--methods", "lda", "--m", "1", "--out", first.to_str().unwrap()];
    args.extend(SMALL);
    assert_eq!(code(&npclass(&args)), 0);

    let manifest = read_csv(&first.join("test_manifest.csv"));
    let mut preds = String::from("position,predicted\n");
    for r in &manifest {
        preds.push_str(&format!("{},{}\n", r[0], r[2]));
    }
    let pfile = dir.path().join("rf.csv");
    fs::write(&pfile, preds).unwrap();
    let second = dir.path().join("second");
    let merge = format!("rf:{}", pfile.display());
    let mut args = vec!["bench", "--input", &input, "--methods", "lda", "--m", "1", "--out", second.to_str().unwrap(), "--merge-predictions", &merge];
    args.extend(SMALL);
    assert_eq!(code(&npclass(&args)), 0);
    let t5 = read_csv(&second.join("table5.csv"));
    assert_eq!(t5[1][0], "rf");
    assert_eq!(t5[1][1], "1");
    assert_eq!(read_csv(&second.join("table4.csv")).len(), 6);

    let short = dir.path().join("short.csv");
    fs::write(&short, "predicted\nNormal\n").unwrap();
    let merge = format!("rf:{}", short.display());
    let mut args = vec!["bench", "--input", &input, "--methods", "lda", "--m", "1", "--out", second.to_str().unwrap(), "--merge-predictions", &merge];
    args.extend(SMALL);
    assert_eq!(code(&npclass(&args)), 3);
}

#[test]
fn tune_cgamma_curve() {
    let dir = tempfile::tempdir().unwrap();
    let input = data_file(dir.path(), 300);
    let out = dir.path().join("t");
    let o = npclass(&[
        "tune-cgamma", "--input", &input, "--train-fraction", "0.7", "--n0", "80", "--c-gamma-grid", "7.5", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("selected c_gamma 7.5"));
    assert_eq!(read_csv(&out.join("cgamma_curve.csv")).len(), 1);

    let o = npclass(&["tune-cgamma", "--input", &input, "--train-fraction", "0.7", "--n0", "80", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let curve = read_csv(&out.join("cgamma_curve.csv"));
    assert_eq!(curve.len(), 60);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let selected: f64 = stdout.trim().rsplit(' ').next().unwrap().parse().unwrap();
    let best = curve.iter().map(|r| r[1].parse::<f64>().unwrap()).fold(f64::INFINITY, f64::min);
    let row = curve.iter().find(|r| r[0].parse::<f64>().unwrap() == selected).unwrap();
    assert!(selected > 0.0 && selected.is_finite());
    assert_eq!(row[1].parse::<f64>().unwrap(), best);
}

#[test]
fn pca_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = data_file(dir.path(), 400);
    let out = dir.path().join("p");
    let o = npclass(&["pca", "--input", &input, "--mode", "both", "--scores", "--n0", "100", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let batch = read_csv(&out.join("explained_variance_batch.csv"));
    assert_eq!(batch.len(), 21);
    let last: f64 = batch[20][3].parse().unwrap();
    assert!((last - 1.0).abs() < 1e-12);
    let streaming = read_csv(&out.join("explained_variance_streaming.csv"));
    assert_eq!(streaming.len(), 21);
    let scores = read_csv(&out.join("scores_batch.csv"));
    assert_eq!(scores.len(), 400);
    assert_eq!(scores[0].len(), 4);
    assert!(out.join("scores_streaming.csv").exists());

    // Three latent factors dominate the synthetic features.
    let two: f64 = batch[1][3].parse().unwrap();
    let s2: f64 = streaming[1][3].parse().unwrap();
    assert!(two > 0.5 && (two - s2).abs() < 0.05);
}
