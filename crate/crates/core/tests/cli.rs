mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use champ_outcome::cli::{sha256_file, Manifest};
use tempfile::tempdir;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_champ-outcome"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}\n{}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_is_reproducible() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("gen.json"), r#"{"n_matches": 300}"#).unwrap();
    for name in ["a.csv", "b.csv"] {
        ok(&bin(&["synth", "--config", "gen.json", "--seed", "7", "--out", name, "--manifest", &format!("{name}.manifest.json")], dir.path()));
    }
    assert_eq!(sha256_file(&dir.path().join("a.csv")).unwrap(), sha256_file(&dir.path().join("b.csv")).unwrap());
    let m = Manifest::read(&dir.path().join("a.csv.manifest.json")).unwrap();
    assert_eq!(m.outputs["a.csv"], sha256_file(&dir.path().join("a.csv")).unwrap());
}

#[test]
fn omitted_seed_is_recorded() {
    let dir = tempdir().unwrap();
    ok(&bin(&["synth", "--n", "50", "--out", "d.csv"], dir.path()));
    let m = Manifest::read(&dir.path().join("run-manifest.json")).unwrap();
    let digest = m.outputs["d.csv"].clone();
    fs::remove_file(dir.path().join("d.csv")).unwrap();
    ok(&bin(&["--replay", "run-manifest.json"], dir.path()));
    assert_eq!(sha256_file(&dir.path().join("d.csv")).unwrap(), digest);
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempdir().unwrap();
    let out = bin(&["synth", "--out", "x.csv", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(bin(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(bin(&[], dir.path()).status.code(), Some(1));
    assert_eq!(bin(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("gen.json"), r#"{"n_matchez": 300}"#).unwrap();
    let out = bin(&["synth", "--config", "gen.json", "--out", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_dataset_is_data_error() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "match_id,outcome\nm1,1\n").unwrap();
    let out = bin(&["featurize", "--input", "bad.csv", "--out", "f.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = bin(&["featurize", "--input", "missing.csv", "--out", "f.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dnn_evaluation_writes_report_and_curves() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    ok(&bin(&["synth", "--n", "300", "--seed", "3", "--out", "d.csv"], p));
    ok(&bin(&["featurize", "--input", "d.csv", "--out", "f.csv"], p));
    assert!(p.join("f.csv.columns.json").exists());
    fs::write(p.join("eval.json"), r#"{"models": {"dnn": {"max_epochs": 4}}}"#).unwrap();
    ok(&bin(&["evaluate", "--model", "dnn", "--features", "f.csv", "--k", "10", "--seed", "1", "--config", "eval.json", "--out-dir", "out"], p));
    let md = fs::read_to_string(p.join("out/report.md")).unwrap();
    assert!(md.lines().nth(2).unwrap().starts_with("| DNN |"));
    let curves = fs::read_to_string(p.join("out/curves.csv")).unwrap();
    assert!(curves.starts_with("epoch,train_loss,train_acc,val_loss,val_acc\n"));
    assert!(p.join("out/report.json").exists());
}

#[test]
fn train_predict_and_report() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    ok(&bin(&["synth", "--n", "200", "--seed", "4", "--out", "d.csv"], p));
    ok(&bin(&["featurize", "--input", "d.csv", "--out", "f.csv"], p));
    ok(&bin(&["screen", "--input", "d.csv", "--out-json", "screen.json"], p));
    assert!(fs::read_to_string(p.join("screen.md")).unwrap().contains("win_rate"));
    ok(&bin(&["train", "--model", "gboost", "--features", "f.csv", "--seed", "2", "--out", "m.json"], p));
    ok(&bin(&["predict", "--model", "m.json", "--features", "f.csv", "--out", "pred.csv"], p));
    let pred = fs::read_to_string(p.join("pred.csv")).unwrap();
    assert_eq!(pred.lines().count(), 201);
    for line in pred.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let prob: f64 = cols[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&prob));
        assert_eq!(cols[2], if prob >= 0.5 { "1" } else { "0" });
    }
    ok(&bin(&["evaluate", "--model", "knn,gboost", "--features", "f.csv", "--seed", "5", "--cv-all", "--out-dir", "e1"], p));
    ok(&bin(&["report", "--input", "e1/report.json", "--input", "e1/report.json", "--out", "table.md"], p));
    let table = fs::read_to_string(p.join("table.md")).unwrap();
    let models: Vec<&str> = table.lines().skip(2).map(|l| l.split('|').nth(1).unwrap().trim()).collect();
    assert_eq!(models, ["kNN", "GBOOST", "kNN", "GBOOST"]);
}

#[test]
fn fixture_ingestion_and_exhaustion() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    let fx = p.join("fx");
    for id in ["m1", "m2"] {
        common::write_match(&fx, id, 10, "A");
    }
    common::write_candidates(&fx, &["m2", "m1", "m2"]);
    ok(&bin(&["ingest", "--fixtures", "fx", "--n", "2", "--seed", "1", "--out", "d.csv"], p));
    let csv = fs::read_to_string(p.join("d.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let out = bin(&["ingest", "--fixtures", "fx", "--n", "5", "--seed", "1", "--out", "partial.csv"], p);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exhausted"));
    assert_eq!(fs::read_to_string(p.join("partial.csv")).unwrap().lines().count(), 3);
}

#[test]
fn replay_detects_changed_input() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    ok(&bin(&["synth", "--n", "40", "--seed", "1", "--out", "d.csv", "--manifest", "s.json"], p));
    ok(&bin(&["featurize", "--input", "d.csv", "--out", "f.csv", "--manifest", "f.json"], p));
    ok(&bin(&["--replay", "f.json"], p));
    fs::write(p.join("d.csv"), fs::read_to_string(p.join("d.csv")).unwrap().replace("S0000000", "S9999999")).unwrap();
    assert_eq!(bin(&["--replay", "f.json"], p).status.code(), Some(2));
}
