#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn kcdb() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/example_kcdb.json")
}

pub fn kc_eval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kc-eval"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = kc_eval(args);
    assert!(
        out.status.success(),
        "kc-eval {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Synthetic dataset plus stub extractions under `root`. Returns
/// (dataset dir, extractions file).
pub fn synth_and_extract(root: &Path, seed: u64, n_students: usize) -> (PathBuf, PathBuf) {
    let db = kcdb();
    let data = root.join("data");
    let ext = root.join("extractions.jsonl");
    let cache = root.join("cache.jsonl");
    let (seed, n) = (seed.to_string(), n_students.to_string());
    ok(&["synth", "generate", "--kcdb", s(&db), "--out-dir", s(&data), "--seed", &seed, "--n-students", &n]);
    for what in ["code", "hints"] {
        ok(&[
            "extract", what, "--kcdb", s(&db), "--dataset", s(&data), "--out", s(&ext), "--cache", s(&cache),
            "--backend", "stub",
        ]);
    }
    (data, ext)
}

/// Runs synth → stub extraction → rq1/rq2/rq3 → report under `root`.
/// Returns (analysis dir, figure dir).
pub fn full_pipeline(root: &Path, seed: u64, n_students: usize) -> (PathBuf, PathBuf) {
    let db = kcdb();
    let (data, ext) = synth_and_extract(root, seed, n_students);
    let analysis = root.join("analysis");
    for rq in ["rq1", "rq2", "rq3"] {
        ok(&[
            "analyze", rq, "--kcdb", s(&db), "--dataset", s(&data), "--extractions", s(&ext), "--out-dir",
            s(&analysis),
        ]);
    }
    let figures = root.join("figures");
    ok(&["report", "--in-dir", s(&analysis), "--out-dir", s(&figures)]);
    (analysis, figures)
}

/// Non-manifest files in `dir`, sorted by name.
pub fn artifact_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .collect();
    files.sort();
    files
}
