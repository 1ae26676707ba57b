use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn driftlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftlab"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = driftlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tiny_csv(dir: &Path) -> PathBuf {
    let mut text = String::from("a,b,c,label\n");
    for i in 0..400u32 {
        let y = i % 2;
        let s = if y == 0 { -1.5 } else { 1.5 };
        let jitter = f64::from(i % 17) / 17.0 - 0.5;
        text.push_str(&format!("{},{},{},{}\n", s + jitter, -s + jitter / 2.0, jitter, y));
    }
    let path = dir.join("tiny.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_train_and_detect() {
    let tmp = tempfile::tempdir().unwrap();
    let gen_dir = tmp.path().join("gen");
    ok(&["gen", "--preset", "moving_rbf", "--seed", "1", "--out", s(&gen_dir)]);
    assert!(gen_dir.join("data.csv").is_file());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(gen_dir.join("meta.json")).unwrap()).unwrap();
    assert!(meta.get("drift").is_some());

    let csv = tiny_csv(tmp.path());
    let model = tmp.path().join("model.json");
    let out = ok(&["train", "--csv", s(&csv), "--epochs", "30", "--out", s(&model)]);
    let summary: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["constrained"], true);
    assert!(summary["acc_valid"].as_f64().unwrap() > 0.5);

    let out = ok(&[
        "detect", "--model", s(&model), "--data", s(&csv), "--reference", "100", "--onset", "200", "--w", "10",
    ]);
    let run: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(run["stream_len"], 300);
    assert_eq!(run["onset_index"], 200);

    let emb = tmp.path().join("emb.csv");
    ok(&["dump-embeddings", "--model", s(&model), "--data", s(&csv), "--out", s(&emb)]);
    let text = std::fs::read_to_string(&emb).unwrap();
    assert!(text.starts_with("e0,e1,e2,label,predicted,d0,d1"));
    assert_eq!(text.lines().count(), 401);
}

#[test]
fn bench_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tiny_csv(tmp.path());
    let out_dir = tmp.path().join("results");
    ok(&[
        "bench", "--csv", s(&csv), "--detectors", "zsd", "--drift", "step,gradual", "--modes", "most", "--seeds",
        "0,1", "--epochs", "2", "--w", "10", "--out", s(&out_dir),
    ]);
    let report_dir = tmp.path().join("report");
    let out = ok(&["report", "--results", s(&out_dir), "--out", s(&report_dir)]);
    assert!(out.contains("Friedman"));
    assert!(report_dir.join("cd_all.svg").is_file());
    assert!(report_dir.join("report_all.csv").is_file());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(driftlab(&["--help"]).status.code(), Some(0));
    // Usage and configuration errors.
    assert_eq!(driftlab(&["bogus"]).status.code(), Some(1));
    assert_eq!(driftlab(&["bench", "--preset", "rbf", "--detectors", "nope"]).status.code(), Some(1));
    assert_eq!(driftlab(&["bench", "--preset", "rbf", "--w", "0"]).status.code(), Some(1));
    // Runtime failures.
    let missing = tmp.path().join("missing.json");
    let code = driftlab(&["detect", "--model", s(&missing), "--data", s(&missing), "--reference", "1"])
        .status
        .code();
    assert_eq!(code, Some(2));
    let out = driftlab(&["report", "--results", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("<seed>.json"));
}
