use std::path::{Path, PathBuf};

use driftlab_core::data::DriftKind;
use driftlab_core::detectors::DetectorKind;
use driftlab_core::harness::{
    report, results_root, run_benchmark, run_experiment, ConstrainedSetting, DatasetSource, DriftGrid,
    ExperimentConfig, Grouping, SUMMARY_HEADER,
};
use driftlab_core::DriftlabError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two well separated classes in four features; the first two carry the signal.
fn write_tiny_csv(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut text = String::from("a,b,c,d,label\n");
    for i in 0..1600 {
        let y = i % 2;
        let shift = if y == 0 { -2.0 } else { 2.0 };
        let row: Vec<String> = (0..4)
            .map(|j| {
                let centre = if j < 2 { shift } else { 0.0 };
                format!("{:.5}", centre + rng.gen_range(-1.0..1.0))
            })
            .collect();
        text.push_str(&format!("{},{}\n", row.join(","), if y == 0 { "neg" } else { "pos" }));
    }
    let path = dir.join("tiny.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn tiny_config(csv: PathBuf, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        DatasetSource::Csv {
            path: csv,
            label_column: "label".into(),
        },
        vec![DetectorKind::Zsd],
    );
    cfg.drift = DriftGrid {
        kinds: vec![DriftKind::Step],
        feature_modes: vec![driftlab_core::drift::FeatureMode::Most],
    };
    cfg.train.epochs = 3;
    cfg.train.hidden = vec![16, 8];
    cfg.detector.w = 10;
    cfg.output_dir = out.to_path_buf();
    cfg
}

#[test]
fn benchmark_writes_results_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = write_tiny_csv(tmp.path());
    let cfg = tiny_config(csv.clone(), &tmp.path().join("a"));
    let manifest = run_benchmark(&cfg).unwrap();

    // 10 seeds, one detector, both objectives, one drift setting.
    assert_eq!(manifest.run_files.len(), 20);
    assert_eq!(manifest.runs_ok + manifest.runs_failed, 20);
    let root = results_root(&cfg);
    assert_eq!(manifest.root, root);
    for name in ["config.json", "summary.csv", "manifest.json"] {
        assert!(root.join(name).is_file(), "missing {name}");
    }
    for f in &manifest.run_files {
        assert!(root.join(f).is_file(), "missing {f}");
    }

    let summary = std::fs::read_to_string(root.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_HEADER.join(","));
    assert_eq!(lines.count(), 2);

    let other = tiny_config(csv, &tmp.path().join("b"));
    run_benchmark(&other).unwrap();
    let again = std::fs::read(results_root(&other).join("summary.csv")).unwrap();
    assert_eq!(summary.as_bytes(), again.as_slice());
}

#[test]
fn failing_detectors_do_not_abort_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(write_tiny_csv(tmp.path()), tmp.path());
    cfg.detectors = vec![DetectorKind::Zsd, DetectorKind::Iks, DetectorKind::HdddmE];
    cfg.seeds = vec![0, 1];
    cfg.constrained = ConstrainedSetting::Only(true);
    // Longer than the monitored stream: the window-based detectors never warm up.
    cfg.detector.baseline_window = Some(5000);
    let records = run_experiment(&cfg).unwrap();
    assert_eq!(records.len(), 6);
    for r in &records {
        match r.detector {
            DetectorKind::Zsd => assert!(r.is_ok(), "{:?}", r.error),
            _ => assert!(r.error.is_some()),
        }
    }
}

#[test]
fn report_ranks_objectives_and_draws_a_diagram() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(write_tiny_csv(tmp.path()), tmp.path());
    cfg.seeds = vec![0, 1];
    cfg.drift.feature_modes = vec![
        driftlab_core::drift::FeatureMode::Most,
        driftlab_core::drift::FeatureMode::Least,
    ];
    cfg.drift.kinds = vec![DriftKind::Step, DriftKind::Gradual];
    let manifest = run_benchmark(&cfg).unwrap();
    let out = report(&manifest.root, Grouping::All, &tmp.path().join("report")).unwrap();
    assert_eq!(out.table.algorithms, vec!["zsd[c]".to_string(), "zsd[u]".to_string()]);
    assert_eq!(out.table.rows.len(), 4);
    let ranks_sum: f64 = out.average_ranks.iter().sum();
    assert!((ranks_sum - 3.0).abs() < 1e-12);
    let svg = std::fs::read_to_string(&out.svg).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
    assert!(out.csv.is_file() && out.json.is_file());
}

#[test]
fn report_on_empty_directory_explains_the_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let err = report(tmp.path(), Grouping::All, tmp.path()).unwrap_err();
    assert!(matches!(err, DriftlabError::InsufficientData(_)));
    assert!(err.to_string().contains("<seed>.json"));
}

#[test]
fn empty_detector_list_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(write_tiny_csv(tmp.path()), tmp.path());
    cfg.detectors.clear();
    assert!(matches!(run_experiment(&cfg), Err(DriftlabError::InvalidConfig(_))));
}

#[test]
fn missing_csv_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path().join("nope.csv"), tmp.path());
    assert!(run_experiment(&cfg).is_err());
}
