use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, DriftSetting, ExperimentConfig};
use super::pipeline::{
    build_stream, label_stream, prepare_data, run_detectors, train_model, PreparedData, TrainedModel,
};
use crate::data::{load_csv, Dataset, DriftKind};
use crate::detectors::{DetectorConfig, DetectorKind, RunResult};
use crate::drift::FeatureMode;
use crate::error::{DriftlabError, Result};
use crate::eval::{aggregate, score_run, Aggregate, DriftLabel, DriftType, RankTable, ScoreRecord};

/// Outcome of one (seed, objective, drift setting, detector) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub detector: DetectorKind,
    pub constrained: bool,
    pub drift_kind: DriftKind,
    pub feature_mode: Option<FeatureMode>,
    pub seed: u64,
    pub feature_indices: Vec<usize>,
    pub label: Option<DriftLabel>,
    pub score: Option<ScoreRecord>,
    pub run: Option<RunResult>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn setting(&self) -> DriftSetting {
        DriftSetting {
            kind: self.drift_kind,
            feature_mode: self.feature_mode,
        }
    }

    /// Directory name grouping all seeds of this run's setting.
    pub fn setting_dir(&self) -> String {
        format!(
            "{}_{}_{}",
            self.detector,
            objective_name(self.constrained),
            self.setting().slug()
        )
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none() && self.score.is_some()
    }
}

pub fn objective_name(constrained: bool) -> &'static str {
    if constrained {
        "constrained"
    } else {
        "unconstrained"
    }
}

/// A model trained for one seed, objective and data variant.
pub struct Unit {
    pub seed: u64,
    pub constrained: bool,
    pub settings: Vec<DriftSetting>,
    pub state: std::result::Result<(PreparedData, TrainedModel), String>,
}

/// Splits, normalizes and trains everything the detection runs need.
///
/// Streams whose drift is generated get one unit per drift kind; all other
/// datasets share one unit across drift settings.
pub fn prepare_units(cfg: &ExperimentConfig) -> Result<Vec<Unit>> {
    cfg.validate()?;
    let loaded: Option<Dataset> = match &cfg.dataset {
        DatasetSource::Csv { path, label_column } => Some(load_csv(path, label_column)?),
        DatasetSource::Preset(_) => None,
    };
    let settings = cfg.drift_settings();
    let variants: Vec<(DriftKind, Vec<DriftSetting>)> = if cfg.dataset.intrinsic_drift() {
        settings.iter().map(|s| (s.kind, vec![*s])).collect()
    } else {
        vec![(DriftKind::None, settings)]
    };
    let mut jobs = Vec::new();
    for &seed in &cfg.seeds {
        for constrained in cfg.constrained.values() {
            for (variant, settings) in &variants {
                jobs.push((seed, constrained, *variant, settings.clone()));
            }
        }
    }
    Ok(jobs
        .into_par_iter()
        .map(|(seed, constrained, variant, settings)| {
            let state = prepare_data(&cfg.dataset, variant, seed, loaded.as_ref())
                .and_then(|data| {
                    let train_cfg = crate::neural::TrainConfig {
                        seed,
                        ..cfg.train.clone()
                    };
                    let model = train_model(&data, &train_cfg, constrained)?;
                    Ok((data, model))
                })
                .map_err(|e| {
                    log::warn!("seed {seed} ({}) failed: {e}", objective_name(constrained));
                    e.to_string()
                });
            Unit {
                seed,
                constrained,
                settings,
                state,
            }
        })
        .collect())
}

fn failed(cfg: &ExperimentConfig, unit: &Unit, setting: &DriftSetting, kind: DetectorKind, err: &str) -> RunRecord {
    RunRecord {
        dataset: cfg.dataset.name(),
        detector: kind,
        constrained: unit.constrained,
        drift_kind: setting.kind,
        feature_mode: setting.feature_mode,
        seed: unit.seed,
        feature_indices: Vec::new(),
        label: None,
        score: None,
        run: None,
        error: Some(err.to_string()),
    }
}

fn evaluate_setting(
    cfg: &ExperimentConfig,
    det_cfg: &DetectorConfig,
    unit: &Unit,
    setting: &DriftSetting,
) -> Vec<RunRecord> {
    let (data, trained) = match &unit.state {
        Ok(s) => s,
        Err(e) => {
            return cfg
                .detectors
                .iter()
                .map(|&k| failed(cfg, unit, setting, k, e))
                .collect()
        }
    };
    let prepared = build_stream(data, setting, unit.seed).and_then(|stream| {
        let label = label_stream(trained, &stream, data.dataset.k)?;
        let outcomes = run_detectors(&trained.model, &stream, &cfg.detectors, det_cfg)?;
        Ok((stream, label, outcomes))
    });
    let (stream, label, outcomes) = match prepared {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            return cfg
                .detectors
                .iter()
                .map(|&k| failed(cfg, unit, setting, k, &msg))
                .collect();
        }
    };
    outcomes
        .into_iter()
        .map(|outcome| {
            let mut rec = failed(cfg, unit, setting, outcome.detector, "");
            rec.error = None;
            rec.label = Some(label);
            rec.feature_indices = stream
                .plan
                .as_ref()
                .map(|p| p.feature_indices.clone())
                .unwrap_or_default();
            match outcome.result {
                Ok(run) => {
                    match score_run(&run, label.kind, det_cfg.d_max(), cfg.gamma) {
                        Ok(score) => rec.score = Some(score),
                        Err(e) => rec.error = Some(e.to_string()),
                    }
                    rec.run = Some(run);
                }
                Err(e) => rec.error = Some(e),
            }
            rec
        })
        .collect()
}

/// Runs every detector on every prepared unit under `det_cfg`.
pub fn evaluate_units(cfg: &ExperimentConfig, det_cfg: &DetectorConfig, units: &[Unit]) -> Vec<RunRecord> {
    let jobs: Vec<(&Unit, &DriftSetting)> = units
        .iter()
        .flat_map(|u| u.settings.iter().map(move |s| (u, s)))
        .collect();
    jobs.into_par_iter()
        .flat_map_iter(|(unit, setting)| evaluate_setting(cfg, det_cfg, unit, setting))
        .collect()
}

/// Computes all run records without touching the filesystem.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let units = prepare_units(cfg)?;
    Ok(evaluate_units(cfg, &cfg.detector, &units))
}

/// Seed aggregate of one (detector, objective, drift setting) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub detector: DetectorKind,
    pub constrained: bool,
    pub drift_kind: DriftKind,
    pub feature_mode: Option<FeatureMode>,
    /// `None` when every run of the group failed.
    pub aggregate: Option<Aggregate>,
    pub real_runs: usize,
    pub runs_ok: usize,
    pub runs_failed: usize,
}

type GroupKey = (usize, usize, usize);

/// Aggregates records per group, ordered as the configuration lists them.
pub fn summarize(cfg: &ExperimentConfig, records: &[RunRecord]) -> Vec<SummaryRow> {
    let settings = cfg.drift_settings();
    let objectives = cfg.constrained.values();
    let mut groups: BTreeMap<GroupKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let s = settings.iter().position(|s| *s == r.setting());
        let c = objectives.iter().position(|&c| c == r.constrained);
        let d = cfg.detectors.iter().position(|&d| d == r.detector);
        if let (Some(s), Some(c), Some(d)) = (s, c, d) {
            groups.entry((s, c, d)).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .map(|((s, c, d), mut recs)| {
            recs.sort_by_key(|r| r.seed);
            let ok: Vec<ScoreRecord> = recs.iter().filter_map(|r| r.score.clone()).collect();
            SummaryRow {
                dataset: cfg.dataset.name(),
                detector: cfg.detectors[d],
                constrained: objectives[c],
                drift_kind: settings[s].kind,
                feature_mode: settings[s].feature_mode,
                aggregate: aggregate(&ok).ok(),
                real_runs: recs
                    .iter()
                    .filter(|r| r.is_ok() && r.label.is_some_and(|l| l.kind == DriftType::Real))
                    .count(),
                runs_ok: ok.len(),
                runs_failed: recs.len() - ok.len(),
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: [&str; 18] = [
    "dataset",
    "detector",
    "constrained",
    "drift_kind",
    "feature_mode",
    "da_mean",
    "da_std",
    "tnr_mean",
    "tnr_std",
    "delay_mean",
    "delay_std",
    "h_mean",
    "h_std",
    "da_hat_mean",
    "da_hat_std",
    "real_runs",
    "runs_ok",
    "runs_failed",
];

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        let mut rec = vec![
            row.dataset.clone(),
            row.detector.to_string(),
            row.constrained.to_string(),
            row.drift_kind.as_str().to_string(),
            row.feature_mode.map_or("none", FeatureMode::as_str).to_string(),
        ];
        match &row.aggregate {
            Some(a) => {
                for m in [a.da, a.tnr] {
                    rec.extend([fmt6(m.mean), fmt6(m.std)]);
                }
                match a.delay {
                    Some(d) => rec.extend([fmt6(d.mean), fmt6(d.std)]),
                    None => rec.extend([String::new(), String::new()]),
                }
                for m in [a.h, a.da_hat] {
                    rec.extend([fmt6(m.mean), fmt6(m.std)]);
                }
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 10)),
        }
        rec.extend([
            row.real_runs.to_string(),
            row.runs_ok.to_string(),
            row.runs_failed.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| DriftlabError::io(path, e))?;
    Ok(())
}

/// Index of everything a benchmark wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub library_version: String,
    pub started_at: String,
    pub finished_at: String,
    /// Directory holding the files below.
    pub root: PathBuf,
    pub summary: String,
    pub run_files: Vec<String>,
    pub runs_ok: usize,
    pub runs_failed: usize,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| DriftlabError::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| DriftlabError::io(path, e))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn persist(
    cfg: &ExperimentConfig,
    root: &Path,
    records: &[RunRecord],
    rows: &[SummaryRow],
    started_at: String,
) -> Result<RunManifest> {
    std::fs::create_dir_all(root).map_err(|e| DriftlabError::io(root, e))?;
    write_json(cfg, &root.join("config.json"))?;
    let mut run_files = Vec::with_capacity(records.len());
    for r in records {
        let rel = format!("{}/{}.json", r.setting_dir(), r.seed);
        write_json(r, &root.join(&rel))?;
        run_files.push(rel);
    }
    run_files.sort();
    write_summary_csv(rows, &root.join("summary.csv"))?;
    let ok = records.iter().filter(|r| r.is_ok()).count();
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        library_version: crate::VERSION.to_string(),
        started_at,
        finished_at: now(),
        root: root.to_path_buf(),
        summary: "summary.csv".into(),
        run_files,
        runs_ok: ok,
        runs_failed: records.len() - ok,
    };
    write_json(&manifest, &root.join("manifest.json"))?;
    Ok(manifest)
}

/// Directory of a configuration's results: `<output_dir>/runs/<hash>`.
pub fn results_root(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("runs").join(cfg.hash())
}

/// Runs the full grid and writes per-run JSON, `summary.csv` and a manifest.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let started_at = now();
    let records = run_experiment(cfg)?;
    let rows = summarize(cfg, &records);
    persist(cfg, &results_root(cfg), &records, &rows, started_at)
}

/// Average rank of one `(w, r)` cell over all dataset × setting × algorithm rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub w: usize,
    pub r: f64,
    pub average_rank: f64,
    pub h_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationOutput {
    pub cells: Vec<AblationCell>,
    pub csv: PathBuf,
}

pub const ABLATION_W: [usize; 4] = [10, 25, 50, 100];
pub const ABLATION_R: [f64; 4] = [0.0, 0.1, 0.25, 0.5];

/// Benchmarks every `(w, r)` pair with shared trained models and ranks the cells.
pub fn ablation_grid(cfg: &ExperimentConfig, w_values: &[usize], r_values: &[f64]) -> Result<AblationOutput> {
    if w_values.is_empty() || r_values.is_empty() {
        return Err(DriftlabError::InvalidConfig("empty ablation grid".into()));
    }
    let started_at = now();
    let units = prepare_units(cfg)?;
    let root = cfg.output_dir.join("ablation").join(cfg.hash());
    let mut cell_rows: Vec<((usize, f64), Vec<SummaryRow>)> = Vec::new();
    for &w in w_values {
        for &r in r_values {
            let mut cell_cfg = cfg.clone();
            cell_cfg.detector.w = w;
            cell_cfg.detector.r = r;
            cell_cfg.validate()?;
            let records = evaluate_units(&cell_cfg, &cell_cfg.detector, &units);
            let rows = summarize(&cell_cfg, &records);
            let dir = root.join(format!("w{w}_r{r}"));
            persist(&cell_cfg, &dir, &records, &rows, started_at.clone())?;
            cell_rows.push(((w, r), rows));
        }
    }

    // Rows of the rank table: one per (setting, objective, detector) group.
    let n_groups = cell_rows[0].1.len();
    let mut scores = Vec::new();
    let mut row_names = Vec::new();
    for g in 0..n_groups {
        let row: Option<Vec<f64>> = cell_rows
            .iter()
            .map(|(_, rows)| rows.get(g).and_then(|r| r.aggregate.as_ref()).map(|a| a.h.mean))
            .collect();
        if let Some(row) = row {
            let r0 = &cell_rows[0].1[g];
            row_names.push(format!(
                "{}/{}/{}/{}",
                r0.detector,
                objective_name(r0.constrained),
                r0.drift_kind.as_str(),
                r0.feature_mode.map_or("none", FeatureMode::as_str)
            ));
            scores.push(row);
        }
    }
    if scores.is_empty() {
        return Err(DriftlabError::InsufficientData("no ablation group succeeded in every cell".into()));
    }
    let names = cell_rows.iter().map(|((w, r), _)| format!("w{w}_r{r}")).collect();
    let table = RankTable::new(names, row_names, scores)?;
    let ranks = table.average_ranks();
    let cells: Vec<AblationCell> = cell_rows
        .iter()
        .enumerate()
        .map(|(j, ((w, r), _))| AblationCell {
            w: *w,
            r: *r,
            average_rank: ranks[j],
            h_mean: table.scores.iter().map(|row| row[j]).sum::<f64>() / table.scores.len() as f64,
        })
        .collect();
    let csv_path = root.join("ablation.csv");
    let mut wtr = csv::Writer::from_path(&csv_path)?;
    wtr.write_record(["w", "r", "average_rank", "h_mean"])?;
    for c in &cells {
        wtr.write_record([c.w.to_string(), c.r.to_string(), fmt6(c.average_rank), fmt6(c.h_mean)])?;
    }
    wtr.flush().map_err(|e| DriftlabError::io(&csv_path, e))?;
    Ok(AblationOutput { cells, csv: csv_path })
}
