use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bench::RunRecord;
use crate::error::{DriftlabError, Result};
use crate::eval::{emit_cd_diagram, friedman_test, nemenyi_cd, DriftType, FriedmanResult, RankTable};

const RUN_PATTERN: &str = "runs/<hash>/<detector>_<objective>_<drift>_<mode>/<seed>.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    All,
    Real,
    Virtual,
}

impl Grouping {
    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::All => "all",
            Grouping::Real => "real",
            Grouping::Virtual => "virtual",
        }
    }

    fn admits(self, kind: DriftType) -> bool {
        match self {
            Grouping::All => true,
            Grouping::Real => kind == DriftType::Real,
            Grouping::Virtual => kind == DriftType::Virtual,
        }
    }
}

impl std::str::FromStr for Grouping {
    type Err = DriftlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Grouping::All),
            "real" => Ok(Grouping::Real),
            "virtual" => Ok(Grouping::Virtual),
            other => Err(DriftlabError::InvalidConfig(format!(
                "unknown grouping `{other}` (expected all, real or virtual)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    pub grouping: Grouping,
    pub table: RankTable,
    pub average_ranks: Vec<f64>,
    pub friedman: FriedmanResult,
    pub cd: f64,
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub json: PathBuf,
}

fn is_run_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
        && path
            .file_stem()
            .and_then(|s| s.to_str())
            .is_some_and(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
}

fn collect_run_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| DriftlabError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| DriftlabError::io(dir, e))?.path();
        if path.is_dir() {
            collect_run_files(&path, out)?;
        } else if is_run_file(&path) {
            out.push(path);
        }
    }
    Ok(())
}

/// Reads every per-run record below `dir`, in path order.
pub fn load_run_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut files = Vec::new();
    collect_run_files(dir, &mut files)?;
    files.sort();
    files
        .iter()
        .map(|f| {
            let text = std::fs::read_to_string(f).map_err(|e| DriftlabError::io(f, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}

/// Column name of a detector/objective pair in the rank table.
pub fn algorithm_name(r: &RunRecord) -> String {
    if r.detector.needs_model() {
        format!("{}[{}]", r.detector, if r.constrained { "c" } else { "u" })
    } else {
        r.detector.to_string()
    }
}

/// Builds the H-score rank table over the records admitted by `grouping`.
///
/// Rows are (dataset, drift kind, feature mode) settings. A setting is kept
/// only when every algorithm has at least one admitted run in it.
pub fn rank_table(records: &[RunRecord], grouping: Grouping) -> Result<RankTable> {
    let mut cells: BTreeMap<(String, String), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut algorithms = std::collections::BTreeSet::new();
    for r in records {
        let (Some(score), Some(label)) = (&r.score, &r.label) else {
            continue;
        };
        if r.error.is_some() || !grouping.admits(label.kind) {
            continue;
        }
        let row = (r.dataset.clone(), r.setting().slug());
        let alg = algorithm_name(r);
        algorithms.insert(alg.clone());
        cells.entry(row).or_default().entry(alg).or_default().push(score.h);
    }
    let algorithms: Vec<String> = algorithms.into_iter().collect();
    let mut rows = Vec::new();
    let mut scores = Vec::new();
    for ((dataset, setting), by_alg) in cells {
        let row: Option<Vec<f64>> = algorithms
            .iter()
            .map(|a| by_alg.get(a).map(|h| h.iter().sum::<f64>() / h.len() as f64))
            .collect();
        if let Some(row) = row {
            rows.push(format!("{dataset}/{setting}"));
            scores.push(row);
        }
    }
    if algorithms.len() < 2 || rows.len() < 2 {
        return Err(DriftlabError::InsufficientData(format!(
            "report needs at least 2 algorithms over 2 complete settings; found {} and {}",
            algorithms.len(),
            rows.len()
        )));
    }
    RankTable::new(algorithms, rows, scores)
}

/// Writes `report_<grouping>.csv`, `.json` and `cd_<grouping>.svg` into `out_dir`.
pub fn report(results_dir: &Path, grouping: Grouping, out_dir: &Path) -> Result<ReportOutput> {
    let records = load_run_records(results_dir)?;
    if records.is_empty() {
        return Err(DriftlabError::InsufficientData(format!(
            "no run records under {}; expected files matching {RUN_PATTERN}",
            results_dir.display()
        )));
    }
    let table = rank_table(&records, grouping)?;
    let friedman = friedman_test(&table, 0.05)?;
    let cd = nemenyi_cd(table.algorithms.len(), table.rows.len(), 0.05)?;
    let average_ranks = table.average_ranks();

    std::fs::create_dir_all(out_dir).map_err(|e| DriftlabError::io(out_dir, e))?;
    let g = grouping.as_str();
    let csv = out_dir.join(format!("report_{g}.csv"));
    let mut w = csv::Writer::from_path(&csv)?;
    let mut header = vec!["setting".to_string()];
    header.extend(table.algorithms.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in table.rows.iter().zip(&table.scores) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec)?;
    }
    let mut rec = vec!["average_rank".to_string()];
    rec.extend(average_ranks.iter().map(|v| format!("{v:.6}")));
    w.write_record(&rec)?;
    w.flush().map_err(|e| DriftlabError::io(&csv, e))?;

    let svg = out_dir.join(format!("cd_{g}.svg"));
    emit_cd_diagram(&average_ranks, &table.algorithms, cd, &svg)?;

    let json = out_dir.join(format!("report_{g}.json"));
    let out = ReportOutput {
        grouping,
        table,
        average_ranks,
        friedman,
        cd,
        csv,
        svg,
        json: json.clone(),
    };
    std::fs::write(&json, serde_json::to_string_pretty(&out)? + "\n").map_err(|e| DriftlabError::io(&json, e))?;
    Ok(out)
}
