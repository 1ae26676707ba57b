//! Run scoring, seed aggregation and rank-based significance analysis.

mod cd;
mod ranking;

use serde::{Deserialize, Serialize};

use crate::detectors::RunResult;
use crate::error::{DriftlabError, Result};

pub use cd::{cd_groups, emit_cd_diagram, render_cd_diagram};
pub use ranking::{friedman_test, nemenyi_cd, nemenyi_q, FriedmanResult, RankTable};

/// Penalty exponent for late detections.
pub const DEFAULT_GAMMA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftType {
    Real,
    Virtual,
}

impl DriftType {
    pub fn as_str(self) -> &'static str {
        match self {
            DriftType::Real => "real",
            DriftType::Virtual => "virtual",
        }
    }
}

/// Whether a drift hurt the classifier beyond its generalization gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftLabel {
    pub kind: DriftType,
    pub acc_train: f64,
    pub acc_valid: f64,
    pub acc_test: f64,
    pub ge: f64,
}

impl DriftLabel {
    pub fn threshold(&self) -> f64 {
        self.acc_valid - self.ge
    }
}

/// Labels a drift real when test accuracy falls strictly below
/// `acc_valid − |acc_train − acc_valid|`.
pub fn classify_drift_type(acc_train: f64, acc_valid: f64, acc_test: f64) -> DriftLabel {
    let ge = (acc_train - acc_valid).abs();
    let kind = if acc_test < acc_valid - ge {
        DriftType::Real
    } else {
        DriftType::Virtual
    };
    DriftLabel {
        kind,
        acc_train,
        acc_valid,
        acc_test,
        ge,
    }
}

/// Detection accuracy discounted by `(delay / d_max)^γ`, clamped to `[0, 1]`.
///
/// Only real drifts are penalized; a missing delay on a real drift means the
/// drift was missed and scores zero.
pub fn penalized_da(da: f64, delay: Option<usize>, d_max: usize, gamma: f64, label: DriftType) -> f64 {
    match (label, delay) {
        (DriftType::Virtual, _) => da,
        (DriftType::Real, None) => 0.0,
        (DriftType::Real, Some(d)) => {
            let penalty = (d as f64 / d_max as f64).powf(gamma);
            (da - penalty).clamp(0.0, 1.0)
        }
    }
}

/// Share of counted pre-onset samples that were not flagged.
///
/// Samples at or after `onset`, inside warm-up, or never processed (the run
/// stopped first) are not counted.
pub fn compute_tnr(raw_flags: &[bool], warmup: &[bool], onset: usize) -> Result<f64> {
    let mut counted = 0usize;
    let mut flagged = 0usize;
    for (&f, &w) in raw_flags.iter().zip(warmup).take(onset) {
        if !w {
            counted += 1;
            flagged += usize::from(f);
        }
    }
    if counted == 0 {
        return Err(DriftlabError::InsufficientData(
            "no pre-onset samples outside warm-up".into(),
        ));
    }
    Ok(1.0 - flagged as f64 / counted as f64)
}

/// Harmonic mean of penalized accuracy and true-negative rate.
pub fn h_score(da_hat: f64, tnr: f64) -> f64 {
    let s = da_hat + tnr;
    if s == 0.0 {
        0.0
    } else {
        2.0 * da_hat * tnr / s
    }
}

/// Scores of one detector on one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub da: f64,
    pub da_hat: f64,
    pub tnr: f64,
    pub delay: Option<usize>,
    pub h: f64,
    pub gamma: f64,
    pub d_max: usize,
}

/// Scores a run against the drift label.
///
/// A real drift counts as detected when the first report comes at or after
/// onset. A virtual drift counts as correctly handled when nothing is reported.
pub fn score_run(run: &RunResult, label: DriftType, d_max: usize, gamma: f64) -> Result<ScoreRecord> {
    let tnr = compute_tnr(&run.raw_flags, &run.warmup, run.onset_index)?;
    let (da, delay) = match label {
        DriftType::Real => match run.report_index {
            Some(r) if r >= run.onset_index => (1.0, Some(r - run.onset_index)),
            _ => (0.0, None),
        },
        DriftType::Virtual => (if run.report_index.is_none() { 1.0 } else { 0.0 }, None),
    };
    let da_hat = penalized_da(da, delay, d_max, gamma, label);
    Ok(ScoreRecord {
        da,
        da_hat,
        tnr,
        delay,
        h: h_score(da_hat, tnr),
        gamma,
        d_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation; `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        if values.iter().all(|&v| v == values[0]) {
            return Some(MeanStd { mean: values[0], std: 0.0 });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }
}

/// Seed-level summary of a set of score records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub da: MeanStd,
    pub da_hat: MeanStd,
    pub tnr: MeanStd,
    /// Over the records that carry a delay.
    pub delay: Option<MeanStd>,
    pub h: MeanStd,
}

pub fn aggregate(records: &[ScoreRecord]) -> Result<Aggregate> {
    if records.is_empty() {
        return Err(DriftlabError::InsufficientData("no records to aggregate".into()));
    }
    let pick = |f: fn(&ScoreRecord) -> f64| {
        let v: Vec<f64> = records.iter().map(f).collect();
        MeanStd::of(&v).expect("non-empty")
    };
    let delays: Vec<f64> = records.iter().filter_map(|r| r.delay).map(|d| d as f64).collect();
    Ok(Aggregate {
        runs: records.len(),
        da: pick(|r| r.da),
        da_hat: pick(|r| r.da_hat),
        tnr: pick(|r| r.tnr),
        delay: MeanStd::of(&delays),
        h: pick(|r| r.h),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::detectors::DetectorKind;

    fn record(h: f64, delay: Option<usize>) -> ScoreRecord {
        ScoreRecord {
            da: 1.0,
            da_hat: 1.0,
            tnr: 1.0,
            delay,
            h,
            gamma: 2.0,
            d_max: 300,
        }
    }

    #[test]
    fn labels_from_accuracy_table() {
        let real = classify_drift_type(0.888, 0.860, 0.774);
        assert_eq!(real.kind, DriftType::Real);
        assert!((real.ge - 0.028).abs() < 1e-12);
        assert!((real.threshold() - 0.832).abs() < 1e-12);
        assert_eq!(classify_drift_type(0.888, 0.860, 0.849).kind, DriftType::Virtual);
        // Exactly at the threshold is not real.
        assert_eq!(classify_drift_type(0.75, 0.625, 0.5).kind, DriftType::Virtual);
        assert_eq!(classify_drift_type(0.75, 0.625, 0.4999).kind, DriftType::Real);
        assert_eq!(classify_drift_type(0.75, 0.75, 0.75).kind, DriftType::Virtual);
    }

    #[test]
    fn penalty_examples() {
        let r = DriftType::Real;
        assert_eq!(penalized_da(1.0, Some(0), 300, 2.0, r), 1.0);
        assert!((penalized_da(1.0, Some(150), 300, 2.0, r) - 0.75).abs() < 1e-12);
        assert_eq!(penalized_da(1.0, Some(600), 300, 2.0, r), 0.0);
        assert_eq!(penalized_da(1.0, None, 300, 2.0, r), 0.0);
        assert_eq!(penalized_da(1.0, Some(600), 300, 2.0, DriftType::Virtual), 1.0);
    }

    #[test]
    fn tnr_examples() {
        assert_eq!(compute_tnr(&[false; 20], &[false; 20], 20).unwrap(), 1.0);
        let flags: Vec<bool> = (0..100).map(|i| i % 10 == 0).collect();
        assert!((compute_tnr(&flags, &[false; 100], 100).unwrap() - 0.9).abs() < 1e-12);
        // Warm-up and post-onset samples are ignored.
        let mut warm = vec![false; 120];
        warm[..20].iter_mut().for_each(|w| *w = true);
        let mut flags = vec![true; 120];
        flags[20..100].iter_mut().for_each(|f| *f = false);
        assert_eq!(compute_tnr(&flags, &warm, 100).unwrap(), 1.0);
        // Stopped at 30: only 30 processed samples count.
        let mut flags = vec![false; 30];
        flags[29] = true;
        assert!((compute_tnr(&flags, &[false; 30], 100).unwrap() - 29.0 / 30.0).abs() < 1e-12);
        assert!(compute_tnr(&[true; 5], &[true; 5], 5).is_err());
        assert!(compute_tnr(&[false; 5], &[false; 5], 0).is_err());
    }

    #[test]
    fn h_examples() {
        assert_eq!(h_score(1.0, 1.0), 1.0);
        assert_eq!(h_score(0.0, 0.7), 0.0);
        assert_eq!(h_score(0.0, 0.0), 0.0);
        assert!((h_score(0.75, 1.0) - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn aggregation() {
        let same = vec![record(0.9, Some(4)); 10];
        let a = aggregate(&same).unwrap();
        assert_eq!(a.h.std, 0.0);
        assert_eq!(a.runs, 10);
        let a = aggregate(&[record(0.8, Some(10)), record(1.0, None), record(0.9, Some(20))]).unwrap();
        assert!((a.h.mean - 0.9).abs() < 1e-12);
        assert_eq!(a.delay.unwrap().mean, 15.0);
        let b = aggregate(&[record(0.8, None), record(1.0, None)]).unwrap();
        assert!((b.h.mean - 0.9).abs() < 1e-12 && (b.h.std - 0.1).abs() < 1e-12);
        assert!(b.delay.is_none());
        assert!(aggregate(&[]).is_err());
    }

    fn run(report: Option<usize>, onset: usize) -> RunResult {
        let len = report.map_or(400, |r| r + 1);
        let mut raw = vec![false; len];
        if let Some(r) = report {
            raw[r] = true;
        }
        RunResult {
            detector: DetectorKind::Zsd,
            raw_flags: raw,
            warmup: vec![false; len],
            report_index: report,
            onset_index: onset,
            delay: report.and_then(|r| r.checked_sub(onset)),
            stopped_early: report.is_some(),
            stream_len: 400,
        }
    }

    #[test]
    fn scoring_rules() {
        let s = score_run(&run(Some(250), 100), DriftType::Real, 300, 2.0).unwrap();
        assert_eq!((s.da, s.delay), (1.0, Some(150)));
        assert!((s.da_hat - 0.75).abs() < 1e-12);
        assert!((s.h - 6.0 / 7.0).abs() < 1e-12);
        let early = score_run(&run(Some(50), 100), DriftType::Real, 300, 2.0).unwrap();
        assert_eq!((early.da, early.delay, early.h), (0.0, None, 0.0));
        let missed = score_run(&run(None, 100), DriftType::Real, 300, 2.0).unwrap();
        assert_eq!((missed.da, missed.da_hat), (0.0, 0.0));
        let quiet = score_run(&run(None, 100), DriftType::Virtual, 300, 2.0).unwrap();
        assert_eq!((quiet.da, quiet.h, quiet.delay), (1.0, 1.0, None));
        let noisy = score_run(&run(Some(250), 100), DriftType::Virtual, 300, 2.0).unwrap();
        assert_eq!(noisy.da, 0.0);
    }

    proptest! {
        #[test]
        fn h_symmetric_and_bounded(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let h = h_score(a, b);
            prop_assert!((h - h_score(b, a)).abs() < 1e-15);
            prop_assert!(h <= (a * b).sqrt() + 1e-12);
            prop_assert!((0.0..=1.0).contains(&h));
        }

        #[test]
        fn penalty_nonincreasing_in_delay(
            d1 in 0usize..2000, d2 in 0usize..2000, gamma in 0.01f64..5.0, da in 0.0f64..=1.0
        ) {
            let (lo, hi) = (d1.min(d2), d1.max(d2));
            let p = |d| penalized_da(da, Some(d), 300, gamma, DriftType::Real);
            prop_assert!(p(hi) <= p(lo));
            prop_assert!((0.0..=1.0).contains(&p(hi)));
        }

        #[test]
        fn label_rule_is_a_threshold(tr in 0.0f64..=1.0, va in 0.0f64..=1.0, te in 0.0f64..=1.0) {
            let l = classify_drift_type(tr, va, te);
            prop_assert_eq!(l.ge, (tr - va).abs());
            prop_assert_eq!(l.kind == DriftType::Real, te < va - (tr - va).abs());
        }
    }
}
