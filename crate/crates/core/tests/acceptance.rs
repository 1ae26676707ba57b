//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use driftlab_core::data::DriftKind;
use driftlab_core::detectors::{ks_threshold, windowed_decision, DetectorKind};
use driftlab_core::drift::FeatureMode;
use driftlab_core::embedding_stats::generalized_variance;
use driftlab_core::eval::{
    aggregate, friedman_test, h_score, nemenyi_cd, penalized_da, render_cd_diagram, DriftType, RankTable,
};
use driftlab_core::harness::{
    evaluate_units, prepare_units, ConstrainedSetting, DatasetSource, DriftGrid, ExperimentConfig, Preset,
    RunRecord, Unit,
};

type Outcome = Result<String, String>;

const SEEDS: std::ops::Range<u64> = 0..10;
const RUNTIME_LIMIT: Duration = Duration::from_secs(600);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn config(preset: Preset, constrained: bool, kind: DriftKind, modes: Vec<FeatureMode>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(DatasetSource::Preset(preset), vec![DetectorKind::Zsd]);
    cfg.constrained = ConstrainedSetting::Only(constrained);
    cfg.drift = DriftGrid {
        kinds: vec![kind],
        feature_modes: modes,
    };
    cfg.seeds = SEEDS.collect();
    cfg
}

struct Trained {
    cfg: ExperimentConfig,
    units: Vec<Unit>,
    elapsed: Duration,
}

impl Trained {
    fn new(cfg: ExperimentConfig) -> Result<(Self, Vec<RunRecord>), String> {
        let start = Instant::now();
        let units = prepare_units(&cfg).map_err(|e| e.to_string())?;
        let records = evaluate_units(&cfg, &cfg.detector, &units);
        let elapsed = start.elapsed();
        if let Some(r) = records.iter().find(|r| r.error.is_some()) {
            return Err(format!("seed {} failed: {}", r.seed, r.error.as_deref().unwrap_or_default()));
        }
        Ok((Trained { cfg, units, elapsed }, records))
    }
}

fn criterion_1(records: &[RunRecord], elapsed: Duration) -> Outcome {
    let scores: Vec<_> = records.iter().filter_map(|r| r.score.clone()).collect();
    let agg = aggregate(&scores).map_err(|e| e.to_string())?;
    let delay = agg.delay.map_or(f64::INFINITY, |d| d.mean);
    let detail = format!(
        "DA {:.3}, TNR {:.3}, delay {:.1}, H {:.3} over {} seeds in {:.0?}",
        agg.da.mean, agg.tnr.mean, delay, agg.h.mean, agg.runs, elapsed
    );
    check(
        agg.runs == SEEDS.count()
            && agg.da.mean >= 0.9
            && agg.tnr.mean >= 0.90
            && delay <= 30.0
            && agg.h.mean >= 0.90
            && elapsed <= RUNTIME_LIMIT,
        detail,
    )
}

fn fit_gv(unit: &Unit) -> Result<f64, String> {
    let (data, trained) = unit.state.as_ref().map_err(Clone::clone)?;
    let fit = data.dataset.slice(data.splits.fit());
    let (emb, _) = trained.model.params.predict(fit.features.view()).map_err(|e| e.to_string())?;
    Ok(generalized_variance(emb.view(), &fit.labels, fit.k).map_err(|e| e.to_string())?.mean)
}

fn criterion_2(on: &Trained, off: &Trained) -> Outcome {
    let mut reductions = Vec::new();
    for (a, b) in on.units.iter().zip(&off.units) {
        assert_eq!(a.seed, b.seed);
        let (gv_on, gv_off) = (fit_gv(a)?, fit_gv(b)?);
        if gv_off <= 0.0 {
            return Err(format!("seed {}: unconstrained GV is zero", a.seed));
        }
        reductions.push(1.0 - gv_on / gv_off);
    }
    let mean = reductions.iter().sum::<f64>() / reductions.len() as f64;
    let min = reductions.iter().copied().fold(f64::INFINITY, f64::min);
    check(mean >= 0.90, format!("mean GV reduction {mean:.4} (min {min:.4})"))
}

fn criterion_3(records: &[RunRecord]) -> Outcome {
    let labels: Vec<_> = records.iter().filter_map(|r| r.label).collect();
    let n = labels.len() as f64;
    let valid = labels.iter().map(|l| l.acc_valid).sum::<f64>() / n;
    let test = labels.iter().map(|l| l.acc_test).sum::<f64>() / n;
    let real = labels.iter().filter(|l| l.kind == DriftType::Real).count();
    let min_valid = labels.iter().map(|l| l.acc_valid).fold(f64::INFINITY, f64::min);
    check(
        labels.len() == SEEDS.count() && valid >= 0.99 && test <= 0.70 && real >= 9,
        format!("validation {valid:.4} (min {min_valid:.4}), post-drift {test:.3}, real on {real}/10"),
    )
}

fn criterion_4() -> Outcome {
    let cfg = config(Preset::Rbf, true, DriftKind::Step, vec![FeatureMode::Least]);
    let (_, records) = Trained::new(cfg)?;
    let virt = records
        .iter()
        .filter(|r| r.label.is_some_and(|l| l.kind == DriftType::Virtual))
        .count();
    check(virt >= 8, format!("virtual on {virt}/{}", records.len()))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn criterion_5() -> Outcome {
    let da = penalized_da(1.0, Some(150), 300, 2.0, DriftType::Real);
    let h = h_score(0.75, 1.0);
    let mut flags = vec![false; 50];
    flags[..13].iter_mut().for_each(|f| *f = true);
    let at_13 = windowed_decision(&flags, 50, 0.25);
    flags[12] = false;
    let at_12 = windowed_decision(&flags, 50, 0.25);
    let ks = ks_threshold(0.01, 250, 250);
    check(
        close(da, 0.75)
            && close(h, 6.0 / 7.0)
            && at_13
            && !at_12
            && close(ks, 1.628 * (2.0f64 / 250.0).sqrt()),
        format!("penalized DA {da}, H {h}, 13/50 -> {at_13}, 12/50 -> {at_12}, KS threshold {ks:.6}"),
    )
}

fn criterion_6() -> Outcome {
    for seed in 0..3 {
        common::oracle_equivalence(seed)?;
    }
    Ok("KS (1000 steps), moments and windowed decision agree on 3 streams".into())
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    let mut params = 0;
    for seed in 0..20 {
        let c = common::gradient_check(seed);
        worst = worst.max(c.max_rel);
        params += c.checked;
    }
    check(
        worst <= 1e-4,
        format!("max relative error {worst:.2e} over {params} parameters in 20 networks"),
    )
}

fn criterion_8() -> Outcome {
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let rows = (0..10).map(|i| format!("d{i}")).collect();
    let table = RankTable::new(names.clone(), rows, vec![vec![0.9, 0.5, 0.1]; 10]).map_err(|e| e.to_string())?;
    let f = friedman_test(&table, 0.05).map_err(|e| e.to_string())?;
    let cd = nemenyi_cd(2, 10, 0.05).map_err(|e| e.to_string())?;
    let svg = render_cd_diagram(&table.average_ranks(), &names, nemenyi_cd(3, 10, 0.05).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let parses = roxmltree::Document::parse(&svg).is_ok();
    check(
        close(f.statistic, 20.0) && f.reject && (cd - 0.620).abs() <= 1e-3 && parses,
        format!(
            "chi2 {:.6} (reject {}), CD(2, 10) {cd:.4}, SVG parses {parses}",
            f.statistic, f.reject
        ),
    )
}

fn main() {
    let mut results: Vec<(u8, Outcome)> = vec![
        (5, criterion_5()),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8()),
    ];

    let constrained = Trained::new(config(Preset::MovingRbf, true, DriftKind::Step, Vec::new()));
    let unconstrained = Trained::new(config(Preset::MovingRbf, false, DriftKind::Step, Vec::new()));
    match &constrained {
        Ok((t, records)) => {
            results.push((1, criterion_1(records, t.elapsed)));
            results.push((3, criterion_3(records)));
        }
        Err(e) => {
            results.push((1, Err(e.clone())));
            results.push((3, Err(e.clone())));
        }
    }
    results.push((
        2,
        match (&constrained, &unconstrained) {
            (Ok((on, _)), Ok((off, _))) => {
                debug_assert_eq!(on.cfg.seeds, off.cfg.seeds);
                criterion_2(on, off)
            }
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        },
    ));
    results.push((4, criterion_4()));

    results.sort_by_key(|(n, _)| *n);
    let mut failed = 0;
    for (n, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({detail})");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
