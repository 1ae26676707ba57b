use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use driftlab_core::data::{
    encode_and_normalize, generate_moving_rbf, generate_rbf, load_csv, write_csv, DriftKind, SyntheticSpec,
};
use driftlab_core::detectors::{run_stream, DetectorConfig, DetectorKind, ZsdUpdate};
use driftlab_core::drift::FeatureMode;
use driftlab_core::embedding_stats::distances;
use driftlab_core::harness::{
    ablation_grid, prepare_data, report, results_root, run_benchmark, train_model, ConstrainedSetting,
    DatasetSource, ExperimentConfig, Grouping, Preset,
};
use driftlab_core::neural::{Model, TrainConfig};
use driftlab_core::DriftlabError;

#[derive(Parser)]
#[command(name = "driftlab", version, about = "Task-sensitive concept drift detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV plus its metadata as JSON.
    Gen(GenArgs),
    /// Train a model on the training half of a dataset and save it as JSON.
    Train(TrainArgs),
    /// Run one detector over a single stream and print the run result.
    Detect(DetectArgs),
    /// Run the benchmark grid described by a configuration.
    Bench(BenchArgs),
    /// Sweep the drift-report window and ratio.
    Ablate(AblateArgs),
    /// Rank detectors by H-score and draw a critical-difference diagram.
    Report(ReportArgs),
    /// Write the embedding and centroid distances of every row of a CSV.
    DumpEmbeddings(DumpArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Synthetic preset: rbf or moving_rbf.
    #[arg(long, conflicts_with = "csv")]
    preset: Option<String>,
    /// CSV dataset with a header row.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Name of the label column in --csv.
    #[arg(long, default_value = "label")]
    label_column: String,
}

impl SourceArgs {
    fn source(&self) -> anyhow::Result<Option<DatasetSource>> {
        Ok(match (&self.preset, &self.csv) {
            (Some(p), _) => Some(DatasetSource::Preset(p.parse()?)),
            (None, Some(path)) => Some(DatasetSource::Csv {
                path: path.clone(),
                label_column: self.label_column.clone(),
            }),
            (None, None) => None,
        })
    }
}

#[derive(Args, Default)]
struct DetectorArgs {
    #[arg(long)]
    w: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    d_max: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha_zsd: Option<f64>,
    #[arg(long)]
    alpha_iks: Option<f64>,
    /// reference_window or ema.
    #[arg(long)]
    zsd_update: Option<String>,
}

impl DetectorArgs {
    fn apply(&self, cfg: &mut DetectorConfig) -> anyhow::Result<()> {
        if let Some(w) = self.w {
            cfg.w = w;
        }
        if let Some(r) = self.r {
            cfg.r = r;
        }
        if self.d_max.is_some() {
            cfg.d_max = self.d_max;
        }
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(a) = self.alpha_zsd {
            cfg.alpha_zsd = a;
        }
        if let Some(a) = self.alpha_iks {
            cfg.alpha_iks = a;
        }
        if let Some(u) = &self.zsd_update {
            cfg.zsd_update = match u.as_str() {
                "reference_window" => ZsdUpdate::ReferenceWindow,
                "ema" => ZsdUpdate::Ema,
                other => return Err(DriftlabError::InvalidConfig(format!("unknown zsd update `{other}`")).into()),
            };
        }
        cfg.validate()?;
        Ok(())
    }
}

#[derive(Args)]
struct GenArgs {
    /// rbf or moving_rbf.
    #[arg(long)]
    preset: String,
    /// Drift built into a moving_rbf stream: none, step or gradual.
    #[arg(long, default_value = "step")]
    drift: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for data.csv and meta.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train without the centroid constraint.
    #[arg(long)]
    unconstrained: bool,
    #[arg(long)]
    epochs: Option<usize>,
    /// Training hyperparameters as JSON.
    #[arg(long)]
    train_config: Option<PathBuf>,
    /// Path of the model JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Stream CSV; rows are read in file order.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Rows to ignore at the top of the file.
    #[arg(long, default_value_t = 0)]
    skip: usize,
    /// Rows after --skip that form the reference set.
    #[arg(long)]
    reference: usize,
    /// Drift onset counted from the first monitored row; defaults to the stream end.
    #[arg(long)]
    onset: Option<usize>,
    #[arg(long, default_value = "zsd")]
    detector: String,
    #[command(flatten)]
    detector_args: DetectorArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated detector kinds.
    #[arg(long, value_delimiter = ',')]
    detectors: Vec<String>,
    /// true, false or both.
    #[arg(long)]
    constrained: Option<String>,
    /// Comma-separated drift kinds.
    #[arg(long, value_delimiter = ',')]
    drift: Vec<String>,
    /// Comma-separated feature modes (most, least).
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Shorthand for a single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    detector_args: DetectorArgs,
}

impl ExperimentArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.source.source()?) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(src)) => ExperimentConfig::new(src, DetectorKind::ALL.to_vec()),
            (None, None) => {
                return Err(DriftlabError::InvalidConfig("pass --config, --preset or --csv".into()).into())
            }
        };
        if self.config.is_some() {
            if let Some(src) = self.source.source()? {
                cfg.dataset = src;
            }
        }
        if !self.detectors.is_empty() {
            cfg.detectors = self.detectors.iter().map(|d| d.parse()).collect::<Result<_, _>>()?;
        }
        if let Some(c) = &self.constrained {
            cfg.constrained = c.parse::<ConstrainedSetting>()?;
        }
        if !self.drift.is_empty() {
            cfg.drift.kinds = self.drift.iter().map(|d| d.parse()).collect::<Result<Vec<DriftKind>, _>>()?;
        }
        if !self.modes.is_empty() {
            cfg.drift.feature_modes =
                self.modes.iter().map(|m| m.parse()).collect::<Result<Vec<FeatureMode>, _>>()?;
        }
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        self.detector_args.apply(&mut cfg.detector)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated window sizes.
    #[arg(long = "w-values", value_delimiter = ',', default_values_t = [10usize, 25, 50, 100])]
    w_values: Vec<usize>,
    /// Comma-separated report ratios.
    #[arg(long = "r-values", value_delimiter = ',', default_values_t = [0.0, 0.1, 0.25, 0.5])]
    r_values: Vec<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory containing per-run JSON records.
    #[arg(long)]
    results: PathBuf,
    /// all, real or virtual.
    #[arg(long, default_value = "all")]
    grouping: String,
    /// Output directory; defaults to --results.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long)]
    out: PathBuf,
}

fn write_json(value: &serde_json::Value, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn gen(args: &GenArgs) -> anyhow::Result<()> {
    let preset: Preset = args.preset.parse()?;
    let drift: DriftKind = args.drift.parse()?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let data = args.out.join("data.csv");
    let meta = args.out.join("meta.json");
    match preset {
        Preset::Rbf => {
            let spec = SyntheticSpec::rbf(args.seed);
            let (ds, sources) = generate_rbf(&spec)?;
            write_csv(&ds, &data)?;
            write_json(&serde_json::json!({ "spec": spec, "redundant_sources": sources }), &meta)?;
        }
        Preset::MovingRbf => {
            let spec = SyntheticSpec::moving_rbf(drift, args.seed);
            let (ds, m) = generate_moving_rbf(&spec)?;
            write_csv(&ds, &data)?;
            write_json(&serde_json::json!({ "spec": spec, "drift": m }), &meta)?;
        }
    }
    println!("{}", data.display());
    Ok(())
}

fn train_cmd(args: &TrainArgs) -> anyhow::Result<()> {
    let Some(source) = args.source.source()? else {
        return Err(DriftlabError::InvalidConfig("pass --preset or --csv".into()).into());
    };
    let mut cfg = match &args.train_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| DriftlabError::InvalidConfig(e.to_string()))?
        }
        None => TrainConfig::default(),
    };
    cfg.seed = args.seed;
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    let data = prepare_data(&source, DriftKind::None, args.seed, None)?;
    let trained = train_model(&data, &cfg, !args.unconstrained)?;
    trained.model.save(&args.out)?;
    let summary = serde_json::json!({
        "model": args.out,
        "constrained": !args.unconstrained,
        "seed": args.seed,
        "acc_train": trained.acc_train,
        "acc_valid": trained.acc_valid,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn load_normalized(model: &Model, path: &Path, label_column: &str) -> anyhow::Result<driftlab_core::data::Dataset> {
    let raw = load_csv(path, label_column)?;
    let ds = match &model.norm {
        Some(norm) => encode_and_normalize(&raw, Some(norm))?.0,
        None => raw,
    };
    if ds.q() != model.params.input_dim() {
        return Err(DriftlabError::DimensionMismatch {
            expected: model.params.input_dim(),
            found: ds.q(),
        }
        .into());
    }
    Ok(ds)
}

fn detect(args: &DetectArgs) -> anyhow::Result<()> {
    let kind: DetectorKind = args.detector.parse()?;
    let mut cfg = DetectorConfig::default();
    args.detector_args.apply(&mut cfg)?;
    let model = Model::load(&args.model)?;
    let ds = load_normalized(&model, &args.data, &args.label_column)?;
    let start = args.skip + args.reference;
    if start >= ds.n() {
        bail!(DriftlabError::InvalidArgument(format!(
            "--skip + --reference = {start} leaves no monitored rows out of {}",
            ds.n()
        )));
    }
    let reference = ds.slice(args.skip..start).features;
    let monitored = ds.slice(start..ds.n()).features;
    let onset = args.onset.unwrap_or(monitored.nrows());
    let result = run_stream(
        kind,
        Some((&model.params, &model.centroids)),
        reference.view(),
        monitored.view(),
        onset,
        &cfg,
    )?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn bench(args: &BenchArgs) -> anyhow::Result<()> {
    let cfg = args.experiment.config()?;
    let manifest = run_benchmark(&cfg)?;
    println!(
        "{} runs ok, {} failed; summary at {}",
        manifest.runs_ok,
        manifest.runs_failed,
        results_root(&cfg).join(&manifest.summary).display()
    );
    if manifest.runs_ok == 0 {
        bail!("every run failed");
    }
    Ok(())
}

fn ablate(args: &AblateArgs) -> anyhow::Result<()> {
    let cfg = args.experiment.config()?;
    let out = ablation_grid(&cfg, &args.w_values, &args.r_values)?;
    for c in &out.cells {
        println!("w = {:>4}  r = {:<5} average rank {:.3}  mean H {:.3}", c.w, c.r, c.average_rank, c.h_mean);
    }
    println!("{}", out.csv.display());
    Ok(())
}

fn report_cmd(args: &ReportArgs) -> anyhow::Result<()> {
    let grouping: Grouping = args.grouping.parse()?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.results.clone());
    let r = report(&args.results, grouping, &out_dir)?;
    println!(
        "Friedman chi2 = {:.3} (critical {:.3}, p = {:.4}){}; CD = {:.3}",
        r.friedman.statistic,
        r.friedman.critical,
        r.friedman.p_value,
        if r.friedman.reject { ", rejected" } else { "" },
        r.cd
    );
    for (name, rank) in r.table.algorithms.iter().zip(&r.average_ranks) {
        println!("{name:>12}  {rank:.3}");
    }
    println!("{}\n{}", r.csv.display(), r.svg.display());
    Ok(())
}

fn dump(args: &DumpArgs) -> anyhow::Result<()> {
    let model = Model::load(&args.model)?;
    let ds = load_normalized(&model, &args.data, &args.label_column)?;
    let (emb, probs) = model.params.predict(ds.features.view())?;
    let mut w = csv::Writer::from_path(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let k = model.centroids.0.nrows();
    let mut header = vec!["e0".to_string(), "e1".into(), "e2".into(), "label".into(), "predicted".into()];
    header.extend((0..k).map(|c| format!("d{c}")));
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let e = emb.row(i);
        let pred = probs
            .row(i)
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (c, &p)| if p > best.1 { (c, p) } else { best })
            .0;
        let mut rec: Vec<String> = e.iter().map(|v| v.to_string()).collect();
        rec.push(ds.class_names[ds.labels[i]].clone());
        rec.push(pred.to_string());
        rec.extend(distances(e, &model.centroids).iter().map(|d| d.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!("{}", args.out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<DriftlabError>(),
            Some(DriftlabError::InvalidConfig(_) | DriftlabError::InvalidArgument(_))
        )
    });
    if config {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train_cmd(a),
        Command::Detect(a) => detect(a),
        Command::Bench(a) => bench(a),
        Command::Ablate(a) => ablate(a),
        Command::Report(a) => report_cmd(a),
        Command::DumpEmbeddings(a) => dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
