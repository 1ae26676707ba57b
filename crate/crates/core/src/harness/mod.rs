//! Experiment configuration, orchestration and result persistence.
//!
//! A benchmark prepares one trained model per (seed, objective, data variant),
//! applies every drift setting to its test half, runs each detector on the
//! drifted stream and scores the outcome. Runs share nothing and are executed
//! in parallel; aggregation happens after all of them finish.

mod bench;
mod config;
mod pipeline;
mod report;

pub use bench::{
    ablation_grid, evaluate_units, objective_name, prepare_units, results_root, run_benchmark,
    run_experiment, summarize, write_summary_csv, AblationCell, AblationOutput, RunManifest, RunRecord,
    SummaryRow, Unit, ABLATION_R, ABLATION_W, SUMMARY_HEADER,
};
pub use config::{
    ConstrainedSetting, DatasetSource, DriftGrid, DriftSetting, ExperimentConfig, Preset,
};
pub use pipeline::{
    build_stream, label_stream, prepare_data, run_detectors, train_model, DetectorOutcome,
    DriftedStream, PreparedData, TrainedModel,
};
pub use report::{algorithm_name, load_run_records, rank_table, report, Grouping, ReportOutput};
