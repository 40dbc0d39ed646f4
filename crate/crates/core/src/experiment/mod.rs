//! Config files, multi-seed runs, artifact writing and summary reports.

mod config;
mod report;
mod run;

pub use config::{BetaKind, ExperimentConfig, DEFAULT_OUTPUT_ROOT, OUTPUT_ROOT_VAR};
pub use report::{build_report, median, normalize, report_command, ModeSummary, Report, SUMMARY_FILE};
pub use run::{
    read_metrics, run_experiment, run_seeds, MetricsRow, RunMeta, RunOutcome, SeedFailure, TrajectoryLine, CONFIG_FILE,
    META_FILE, METRICS_FILE, METRICS_HEADER, TRAJECTORIES_FILE,
};
