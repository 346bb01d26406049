//! Campaign orchestration and scoring: run a geometry, estimate every
//! epoch, and reduce the per-node Euclidean errors to RMSE, CDF and box
//! statistics.

mod compare;
mod metrics;
mod run;

pub use compare::{
    compare_runs, eval_dir, read_summary_rmse, ComparisonReport, EvaluatedRun, NodeComparison,
    Verdict, DECILES,
};
pub use metrics::{
    euclidean_error, quantile_sorted, summarize_poses, BoxStats, ErrorSummary, NodeSummary,
};
pub use run::{
    run_experiment, run_experiment_to_dir, summarize, write_summary_files, RunConfig, RunMeta,
    RunRecord, Transport, BOXSTATS_FILE, CALIBRATION_FILE, CDF_FILE, DEFAULT_DURATION,
    DEFAULT_RATE, GEOMETRY_FILE, MEAN_EXCLUDING_ORIGIN_ROW, MEAN_ROW, MEASUREMENTS_FILE,
    NOISE_FILE, POSES_FILE, RUN_FILE, SUMMARY_FILE, X_SERIES_FILE,
};
