//! Experiment orchestration: datasets, the end-to-end pipeline, ablations,
//! the tracker benchmark and report emission.

pub mod bench;
pub mod config;
pub mod data;
pub mod pipeline;
pub mod report;

pub use bench::{oracle_sweep, tracker_benchmark, BenchConfig, OracleSweep, TrackerBench};
pub use config::{CameraConfig, ChannelConfig, ExperimentConfig, ScenarioConfig, SCHEMA_VERSION};
pub use data::{generate_dataset, generate_sequence, Frame, Manifest, ScenarioWorld, Split};
pub use pipeline::{
    acceptance_failures, run_ablation, run_experiment, run_experiment_with, Ablation, AblationRow, Experiment, BeamMetrics, EndToEndMetrics, IdAblationRow, IdMetrics,
    MetricsReport, RunOutput,
};
pub use report::{emit_report, flatten_metrics};

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::Result;

/// Worker count from `BEAMSIGHT_THREADS`, else rayon's default.
pub fn worker_count() -> usize {
    std::env::var("BEAMSIGHT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(worker_count())
            .build()
            .expect("thread pool")
    })
}

/// Map `f` over `0..n` on the worker pool; results keep index order.
pub fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    pool().install(|| (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>())
}
