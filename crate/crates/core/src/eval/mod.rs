//! Accuracy metrics, latent informativeness and throughput measurement.

mod bench;
mod informativeness;
mod metrics;

pub use bench::{throughput_bench, write_bench_csv, write_bench_summary, BenchConfig, BenchReport, BenchRow};
pub use informativeness::{
    informativeness, median, threshold_accuracy, thresholds, Informativeness, RegressorConfig, LAYER_RANGE, MIN_EXAMPLES,
};
pub use metrics::nrmse;
