//! Training loop, parameter sweeps and the iteration-time benchmark.

mod bench;
mod config;
mod sweep;
mod train;

pub use bench::{bench_throughput, write_throughput, ThroughputRow, MIN_BENCH_ITERATIONS, THROUGHPUT_COLUMNS};
pub use config::{apply_overrides, ObjectiveKind, RunConfig};
pub use sweep::{
    best_return, config_for, parse_values, relative_threshold, steps_to_threshold, summarize, sweep, sweep_with,
    write_summary, SummaryRow, SweepAxis, SweepOutput, SUMMARY_COLUMNS,
};
pub use train::{
    eval_seed_base, evaluate_params, initial_params, train, train_with, Resources, SeedRun, StepOutcome, StepTiming,
    TrainOutput, Trainer,
};
