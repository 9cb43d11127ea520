//! JSON-configured experiments with deterministic CSV/JSON output.
//!
//! Identical configurations produce identical bytes regardless of the
//! number of worker threads: every random stream is seeded from the
//! configuration and parallel results are collected in input order.

pub mod config;
pub mod emit;
pub mod run;

pub use config::{load_config, EnergyConfig, ExperimentConfig, OutputConfig, SolverConfig, SweepConfig, SweepFamily};
pub use emit::{format_real, write_atomic, Csv};
pub use run::{
    run_energy_decay, run_expanding, run_lyapunov, run_stationary, run_sweep, EnergyOutput, EnergySummary,
    ExpandingReport, LyapunovReport, StationaryReport, SweepOutput, SweepRow, ENERGY_COLUMNS, STATIONARY_COLUMNS,
    SWEEP_COLUMNS,
};
