//! Benchmark problems, data ingestion, and experiment drivers for FSSD
//! goodness-of-fit tests.

pub mod bench;
pub mod config;
pub mod error;
pub mod ingest;
pub mod problems;
pub mod slope;
pub mod surface;

pub use bench::{
    run_benchmark, run_method, run_power_vs_j, run_runtime_scaling, BenchmarkOutput, BenchmarkRow, MethodConfig,
    RuntimeRow, TrialRecord,
};
pub use config::{Model, ModelConfig};
pub use error::{HarnessError, Result};
pub use ingest::ingest_csv;
pub use problems::{Method, Problem, ProblemParams, RunSpec};
pub use surface::{run_surface_scan, GridSpec, ScanSpec, Surface};
