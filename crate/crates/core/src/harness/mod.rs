//! Experiment harness: run configs, trace files, comparison sweeps and the
//! acceptance suite.

pub mod acceptance;
pub mod config;
pub mod experiment;
pub mod trace_io;

use std::path::PathBuf;

pub use config::{default_eta, parse_config, InitialPoint, RunConfig, TraceFileFormat};
pub use experiment::{
    compare_methods, method_matrix, prepare, run_and_write, run_experiment, SummaryRow,
};
pub use trace_io::{emit_trace, from_csv, from_json, read_trace, to_csv, to_json};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MLPF_OUT_DIR";

/// `--out` if given, else `$MLPF_OUT_DIR`, else `./runs`.
pub fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}
