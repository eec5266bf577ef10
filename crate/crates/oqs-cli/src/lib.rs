//! Configuration, presets and batch execution for the `oqs` binary.
//!
//! A run turns one `[experiment]` configuration into a CSV table plus two
//! sidecars: `<csv>.meta.txt` (audit, notes, runtime) and
//! `<csv>.resolved.conf` (every key with its resolved value; re-running it
//! reproduces the CSV byte for byte).

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;

pub use config::{Experiment, ExperimentConfig, ValidationError};
pub use output::{ResultTable, RunOutput};
pub use runner::{execute, plan, run_and_persist, run_text, Plan, RunError};

/// Cap the global rayon pool from `OQS_THREADS` (unset: rayon's default).
pub fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("OQS_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("OQS_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("OQS_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}
