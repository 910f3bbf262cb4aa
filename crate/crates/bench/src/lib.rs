//! Monte-Carlo experiments over `neat-core`: sweep descriptions, the trial
//! runner, and the CSV / TOML / JSON files it reads and writes.

pub mod error;
pub mod experiment;
pub mod output;
pub mod report;
pub mod runner;

pub use error::{BenchError, Result};
pub use experiment::{ExperimentSpec, Sweep};
pub use output::{emit_sweep, read_rmse_csv, Manifest};
pub use report::single_trial;
pub use runner::{run_sweep, run_sweep_trials, run_trial, RmseRecord, TrialRecord};

/// Runs the sweep recorded in a manifest and writes its outputs into
/// `output_dir`, or the recorded directory when `None`.
pub fn rerun(manifest: &Manifest, output_dir: Option<&std::path::Path>) -> Result<std::path::PathBuf> {
    let mut spec = manifest.spec.clone();
    if let Some(dir) = output_dir {
        spec.output_dir = dir.to_path_buf();
    }
    let records = run_sweep(&spec)?;
    emit_sweep(&manifest.command, &spec, &records)
}
