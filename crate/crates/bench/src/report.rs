//! Verbose single-trial run.

use std::path::Path;

use neat_core::{Diagnostic, ModeTag, NeatOptions, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::experiment::ExperimentSpec;
use crate::output::{write_json, write_spectrum_csv, ScenarioFile};
use crate::runner::{score, simulate_trial, trial_crb, trial_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: ModeTag,
    pub theta_hat: Vec<f64>,
    pub sq_err_deg: Vec<f64>,
    pub gpm_mse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub eps_trace: Vec<f64>,
    pub diagnostics: Vec<Diagnostic>,
    pub failure: Option<String>,
    /// Spectrum file of the last iteration, relative to the report.
    pub spectrum_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub trial_seed: u64,
    pub sweep_value: f64,
    pub trial: usize,
    pub config: SystemConfig,
    pub crb_deg2: Option<Vec<f64>>,
    pub scenario: ScenarioFile,
    pub modes: Vec<ModeReport>,
}

/// Runs every mode of `spec` on one trial, keeping spectra and convergence
/// traces. Writes `trial.json` and one `spectrum_<mode>.csv` per mode into
/// `dir`.
pub fn single_trial(spec: &ExperimentSpec, sweep_value: f64, trial: usize, dir: &Path) -> Result<TrialReport> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
    let data = simulate_trial(spec, sweep_value, trial)?;
    let grid = neat_core::subcarrier_grid(&data.config);
    let crb = spec.crb.then(|| trial_crb(&data, spec.crb_method)).flatten();
    let opts = NeatOptions {
        keep_spectrum: true,
        ..spec.estimator.clone()
    };
    let mut modes = Vec::new();
    for &mode in &spec.modes {
        let est_mode = match mode {
            ModeTag::Full => neat_core::EstimatorMode::Full,
            ModeTag::KnownGpm => neat_core::EstimatorMode::KnownGpm(&data.scenario.gpm),
            ModeTag::KnownSquint => neat_core::EstimatorMode::KnownSquint,
            ModeTag::PlainMusic => neat_core::EstimatorMode::PlainMusic,
        };
        let outcome = neat_core::neat_music(
            &data.observations,
            &data.config,
            &grid,
            &data.scenario.combiner,
            est_mode,
            &opts,
        );
        let (eps_trace, diagnostics, spectrum) = match &outcome {
            Ok(e) => (e.eps_trace.clone(), e.diagnostics.clone(), e.spectrum.clone()),
            Err(_) => (Vec::new(), Vec::new(), None),
        };
        let record = score(&data, sweep_value, trial, mode, spec.pairing, outcome, None);
        let spectrum_file = match spectrum {
            Some(s) => {
                let name = format!("spectrum_{mode}.csv");
                write_spectrum_csv(&dir.join(&name), &s)?;
                Some(name)
            }
            None => None,
        };
        modes.push(ModeReport {
            mode,
            theta_hat: record.theta_hat,
            sq_err_deg: record.sq_err_deg,
            gpm_mse: record.gpm_mse,
            iterations: record.iterations,
            converged: record.converged,
            eps_trace,
            diagnostics,
            failure: record.failure,
            spectrum_file,
        });
    }
    let report = TrialReport {
        seed: spec.seed,
        trial_seed: trial_seed(spec.seed, sweep_value, trial),
        sweep_value,
        trial,
        config: data.config.clone(),
        crb_deg2: crb,
        scenario: ScenarioFile::from(&data.scenario),
        modes,
    };
    write_json(&dir.join("trial.json"), &report)?;
    Ok(report)
}
