//! Monte-Carlo trials and their aggregation.
//!
//! Every trial owns a ChaCha8 stream seeded with
//! `splitmix(splitmix(splitmix(seed) ^ value.to_bits()) ^ trial)`, where
//! `splitmix` is the SplitMix64 output function. The stream draws, in order,
//! the scenario ([`neat_core::sample_scenario`]), the probing matrices and
//! the receiver noise. The estimator modes are deterministic functions of
//! the resulting observations, so all modes of a trial see the same data.

use neat_core::metrics::{gpm_alignment_error, squared_errors_deg, Pairing};
use neat_core::{
    crb_fim_inverse, crb_closed_form, generate_probing, neat_music, sample_scenario, simulate_echo,
    subcarrier_grid, CrbMethod, CrbOptions, EstimationResult, EstimatorMode, ModeTag,
    ObservationSet, Scenario, SystemConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiment::ExperimentSpec;

/// Squared error above which a trial counts as a catastrophic failure
/// (10 degrees).
pub const CATASTROPHIC_DEG2: f64 = 100.0;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the random stream of one trial.
pub fn trial_seed(master: u64, sweep_value: f64, trial: usize) -> u64 {
    splitmix(splitmix(splitmix(master) ^ sweep_value.to_bits()) ^ trial as u64)
}

/// Ground truth and observations of one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub config: SystemConfig,
    pub scenario: Scenario,
    pub observations: ObservationSet,
}

pub fn simulate_trial(spec: &ExperimentSpec, sweep_value: f64, trial: usize) -> Result<TrialData> {
    let (config, snr_db) = spec.point(sweep_value);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(spec.seed, sweep_value, trial));
    let scenario = sample_scenario(&config, snr_db, spec.snr_g_db, &mut rng)?;
    let probing = generate_probing(&config, &mut rng);
    let observations = simulate_echo(&config, &scenario, probing, &mut rng)?;
    Ok(TrialData {
        config,
        scenario,
        observations,
    })
}

/// Outcome of one estimator mode on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_value: f64,
    pub mode: ModeTag,
    pub trial: usize,
    pub theta_true: Vec<f64>,
    pub theta_hat: Vec<f64>,
    /// Per-target squared error in degrees^2.
    pub sq_err_deg: Vec<f64>,
    /// Mean over subcarriers of the gauge-aligned GPM error.
    pub gpm_mse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostics: usize,
    /// Per-target bound in degrees^2.
    pub crb_deg2: Option<Vec<f64>>,
    /// Set when the estimator returned an error; the trial then carries no
    /// estimates.
    pub failure: Option<String>,
}

impl TrialRecord {
    pub fn is_catastrophic(&self) -> bool {
        self.sq_err_deg.iter().any(|e| *e > CATASTROPHIC_DEG2)
    }
}

fn estimate(data: &TrialData, spec: &ExperimentSpec, mode: ModeTag) -> neat_core::Result<EstimationResult> {
    let grid = subcarrier_grid(&data.config);
    let mode = match mode {
        ModeTag::Full => EstimatorMode::Full,
        ModeTag::KnownGpm => EstimatorMode::KnownGpm(&data.scenario.gpm),
        ModeTag::KnownSquint => EstimatorMode::KnownSquint,
        ModeTag::PlainMusic => EstimatorMode::PlainMusic,
    };
    neat_music(
        &data.observations,
        &data.config,
        &grid,
        &data.scenario.combiner,
        mode,
        &spec.estimator,
    )
}

/// Bound of one trial in degrees^2, `None` when it cannot be evaluated.
pub fn trial_crb(data: &TrialData, method: CrbMethod) -> Option<Vec<f64>> {
    let grid = subcarrier_grid(&data.config);
    let opts = CrbOptions::default();
    let result = match method {
        CrbMethod::ClosedForm => crb_closed_form(&data.scenario, &data.config, &grid, &opts),
        CrbMethod::FimInverse => crb_fim_inverse(&data.scenario, &data.config, &grid, &opts),
    };
    result.ok().map(|r| r.theta_deg2(&data.scenario.theta))
}

/// Scores an estimate against the truth of `data`.
pub fn score(
    data: &TrialData,
    sweep_value: f64,
    trial: usize,
    mode: ModeTag,
    pairing: Pairing,
    outcome: neat_core::Result<EstimationResult>,
    crb_deg2: Option<Vec<f64>>,
) -> TrialRecord {
    let truth = &data.scenario.theta;
    let mut record = TrialRecord {
        sweep_value,
        mode,
        trial,
        theta_true: truth.clone(),
        theta_hat: Vec::new(),
        sq_err_deg: Vec::new(),
        gpm_mse: 0.0,
        iterations: 0,
        converged: false,
        diagnostics: 0,
        crb_deg2,
        failure: None,
    };
    match outcome {
        Ok(est) => {
            record.sq_err_deg = squared_errors_deg(&est.theta_hat, truth, pairing);
            record.gpm_mse = est
                .gpm_hat
                .iter()
                .zip(&data.scenario.gpm)
                .map(|(e, t)| gpm_alignment_error(e, t))
                .sum::<f64>()
                / data.scenario.gpm.len() as f64;
            record.theta_hat = est.theta_hat;
            record.iterations = est.iterations;
            record.converged = est.converged;
            record.diagnostics = est.diagnostics.len();
        }
        Err(e) => record.failure = Some(e.to_string()),
    }
    record
}

/// All requested modes on one trial.
fn run_unit(spec: &ExperimentSpec, sweep_value: f64, trial: usize) -> Vec<TrialRecord> {
    let data = match simulate_trial(spec, sweep_value, trial) {
        Ok(d) => d,
        Err(e) => {
            return spec
                .modes
                .iter()
                .map(|&mode| TrialRecord {
                    sweep_value,
                    mode,
                    trial,
                    theta_true: Vec::new(),
                    theta_hat: Vec::new(),
                    sq_err_deg: Vec::new(),
                    gpm_mse: 0.0,
                    iterations: 0,
                    converged: false,
                    diagnostics: 0,
                    crb_deg2: None,
                    failure: Some(e.to_string()),
                })
                .collect()
        }
    };
    let crb = spec.crb.then(|| trial_crb(&data, spec.crb_method)).flatten();
    spec.modes
        .iter()
        .map(|&mode| {
            let outcome = estimate(&data, spec, mode);
            score(&data, sweep_value, trial, mode, spec.pairing, outcome, crb.clone())
        })
        .collect()
}

/// One mode on one trial.
pub fn run_trial(spec: &ExperimentSpec, sweep_value: f64, mode: ModeTag, trial: usize) -> Result<TrialRecord> {
    spec.validate()?;
    let data = simulate_trial(spec, sweep_value, trial)?;
    let crb = spec.crb.then(|| trial_crb(&data, spec.crb_method)).flatten();
    let outcome = estimate(&data, spec, mode);
    Ok(score(&data, sweep_value, trial, mode, spec.pairing, outcome, crb))
}

/// Every trial of the sweep, ordered by sweep value, trial and mode.
pub fn run_sweep_trials(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let units: Vec<(f64, usize)> = spec
        .sweep
        .values()
        .iter()
        .flat_map(|&v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let nested: Vec<Vec<TrialRecord>> = units
        .par_iter()
        .map(|&(v, t)| run_unit(spec, v, t))
        .collect();
    Ok(nested.into_iter().flatten().collect())
}

/// One row of the sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRecord {
    pub axis: String,
    pub sweep_value: f64,
    pub mode: ModeTag,
    /// `sqrt(sum of squared errors / (trials * K))`, degrees.
    pub rmse_theta_deg: f64,
    /// Root of the mean gauge-aligned GPM error.
    pub rmse_gpm: f64,
    pub mean_iterations: f64,
    pub convergence_rate: f64,
    /// Root of the mean per-target bound, degrees.
    pub crb_theta_deg: Option<f64>,
    /// Trials entering the RMSE.
    pub trials: usize,
    pub failed_trials: usize,
    pub catastrophic_trials: usize,
}

/// Aggregates the trials of one sweep point and mode. With `trim`,
/// catastrophic trials are left out of the error and iteration statistics.
pub fn aggregate(axis: &str, sweep_value: f64, mode: ModeTag, trials: &[TrialRecord], trim: bool) -> RmseRecord {
    let failed = trials.iter().filter(|t| t.failure.is_some()).count();
    let catastrophic = trials.iter().filter(|t| t.is_catastrophic()).count();
    let used: Vec<&TrialRecord> = trials
        .iter()
        .filter(|t| t.failure.is_none() && !(trim && t.is_catastrophic()))
        .collect();
    let n = used.len();
    let (mut sq, mut count, mut gpm, mut iters, mut conv) = (0.0, 0usize, 0.0, 0usize, 0usize);
    for t in &used {
        sq += t.sq_err_deg.iter().sum::<f64>();
        count += t.sq_err_deg.len();
        gpm += t.gpm_mse;
        iters += t.iterations;
        conv += t.converged as usize;
    }
    let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
    let bounds: Vec<f64> = trials
        .iter()
        .filter_map(|t| t.crb_deg2.as_ref())
        .flatten()
        .copied()
        .collect();
    RmseRecord {
        axis: axis.to_string(),
        sweep_value,
        mode,
        rmse_theta_deg: ratio(sq, count).sqrt(),
        rmse_gpm: ratio(gpm, n).sqrt(),
        mean_iterations: ratio(iters as f64, n),
        convergence_rate: ratio(conv as f64, n),
        crb_theta_deg: (!bounds.is_empty()).then(|| ratio(bounds.iter().sum(), bounds.len()).sqrt()),
        trials: n,
        failed_trials: failed,
        catastrophic_trials: catastrophic,
    }
}

/// One record per sweep value and mode, in spec order.
pub fn summarise(spec: &ExperimentSpec, trials: &[TrialRecord]) -> Vec<RmseRecord> {
    let axis = spec.sweep.axis_name();
    let mut out = Vec::new();
    for &value in spec.sweep.values() {
        for &mode in &spec.modes {
            let subset: Vec<TrialRecord> = trials
                .iter()
                .filter(|t| t.sweep_value == value && t.mode == mode)
                .cloned()
                .collect();
            out.push(aggregate(axis, value, mode, &subset, spec.trim_catastrophic));
        }
    }
    out
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<RmseRecord>> {
    let trials = run_sweep_trials(spec)?;
    Ok(summarise(spec, &trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(errs: &[f64], iterations: usize, converged: bool) -> TrialRecord {
        TrialRecord {
            sweep_value: 0.0,
            mode: ModeTag::Full,
            trial: 0,
            theta_true: vec![0.0; errs.len()],
            theta_hat: vec![0.0; errs.len()],
            sq_err_deg: errs.to_vec(),
            gpm_mse: 0.04,
            iterations,
            converged,
            diagnostics: 0,
            crb_deg2: Some(vec![0.01; errs.len()]),
            failure: None,
        }
    }

    #[test]
    fn aggregation_matches_hand_accumulation() {
        let trials = [
            record(&[0.25, 1.0], 3, true),
            record(&[4.0, 0.0], 5, true),
            record(&[0.09, 0.16], 20, false),
        ];
        let mut acc = 0.0;
        for t in &trials {
            for e in &t.sq_err_deg {
                acc += e;
            }
        }
        let want = (acc / 6.0f64).sqrt();
        let r = aggregate("snr-db", 0.0, ModeTag::Full, &trials, false);
        assert_eq!(r.rmse_theta_deg, want);
        assert_eq!(r.mean_iterations, 28.0 / 3.0);
        assert!((r.convergence_rate - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.rmse_gpm - 0.2).abs() < 1e-15);
        assert!((r.crb_theta_deg.unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(r.trials, 3);
    }

    #[test]
    fn single_trial_rmse_is_its_rms_error() {
        let t = record(&[0.5, 1.5], 1, true);
        let r = aggregate("snr-db", 0.0, ModeTag::Full, std::slice::from_ref(&t), false);
        assert_eq!(r.rmse_theta_deg, ((0.5 + 1.5) / 2.0f64).sqrt());
    }

    #[test]
    fn trimming_drops_catastrophic_trials() {
        let trials = [record(&[0.01, 0.04], 2, true), record(&[400.0, 0.0], 2, true)];
        let kept = aggregate("snr-db", 0.0, ModeTag::Full, &trials, false);
        let trimmed = aggregate("snr-db", 0.0, ModeTag::Full, &trials, true);
        assert_eq!(kept.catastrophic_trials, 1);
        assert_eq!(kept.trials, 2);
        assert_eq!(trimmed.trials, 1);
        assert!(trimmed.rmse_theta_deg < kept.rmse_theta_deg);
    }

    #[test]
    fn failures_are_counted_not_averaged() {
        let mut bad = record(&[], 0, false);
        bad.failure = Some("boom".into());
        let trials = [record(&[1.0, 1.0], 2, true), bad];
        let r = aggregate("snr-db", 0.0, ModeTag::Full, &trials, false);
        assert_eq!(r.failed_trials, 1);
        assert_eq!(r.trials, 1);
        assert_eq!(r.rmse_theta_deg, 1.0);
    }

    #[test]
    fn seeds_depend_on_every_input() {
        let s = trial_seed(7, 10.0, 3);
        assert_eq!(s, trial_seed(7, 10.0, 3));
        assert_ne!(s, trial_seed(8, 10.0, 3));
        assert_ne!(s, trial_seed(7, 10.5, 3));
        assert_ne!(s, trial_seed(7, 10.0, 4));
        // pinned so that the derivation stays stable across releases
        assert_eq!(splitmix(0), 0xe220_a839_7b1d_cdaf);
    }
}
