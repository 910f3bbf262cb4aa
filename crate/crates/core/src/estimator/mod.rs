//! NEAT-MUSIC: alternating beam-squint-corrected DOA search and
//! minimum-eigenvector GPM calibration, plus the baselines it is compared
//! against.
//!
//! Work per iteration is dominated by the spectrum sweep,
//! `O(|grid| M N (N-K))` with [`SpectrumMethod::Direct`] or
//! `O(|grid| M N)` with [`SpectrumMethod::Trigonometric`], and by the `M`
//! GPM eigenproblems, `O(M N^3)`. The covariance eigendecompositions,
//! `O(M N^3)`, are done once.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array::{Combiner, GpmVector, SubcarrierGrid};
use crate::config::SystemConfig;
use crate::sim::ObservationSet;
use crate::{CMatrix, Error, Result};

mod covariance;
mod gpm;
mod peaks;
mod spectrum;

pub use covariance::{noise_subspace, sample_covariance, NoiseSubspace, SubspaceSplit};
pub use gpm::{estimate_gpm, gpm_objective, GpmSolve, GpmSolveMode};
pub use peaks::{find_peaks, peak_indices};
pub use spectrum::{
    corrected_forms, corrected_spectrum, corrected_spectrum_materialized, direction_grid,
    music_spectrum, Spectrum, SpectrumMethod,
};

use spectrum::FormKernel;

/// Which parameters the estimator corrects for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorMode<'a> {
    /// Squint correction and alternating GPM calibration.
    Full,
    /// GPM fixed to the given truth, no squint correction.
    KnownGpm(&'a [GpmVector]),
    /// Squint correction with `G = I`.
    KnownSquint,
    /// Classical MUSIC: `eta = 1`, `G = I`.
    PlainMusic,
}

impl EstimatorMode<'_> {
    pub fn tag(&self) -> ModeTag {
        match self {
            EstimatorMode::Full => ModeTag::Full,
            EstimatorMode::KnownGpm(_) => ModeTag::KnownGpm,
            EstimatorMode::KnownSquint => ModeTag::KnownSquint,
            EstimatorMode::PlainMusic => ModeTag::PlainMusic,
        }
    }
}

/// Data-free name of an [`EstimatorMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeTag {
    Full,
    KnownGpm,
    KnownSquint,
    PlainMusic,
}

impl ModeTag {
    pub const ALL: [ModeTag; 4] = [
        ModeTag::Full,
        ModeTag::KnownGpm,
        ModeTag::KnownSquint,
        ModeTag::PlainMusic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModeTag::Full => "full",
            ModeTag::KnownGpm => "known-gpm",
            ModeTag::KnownSquint => "known-squint",
            ModeTag::PlainMusic => "plain-music",
        }
    }
}

impl fmt::Display for ModeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModeTag::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NeatOptions {
    pub gpm_solve: GpmSolveMode,
    /// Parabolic sub-grid peak refinement.
    pub refine_peaks: bool,
    pub spectrum_method: SpectrumMethod,
    /// Keep the final spectrum (with per-subcarrier parts) in the result.
    pub keep_spectrum: bool,
}

/// Non-fatal numerical conditions met during one estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Diagnostic {
    /// Eigenvalues `K` and `K+1` of `R_m` nearly coincide.
    DegenerateSubspace { subcarrier: usize },
    /// The two smallest eigenvalues of the GPM objective nearly coincide.
    IllConditionedGpm { subcarrier: usize, iteration: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// Estimated spatial directions, ascending.
    pub theta_hat: Vec<f64>,
    /// GPM estimate per subcarrier (the fixed value for non-calibrating modes).
    pub gpm_hat: Vec<GpmVector>,
    pub iterations: usize,
    /// `sum_k |theta_k^l - theta_k^(l-1)|` from the second iteration on.
    pub eps_trace: Vec<f64>,
    pub converged: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub spectrum: Option<Spectrum>,
}

fn check_observations(obs: &ObservationSet, cfg: &SystemConfig, grid: &SubcarrierGrid, w: &Combiner) -> Result<()> {
    let (m, n, t) = (cfg.subcarriers, cfg.antennas, cfg.snapshots);
    if obs.y.len() != m || obs.y.iter().any(|y| y.shape() != (n, t)) {
        return Err(Error::DimensionMismatch(format!(
            "expected {m} observation matrices of {n}x{t}"
        )));
    }
    if grid.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "subcarrier grid has {} entries, config {m}",
            grid.len()
        )));
    }
    if w.antennas() != n {
        return Err(Error::DimensionMismatch(format!(
            "combiner has {} antennas, config {n}",
            w.antennas()
        )));
    }
    Ok(())
}

/// Runs the alternating estimator.
///
/// Starting from `G = I`, each iteration builds the corrected spectrum with
/// the current GPM, picks the `K` highest peaks and re-solves the GPM of
/// every subcarrier. It stops once the summed DOA change falls below
/// `cfg.eps_bar` or after `cfg.max_iters` iterations. Modes that do not
/// update the GPM are a fixed point after one pass and stop there.
pub fn neat_music(
    obs: &ObservationSet,
    cfg: &SystemConfig,
    grid: &SubcarrierGrid,
    combiner: &Combiner,
    mode: EstimatorMode<'_>,
    opts: &NeatOptions,
) -> Result<EstimationResult> {
    cfg.validate()?;
    check_observations(obs, cfg, grid, combiner)?;
    let (m_count, n, k) = (cfg.subcarriers, cfg.antennas, cfg.targets);

    let subspaces = NoiseSubspace::from_observations(&obs.y, k)?;
    let mut diagnostics: Vec<Diagnostic> = subspaces
        .degenerate
        .iter()
        .enumerate()
        .filter(|(_, d)| **d)
        .map(|(subcarrier, _)| Diagnostic::DegenerateSubspace { subcarrier })
        .collect();

    let eta: Vec<f64> = match mode {
        EstimatorMode::PlainMusic | EstimatorMode::KnownGpm(_) => vec![1.0; m_count],
        EstimatorMode::Full | EstimatorMode::KnownSquint => grid.eta.clone(),
    };
    let mut gpm: Vec<GpmVector> = match mode {
        EstimatorMode::KnownGpm(truth) => {
            if truth.len() != m_count || truth.iter().any(|g| g.len() != n) {
                return Err(Error::MissingKnownGpm);
            }
            truth.to_vec()
        }
        _ => (0..m_count).map(|m| GpmVector::ones(n, m)).collect(),
    };
    let calibrate = matches!(mode, EstimatorMode::Full);
    let max_iters = if calibrate { cfg.max_iters } else { 1 };

    let wu = subspaces.combined_bases(combiner.matrix());
    let need_projector = calibrate || opts.spectrum_method == SpectrumMethod::Trigonometric;
    let projectors: Vec<CMatrix> = if need_projector {
        wu.iter().map(|c| c * c.adjoint()).collect()
    } else {
        Vec::new()
    };
    let psi = direction_grid(cfg.grid_size);

    let mut prev: Option<Vec<f64>> = None;
    let mut eps_trace = Vec::new();
    let mut converged = !calibrate;
    let mut spectrum_out = None;
    let mut theta_hat = Vec::new();
    let mut iterations = 0;

    for iteration in 1..=max_iters {
        iterations = iteration;
        let forms: Vec<Vec<f64>> = (0..m_count)
            .map(|m| {
                FormKernel::new(
                    opts.spectrum_method,
                    gpm[m].gains.as_slice(),
                    &wu[m],
                    projectors.get(m),
                )
                .forms(eta[m], &psi)
            })
            .collect();
        let spectrum = spectrum::combine(forms, &psi, opts.keep_spectrum);
        theta_hat = find_peaks(&spectrum, k, opts.refine_peaks);
        if opts.keep_spectrum {
            spectrum_out = Some(spectrum);
        }

        if calibrate {
            for m in 0..m_count {
                let theta_m = gpm::objective_from_projector(&projectors[m], &theta_hat, eta[m]);
                let solve = match opts.gpm_solve {
                    GpmSolveMode::Direct => gpm::solve_objective(&theta_m, m),
                    GpmSolveMode::Residual => gpm::solve_residual(&theta_m, &gpm[m]),
                };
                if solve.ill_conditioned {
                    diagnostics.push(Diagnostic::IllConditionedGpm { subcarrier: m, iteration });
                }
                gpm[m] = solve.gpm;
            }
        }

        if let Some(p) = &prev {
            let eps: f64 = theta_hat.iter().zip(p).map(|(a, b)| (a - b).abs()).sum();
            eps_trace.push(eps);
            if eps < cfg.eps_bar {
                converged = true;
                break;
            }
        }
        prev = Some(theta_hat.clone());
    }

    Ok(EstimationResult {
        theta_hat,
        gpm_hat: gpm,
        iterations,
        eps_trace,
        converged,
        diagnostics,
        spectrum: spectrum_out,
    })
}
