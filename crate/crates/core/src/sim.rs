//! Ground-truth scenarios and synthesis of the stacked observations
//! `Y_m = W^H (H_m Pi_m H_m^T X_m + N_m)`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;

use crate::array::{build_combiner, sample_gpm, steering_at, subcarrier_grid, Combiner, GpmVector};
use crate::config::SystemConfig;
use crate::linalg::{cis, complex_normal};
use crate::{CMatrix, Error, Result};

/// Rejection attempts before [`sample_scenario`] gives up on separation.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Ground truth of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Spatial directions `sin(angle)`, sorted ascending.
    pub theta: Vec<f64>,
    /// Reflection coefficients, `M x K`.
    pub beta: CMatrix,
    /// One GPM vector per subcarrier.
    pub gpm: Vec<GpmVector>,
    pub combiner: Combiner,
    /// Receiver noise variance per antenna.
    pub sigma2: f64,
    pub snr_db: f64,
}

impl Scenario {
    pub fn targets(&self) -> usize {
        self.theta.len()
    }

    /// `H_m = [g_m * a(theta_k, eta_m)]_k`, an `N x K` matrix.
    pub fn channel(&self, subcarrier: usize, eta: f64) -> CMatrix {
        let gains = &self.gpm[subcarrier].gains;
        let n = gains.len();
        let mut h = CMatrix::zeros(n, self.theta.len());
        for (k, &theta) in self.theta.iter().enumerate() {
            let a = steering_at(eta * theta, n);
            h.set_column(k, &a.component_mul(gains));
        }
        h
    }

    pub fn check_against(&self, cfg: &SystemConfig) -> Result<()> {
        let (m, k, n) = (cfg.subcarriers, cfg.targets, cfg.antennas);
        let mismatch = |what: &str| Err(Error::DimensionMismatch(format!("scenario {what}")));
        if self.theta.len() != k {
            return mismatch(&format!("has {} targets, config {}", self.theta.len(), k));
        }
        if self.beta.shape() != (m, k) {
            return mismatch(&format!("beta is {:?}, expected ({m}, {k})", self.beta.shape()));
        }
        if self.gpm.len() != m || self.gpm.iter().any(|g| g.len() != n) {
            return mismatch("GPM does not match subcarriers x antennas");
        }
        if self.combiner.antennas() != n || self.combiner.rf_chains() != cfg.rf_chains {
            return mismatch("combiner does not match antennas / RF chains");
        }
        if let Some(&bad) = self.theta.iter().find(|t| !(t.abs() <= 1.0)) {
            return Err(Error::DirectionOutOfRange(bad));
        }
        Ok(())
    }
}

/// Stacked observations and the probing matrices that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    /// `M` matrices of size `N x T`.
    pub y: Vec<CMatrix>,
    /// `M` probing matrices of size `N x T`.
    pub x: Vec<CMatrix>,
}

/// Draws a trial: physical angles uniform on `[-pi/2, pi/2]` with pairwise
/// spatial separation of at least two grid steps, unit-modulus random-phase
/// reflection coefficients, per-subcarrier GPM and a fresh combiner.
pub fn sample_scenario<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    snr_db: f64,
    snr_g_db: f64,
    rng: &mut R,
) -> Result<Scenario> {
    cfg.validate()?;
    let k = cfg.targets;
    let min_sep = 2.0 * cfg.grid_step();
    let mut theta = Vec::with_capacity(k);
    let mut attempts = 0;
    while theta.len() < k {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::SeparationUnsatisfied {
                targets: k,
                min_separation: min_sep,
                attempts,
            });
        }
        attempts += 1;
        let angle: f64 = rng.random_range(-PI / 2.0..=PI / 2.0);
        let candidate = libm::sin(angle);
        if theta.iter().all(|t: &f64| (t - candidate).abs() >= min_sep) {
            theta.push(candidate);
        }
    }
    theta.sort_by(f64::total_cmp);

    let beta = CMatrix::from_fn(cfg.subcarriers, k, |_, _| cis(rng.random_range(-PI..PI)));
    let gpm = (0..cfg.subcarriers)
        .map(|m| sample_gpm(cfg.antennas, snr_g_db, m, rng))
        .collect();
    let combiner = build_combiner(cfg.antennas, cfg.rf_chains, cfg.combiner, rng)?;
    Ok(Scenario {
        theta,
        beta,
        gpm,
        combiner,
        sigma2: cfg.noise_variance(snr_db),
        snr_db,
    })
}

/// Probing matrices with i.i.d. `CN(0, P_r/(MN))` entries, so that
/// `E{X X^H} = (P_r T / (M N)) I`.
pub fn generate_probing<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<CMatrix> {
    let var = cfg.probing_variance();
    (0..cfg.subcarriers)
        .map(|_| CMatrix::from_fn(cfg.antennas, cfg.snapshots, |_, _| complex_normal(rng, var)))
        .collect()
}

/// Synthesises `Y_m` slot by slot. Slot `j` sees the common echo
/// `H_m Pi_m H_m^T X_m` plus its own noise draw, combined by `Wbar_j^H`;
/// only the `N_RF` noise rows that reach the active block are drawn.
pub fn simulate_echo<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    scen: &Scenario,
    probing: Vec<CMatrix>,
    rng: &mut R,
) -> Result<ObservationSet> {
    scen.check_against(cfg)?;
    if probing.len() != cfg.subcarriers
        || probing
            .iter()
            .any(|x| x.shape() != (cfg.antennas, cfg.snapshots))
    {
        return Err(Error::DimensionMismatch(format!(
            "expected {} probing matrices of {}x{}",
            cfg.subcarriers, cfg.antennas, cfg.snapshots
        )));
    }
    if !(scen.sigma2 >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise variance must be non-negative, got {}",
            scen.sigma2
        )));
    }
    let grid = subcarrier_grid(cfg);
    let (n_rf, t) = (cfg.rf_chains, cfg.snapshots);
    let w = &scen.combiner;
    let mut y = Vec::with_capacity(cfg.subcarriers);
    for (m, x) in probing.iter().enumerate() {
        let h = scen.channel(m, grid.eta[m]);
        let mut echoes = h.transpose() * x;
        for k in 0..scen.targets() {
            let b = scen.beta[(m, k)];
            echoes.row_mut(k).iter_mut().for_each(|v| *v *= b);
        }
        let signal = &h * echoes;
        let mut ym = CMatrix::zeros(cfg.antennas, t);
        for slot in 0..w.slots() {
            let rows = slot * n_rf;
            let mut block = signal.rows(rows, n_rf).into_owned();
            block.iter_mut().for_each(|v| *v += complex_normal(rng, scen.sigma2));
            let combined = w.block(slot).adjoint() * block;
            ym.rows_mut(rows, n_rf).copy_from(&combined);
        }
        y.push(ym);
    }
    Ok(ObservationSet { y, x: probing })
}

/// Gain `|a^H(theta, 1) a(theta_target, eta_m)|^2` of a squint-unaware
/// receiver, one row per subcarrier and one column per grid direction.
/// Row `m` peaks at the squinted direction `eta_m * theta_target`.
pub fn array_gain_profile(
    theta_target: f64,
    cfg: &SystemConfig,
    grid: &[f64],
) -> Result<DMatrix<f64>> {
    if !(theta_target.abs() <= 1.0) {
        return Err(Error::DirectionOutOfRange(theta_target));
    }
    if let Some(&bad) = grid.iter().find(|t| !(t.abs() <= 1.0)) {
        return Err(Error::DirectionOutOfRange(bad));
    }
    let sub = subcarrier_grid(cfg);
    let n = cfg.antennas;
    let nominal: Vec<_> = grid.iter().map(|&u| steering_at(u, n)).collect();
    let mut out = DMatrix::zeros(sub.len(), grid.len());
    for (m, &eta) in sub.eta.iter().enumerate() {
        let response = steering_at(eta * theta_target, n);
        for (i, a) in nominal.iter().enumerate() {
            out[(m, i)] = a.dotc(&response).norm_sqr();
        }
    }
    Ok(out)
}
