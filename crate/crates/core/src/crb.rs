//! Cramér-Rao bounds for the joint DOA / beam-squint / GPM model.
//!
//! The unknowns are `psi = [theta_1..theta_K, Delta_m(theta_k), g_1..g_M]`
//! with `Delta_m(theta_k) = (1 - eta_m) theta_k`. The covariance of
//! subcarrier `m` is modelled as
//!
//! `R_m = D_m S_m D_m^H + (sigma^2 / N) I`, `D_m = W^H H_m`,
//! `S_m = Pi_m H_m^T E{X X^H}/T H_m^* Pi_m^H`.
//!
//! Two bounds are provided. [`crb_fim_inverse`] assembles the
//! Slepian-Bangs Fisher information over real parameters (complex gains
//! split into real and imaginary parts) and takes its pseudo-inverse.
//! [`crb_closed_form`] evaluates the per-subcarrier closed form
//! `(sigma_n^2 / 2T) sum_m 1 / Tr{K_m Xi_m}` with `K_m = S^H D^H R^-1 D S`
//! and `Xi_m = dH^H W (I - D D^+) W^H dH`. The two are not expected to agree:
//! the closed form adds per-subcarrier bounds instead of informations and
//! ignores parameter coupling.
//!
//! Bounds on `theta` are in squared spatial units; [`CrbResult::theta_deg2`]
//! converts to squared physical degrees.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::array::{steering_at, SubcarrierGrid};
use crate::config::SystemConfig;
use crate::linalg::{complement_projector, hermitian_eigen_desc};
use crate::sim::Scenario;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Rank tolerance of `D_m`, relative to its largest singular value.
const RANK_TOL: f64 = 1e-10;
/// Eigenvalues of the FIM below this fraction of the largest are dropped in
/// the pseudo-inverse.
const PINV_TOL: f64 = 1e-10;
/// Dense FIM assembly refuses more real parameters than this.
pub const MAX_FIM_PARAMS: usize = 4096;

/// The unknown vector `psi` of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownVector {
    pub theta: Vec<f64>,
    /// `M x K` squint offsets `(1 - eta_m) theta_k`.
    pub delta: DMatrix<f64>,
    /// `M x N` complex gains.
    pub g: CMatrix,
}

impl UnknownVector {
    pub fn from_scenario(scen: &Scenario, grid: &SubcarrierGrid) -> Self {
        let m = grid.len();
        let k = scen.targets();
        let n = scen.gpm.first().map_or(0, |g| g.len());
        Self {
            theta: scen.theta.clone(),
            delta: DMatrix::from_fn(m, k, |m, k| (1.0 - grid.eta[m]) * scen.theta[k]),
            g: CMatrix::from_fn(m, n, |m, i| scen.gpm[m].gains[i]),
        }
    }

    /// `Q = K + M K + M N`.
    pub fn dimension(&self) -> usize {
        self.theta.len() + self.delta.len() + self.g.len()
    }
}

/// How the derivatives of `[h_k,m]_n = g_n exp(j pi (n-1) eta_m theta_k)/sqrt(N)`
/// are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeForm {
    /// Exact derivatives (checked by finite differences):
    /// `d/dtheta = j pi (n-1) eta h_n`,
    /// `d/dDelta = j pi (n-1) eta/(1-eta) h_n` (the phase written as
    /// `eta/(1-eta) Delta`), `d/dg_n = a_n`.
    #[default]
    Consistent,
    /// Variant with an extra `g_n` factor on both direction
    /// derivatives and an extra `exp(j pi (n-1) eta theta)` on the squint
    /// derivative. Expressed per spatial unit.
    Literal,
}

/// Derivatives of `h_{k,m}`; the GPM one is the diagonal generator
/// `d[h]_n / d g_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringDerivatives {
    pub d_theta: CVector,
    /// `None` when `eta_m = 1`, where the squint derivative is singular.
    pub d_delta: Option<CVector>,
    pub d_gpm: CVector,
}

/// Derivatives of the `k`-th steering column at subcarrier `m`.
pub fn steering_derivatives(
    k: usize,
    m: usize,
    scen: &Scenario,
    grid: &SubcarrierGrid,
    form: DerivativeForm,
) -> Result<SteeringDerivatives> {
    if k >= scen.targets() || m >= grid.len() || m >= scen.gpm.len() {
        return Err(Error::DimensionMismatch(format!(
            "target {k} / subcarrier {m} out of range"
        )));
    }
    let eta = grid.eta[m];
    let theta = scen.theta[k];
    let g = &scen.gpm[m].gains;
    let n = g.len();
    let a = steering_at(eta * theta, n);
    let h = a.component_mul(g);
    let j = C64::new(0.0, 1.0);
    let ramp = |n: usize| j * PI * n as f64;
    let d_theta = CVector::from_fn(n, |i, _| {
        let base = ramp(i) * eta * h[i];
        match form {
            DerivativeForm::Consistent => base,
            DerivativeForm::Literal => base * g[i],
        }
    });
    let d_delta = (eta != 1.0).then(|| {
        let ratio = eta / (1.0 - eta);
        CVector::from_fn(n, |i, _| {
            let base = ramp(i) * ratio * h[i];
            match form {
                DerivativeForm::Consistent => base,
                DerivativeForm::Literal => base * g[i] * a[i] * libm::sqrt(n as f64),
            }
        })
    });
    Ok(SteeringDerivatives { d_theta, d_delta, d_gpm: a })
}

/// Probing covariance used in `S_m`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ProbingModel<'a> {
    /// `E{X X^H}/T = P_r/(M N) I`.
    #[default]
    Expected,
    /// Sample covariance `X_m X_m^H / T` of the given probing matrices.
    Sample(&'a [CMatrix]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbOptions<'a> {
    pub form: DerivativeForm,
    /// Treat the squint offsets as unknown (subcarriers with `eta = 1` are
    /// always excluded).
    pub include_delta: bool,
    /// Treat the GPM as unknown.
    pub include_gpm: bool,
    pub probing: ProbingModel<'a>,
}

impl Default for CrbOptions<'_> {
    fn default() -> Self {
        Self {
            form: DerivativeForm::Consistent,
            include_delta: true,
            include_gpm: true,
            probing: ProbingModel::Expected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrbMethod {
    ClosedForm,
    FimInverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbResult {
    pub method: CrbMethod,
    /// Bound on each `theta_k`, squared spatial units.
    pub crb_theta: Vec<f64>,
    /// Closed form: bound on every entry of `psi` in its literal ordering
    /// (`Q = K + M'K + MN`, `M'` the subcarriers with `eta != 1`).
    pub diagonal: Option<Vec<f64>>,
    /// FIM pseudo-inverse over the real parameterisation.
    pub full: Option<DMatrix<f64>>,
    /// Some `D_m` was rank deficient at the `1e-10` tolerance.
    pub rank_deficient: bool,
}

impl CrbResult {
    /// Bounds in squared degrees of the physical angle `asin(theta)`,
    /// i.e. `crb / cos^2 * (180/pi)^2`.
    pub fn theta_deg2(&self, theta: &[f64]) -> Vec<f64> {
        let r2d = 180.0 / PI;
        self.crb_theta
            .iter()
            .zip(theta)
            .map(|(c, t)| c / (1.0 - t * t) * r2d * r2d)
            .collect()
    }
}

/// Everything the bounds need about one subcarrier.
struct SubcarrierModel {
    h: CMatrix,
    d: CMatrix,
    /// Probing covariance per snapshot, `N x N`.
    rx: CMatrix,
    s: CMatrix,
    r_inv: CMatrix,
}

fn check(scen: &Scenario, cfg: &SystemConfig, grid: &SubcarrierGrid) -> Result<()> {
    scen.check_against(cfg)?;
    if grid.len() != cfg.subcarriers {
        return Err(Error::DimensionMismatch("subcarrier grid does not match config".into()));
    }
    Ok(())
}

fn subcarrier_model(
    m: usize,
    scen: &Scenario,
    cfg: &SystemConfig,
    grid: &SubcarrierGrid,
    probing: ProbingModel<'_>,
) -> Result<SubcarrierModel> {
    let n = cfg.antennas;
    let h = scen.channel(m, grid.eta[m]);
    let d = scen.combiner.matrix().adjoint() * &h;
    let rx = match probing {
        ProbingModel::Expected => CMatrix::identity(n, n).scale(cfg.probing_variance()),
        ProbingModel::Sample(x) => {
            let xm = x.get(m).ok_or_else(|| {
                Error::DimensionMismatch(format!("no probing matrix for subcarrier {m}"))
            })?;
            if xm.nrows() != n {
                return Err(Error::DimensionMismatch("probing matrix rows".into()));
            }
            (xm * xm.adjoint()).unscale(xm.ncols() as f64)
        }
    };
    let pi = CMatrix::from_diagonal(&DVector::from_fn(scen.targets(), |k, _| scen.beta[(m, k)]));
    let s = &pi * h.transpose() * &rx * h.map(|v| v.conj()) * pi.adjoint();
    let noise = scen.sigma2 / n as f64;
    if !(noise > 0.0) {
        return Err(Error::SingularCovariance { subcarrier: m });
    }
    let r = &d * &s * d.adjoint() + CMatrix::identity(n, n).scale(noise);
    let r_inv = r
        .cholesky()
        .ok_or(Error::SingularCovariance { subcarrier: m })?
        .inverse();
    Ok(SubcarrierModel { h, d, rx, s, r_inv })
}

/// Real parameter layout of the Fisher information.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub targets: usize,
    /// Subcarriers whose squint offsets are parameters.
    pub delta_subcarriers: Vec<usize>,
    /// Offset of the first GPM parameter, if the GPM is unknown.
    pub gpm_offset: Option<usize>,
    pub antennas: usize,
    pub len: usize,
}

impl ParamLayout {
    fn new(cfg: &SystemConfig, grid: &SubcarrierGrid, opts: &CrbOptions<'_>) -> Self {
        let k = cfg.targets;
        let delta_subcarriers: Vec<usize> = if opts.include_delta {
            (0..grid.len()).filter(|&m| grid.eta[m] != 1.0).collect()
        } else {
            Vec::new()
        };
        let after_delta = k + delta_subcarriers.len() * k;
        let gpm_offset = opts.include_gpm.then_some(after_delta);
        let len = after_delta + if opts.include_gpm { 2 * cfg.subcarriers * cfg.antennas } else { 0 };
        Self {
            targets: k,
            delta_subcarriers,
            gpm_offset,
            antennas: cfg.antennas,
            len,
        }
    }

    /// Index of `Delta_m(theta_k)`.
    pub fn delta_index(&self, m: usize, k: usize) -> Option<usize> {
        let pos = self.delta_subcarriers.iter().position(|&s| s == m)?;
        Some(self.targets + pos * self.targets + k)
    }

    /// Index of `Re g_{n,m}`; `Im g_{n,m}` follows `N` places later.
    pub fn gpm_index(&self, m: usize, n: usize) -> Option<usize> {
        self.gpm_offset.map(|o| o + 2 * m * self.antennas + n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherInformation {
    pub matrix: DMatrix<f64>,
    pub layout: ParamLayout,
}

/// `dH_m` for every local real parameter of subcarrier `m`, with the global
/// index of each.
fn local_derivatives(
    m: usize,
    scen: &Scenario,
    grid: &SubcarrierGrid,
    layout: &ParamLayout,
    form: DerivativeForm,
) -> Result<Vec<(usize, CMatrix)>> {
    let k_count = scen.targets();
    let n = layout.antennas;
    let mut out = Vec::new();
    let derivs: Vec<SteeringDerivatives> = (0..k_count)
        .map(|k| steering_derivatives(k, m, scen, grid, form))
        .collect::<Result<_>>()?;
    for (k, dv) in derivs.iter().enumerate() {
        let mut dh = CMatrix::zeros(n, k_count);
        dh.set_column(k, &dv.d_theta);
        out.push((k, dh));
    }
    for (k, dv) in derivs.iter().enumerate() {
        if let (Some(idx), Some(dd)) = (layout.delta_index(m, k), &dv.d_delta) {
            let mut dh = CMatrix::zeros(n, k_count);
            dh.set_column(k, dd);
            out.push((idx, dh));
        }
    }
    if layout.gpm_offset.is_some() {
        let j = C64::new(0.0, 1.0);
        for (part, factor) in [(0, C64::new(1.0, 0.0)), (n, j)] {
            for i in 0..n {
                let mut dh = CMatrix::zeros(n, k_count);
                for (k, dv) in derivs.iter().enumerate() {
                    dh[(i, k)] = dv.d_gpm[i] * factor;
                }
                let idx = layout.gpm_index(m, i).unwrap() + part;
                out.push((idx, dh));
            }
        }
    }
    Ok(out)
}

/// Slepian-Bangs Fisher information
/// `FIM_ij = T sum_m Re Tr{R_m^-1 dR_m/dpsi_i R_m^-1 dR_m/dpsi_j}`.
pub fn fisher_information(
    scen: &Scenario,
    cfg: &SystemConfig,
    grid: &SubcarrierGrid,
    opts: &CrbOptions<'_>,
) -> Result<FisherInformation> {
    check(scen, cfg, grid)?;
    let layout = ParamLayout::new(cfg, grid, opts);
    if layout.len > MAX_FIM_PARAMS {
        return Err(Error::FimTooLarge(layout.len));
    }
    let w_h = scen.combiner.matrix().adjoint();
    let mut fim = DMatrix::<f64>::zeros(layout.len, layout.len);
    for m in 0..cfg.subcarriers {
        let model = subcarrier_model(m, scen, cfg, grid, opts.probing)?;
        let pi = CMatrix::from_diagonal(&DVector::from_fn(scen.targets(), |k, _| scen.beta[(m, k)]));
        let h_conj = model.h.map(|v| v.conj());
        let d_s = &model.d * &model.s;
        let locals = local_derivatives(m, scen, grid, &layout, opts.form)?;
        let mut products: Vec<(usize, CMatrix)> = Vec::with_capacity(locals.len());
        for (idx, dh) in locals {
            let dd = &w_h * &dh;
            let ds = &pi
                * (dh.transpose() * &model.rx * &h_conj
                    + model.h.transpose() * &model.rx * dh.map(|v| v.conj()))
                * pi.adjoint();
            let dr = &dd * model.s.adjoint() * model.d.adjoint()
                + &model.d * ds * model.d.adjoint()
                + &d_s * dd.adjoint();
            products.push((idx, &model.r_inv * dr));
        }
        let t = cfg.snapshots as f64;
        for (a, (ia, pa)) in products.iter().enumerate() {
            let pa_t = pa.transpose();
            for (ib, pb) in products.iter().skip(a).map(|(i, p)| (*i, p)) {
                // Tr(A B) = sum_ij A_ij B_ji
                let tr: f64 = pa_t.iter().zip(pb.iter()).map(|(x, y)| (x * y).re).sum();
                fim[(*ia, ib)] += t * tr;
                if *ia != ib {
                    fim[(ib, *ia)] += t * tr;
                }
            }
        }
    }
    Ok(FisherInformation { matrix: fim, layout })
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix, dropping
/// eigenvalues below `PINV_TOL * lambda_max`.
fn symmetric_pinv(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = m.nrows();
    let c = CMatrix::from_fn(n, n, |i, j| C64::new(0.5 * (m[(i, j)] + m[(j, i)]), 0.0));
    let (vals, vecs) = hermitian_eigen_desc(&c);
    let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let mut out = DMatrix::<f64>::zeros(n, n);
    let mut deficient = false;
    for (i, &l) in vals.iter().enumerate() {
        if l > PINV_TOL * lmax && l > 0.0 {
            let v = vecs.column(i);
            for r in 0..n {
                for s in 0..n {
                    out[(r, s)] += (v[r] * v[s].conj()).re / l;
                }
            }
        } else {
            deficient = true;
        }
    }
    (out, deficient)
}

/// DOA bound from the pseudo-inverse of the assembled FIM.
pub fn crb_fim_inverse(
    scen: &Scenario,
    cfg: &SystemConfig,
    grid: &SubcarrierGrid,
    opts: &CrbOptions<'_>,
) -> Result<CrbResult> {
    let fim = fisher_information(scen, cfg, grid, opts)?;
    let (pinv, deficient) = symmetric_pinv(&fim.matrix);
    Ok(CrbResult {
        method: CrbMethod::FimInverse,
        crb_theta: (0..cfg.targets).map(|k| pinv[(k, k)]).collect(),
        diagonal: None,
        full: Some(pinv),
        rank_deficient: deficient,
    })
}

/// Per-subcarrier closed form. Only `opts.form` and `opts.probing` are read.
pub fn crb_closed_form(
    scen: &Scenario,
    cfg: &SystemConfig,
    grid: &SubcarrierGrid,
    opts: &CrbOptions<'_>,
) -> Result<CrbResult> {
    check(scen, cfg, grid)?;
    let (k_count, n) = (cfg.targets, cfg.antennas);
    let w = scen.combiner.matrix();
    let w_h = w.adjoint();
    let prefactor = scen.sigma2 / n as f64 / (2.0 * cfg.snapshots as f64);
    let mut theta_sum = vec![0.0; k_count];
    let mut delta = Vec::new();
    let mut gains = Vec::new();
    let mut rank_deficient = false;
    for m in 0..cfg.subcarriers {
        let model = subcarrier_model(m, scen, cfg, grid, opts.probing)?;
        let (proj, rank) = complement_projector(&model.d, RANK_TOL);
        rank_deficient |= rank < k_count;
        let kmat = model.s.adjoint() * model.d.adjoint() * &model.r_inv * &model.d * &model.s;
        let proj_w = w * proj * &w_h;
        let trace = |dh: &CMatrix| -> f64 {
            let xi = dh.adjoint() * &proj_w * dh;
            (&kmat * xi).trace().re
        };
        let derivs: Vec<SteeringDerivatives> = (0..k_count)
            .map(|k| steering_derivatives(k, m, scen, grid, opts.form))
            .collect::<Result<_>>()?;
        let column = |k: usize, v: &CVector| {
            let mut dh = CMatrix::zeros(n, k_count);
            dh.set_column(k, v);
            dh
        };
        for (k, dv) in derivs.iter().enumerate() {
            theta_sum[k] += prefactor / trace(&column(k, &dv.d_theta));
        }
        for (k, dv) in derivs.iter().enumerate() {
            if let Some(dd) = &dv.d_delta {
                delta.push(prefactor / trace(&column(k, dd)));
            }
        }
        for i in 0..n {
            let mut dh = CMatrix::zeros(n, k_count);
            for (k, dv) in derivs.iter().enumerate() {
                dh[(i, k)] = dv.d_gpm[i];
            }
            gains.push(prefactor / trace(&dh));
        }
    }
    let mut diagonal = theta_sum.clone();
    diagonal.extend(delta);
    diagonal.extend(gains);
    Ok(CrbResult {
        method: CrbMethod::ClosedForm,
        crb_theta: theta_sum,
        diagonal: Some(diagonal),
        full: None,
        rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::subcarrier_grid;
    use crate::sim::sample_scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> SystemConfig {
        SystemConfig {
            subcarriers: 3,
            antennas: 8,
            rf_chains: 4,
            snapshots: 64,
            targets: 2,
            power: crate::config::unit_rho_power(3, 8),
            grid_size: 1024,
            ..SystemConfig::desk_defaults()
        }
    }

    #[test]
    fn unknown_vector_dimension() {
        let c = cfg();
        let scen = sample_scenario(&c, 10.0, 10.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let grid = subcarrier_grid(&c);
        let psi = UnknownVector::from_scenario(&scen, &grid);
        assert_eq!(psi.dimension(), 2 + 3 * 2 + 3 * 8);
        for m in 0..3 {
            for k in 0..2 {
                assert_eq!(psi.delta[(m, k)], (1.0 - grid.eta[m]) * scen.theta[k]);
            }
        }
    }

    #[test]
    fn eta_one_has_no_squint_derivative() {
        let c = SystemConfig { bandwidth_hz: 0.0, ..cfg() };
        let scen = sample_scenario(&c, 10.0, 10.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let grid = subcarrier_grid(&c);
        let d = steering_derivatives(0, 0, &scen, &grid, DerivativeForm::Consistent).unwrap();
        assert!(d.d_delta.is_none());
        let fim = fisher_information(&scen, &c, &grid, &CrbOptions::default()).unwrap();
        assert!(fim.layout.delta_subcarriers.is_empty());
        assert_eq!(fim.layout.len, 2 + 2 * 3 * 8);
    }

    #[test]
    fn zero_noise_is_rejected() {
        let c = cfg();
        let mut scen = sample_scenario(&c, 10.0, 10.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        scen.sigma2 = 0.0;
        let grid = subcarrier_grid(&c);
        assert_eq!(
            crb_closed_form(&scen, &c, &grid, &CrbOptions::default()),
            Err(Error::SingularCovariance { subcarrier: 0 })
        );
    }

    #[test]
    fn closed_form_diagonal_layout() {
        let c = cfg();
        let scen = sample_scenario(&c, 10.0, 10.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let grid = subcarrier_grid(&c);
        let r = crb_closed_form(&scen, &c, &grid, &CrbOptions::default()).unwrap();
        let diag = r.diagonal.unwrap();
        // the centre subcarrier of an odd grid has eta = 1 and no squint entry
        let unsquinted = grid.eta.iter().filter(|e| **e == 1.0).count();
        assert_eq!(unsquinted, 1);
        assert_eq!(
            diag.len(),
            UnknownVector::from_scenario(&scen, &grid).dimension() - unsquinted * 2
        );
        assert!(diag.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn degrees_conversion() {
        let r = CrbResult {
            method: CrbMethod::ClosedForm,
            crb_theta: vec![1e-6],
            diagonal: None,
            full: None,
            rank_deficient: false,
        };
        let deg = r.theta_deg2(&[0.5]);
        let want = 1e-6 / 0.75 * (180.0 / PI) * (180.0 / PI);
        assert!((deg[0] - want).abs() < 1e-12 * want);
    }
}
