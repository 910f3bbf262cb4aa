//! Gain-phase mismatch solve for one subcarrier.
//!
//! With `d_k = W^H diag(g) a(theta_k, eta) = W^H diag(a(theta_k, eta)) g`,
//! orthogonality to the noise subspace gives `g^H Theta g = 0` for
//!
//! `Theta = sum_k diag(a_k)^H W U U^H W^H diag(a_k)`,
//!
//! so `g` is the eigenvector of the smallest eigenvalue of `Theta`. The
//! squinted steering vector `a(eta theta_k)` already contains the squint
//! transform. The global complex scale of `g` is not identifiable; the
//! returned vector has `||g|| = sqrt(N)` and a real non-negative first entry.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::array::{steering_at, Combiner, GpmVector};
use crate::linalg::hermitian_eigen_desc;
use crate::{CMatrix, CVector, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GpmSolveMode {
    /// Solve for `g` directly from `Theta`.
    #[default]
    Direct,
    /// Keep the current estimate inside `Theta` and solve for a
    /// multiplicative correction `c`, returning `g_current * c`.
    Residual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpmSolve {
    pub gpm: GpmVector,
    /// Smallest eigenvalue of `Theta`.
    pub min_eigenvalue: f64,
    /// The two smallest eigenvalues coincide to `1e-12` relative.
    pub ill_conditioned: bool,
}

/// `Theta` from the projector `Q = W U U^H W^H`:
/// `Theta[i, j] = Q[i, j] * sum_k conj(a_k[i]) a_k[j]`.
pub(crate) fn objective_from_projector(q: &CMatrix, theta_hat: &[f64], eta: f64) -> CMatrix {
    let n = q.nrows();
    let steer: Vec<CVector> = theta_hat.iter().map(|&t| steering_at(eta * t, n)).collect();
    CMatrix::from_fn(n, n, |i, j| {
        let w: C64 = steer.iter().map(|a| a[i].conj() * a[j]).sum();
        q[(i, j)] * w
    })
}

/// The Hermitian matrix `Theta` for estimated directions `theta_hat`.
pub fn gpm_objective(theta_hat: &[f64], noise: &CMatrix, combiner: &Combiner, eta: f64) -> CMatrix {
    let wu = combiner.matrix() * noise;
    objective_from_projector(&(&wu * wu.adjoint()), theta_hat, eta)
}

/// Fixes the gauge: `||g|| = sqrt(N)`, first entry real and non-negative.
pub(crate) fn normalise_gauge(mut g: CVector) -> CVector {
    let n = g.len() as f64;
    let norm = g.norm();
    if norm > 0.0 {
        g.unscale_mut(norm / libm::sqrt(n));
    }
    let g0 = g[0];
    let g0_abs = libm::hypot(g0.re, g0.im);
    if g0_abs > 0.0 {
        let rot = g0.conj() / g0_abs;
        g.iter_mut().for_each(|v| *v *= rot);
        g[0] = C64::new(libm::hypot(g[0].re, g[0].im), 0.0);
    }
    g
}

pub(crate) fn solve_objective(theta: &CMatrix, subcarrier: usize) -> GpmSolve {
    let n = theta.nrows();
    let (vals, vecs) = hermitian_eigen_desc(theta);
    let lmin = vals[n - 1];
    let lmax = vals[0].abs();
    let ill_conditioned = n > 1 && (vals[n - 2] - lmin).abs() < 1e-12 * lmax;
    let g = normalise_gauge(vecs.column(n - 1).into_owned());
    GpmSolve {
        gpm: GpmVector { subcarrier, gains: g },
        min_eigenvalue: lmin,
        ill_conditioned,
    }
}

pub(crate) fn solve_residual(theta: &CMatrix, current: &GpmVector) -> GpmSolve {
    let g = &current.gains;
    let scaled = CMatrix::from_fn(theta.nrows(), theta.ncols(), |i, j| {
        g[i].conj() * theta[(i, j)] * g[j]
    });
    let mut solve = solve_objective(&scaled, current.subcarrier);
    solve.gpm.gains = normalise_gauge(solve.gpm.gains.component_mul(g));
    solve
}

/// Minimum-eigenvector GPM estimate for one subcarrier.
pub fn estimate_gpm(
    theta_hat: &[f64],
    noise: &CMatrix,
    combiner: &Combiner,
    eta: f64,
    subcarrier: usize,
) -> Result<GpmSolve> {
    if theta_hat.is_empty() || noise.ncols() == 0 {
        return Err(Error::NotIdentifiable(
            "GPM solve needs at least one direction and a non-empty noise subspace".into(),
        ));
    }
    if noise.nrows() != combiner.antennas() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "noise subspace has {} rows, combiner {}",
            noise.nrows(),
            combiner.antennas()
        )));
    }
    if let Some(&bad) = theta_hat.iter().find(|t| !(t.abs() <= 1.0)) {
        return Err(Error::DirectionOutOfRange(bad));
    }
    Ok(solve_objective(&gpm_objective(theta_hat, noise, combiner, eta), subcarrier))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauge_is_fixed() {
        let g = CVector::from_vec(alloc::vec![C64::new(0.0, 2.0), C64::new(1.0, 1.0), C64::new(-3.0, 0.5)]);
        let out = normalise_gauge(g.clone());
        assert!((out.norm() - libm::sqrt(3.0)).abs() < 1e-14);
        assert_eq!(out[0].im, 0.0);
        assert!(out[0].re > 0.0);
        // same ray as the input
        let c = g.dotc(&out) / g.norm_squared();
        assert!((g * c - &out).norm() < 1e-12);
    }
}
