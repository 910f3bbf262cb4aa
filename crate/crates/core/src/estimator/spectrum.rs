//! Beam-squint-corrected MUSIC spectra.
//!
//! For subcarrier `m` the corrected noise subspace is
//! `V_m = T^H(theta_m) G_m^H W U_m`, and since `T(theta_m) a(theta) =
//! a(eta_m theta)` the quadratic form reduces to
//! `q_m(theta) = || (G_m^H W U_m)^H a(eta_m theta) ||^2`. `T` is therefore
//! never formed on the hot path; [`corrected_spectrum_materialized`] keeps
//! the literal construction for cross-checking.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::covariance::NoiseSubspace;
use crate::array::{squint_transform, steering_at, steering_into, Combiner, GpmVector, SubcarrierGrid};
use crate::linalg::{cis_pi, median};
use crate::{CMatrix, Error, Result, C64};

/// Absolute part of the reciprocal guard.
const ABS_FLOOR: f64 = 1e-300;
/// Relative part of the reciprocal guard, times the grid median of the form.
const REL_FLOOR: f64 = 1e-16;

/// How the quadratic forms are evaluated over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    /// One inner product of the squinted steering vector with each column of
    /// `G^H W U`: `O(N (N-K))` per direction and subcarrier.
    #[default]
    Direct,
    /// `a^H P a` for the Hermitian `P = G^H W U U^H W^H G` is a real
    /// trigonometric polynomial of degree `N-1` in `eta theta`; its `N`
    /// diagonal sums are evaluated by Horner's rule, `O(N)` per direction.
    Trigonometric,
}

/// Combined spectrum over the direction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Per-subcarrier spectra `P_m`, when requested.
    pub per_subcarrier: Option<Vec<Vec<f64>>>,
}

/// `size` uniformly spaced directions from -1 to 1 inclusive.
pub fn direction_grid(size: usize) -> Vec<f64> {
    match size {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let step = 2.0 / (size - 1) as f64;
            (0..size)
                .map(|i| if i == size - 1 { 1.0 } else { -1.0 + step * i as f64 })
                .collect()
        }
    }
}

/// Quadratic-form evaluator for one subcarrier.
pub(crate) enum FormKernel {
    /// `G^H W U`, `N x (N-K)`.
    Direct(CMatrix),
    /// Diagonal sums `c_d = sum_n P[n, n+d]`, `d = 0..N`.
    Trigonometric(Vec<C64>),
}

impl FormKernel {
    /// `wu = W U_m`, `projector = W U U^H W^H`; only the one the method needs
    /// is read.
    pub(crate) fn new(
        method: SpectrumMethod,
        gains: &[C64],
        wu: &CMatrix,
        projector: Option<&CMatrix>,
    ) -> Self {
        match method {
            SpectrumMethod::Direct => {
                let mut b = wu.clone();
                for (n, mut row) in b.row_iter_mut().enumerate() {
                    let g = gains[n].conj();
                    row.iter_mut().for_each(|v| *v *= g);
                }
                FormKernel::Direct(b)
            }
            SpectrumMethod::Trigonometric => {
                let owned;
                let q = match projector {
                    Some(p) => p,
                    None => {
                        owned = wu * wu.adjoint();
                        &owned
                    }
                };
                let n = q.nrows();
                let mut coeffs = vec![C64::new(0.0, 0.0); n];
                for (d, c) in coeffs.iter_mut().enumerate() {
                    for i in 0..n - d {
                        *c += gains[i].conj() * q[(i, i + d)] * gains[i + d];
                    }
                }
                FormKernel::Trigonometric(coeffs)
            }
        }
    }

    /// `q(theta)` for every grid point at distortion `eta`.
    pub(crate) fn forms(&self, eta: f64, psi: &[f64]) -> Vec<f64> {
        match self {
            FormKernel::Direct(b) => {
                let n = b.nrows();
                let cols = b.ncols();
                let data = b.as_slice();
                let mut a = vec![C64::new(0.0, 0.0); n];
                psi.iter()
                    .map(|&theta| {
                        steering_into(eta * theta, &mut a);
                        let mut q = 0.0;
                        for c in 0..cols {
                            let col = &data[c * n..(c + 1) * n];
                            let (mut re, mut im) = (0.0, 0.0);
                            for (bv, av) in col.iter().zip(&a) {
                                // conj(b) * a
                                re += bv.re * av.re + bv.im * av.im;
                                im += bv.re * av.im - bv.im * av.re;
                            }
                            q += re * re + im * im;
                        }
                        q
                    })
                    .collect()
            }
            FormKernel::Trigonometric(c) => {
                let n = c.len();
                psi.iter()
                    .map(|&theta| {
                        let z = cis_pi(eta * theta);
                        let mut acc = C64::new(0.0, 0.0);
                        for d in (1..n).rev() {
                            acc = (acc + c[d]) * z;
                        }
                        (c[0].re + 2.0 * acc.re) / n as f64
                    })
                    .collect()
            }
        }
    }
}

/// Reciprocal with the numerical floor `1e-300 + 1e-16 * median(q)`.
pub(crate) fn reciprocal_spectrum(forms: &[f64]) -> Vec<f64> {
    let floor = ABS_FLOOR + REL_FLOOR * median(forms);
    forms.iter().map(|&q| 1.0 / (q.max(0.0) + floor)).collect()
}

/// Sums per-subcarrier spectra in subcarrier order.
pub(crate) fn combine(forms: Vec<Vec<f64>>, psi: &[f64], keep_per_subcarrier: bool) -> Spectrum {
    let mut values = vec![0.0; psi.len()];
    let mut per = Vec::new();
    for q in &forms {
        let p = reciprocal_spectrum(q);
        values.iter_mut().zip(&p).for_each(|(v, x)| *v += x);
        if keep_per_subcarrier {
            per.push(p);
        }
    }
    Spectrum {
        grid: psi.to_vec(),
        values,
        per_subcarrier: keep_per_subcarrier.then_some(per),
    }
}

fn check_inputs(
    subspaces: &NoiseSubspace,
    gpm: &[GpmVector],
    combiner: &Combiner,
    grid: &SubcarrierGrid,
) -> Result<()> {
    let m = subspaces.subcarriers();
    let n = combiner.antennas();
    if gpm.len() != m || grid.len() != m {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} subspaces, {} GPM vectors, {} subcarriers",
            m,
            gpm.len(),
            grid.len()
        )));
    }
    if subspaces.bases.iter().any(|u| u.nrows() != n) || gpm.iter().any(|g| g.len() != n) {
        return Err(Error::DimensionMismatch(alloc::format!(
            "subspaces or GPM vectors do not have {n} rows"
        )));
    }
    Ok(())
}

/// Quadratic forms `q_m(theta)` of the corrected noise subspaces, one row
/// per subcarrier.
pub fn corrected_forms(
    subspaces: &NoiseSubspace,
    gpm: &[GpmVector],
    combiner: &Combiner,
    grid: &SubcarrierGrid,
    psi: &[f64],
    method: SpectrumMethod,
) -> Result<Vec<Vec<f64>>> {
    check_inputs(subspaces, gpm, combiner, grid)?;
    let wu = subspaces.combined_bases(combiner.matrix());
    Ok(wu
        .iter()
        .zip(gpm)
        .zip(&grid.eta)
        .map(|((wu, g), &eta)| FormKernel::new(method, g.gains.as_slice(), wu, None).forms(eta, psi))
        .collect())
}

/// Combined corrected spectrum `P(theta) = sum_m 1 / q_m(theta)` with the
/// per-subcarrier spectra retained.
pub fn corrected_spectrum(
    subspaces: &NoiseSubspace,
    gpm: &[GpmVector],
    combiner: &Combiner,
    grid: &SubcarrierGrid,
    psi: &[f64],
    method: SpectrumMethod,
) -> Result<Spectrum> {
    let forms = corrected_forms(subspaces, gpm, combiner, grid, psi, method)?;
    Ok(combine(forms, psi, true))
}

/// Reference route: builds `T(theta_m)` and `V_m = T^H G^H W U` for every
/// grid direction and evaluates `|| V_m^H a(theta) ||^2` literally.
/// `O(|psi| M N (N-K))` work, intended for coarse grids.
pub fn corrected_spectrum_materialized(
    subspaces: &NoiseSubspace,
    gpm: &[GpmVector],
    combiner: &Combiner,
    grid: &SubcarrierGrid,
    psi: &[f64],
) -> Result<Spectrum> {
    check_inputs(subspaces, gpm, combiner, grid)?;
    let n = combiner.antennas();
    let mut forms = Vec::with_capacity(grid.len());
    for (m, u) in subspaces.bases.iter().enumerate() {
        let g_h = CMatrix::from_diagonal(&gpm[m].gains.map(|g| g.conj()));
        let base = g_h * combiner.matrix() * u;
        let q: Result<Vec<f64>> = psi
            .iter()
            .map(|&theta| {
                let tau = squint_transform(theta, grid.eta[m], n)?;
                let t_h = CMatrix::from_diagonal(&tau.map(|v| v.conj()));
                let v = t_h * &base;
                let a = steering_at(theta, n);
                Ok((v.adjoint() * a).norm_squared())
            })
            .collect();
        forms.push(q?);
    }
    Ok(combine(forms, psi, true))
}

/// Classical MUSIC over the combined data, without squint or GPM
/// correction: `q_m(theta) = || U_m^H W^H a(theta) ||^2`.
pub fn music_spectrum(subspaces: &NoiseSubspace, combiner: &Combiner, psi: &[f64]) -> Result<Spectrum> {
    let n = combiner.antennas();
    if subspaces.bases.iter().any(|u| u.nrows() != n) {
        return Err(Error::DimensionMismatch(alloc::format!(
            "subspaces do not have {n} rows"
        )));
    }
    let w_h = combiner.matrix().adjoint();
    let steered: Vec<_> = psi.iter().map(|&theta| &w_h * steering_at(theta, n)).collect();
    let forms = subspaces
        .bases
        .iter()
        .map(|u| {
            let u_h = u.adjoint();
            steered.iter().map(|d| (&u_h * d).norm_squared()).collect()
        })
        .collect();
    Ok(combine(forms, psi, true))
}
