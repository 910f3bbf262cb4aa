use alloc::format;
use alloc::vec::Vec;

use crate::linalg::hermitian_eigen_desc;
use crate::{CMatrix, Error, Result};

/// `R = Y Y^H / T`.
pub fn sample_covariance(y: &CMatrix) -> CMatrix {
    let t = y.ncols().max(1) as f64;
    (y * y.adjoint()).unscale(t)
}

/// Split of one covariance into noise subspace and spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceSplit {
    /// Orthonormal basis of the `N - K` smallest eigenvalues, `N x (N-K)`.
    pub noise: CMatrix,
    /// All eigenvalues, descending.
    pub eigvals: Vec<f64>,
    /// Eigenvalues `K` and `K+1` are too close for a well-defined split.
    pub degenerate: bool,
}

/// Noise subspace of a Hermitian covariance for `targets` sources. The input
/// is symmetrised before decomposition.
pub fn noise_subspace(r: &CMatrix, targets: usize) -> Result<SubspaceSplit> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square, got {}x{}",
            n,
            r.ncols()
        )));
    }
    if targets == 0 || targets >= n {
        return Err(Error::NotIdentifiable(format!(
            "{targets} targets leave no noise subspace in {n} dimensions"
        )));
    }
    let (eigvals, vectors) = hermitian_eigen_desc(r);
    let noise = vectors.columns(targets, n - targets).into_owned();
    let lmax = eigvals[0].abs();
    let degenerate = (eigvals[targets - 1] - eigvals[targets]).abs() < 1e-12 * lmax;
    Ok(SubspaceSplit {
        noise,
        eigvals,
        degenerate,
    })
}

/// Per-subcarrier noise subspaces `U_m^N` with their eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSubspace {
    pub bases: Vec<CMatrix>,
    pub eigvals: Vec<Vec<f64>>,
    pub degenerate: Vec<bool>,
}

impl NoiseSubspace {
    /// Covariance and eigendecomposition of every observation matrix.
    pub fn from_observations(y: &[CMatrix], targets: usize) -> Result<Self> {
        let mut out = Self {
            bases: Vec::with_capacity(y.len()),
            eigvals: Vec::with_capacity(y.len()),
            degenerate: Vec::with_capacity(y.len()),
        };
        for ym in y {
            let split = noise_subspace(&sample_covariance(ym), targets)?;
            out.bases.push(split.noise);
            out.eigvals.push(split.eigvals);
            out.degenerate.push(split.degenerate);
        }
        Ok(out)
    }

    pub fn subcarriers(&self) -> usize {
        self.bases.len()
    }

    /// `W U_m^N` for every subcarrier.
    pub(crate) fn combined_bases(&self, w: &CMatrix) -> Vec<CMatrix> {
        self.bases.iter().map(|u| w * u).collect()
    }
}
