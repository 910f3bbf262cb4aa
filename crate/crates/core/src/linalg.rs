use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, C64};

#[inline]
pub(crate) fn cis(phase: f64) -> C64 {
    let (s, c) = libm::sincos(phase);
    C64::new(c, s)
}

/// `exp(j pi x)` with `x` first reduced to `[-1, 1)`, so that phases that
/// differ by a multiple of `2 pi` give bit-identical results.
#[inline]
pub(crate) fn cis_pi(x: f64) -> C64 {
    let r = x - 2.0 * libm::floor(0.5 * (x + 1.0));
    cis(core::f64::consts::PI * r)
}

/// Circular complex Gaussian sample with total variance `variance`.
pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let scale = libm::sqrt(variance / 2.0);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(scale * re, scale * im)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Only the Hermitian part of `m` is used.
pub(crate) fn hermitian_eigen_desc(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut buf = values.to_vec();
    let mid = buf.len() / 2;
    let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Orthogonal-complement projector `I - D D^+` built from the singular
/// vectors of `d` above `rel_tol * sigma_max`. Returns the projector and the
/// numerical rank of `d`.
pub(crate) fn complement_projector(d: &CMatrix, rel_tol: f64) -> (CMatrix, usize) {
    let n = d.nrows();
    let svd = d.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut proj = CMatrix::identity(n, n);
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * smax && s > 0.0 {
            let col = u.column(i);
            proj -= &col * col.adjoint();
            rank += 1;
        }
    }
    (proj, rank)
}
