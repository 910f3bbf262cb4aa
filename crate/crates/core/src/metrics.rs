//! Error pairing and aggregation used by the Monte-Carlo harness.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::array::GpmVector;

/// Physical angle in degrees of a spatial direction, `asin(theta)`.
pub fn to_degrees(theta: f64) -> f64 {
    libm::asin(theta.clamp(-1.0, 1.0)).to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Sort both lists and pair by rank.
    #[default]
    Sorted,
    /// Permutation with the smallest summed squared angle error.
    Optimal,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    // Heap's algorithm
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = alloc::vec![0usize; n];
    f(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Squared angle errors in degrees^2 between estimated and true spatial
/// directions, one per target.
pub fn squared_errors_deg(estimate: &[f64], truth: &[f64], pairing: Pairing) -> Vec<f64> {
    let err = |a: f64, b: f64| {
        let d = to_degrees(a) - to_degrees(b);
        d * d
    };
    let est = sorted(estimate);
    let tru = sorted(truth);
    match pairing {
        Pairing::Sorted => est.iter().zip(&tru).map(|(&a, &b)| err(a, b)).collect(),
        Pairing::Optimal => {
            let mut best: Option<(f64, Vec<usize>)> = None;
            for_each_permutation(tru.len().min(est.len()), |p| {
                let total: f64 = p.iter().enumerate().map(|(i, &j)| err(est[i], tru[j])).sum();
                if best.as_ref().map_or(true, |(b, _)| total < *b) {
                    best = Some((total, p.to_vec()));
                }
            });
            let perm = best.map(|(_, p)| p).unwrap_or_default();
            perm.iter().enumerate().map(|(i, &j)| err(est[i], tru[j])).collect()
        }
    }
}

/// Squared error in spatial units, sorted pairing.
pub fn squared_errors_spatial(estimate: &[f64], truth: &[f64]) -> Vec<f64> {
    sorted(estimate)
        .iter()
        .zip(&sorted(truth))
        .map(|(a, b)| (a - b) * (a - b))
        .collect()
}

/// Root of the mean of the squared errors.
pub fn rmse(squared: &[f64]) -> f64 {
    if squared.is_empty() {
        return 0.0;
    }
    libm::sqrt(squared.iter().sum::<f64>() / squared.len() as f64)
}

/// Mean squared per-antenna error after aligning the estimate to the truth
/// with the least-squares complex scalar `c = <g_hat, g> / ||g_hat||^2`.
pub fn gpm_alignment_error(estimate: &GpmVector, truth: &GpmVector) -> f64 {
    let est = &estimate.gains;
    let tru = &truth.gains;
    let denom = est.norm_squared();
    let aligned = if denom > 0.0 {
        est * (est.dotc(tru) / denom)
    } else {
        est.clone()
    };
    (aligned - tru).norm_squared() / tru.len() as f64
}
