//! Deterministic array quantities: subcarrier grid, steering vectors,
//! beam-squint, gain-phase mismatch (GPM) vectors and subarrayed combiners.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::linalg::{cis, cis_pi, complex_normal};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Subcarrier frequencies and their distortion coefficients `f_m / f_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierGrid {
    pub carrier_hz: f64,
    pub freqs: Vec<f64>,
    pub eta: Vec<f64>,
}

impl SubcarrierGrid {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Grid whose distortion coefficients are all one, as seen by a receiver
    /// that ignores beam-squint.
    pub fn squint_free(&self) -> Self {
        Self {
            carrier_hz: self.carrier_hz,
            freqs: alloc::vec![self.carrier_hz; self.len()],
            eta: alloc::vec![1.0; self.len()],
        }
    }
}

/// `f_m = f_c + (B/M)(m - 1 - (M-1)/2)` for `m = 1..M`, `eta_m = f_m / f_c`.
///
/// `cfg` is assumed valid; see [`SystemConfig::validate`].
pub fn subcarrier_grid(cfg: &SystemConfig) -> SubcarrierGrid {
    let m_count = cfg.subcarriers;
    let spacing = cfg.bandwidth_hz / m_count as f64;
    let centre = (m_count as f64 - 1.0) / 2.0;
    let freqs: Vec<f64> = (0..m_count)
        .map(|m| cfg.carrier_hz + spacing * (m as f64 - centre))
        .collect();
    let eta = freqs.iter().map(|f| f / cfg.carrier_hz).collect();
    SubcarrierGrid {
        carrier_hz: cfg.carrier_hz,
        freqs,
        eta,
    }
}

fn check_direction(theta: f64) -> Result<()> {
    if theta.is_finite() && theta.abs() <= 1.0 {
        Ok(())
    } else {
        Err(Error::DirectionOutOfRange(theta))
    }
}

/// Unit-norm ULA response at spatial frequency `u` (half-wavelength spacing):
/// element `n` is `exp(j pi n u) / sqrt(N)`. `u` may lie outside `[-1, 1]`
/// when it is a squinted direction.
pub(crate) fn steering_at(u: f64, antennas: usize) -> CVector {
    let scale = 1.0 / libm::sqrt(antennas as f64);
    CVector::from_iterator(
        antennas,
        (0..antennas).map(|n| cis_pi(n as f64 * u) * scale),
    )
}

/// Fills `out` with the steering vector at spatial frequency `u`.
#[inline]
pub(crate) fn steering_into(u: f64, out: &mut [C64]) {
    let scale = 1.0 / libm::sqrt(out.len() as f64);
    for (n, v) in out.iter_mut().enumerate() {
        *v = cis_pi(n as f64 * u) * scale;
    }
}

/// Steering vector of direction `theta` seen at a subcarrier with distortion
/// coefficient `eta`: `[a]_n = exp(j pi (n-1) eta theta) / sqrt(N)`.
pub fn steering_vector(theta: f64, eta: f64, antennas: usize) -> Result<CVector> {
    check_direction(theta)?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidEta(eta));
    }
    Ok(steering_at(eta * theta, antennas))
}

/// Spatial offset `(1 - eta) theta` between nominal and squinted direction.
pub fn beam_squint_delta(theta: f64, eta: f64) -> f64 {
    (1.0 - eta) * theta
}

/// Diagonal of the squint transform `T` with `a(theta, eta) = T a(theta, 1)`.
///
/// Element `n` is `exp(-j pi (n-1) Delta)` with `Delta = (1 - eta) theta`;
/// the negative sign is what makes the mapping identity hold.
pub fn squint_transform(theta: f64, eta: f64, antennas: usize) -> Result<CVector> {
    check_direction(theta)?;
    let delta = beam_squint_delta(theta, eta);
    Ok(CVector::from_iterator(
        antennas,
        (0..antennas).map(|n| cis_pi(-(n as f64) * delta)),
    ))
}

/// Per-antenna complex gains of one subcarrier (the diagonal of `G_m`).
#[derive(Debug, Clone, PartialEq)]
pub struct GpmVector {
    pub subcarrier: usize,
    pub gains: CVector,
}

impl GpmVector {
    /// Mismatch-free (calibrated) gains.
    pub fn ones(antennas: usize, subcarrier: usize) -> Self {
        Self {
            subcarrier,
            gains: CVector::from_element(antennas, C64::new(1.0, 0.0)),
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Same gains multiplied by a complex constant.
    pub fn scaled(&self, c: C64) -> Self {
        Self {
            subcarrier: self.subcarrier,
            gains: self.gains.map(|g| g * c),
        }
    }
}

/// Draws `g_n = 1 + e_n` with `e_n ~ CN(0, 10^(-snr_g_db/10))`.
///
/// `snr_g_db = +inf` yields the all-ones vector. The same number of random
/// draws is consumed for every mismatch level.
pub fn sample_gpm<R: Rng + ?Sized>(
    antennas: usize,
    snr_g_db: f64,
    subcarrier: usize,
    rng: &mut R,
) -> GpmVector {
    let variance = if snr_g_db == f64::INFINITY {
        0.0
    } else {
        libm::pow(10.0, -snr_g_db / 10.0)
    };
    let gains = CVector::from_iterator(
        antennas,
        (0..antennas).map(|_| C64::new(1.0, 0.0) + complex_normal(rng, variance)),
    );
    GpmVector { subcarrier, gains }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinerKind {
    /// Entries `exp(j phi) / sqrt(N)` with `phi ~ U[-pi/2, pi/2]`.
    #[default]
    RandomPhase,
    /// Randomly phased DFT blocks scaled by `1/sqrt(N)`; each block has
    /// exactly orthogonal columns.
    ScaledUnitary,
}

/// Block-diagonal `N x N` combiner `W = [W_1, ..., W_J]`; slot `j` acquires
/// rows `j N_RF .. (j+1) N_RF` through the `N_RF x N_RF` block `Wbar_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Combiner {
    matrix: CMatrix,
    rf_chains: usize,
    kind: CombinerKind,
}

impl Combiner {
    /// Wraps an existing matrix, checking the block-diagonal zero pattern.
    pub fn from_matrix(matrix: CMatrix, rf_chains: usize, kind: CombinerKind) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "combiner must be square, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        if rf_chains == 0 || n % rf_chains != 0 {
            return Err(Error::IndivisibleSubarray { antennas: n, rf_chains });
        }
        for c in 0..n {
            for r in 0..n {
                if r / rf_chains != c / rf_chains && matrix[(r, c)] != C64::new(0.0, 0.0) {
                    return Err(Error::DimensionMismatch(format!(
                        "combiner entry ({r}, {c}) lies outside the diagonal blocks"
                    )));
                }
            }
        }
        Ok(Self { matrix, rf_chains, kind })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rf_chains(&self) -> usize {
        self.rf_chains
    }

    pub fn slots(&self) -> usize {
        self.antennas() / self.rf_chains
    }

    pub fn kind(&self) -> CombinerKind {
        self.kind
    }

    /// The `N_RF x N_RF` block `Wbar_j`.
    pub fn block(&self, slot: usize) -> CMatrix {
        let start = slot * self.rf_chains;
        self.matrix
            .view((start, start), (self.rf_chains, self.rf_chains))
            .into_owned()
    }
}

pub fn build_combiner<R: Rng + ?Sized>(
    antennas: usize,
    rf_chains: usize,
    kind: CombinerKind,
    rng: &mut R,
) -> Result<Combiner> {
    if rf_chains == 0 || antennas % rf_chains != 0 {
        return Err(Error::IndivisibleSubarray { antennas, rf_chains });
    }
    let scale = 1.0 / libm::sqrt(antennas as f64);
    let mut w = CMatrix::zeros(antennas, antennas);
    for slot in 0..antennas / rf_chains {
        let base = slot * rf_chains;
        match kind {
            CombinerKind::RandomPhase => {
                for c in 0..rf_chains {
                    for r in 0..rf_chains {
                        let phi = rng.random_range(-PI / 2.0..=PI / 2.0);
                        w[(base + r, base + c)] = cis(phi) * scale;
                    }
                }
            }
            CombinerKind::ScaledUnitary => {
                let row_phase: Vec<f64> =
                    (0..rf_chains).map(|_| rng.random_range(-PI..PI)).collect();
                let col_phase: Vec<f64> =
                    (0..rf_chains).map(|_| rng.random_range(-PI..PI)).collect();
                for c in 0..rf_chains {
                    for r in 0..rf_chains {
                        let dft = -2.0 * PI * (r * c) as f64 / rf_chains as f64;
                        w[(base + r, base + c)] =
                            cis(dft + row_phase[r] + col_phase[c]) * scale;
                    }
                }
            }
        }
    }
    Ok(Combiner {
        matrix: w,
        rf_chains,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(bandwidth_hz: f64, subcarriers: usize) -> SystemConfig {
        SystemConfig {
            carrier_hz: 300e9,
            bandwidth_hz,
            subcarriers,
            ..SystemConfig::desk_defaults()
        }
    }

    #[test]
    fn zero_bandwidth_grid_is_flat() {
        let g = subcarrier_grid(&cfg(0.0, 4));
        assert!(g.freqs.iter().all(|&f| f == 300e9));
        assert!(g.eta.iter().all(|&e| e == 1.0));
    }

    #[test]
    fn edge_subcarriers_at_30ghz() {
        let g = subcarrier_grid(&cfg(30e9, 32));
        // independent arithmetic: 300 - 30/32 * 15.5 and 300 + 30/32 * 15.5 GHz
        let lo = 300e9 - 30e9 / 32.0 * 15.5;
        let hi = 300e9 + 30e9 / 32.0 * 15.5;
        assert_abs_diff_eq!(lo, 285.46875e9, epsilon = 1e-3);
        assert_abs_diff_eq!(g.freqs[0], 285.46875e9, epsilon = 1e-3);
        assert_abs_diff_eq!(g.freqs[31], 314.53125e9, epsilon = 1e-3);
        assert_abs_diff_eq!(g.freqs[31], hi, epsilon = 1e-3);
        assert_abs_diff_eq!(g.eta[0], 0.9515625, epsilon = 1e-15);
        assert_abs_diff_eq!(g.eta[31], 1.0484375, epsilon = 1e-15);
        assert_abs_diff_eq!(g.freqs[0] + g.freqs[31], 600e9, epsilon = 1e-3);
    }

    #[test]
    fn broadside_steering() {
        let a = steering_vector(0.0, 1.0, 4).unwrap();
        for v in a.iter() {
            assert_eq!(*v, C64::new(0.5, 0.0));
        }
    }

    #[test]
    fn steering_phase_of_third_element() {
        let a = steering_vector(0.5, 1.0, 4).unwrap();
        assert_abs_diff_eq!(a[2].re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a[2].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn steering_rejects_out_of_range() {
        assert_eq!(steering_vector(1.2, 1.0, 4), Err(Error::DirectionOutOfRange(1.2)));
        assert!(steering_vector(f64::NAN, 1.0, 4).is_err());
        assert_eq!(steering_vector(0.2, 0.0, 4), Err(Error::InvalidEta(0.0)));
    }

    #[test]
    fn squint_delta_examples() {
        assert_eq!(beam_squint_delta(0.8660, 1.0), 0.0);
        assert_abs_diff_eq!(beam_squint_delta(0.8660, 0.95), 0.04330, epsilon = 1e-12);
    }

    #[test]
    fn edge_squint_of_sixty_degree_target_is_several_degrees() {
        let g = subcarrier_grid(&cfg(30e9, 32));
        let theta = libm::sin(60f64.to_radians());
        let edge = libm::asin(g.eta[31] * theta).to_degrees() - 60.0;
        assert!(edge > 3.0 && edge < 12.0, "edge squint {edge} deg");
    }

    #[test]
    fn squint_transform_trivial_cases() {
        let t = squint_transform(0.7, 1.0, 8).unwrap();
        assert!(t.iter().all(|&v| v == C64::new(1.0, 0.0)));
        let t = squint_transform(0.0, 0.9, 8).unwrap();
        assert!(t.iter().all(|&v| v == C64::new(1.0, 0.0)));
    }

    #[test]
    fn squint_transform_maps_nominal_to_squinted() {
        let t = squint_transform(0.5, 0.95, 8).unwrap();
        let nominal = steering_vector(0.5, 1.0, 8).unwrap();
        let squinted = steering_vector(0.5, 0.95, 8).unwrap();
        let mapped = t.component_mul(&nominal);
        for n in 0..8 {
            // elementwise oracle: exp(j pi n 0.95 * 0.5) / sqrt(8)
            let phase = PI * n as f64 * 0.475;
            let oracle = C64::new(libm::cos(phase), libm::sin(phase)) / libm::sqrt(8.0);
            assert!((mapped[n] - oracle).norm() < 1e-14);
            assert!((mapped[n] - squinted[n]).norm() < 1e-14);
        }
    }

    #[test]
    fn gpm_mismatch_free_is_all_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = sample_gpm(16, f64::INFINITY, 0, &mut rng);
        assert_eq!(g, GpmVector::ones(16, 0));
    }

    #[test]
    fn gpm_perturbation_variance_at_10db() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = sample_gpm(100_000, 10.0, 0, &mut rng);
        let mean: f64 =
            g.gains.iter().map(|v| (v - C64::new(1.0, 0.0)).norm_sqr()).sum::<f64>() / 1e5;
        assert!((mean - 0.1).abs() < 0.002, "sample variance {mean}");
    }

    #[test]
    fn gpm_is_deterministic() {
        let a = sample_gpm(32, 10.0, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_gpm(32, 10.0, 3, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn scaled_unitary_single_block_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = build_combiner(4, 4, CombinerKind::ScaledUnitary, &mut rng).unwrap();
        // direct product oracle
        let gram = w.matrix().adjoint() * w.matrix();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((gram[(r, c)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn combiner_structure() {
        for kind in [CombinerKind::RandomPhase, CombinerKind::ScaledUnitary] {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let w = build_combiner(8, 4, kind, &mut rng).unwrap();
            assert_eq!(w.slots(), 2);
            for r in 0..8 {
                for c in 0..8 {
                    let v = w.matrix()[(r, c)];
                    if r / 4 != c / 4 {
                        assert_eq!(v, C64::new(0.0, 0.0));
                    } else {
                        assert_abs_diff_eq!(v.norm(), 1.0 / libm::sqrt(8.0), epsilon = 1e-15);
                    }
                }
            }
            assert!(Combiner::from_matrix(w.matrix().clone(), 4, kind).is_ok());
        }
    }

    #[test]
    fn combiner_rejects_indivisible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(
            build_combiner(8, 3, CombinerKind::RandomPhase, &mut rng),
            Err(Error::IndivisibleSubarray { antennas: 8, rf_chains: 3 })
        );
        let full = CMatrix::from_element(4, 4, C64::new(0.5, 0.0));
        assert!(Combiner::from_matrix(full, 2, CombinerKind::RandomPhase).is_err());
    }

    #[test]
    fn random_phase_combiner_within_half_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = build_combiner(16, 8, CombinerKind::RandomPhase, &mut rng).unwrap();
        for v in w.matrix().iter().filter(|v| v.norm() > 0.0) {
            assert!(v.re >= -1e-15);
        }
    }

    proptest! {
        #[test]
        fn steering_is_unit_norm(theta in -1.0f64..=1.0, eta in 0.5f64..1.5, n in 1usize..200) {
            let a = steering_vector(theta, eta, n).unwrap();
            prop_assert!((a.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn steering_eta_folds_into_direction(theta in -0.9f64..=0.9, eta in 0.9f64..1.1, n in 1usize..64) {
            let a = steering_vector(theta, eta, n).unwrap();
            let b = steering_vector(eta * theta, 1.0, n).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn squint_transform_identity(theta in -1.0f64..=1.0, eta in 0.8f64..1.2, n in 1usize..=256) {
            let t = squint_transform(theta, eta, n).unwrap();
            let mapped = t.component_mul(&steering_vector(theta, 1.0, n).unwrap());
            let target = steering_vector(theta, eta, n).unwrap();
            let err = (mapped - target).iter().map(|v| v.norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-12, "err {}", err);
        }

        #[test]
        fn squint_decomposition(theta in -1.0f64..=1.0, eta in 0.5f64..1.5) {
            prop_assert!((beam_squint_delta(theta, eta) + eta * theta - theta).abs() < 1e-15);
        }

        #[test]
        fn grid_is_centred(m in 1usize..64, bw in 0.0f64..60e9) {
            let g = subcarrier_grid(&cfg(bw, m));
            let sum: f64 = g.freqs.iter().map(|f| f - 300e9).sum();
            prop_assert!(sum.abs() < 1e-3 * m as f64);
            for (f, e) in g.freqs.iter().zip(&g.eta) {
                prop_assert_eq!(*e, f / 300e9);
            }
            prop_assert!(g.freqs.windows(2).all(|w| bw == 0.0 || w[1] > w[0]));
        }
    }
}
