#![allow(dead_code)]

use neat_core::{
    generate_probing, sample_scenario, simulate_echo, CMatrix, CVector, ObservationSet, Scenario,
    SystemConfig, C64,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The small wideband geometry used by most tests.
pub fn desk(antennas: usize, subcarriers: usize, rf_chains: usize, snapshots: usize) -> SystemConfig {
    SystemConfig {
        antennas,
        subcarriers,
        rf_chains,
        snapshots,
        power: neat_core::config::unit_rho_power(subcarriers, antennas),
        ..SystemConfig::desk_defaults()
    }
}

pub fn trial(cfg: &SystemConfig, snr_db: f64, snr_g_db: f64, seed: u64) -> (Scenario, ObservationSet) {
    let mut r = rng(seed);
    let scen = sample_scenario(cfg, snr_db, snr_g_db, &mut r).unwrap();
    let x = generate_probing(cfg, &mut r);
    let obs = simulate_echo(cfg, &scen, x, &mut r).unwrap();
    (scen, obs)
}

pub fn noiseless_trial(cfg: &SystemConfig, snr_g_db: f64, seed: u64) -> (Scenario, ObservationSet) {
    let mut r = rng(seed);
    let mut scen = sample_scenario(cfg, 0.0, snr_g_db, &mut r).unwrap();
    scen.sigma2 = 0.0;
    let x = generate_probing(cfg, &mut r);
    let obs = simulate_echo(cfg, &scen, x, &mut r).unwrap();
    (scen, obs)
}

/// `exp(j pi n u) / sqrt(N)` written out independently of the library.
pub fn steering(u: f64, n: usize) -> CVector {
    let s = 1.0 / (n as f64).sqrt();
    CVector::from_fn(n, |i, _| {
        let p = std::f64::consts::PI * i as f64 * u;
        C64::new(p.cos() * s, p.sin() * s)
    })
}

pub fn cosine(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm() / (a.norm() * b.norm())
}

/// Minimum eigenvector of a Hermitian matrix by cyclic Jacobi on the real
/// embedding `[[A, -B], [B, A]]` of `A + jB`.
pub fn jacobi_min_eigenvector(h: &CMatrix) -> (f64, CVector) {
    let n = h.nrows();
    let m = 2 * n;
    let mut a = vec![vec![0.0f64; m]; m];
    for i in 0..n {
        for j in 0..n {
            let z = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            a[i][j] = z.re;
            a[i + n][j + n] = z.re;
            a[i][j + n] = -z.im;
            a[i + n][j] = z.im;
        }
    }
    let mut v = vec![vec![0.0f64; m]; m];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..m).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (kp, kq) = (row[p], row[q]);
                    row[p] = c * kp - s * kq;
                    row[q] = s * kp + c * kq;
                }
                for k in 0..m {
                    let (pk, qk) = (a[p][k], a[q][k]);
                    a[p][k] = c * pk - s * qk;
                    a[q][k] = s * pk + c * qk;
                }
                for row in v.iter_mut() {
                    let (kp, kq) = (row[p], row[q]);
                    row[p] = c * kp - s * kq;
                    row[q] = s * kp + c * kq;
                }
            }
        }
    }
    let best = (0..m).min_by(|&i, &j| a[i][i].total_cmp(&a[j][j])).unwrap();
    let vec = CVector::from_fn(n, |i, _| C64::new(v[i][best], v[i + n][best]));
    (a[best][best], vec)
}
