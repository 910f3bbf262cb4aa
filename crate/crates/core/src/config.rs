use alloc::format;
use serde::{Deserialize, Serialize};

use crate::array::CombinerKind;
use crate::{Error, Result};

/// Static geometry and waveform parameters of the monostatic base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Total bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Number of subcarriers.
    pub subcarriers: usize,
    /// Number of antennas of the uniform linear array.
    pub antennas: usize,
    /// Number of RF chains, i.e. rows acquired per time slot.
    pub rf_chains: usize,
    /// Snapshots per subcarrier.
    pub snapshots: usize,
    /// Number of far-field targets.
    pub targets: usize,
    /// Transmit power (linear).
    pub power: f64,
    /// Number of points of the direction grid over `[-1, 1]`.
    pub grid_size: usize,
    /// Iteration cap of the alternating estimator.
    pub max_iters: usize,
    /// Convergence threshold on the summed DOA change, in spatial units.
    pub eps_bar: f64,
    #[serde(default)]
    pub combiner: CombinerKind,
}

impl SystemConfig {
    /// The operating point of the reference experiments: 300 GHz carrier,
    /// 30 GHz bandwidth, 32 subcarriers, 128 antennas, 8 RF chains,
    /// 500 snapshots, two targets and a `2^14` point grid.
    pub fn full_scale_defaults() -> Self {
        let subcarriers = 32;
        let antennas = 128;
        Self {
            carrier_hz: 300e9,
            bandwidth_hz: 30e9,
            subcarriers,
            antennas,
            rf_chains: 8,
            snapshots: 500,
            targets: 2,
            power: unit_rho_power(subcarriers, antennas),
            grid_size: 1 << 14,
            max_iters: 20,
            eps_bar: 1e-4,
            combiner: CombinerKind::RandomPhase,
        }
    }

    /// Reduced configuration that runs in seconds per trial.
    pub fn desk_defaults() -> Self {
        let subcarriers = 8;
        let antennas = 32;
        Self {
            subcarriers,
            antennas,
            power: unit_rho_power(subcarriers, antennas),
            snapshots: 256,
            grid_size: 1 << 12,
            ..Self::full_scale_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return fail(format!("carrier frequency must be positive, got {}", self.carrier_hz));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz >= 0.0) {
            return fail(format!("bandwidth must be non-negative, got {}", self.bandwidth_hz));
        }
        if self.carrier_hz <= self.bandwidth_hz / 2.0 {
            return fail(format!(
                "carrier {} Hz must exceed half the bandwidth {} Hz",
                self.carrier_hz, self.bandwidth_hz
            ));
        }
        if self.subcarriers == 0 {
            return fail("at least one subcarrier is required".into());
        }
        if self.antennas == 0 || self.rf_chains == 0 {
            return fail("antenna and RF chain counts must be positive".into());
        }
        if self.antennas % self.rf_chains != 0 {
            return Err(Error::IndivisibleSubarray {
                antennas: self.antennas,
                rf_chains: self.rf_chains,
            });
        }
        if self.targets == 0 {
            return fail("at least one target is required".into());
        }
        if self.antennas <= self.targets {
            return Err(Error::NotIdentifiable(format!(
                "noise subspace is empty: {} antennas for {} targets",
                self.antennas, self.targets
            )));
        }
        if self.snapshots < self.targets {
            return Err(Error::NotIdentifiable(format!(
                "{} snapshots cannot resolve {} targets",
                self.snapshots, self.targets
            )));
        }
        if self.grid_size < 2 {
            return fail(format!("grid needs at least 2 points, got {}", self.grid_size));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return fail(format!("transmit power must be positive, got {}", self.power));
        }
        if self.max_iters == 0 {
            return fail("max_iters must be at least 1".into());
        }
        if !(self.eps_bar.is_finite() && self.eps_bar >= 0.0) {
            return fail(format!("eps_bar must be non-negative, got {}", self.eps_bar));
        }
        Ok(())
    }

    /// Number of acquisition time slots `N / N_RF`.
    pub fn slots(&self) -> usize {
        self.antennas / self.rf_chains
    }

    /// Normalised received power `P_r / (M^2 N^2)`.
    pub fn rho(&self) -> f64 {
        let mn = (self.subcarriers * self.antennas) as f64;
        self.power / (mn * mn)
    }

    /// Noise variance for a given SNR in dB, `rho * 10^(-snr/10)`.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        self.rho() * libm::pow(10.0, -snr_db / 10.0)
    }

    /// Per-entry variance of the probing signal, `P_r / (M N)`.
    pub fn probing_variance(&self) -> f64 {
        self.power / (self.subcarriers * self.antennas) as f64
    }

    /// Spacing of the uniform direction grid.
    pub fn grid_step(&self) -> f64 {
        2.0 / (self.grid_size - 1) as f64
    }
}

/// Transmit power that makes `rho = P_r / (M^2 N^2)` equal to one.
pub fn unit_rho_power(subcarriers: usize, antennas: usize) -> f64 {
    let mn = (subcarriers * antennas) as f64;
    mn * mn
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SystemConfig::full_scale_defaults().validate().unwrap();
        SystemConfig::desk_defaults().validate().unwrap();
        assert_eq!(SystemConfig::full_scale_defaults().slots(), 16);
        assert!((SystemConfig::full_scale_defaults().rho() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_indivisible_rf_chains() {
        let cfg = SystemConfig { rf_chains: 5, ..SystemConfig::desk_defaults() };
        assert_eq!(
            cfg.validate(),
            Err(Error::IndivisibleSubarray { antennas: 32, rf_chains: 5 })
        );
    }

    #[test]
    fn rejects_unidentifiable() {
        let cfg = SystemConfig { antennas: 8, rf_chains: 8, targets: 8, ..SystemConfig::desk_defaults() };
        assert!(matches!(cfg.validate(), Err(Error::NotIdentifiable(_))));
        let cfg = SystemConfig { snapshots: 1, ..SystemConfig::desk_defaults() };
        assert!(matches!(cfg.validate(), Err(Error::NotIdentifiable(_))));
    }

    #[test]
    fn rejects_carrier_below_half_band() {
        let cfg = SystemConfig { carrier_hz: 10e9, bandwidth_hz: 30e9, ..SystemConfig::desk_defaults() };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn noise_variance_follows_snr() {
        let cfg = SystemConfig::desk_defaults();
        assert!((cfg.noise_variance(0.0) - 1.0).abs() < 1e-12);
        assert!((cfg.noise_variance(10.0) - 0.1).abs() < 1e-12);
        assert!((cfg.noise_variance(-10.0) - 10.0).abs() < 1e-9);
    }
}
