//! Experiment description read from TOML.

use std::path::{Path, PathBuf};

use neat_core::metrics::Pairing;
use neat_core::{CrbMethod, ModeTag, NeatOptions, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Sweep axis and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Sweep {
    /// Receiver SNR in dB; the bandwidth stays at `system.bandwidth_hz`.
    Snr { values_db: Vec<f64> },
    /// Total bandwidth in Hz; the SNR stays at `snr_db`.
    Bandwidth { values_hz: Vec<f64> },
}

impl Sweep {
    pub fn values(&self) -> &[f64] {
        match self {
            Sweep::Snr { values_db } => values_db,
            Sweep::Bandwidth { values_hz } => values_hz,
        }
    }

    /// Column label of the sweep value in the CSV output.
    pub fn axis_name(&self) -> &'static str {
        match self {
            Sweep::Snr { .. } => "snr-db",
            Sweep::Bandwidth { .. } => "bandwidth-hz",
        }
    }

    /// File stem of the sweep's CSV.
    pub fn csv_name(&self) -> &'static str {
        match self {
            Sweep::Snr { .. } => "rmse_vs_snr.csv",
            Sweep::Bandwidth { .. } => "rmse_vs_bandwidth.csv",
        }
    }
}

fn default_snr_db() -> f64 {
    0.0
}

fn default_crb_method() -> CrbMethod {
    CrbMethod::ClosedForm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Free-form label copied into the manifest.
    #[serde(default)]
    pub name: String,
    /// Master seed of every trial.
    pub seed: u64,
    /// Monte-Carlo trials per sweep point.
    pub trials: usize,
    /// GPM quality in dB; `inf` gives ideal gains.
    pub snr_g_db: f64,
    /// Receiver SNR used when the sweep runs over bandwidth.
    #[serde(default = "default_snr_db")]
    pub snr_db: f64,
    pub modes: Vec<ModeTag>,
    /// Attach a Cramér-Rao bound to every sweep point.
    #[serde(default)]
    pub crb: bool,
    #[serde(default = "default_crb_method")]
    pub crb_method: CrbMethod,
    #[serde(default)]
    pub pairing: Pairing,
    /// Leave trials with an error above 10 degrees out of the RMSE.
    /// Diagnostics only.
    #[serde(default)]
    pub trim_catastrophic: bool,
    pub output_dir: PathBuf,
    pub sweep: Sweep,
    pub system: SystemConfig,
    #[serde(default)]
    pub estimator: NeatOptions,
}

impl ExperimentSpec {
    /// RMSE against SNR at the reduced geometry.
    pub fn snr_sweep_desk() -> Self {
        Self {
            name: "rmse-vs-snr".into(),
            seed: 1,
            trials: 100,
            snr_g_db: 10.0,
            snr_db: 0.0,
            modes: ModeTag::ALL.to_vec(),
            crb: true,
            crb_method: CrbMethod::ClosedForm,
            pairing: Pairing::Sorted,
            trim_catastrophic: false,
            output_dir: PathBuf::from("out/rmse-vs-snr"),
            sweep: Sweep::Snr {
                values_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            },
            system: SystemConfig::desk_defaults(),
            estimator: NeatOptions::default(),
        }
    }

    /// RMSE against bandwidth at the reduced geometry.
    pub fn bandwidth_sweep_desk() -> Self {
        Self {
            name: "rmse-vs-bandwidth".into(),
            output_dir: PathBuf::from("out/rmse-vs-bandwidth"),
            sweep: Sweep::Bandwidth {
                values_hz: (0..=6).map(|i| i as f64 * 5e9).collect(),
            },
            ..Self::snr_sweep_desk()
        }
    }

    /// Switches to the full-size geometry. The trigonometric spectrum keeps
    /// a trial to a few seconds there.
    pub fn with_full_scale_geometry(mut self) -> Self {
        self.system = SystemConfig::full_scale_defaults();
        self.estimator.spectrum_method = neat_core::SpectrumMethod::Trigonometric;
        self.trials = 500;
        self
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|source| BenchError::TomlParse {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(BenchError::io(path))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// System configuration and receiver SNR at one sweep value.
    pub fn point(&self, value: f64) -> (SystemConfig, f64) {
        match self.sweep {
            Sweep::Snr { .. } => (self.system.clone(), value),
            Sweep::Bandwidth { .. } => (
                SystemConfig {
                    bandwidth_hz: value,
                    ..self.system.clone()
                },
                self.snr_db,
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BenchError::Spec(msg));
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        let values = self.sweep.values();
        if values.is_empty() {
            return fail("sweep has no values".into());
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return fail(format!("sweep value {v} is not finite"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return fail("sweep values must be strictly increasing".into());
        }
        if self.modes.is_empty() {
            return fail("no estimator modes selected".into());
        }
        let mut modes = self.modes.clone();
        modes.sort();
        modes.dedup();
        if modes.len() != self.modes.len() {
            return fail("estimator modes listed twice".into());
        }
        if self.snr_g_db.is_nan() {
            return fail("snr_g_db is NaN".into());
        }
        if !self.snr_db.is_finite() {
            return fail(format!("snr_db {} is not finite", self.snr_db));
        }
        for &v in values {
            self.point(v).0.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for spec in [
            ExperimentSpec::snr_sweep_desk(),
            ExperimentSpec::bandwidth_sweep_desk(),
            ExperimentSpec::snr_sweep_desk().with_full_scale_geometry(),
        ] {
            spec.validate().unwrap();
            let text = spec.to_toml().unwrap();
            let back = ExperimentSpec::from_toml(&text, Path::new("x.toml")).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn infinite_gain_snr_survives_toml() {
        let spec = ExperimentSpec {
            snr_g_db: f64::INFINITY,
            ..ExperimentSpec::snr_sweep_desk()
        };
        let back = ExperimentSpec::from_toml(&spec.to_toml().unwrap(), Path::new("x")).unwrap();
        assert_eq!(back.snr_g_db, f64::INFINITY);
    }

    #[test]
    fn rejects_bad_specs() {
        let base = ExperimentSpec::snr_sweep_desk();
        let cases = [
            ExperimentSpec { trials: 0, ..base.clone() },
            ExperimentSpec { sweep: Sweep::Snr { values_db: vec![] }, ..base.clone() },
            ExperimentSpec { sweep: Sweep::Snr { values_db: vec![10.0, 0.0] }, ..base.clone() },
            ExperimentSpec { modes: vec![], ..base.clone() },
            ExperimentSpec { modes: vec![ModeTag::Full, ModeTag::Full], ..base.clone() },
            ExperimentSpec {
                sweep: Sweep::Bandwidth { values_hz: vec![0.0, 1e15] },
                ..base.clone()
            },
        ];
        for spec in cases {
            assert!(spec.validate().is_err(), "{spec:?}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = ExperimentSpec::snr_sweep_desk().to_toml().unwrap();
        text.insert_str(0, "colour = \"blue\"\n");
        assert!(ExperimentSpec::from_toml(&text, Path::new("x")).is_err());
    }

    #[test]
    fn bandwidth_point_overrides_system() {
        let spec = ExperimentSpec::bandwidth_sweep_desk();
        let (cfg, snr) = spec.point(10e9);
        assert_eq!(cfg.bandwidth_hz, 10e9);
        assert_eq!(snr, spec.snr_db);
    }
}
