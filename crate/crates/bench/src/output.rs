//! Files written by the runner.
//!
//! Sweep CSV (schema version [`CSV_SCHEMA_VERSION`]), one row per sweep value
//! and mode:
//!
//! | column | meaning |
//! |---|---|
//! | `axis` | `snr-db` or `bandwidth-hz` |
//! | `sweep_value` | SNR in dB or bandwidth in Hz |
//! | `mode` | `full`, `known-gpm`, `known-squint` or `plain-music` |
//! | `rmse_theta_deg` | DOA RMSE in degrees |
//! | `rmse_gpm` | root mean gauge-aligned GPM error |
//! | `mean_iterations` | mean estimator iterations |
//! | `convergence_rate` | fraction of trials that met the threshold |
//! | `crb_theta_deg` | root mean bound in degrees, empty when disabled |
//! | `trials` | trials in the RMSE |
//! | `failed_trials` | trials where the estimator returned an error |
//! | `catastrophic_trials` | trials with an error above 10 degrees |
//!
//! Floats are written in shortest round-trip form, so parsing a CSV gives
//! back the exact records.

use std::fs;
use std::path::{Path, PathBuf};

use neat_core::metrics::to_degrees;
use neat_core::{
    array_gain_profile, subcarrier_grid, CMatrix, Combiner, CombinerKind, GpmVector, Scenario,
    Spectrum, SystemConfig, C64,
};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::experiment::ExperimentSpec;
use crate::runner::RmseRecord;

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.toml";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(BenchError::io(dir))
}

pub fn write_rmse_csv(path: &Path, records: &[RmseRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(BenchError::csv(path))?;
    for r in records {
        w.serialize(r).map_err(BenchError::csv(path))?;
    }
    w.flush().map_err(BenchError::io(path))
}

pub fn read_rmse_csv(path: &Path) -> Result<Vec<RmseRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(BenchError::csv(path))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(BenchError::csv(path))
}

/// Everything needed to repeat a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub csv_schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub core_version: String,
    /// Subcommand that produced the outputs.
    pub command: String,
    pub seed: u64,
    /// Files written next to the manifest.
    pub outputs: Vec<String>,
    pub spec: ExperimentSpec,
}

impl Manifest {
    pub fn new(command: &str, spec: &ExperimentSpec, outputs: Vec<String>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            csv_schema_version: CSV_SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            core_version: neat_core::VERSION.into(),
            command: command.into(),
            seed: spec.seed,
            outputs,
            spec: spec.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(BenchError::io(path))?;
        let m: Self = toml::from_str(&text).map_err(|source| BenchError::TomlParse {
            path: path.to_path_buf(),
            source,
        })?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(BenchError::Spec(format!(
                "manifest schema {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, toml::to_string(self)?).map_err(BenchError::io(path))
    }
}

/// Writes the sweep CSV and its manifest into `spec.output_dir`. Returns the
/// CSV path.
pub fn emit_sweep(command: &str, spec: &ExperimentSpec, records: &[RmseRecord]) -> Result<PathBuf> {
    if records.is_empty() {
        return Err(BenchError::Spec("no records to write".into()));
    }
    create_dir(&spec.output_dir)?;
    let csv_name = spec.sweep.csv_name();
    let csv_path = spec.output_dir.join(csv_name);
    write_rmse_csv(&csv_path, records)?;
    Manifest::new(command, spec, vec![csv_name.into()]).write(&spec.output_dir.join(MANIFEST_NAME))?;
    Ok(csv_path)
}

/// Spectrum over the grid: direction, angle, combined value and one column
/// per subcarrier when present.
pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(BenchError::csv(path))?;
    let parts = spectrum.per_subcarrier.as_deref().unwrap_or(&[]);
    let mut header = vec!["theta".to_string(), "angle_deg".into(), "combined".into()];
    header.extend((0..parts.len()).map(|m| format!("subcarrier_{m}")));
    w.write_record(&header).map_err(BenchError::csv(path))?;
    for (i, (&theta, &value)) in spectrum.grid.iter().zip(&spectrum.values).enumerate() {
        let mut row = vec![theta.to_string(), to_degrees(theta).to_string(), value.to_string()];
        row.extend(parts.iter().map(|p| p[i].to_string()));
        w.write_record(&row).map_err(BenchError::csv(path))?;
    }
    w.flush().map_err(BenchError::io(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPeak {
    pub subcarrier: usize,
    pub freq_hz: f64,
    pub eta: f64,
    pub peak_theta: f64,
    pub peak_deg: f64,
}

/// Array gain of a squint-unaware receiver towards `target_deg`, written as
/// `gain_profile.csv` (one column per subcarrier) and `gain_peaks.csv`.
/// Returns the per-subcarrier peaks.
pub fn emit_gain_profile(
    dir: &Path,
    cfg: &SystemConfig,
    target_deg: f64,
    grid_size: usize,
) -> Result<Vec<GainPeak>> {
    create_dir(dir)?;
    let target = target_deg.to_radians().sin();
    let grid = neat_core::direction_grid(grid_size);
    let profile = array_gain_profile(target, cfg, &grid)?;
    let sub = subcarrier_grid(cfg);

    let path = dir.join("gain_profile.csv");
    let mut w = csv::Writer::from_path(&path).map_err(BenchError::csv(&path))?;
    let mut header = vec!["theta".to_string(), "angle_deg".into()];
    header.extend((0..sub.len()).map(|m| format!("subcarrier_{m}")));
    w.write_record(&header).map_err(BenchError::csv(&path))?;
    for (i, &theta) in grid.iter().enumerate() {
        let mut row = vec![theta.to_string(), to_degrees(theta).to_string()];
        row.extend((0..sub.len()).map(|m| profile[(m, i)].to_string()));
        w.write_record(&row).map_err(BenchError::csv(&path))?;
    }
    w.flush().map_err(BenchError::io(&path))?;

    let peaks: Vec<GainPeak> = (0..sub.len())
        .map(|m| {
            let row = profile.row(m);
            let best = (0..grid.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0);
            GainPeak {
                subcarrier: m,
                freq_hz: sub.freqs[m],
                eta: sub.eta[m],
                peak_theta: grid[best],
                peak_deg: to_degrees(grid[best]),
            }
        })
        .collect();
    let path = dir.join("gain_peaks.csv");
    let mut w = csv::Writer::from_path(&path).map_err(BenchError::csv(&path))?;
    for p in &peaks {
        w.serialize(p).map_err(BenchError::csv(&path))?;
    }
    w.flush().map_err(BenchError::io(&path))?;
    Ok(peaks)
}

/// Complex numbers as `[re, im]`.
type Pair = [f64; 2];

fn pairs(v: impl Iterator<Item = C64>) -> Vec<Pair> {
    v.map(|c| [c.re, c.im]).collect()
}

fn matrix_rows(m: &CMatrix) -> Vec<Vec<Pair>> {
    m.row_iter().map(|r| pairs(r.iter().copied())).collect()
}

fn from_rows(rows: &[Vec<Pair>]) -> Result<CMatrix> {
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(BenchError::Spec("ragged matrix in scenario file".into()));
    }
    Ok(CMatrix::from_fn(rows.len(), cols, |i, j| {
        C64::new(rows[i][j][0], rows[i][j][1])
    }))
}

/// JSON form of a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub theta: Vec<f64>,
    pub snr_db: f64,
    pub sigma2: f64,
    /// `M x K`.
    pub beta: Vec<Vec<Pair>>,
    /// One row of `N` gains per subcarrier.
    pub gpm: Vec<Vec<Pair>>,
    pub combiner_kind: CombinerKind,
    pub rf_chains: usize,
    /// `N x N`.
    pub combiner: Vec<Vec<Pair>>,
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        Self {
            theta: s.theta.clone(),
            snr_db: s.snr_db,
            sigma2: s.sigma2,
            beta: matrix_rows(&s.beta),
            gpm: s.gpm.iter().map(|g| pairs(g.gains.iter().copied())).collect(),
            combiner_kind: s.combiner.kind(),
            rf_chains: s.combiner.rf_chains(),
            combiner: matrix_rows(s.combiner.matrix()),
        }
    }
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        let gpm = self
            .gpm
            .iter()
            .enumerate()
            .map(|(m, g)| GpmVector {
                subcarrier: m,
                gains: neat_core::CVector::from_iterator(g.len(), g.iter().map(|p| C64::new(p[0], p[1]))),
            })
            .collect();
        Ok(Scenario {
            theta: self.theta,
            beta: from_rows(&self.beta)?,
            gpm,
            combiner: Combiner::from_matrix(from_rows(&self.combiner)?, self.rf_chains, self.combiner_kind)?,
            sigma2: self.sigma2,
            snr_db: self.snr_db,
        })
    }
}

pub fn save_scenario(path: &Path, scenario: &Scenario) -> Result<()> {
    let text = serde_json::to_string_pretty(&ScenarioFile::from(scenario)).map_err(BenchError::json(path))?;
    fs::write(path, text).map_err(BenchError::io(path))
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(BenchError::io(path))?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(BenchError::json(path))?;
    file.into_scenario()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(BenchError::json(path))?;
    fs::write(path, text).map_err(BenchError::io(path))
}
