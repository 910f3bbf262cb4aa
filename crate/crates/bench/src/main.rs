use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use neat_bench::experiment::{ExperimentSpec, Sweep};
use neat_bench::output::{emit_gain_profile, MANIFEST_NAME};
use neat_bench::{emit_sweep, rerun, run_sweep, single_trial, BenchError, Manifest};
use neat_core::metrics::Pairing;
use neat_core::{CombinerKind, CrbMethod, GpmSolveMode, ModeTag, SpectrumMethod, SystemConfig};

#[derive(Parser, Debug)]
#[command(name = "neat-bench", version, about = "Wideband DOA / gain-phase calibration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// RMSE against receiver SNR.
    SweepSnr(SweepArgs),
    /// RMSE against bandwidth.
    SweepBandwidth(SweepArgs),
    /// Per-subcarrier array gain of a squint-unaware receiver.
    GainProfile(GainArgs),
    /// One trial with spectra, convergence traces and the scenario dump.
    SingleTrial(SingleArgs),
    /// Repeat a sweep from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Write into this directory instead of the recorded one.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print the default experiment file of a sweep.
    PrintConfig {
        #[arg(value_enum)]
        sweep: SweepKind,
        #[arg(long, value_enum, default_value_t = Preset::Desk)]
        preset: Preset,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    Snr,
    Bandwidth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// N=32, M=8, T=256, grid 2^12.
    Desk,
    /// N=128, M=32, T=500, grid 2^14. Long-running.
    Full,
}

fn parse_mode(s: &str) -> Result<ModeTag, String> {
    s.parse::<ModeTag>().map_err(|e| e.to_string())
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Experiment file (TOML). Flags below override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defaults to use when no experiment file is given.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    snr_g_db: Option<f64>,
    /// Fixed receiver SNR of bandwidth sweeps.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    /// Sweep values (dB or Hz), comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Estimator modes, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    modes: Option<Vec<ModeTag>>,
    #[arg(long)]
    crb: Option<bool>,
    #[arg(long, value_enum)]
    crb_method: Option<CrbMethodArg>,
    #[arg(long, value_enum)]
    pairing: Option<PairingArg>,
    #[arg(long)]
    trim_catastrophic: Option<bool>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,

    #[arg(long)]
    carrier_hz: Option<f64>,
    #[arg(long)]
    bandwidth_hz: Option<f64>,
    #[arg(long)]
    subcarriers: Option<usize>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long)]
    rf_chains: Option<usize>,
    #[arg(long)]
    snapshots: Option<usize>,
    #[arg(long)]
    targets: Option<usize>,
    /// Transmit power; when only the geometry changes it is rescaled to
    /// keep unit normalised power.
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    eps_bar: Option<f64>,
    #[arg(long, value_enum)]
    combiner: Option<CombinerArg>,

    #[arg(long, value_enum)]
    spectrum_method: Option<SpectrumArg>,
    #[arg(long, value_enum)]
    gpm_solve: Option<GpmSolveArg>,
    #[arg(long)]
    refine_peaks: Option<bool>,

    /// Worker threads (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CrbMethodArg {
    ClosedForm,
    FimInverse,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PairingArg {
    Sorted,
    Optimal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CombinerArg {
    RandomPhase,
    ScaledUnitary,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SpectrumArg {
    Direct,
    Trigonometric,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GpmSolveArg {
    Direct,
    Residual,
}

impl Overrides {
    fn base(&self, kind: SweepKind) -> Result<ExperimentSpec, BenchError> {
        if let Some(path) = &self.config {
            return ExperimentSpec::load(path);
        }
        let spec = match kind {
            SweepKind::Snr => ExperimentSpec::snr_sweep_desk(),
            SweepKind::Bandwidth => ExperimentSpec::bandwidth_sweep_desk(),
        };
        Ok(match self.preset.unwrap_or(Preset::Desk) {
            Preset::Desk => spec,
            Preset::Full => spec.with_full_scale_geometry(),
        })
    }

    fn apply_system(&self, sys: &mut SystemConfig) {
        let geometry = (sys.subcarriers, sys.antennas);
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { sys.$field = v; }
            )*};
        }
        set!(carrier_hz, bandwidth_hz, subcarriers, antennas, rf_chains, snapshots, targets, grid_size, max_iters, eps_bar);
        if let Some(p) = self.power {
            sys.power = p;
        } else if geometry != (sys.subcarriers, sys.antennas)
            && sys.power == neat_core::config::unit_rho_power(geometry.0, geometry.1)
        {
            sys.power = neat_core::config::unit_rho_power(sys.subcarriers, sys.antennas);
        }
        if let Some(c) = self.combiner {
            sys.combiner = match c {
                CombinerArg::RandomPhase => CombinerKind::RandomPhase,
                CombinerArg::ScaledUnitary => CombinerKind::ScaledUnitary,
            };
        }
    }

    fn resolve(&self, kind: SweepKind) -> Result<ExperimentSpec, BenchError> {
        let mut spec = self.base(kind)?;
        let expected_axis = match kind {
            SweepKind::Snr => "snr-db",
            SweepKind::Bandwidth => "bandwidth-hz",
        };
        if spec.sweep.axis_name() != expected_axis {
            return Err(BenchError::Spec(format!(
                "experiment file sweeps {} but the command expects {expected_axis}",
                spec.sweep.axis_name()
            )));
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = self.snr_g_db {
            spec.snr_g_db = v;
        }
        if let Some(v) = self.snr_db {
            spec.snr_db = v;
        }
        if let Some(values) = &self.values {
            spec.sweep = match kind {
                SweepKind::Snr => Sweep::Snr { values_db: values.clone() },
                SweepKind::Bandwidth => Sweep::Bandwidth { values_hz: values.clone() },
            };
        }
        if let Some(m) = &self.modes {
            spec.modes = m.clone();
        }
        if let Some(v) = self.crb {
            spec.crb = v;
        }
        if let Some(v) = self.crb_method {
            spec.crb_method = match v {
                CrbMethodArg::ClosedForm => CrbMethod::ClosedForm,
                CrbMethodArg::FimInverse => CrbMethod::FimInverse,
            };
        }
        if let Some(v) = self.pairing {
            spec.pairing = match v {
                PairingArg::Sorted => Pairing::Sorted,
                PairingArg::Optimal => Pairing::Optimal,
            };
        }
        if let Some(v) = self.trim_catastrophic {
            spec.trim_catastrophic = v;
        }
        if let Some(v) = &self.output_dir {
            spec.output_dir = v.clone();
        }
        if let Some(v) = &self.name {
            spec.name = v.clone();
        }
        self.apply_system(&mut spec.system);
        if let Some(v) = self.spectrum_method {
            spec.estimator.spectrum_method = match v {
                SpectrumArg::Direct => SpectrumMethod::Direct,
                SpectrumArg::Trigonometric => SpectrumMethod::Trigonometric,
            };
        }
        if let Some(v) = self.gpm_solve {
            spec.estimator.gpm_solve = match v {
                GpmSolveArg::Direct => GpmSolveMode::Direct,
                GpmSolveArg::Residual => GpmSolveMode::Residual,
            };
        }
        if let Some(v) = self.refine_peaks {
            spec.estimator.refine_peaks = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct GainArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Physical angle of the target in degrees.
    #[arg(long, default_value_t = 60.0, allow_hyphen_values = true)]
    target_deg: f64,
    /// Points of the direction grid.
    #[arg(long, default_value_t = 20_001)]
    points: usize,
}

#[derive(Args, Debug)]
struct SingleArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Receiver SNR in dB.
    #[arg(long = "at-snr-db", default_value_t = 10.0, allow_hyphen_values = true)]
    at_snr_db: f64,
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Save only the scenario to this JSON file as well.
    #[arg(long)]
    dump_scenario: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::SweepSnr(args) => sweep("sweep-snr", SweepKind::Snr, &args.overrides),
        Command::SweepBandwidth(args) => sweep("sweep-bandwidth", SweepKind::Bandwidth, &args.overrides),
        Command::GainProfile(args) => {
            let spec = args.overrides.resolve(SweepKind::Snr)?;
            let dir = args
                .overrides
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("out/gain-profile"));
            let peaks = emit_gain_profile(&dir, &spec.system, args.target_deg, args.points)?;
            for p in &peaks {
                println!(
                    "subcarrier {:>3}  f = {:>8.3} GHz  peak at {:>8.4} deg",
                    p.subcarrier,
                    p.freq_hz / 1e9,
                    p.peak_deg
                );
            }
            if let (Some(first), Some(last)) = (peaks.first(), peaks.last()) {
                println!("peak spread {:.3} deg", (last.peak_deg - first.peak_deg).abs());
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::SingleTrial(args) => {
            let mut spec = args.overrides.resolve(SweepKind::Snr)?;
            spec.sweep = Sweep::Snr { values_db: vec![args.at_snr_db] };
            if args.overrides.output_dir.is_none() {
                spec.output_dir = PathBuf::from("out/single-trial");
            }
            let report = single_trial(&spec, args.at_snr_db, args.trial, &spec.output_dir)?;
            if let Some(path) = &args.dump_scenario {
                let scen = report.scenario.clone().into_scenario()?;
                neat_bench::output::save_scenario(path, &scen)?;
            }
            let truth: Vec<f64> = report.scenario.theta.iter().map(|t| neat_core::metrics::to_degrees(*t)).collect();
            println!("truth (deg): {truth:.4?}");
            for m in &report.modes {
                let est: Vec<f64> = m.theta_hat.iter().map(|t| neat_core::metrics::to_degrees(*t)).collect();
                println!(
                    "{:<13} est (deg): {est:.4?}  iterations {}  converged {}  eps {:?}",
                    m.mode.as_str(),
                    m.iterations,
                    m.converged,
                    m.eps_trace.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
                );
                if let Some(f) = &m.failure {
                    println!("{:<13} failed: {f}", m.mode.as_str());
                }
            }
            println!("wrote {}", spec.output_dir.display());
            Ok(())
        }
        Command::Rerun { manifest, output_dir } => {
            let m = Manifest::load(&manifest)?;
            let csv = rerun(&m, output_dir.as_deref())?;
            println!("wrote {}", csv.display());
            Ok(())
        }
        Command::PrintConfig { sweep, preset } => {
            let spec = Overrides {
                preset: Some(preset),
                ..Default::default()
            }
            .base(sweep)?;
            print!("{}", spec.to_toml()?);
            Ok(())
        }
    }
}

fn sweep(command: &str, kind: SweepKind, overrides: &Overrides) -> Result<(), BenchError> {
    let spec = overrides.resolve(kind)?;
    let records = match overrides.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Spec(e.to_string()))?
            .install(|| run_sweep(&spec))?,
        None => run_sweep(&spec)?,
    };
    let csv = emit_sweep(command, &spec, &records)?;
    for r in &records {
        println!(
            "{} = {:>10}  {:<13} rmse {:>10.5} deg  crb {:>10}  iters {:>5.2}  converged {:>5.1}%",
            r.axis,
            r.sweep_value,
            r.mode.as_str(),
            r.rmse_theta_deg,
            r.crb_theta_deg.map_or("-".into(), |c| format!("{c:.5}")),
            r.mean_iterations,
            100.0 * r.convergence_rate
        );
    }
    println!("wrote {} and {}", csv.display(), spec.output_dir.join(MANIFEST_NAME).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
