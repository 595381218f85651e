use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nvsim::config::RunConfig;
use nvsim::dsl::{parse_quantity, Dimension, GridKind};
use nvsim::kinetics::Laser;
use nvsim::readout::ReadoutModel;
use nvsim::recipes::{
    self, FitRecipe, KineticsRecipe, ManifoldSelection, Map2dRecipe, PowerDepRecipe, RabiRecipe, Recipe, RecipeError,
    RunRecipe, SpectrumRecipe, Transfer,
};
use nvsim::spin::{HalfInt, IsotopeKind};

/// Bare numbers are read in the default unit named in each flag's help;
/// values with a unit suffix (`120us`, `2.5MHz`, `3mW`) are converted.
#[derive(Parser)]
#[command(name = "nvsim", version, about = "NV charge-state and nuclear-spin simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file (else $NVSIM_CONFIG, else built-in defaults)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shots per grid point
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Readout and initialization fidelity (Bernoulli mode)
    #[arg(long, global = true)]
    fidelity: Option<f64>,
    #[arg(long, global = true)]
    isotope: Option<IsotopeKind>,
    /// Magnetic field, T
    #[arg(long = "field-T", global = true, value_parser = field)]
    field_t: Option<f64>,
    /// Output CSV path (default <output_dir>/<command>.csv)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// NMR spectrum: flip fraction against rf frequency
    Spectrum {
        /// Start frequency, MHz
        #[arg(long, value_parser = mhz, default_value = "0.5")]
        fmin: f64,
        /// Stop frequency, MHz
        #[arg(long, value_parser = mhz, default_value = "8")]
        fmax: f64,
        #[arg(long, default_value_t = 1501)]
        points: usize,
        /// all, bright or dark
        #[arg(long, default_value = "all")]
        manifolds: ManifoldSelection,
        /// Rabi frequency, kHz
        #[arg(long, value_parser = khz, default_value = "25")]
        rabi: f64,
        /// rf pulse length, s
        #[arg(long, value_parser = seconds, default_value = "20us")]
        duration: f64,
        /// Initialized nuclear projection, e.g. 0 or 1/2
        #[arg(long)]
        target: Option<HalfInt>,
        #[command(flatten)]
        common: Common,
    },
    /// Rabi oscillation: flip fraction against rf pulse length
    Rabi {
        /// Drive frequency, MHz (default: bright line of the target)
        #[arg(long, value_parser = mhz)]
        frequency: Option<f64>,
        /// Rabi frequency, kHz
        #[arg(long, value_parser = khz, default_value = "25")]
        rabi: f64,
        /// Longest pulse, s
        #[arg(long, value_parser = seconds, default_value = "100us")]
        t_max: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[arg(long)]
        target: Option<HalfInt>,
        /// Fix the bright charge share instead of the green steady state
        #[arg(long)]
        p_bright: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Charge populations under a laser pulse
    Kinetics {
        #[arg(long, default_value = "red")]
        laser: Laser,
        /// Laser power, mW (default from config)
        #[arg(long, value_parser = milliwatts)]
        power: Option<f64>,
        /// Recalibrate the red law to this decay time, s
        #[arg(long, value_parser = seconds)]
        tau_target: Option<f64>,
        /// Trace length, s (default five relaxation times)
        #[arg(long, value_parser = seconds)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Add a Poisson counts column with this many photons in total
        #[arg(long)]
        noise_counts: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Transfer rate against laser power
    Powerdep {
        #[arg(long, default_value = "red")]
        laser: Laser,
        /// bright-to-dark or dark-to-bright
        #[arg(long, default_value = "bright-to-dark")]
        direction: Transfer,
        /// Lowest power, mW
        #[arg(long, value_parser = milliwatts, default_value = "1e-3")]
        pmin: f64,
        /// Highest power, mW
        #[arg(long, value_parser = milliwatts, default_value = "1e3")]
        pmax: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Spectrum against red pre-pulse length, as a matrix
    Map2d {
        #[arg(long, value_parser = mhz, default_value = "1.55")]
        fmin: f64,
        #[arg(long, value_parser = mhz, default_value = "2.65")]
        fmax: f64,
        #[arg(long, default_value_t = 111)]
        fpoints: usize,
        /// Shortest red pulse, s
        #[arg(long, value_parser = seconds, default_value = "0")]
        red_min: f64,
        /// Longest red pulse, s
        #[arg(long, value_parser = seconds, default_value = "1ms")]
        red_max: f64,
        #[arg(long, default_value_t = 21)]
        red_points: usize,
        /// Logarithmic red-length grid
        #[arg(long)]
        red_log: bool,
        /// Red power, mW (default from config)
        #[arg(long, value_parser = milliwatts)]
        red_power: Option<f64>,
        /// Rabi frequency, kHz
        #[arg(long, value_parser = khz, default_value = "25")]
        rabi: f64,
        /// rf pulse length, s
        #[arg(long, value_parser = seconds, default_value = "100us")]
        duration: f64,
        #[arg(long)]
        target: Option<HalfInt>,
        #[command(flatten)]
        common: Common,
    },
    /// Execute a .seq pulse program, expanding its sweeps
    Run {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a model (exp, lorentzian, damped_rabi, saturable, rabi_line:<t_s>) to x,y CSV
    Fit {
        model: String,
        csv: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate the outputs of a manifest and check their digests
    Replay {
        manifest: PathBuf,
        /// Where to write the regenerated CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn with_default_unit(s: &str, dim: Dimension, scale: f64) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) => Ok(v * scale),
        Err(_) => parse_quantity(s, dim).map_err(|e| e.message),
    }
}

fn mhz(s: &str) -> Result<f64, String> {
    with_default_unit(s, Dimension::Frequency, 1e6).map(|hz| hz / 1e6)
}

fn khz(s: &str) -> Result<f64, String> {
    with_default_unit(s, Dimension::Frequency, 1e3)
}

fn seconds(s: &str) -> Result<f64, String> {
    with_default_unit(s, Dimension::Time, 1.0)
}

fn milliwatts(s: &str) -> Result<f64, String> {
    with_default_unit(s, Dimension::Power, 1e-3).map(|w| w * 1e3)
}

fn field(s: &str) -> Result<f64, String> {
    with_default_unit(s, Dimension::Field, 1.0)
}

fn resolve(c: &Common) -> Result<RunConfig, RecipeError> {
    let mut cfg = RunConfig::resolve(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.shots {
        cfg.n_shots = n;
    }
    if let Some(f) = c.fidelity {
        cfg.readout = ReadoutModel::bernoulli(f).map_err(|e| RecipeError::Usage(e.to_string()))?;
    }
    if let Some(i) = c.isotope {
        cfg.spin.isotope = i;
    }
    if let Some(b) = c.field_t {
        cfg.spin.field_t = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<(), RecipeError> {
    let (recipe, common, mut cfg) = match cli.command {
        Command::Replay { manifest, out } => {
            let report = recipes::replay(&manifest, out.as_deref())?;
            if let Some(note) = report.version_note {
                eprintln!("note: {note}");
            }
            println!("{}", report.csv_path.display());
            return Ok(());
        }
        Command::Spectrum { fmin, fmax, points, manifolds, rabi, duration, target, common } => {
            let cfg = resolve(&common)?;
            let r = SpectrumRecipe { fmin_mhz: fmin, fmax_mhz: fmax, points, rabi_hz: rabi, duration_s: duration, manifolds, target };
            (Recipe::Spectrum(r), common, cfg)
        }
        Command::Rabi { frequency, rabi, t_max, points, target, p_bright, common } => {
            let cfg = resolve(&common)?;
            let r = RabiRecipe { frequency_mhz: frequency, rabi_hz: rabi, t_max_s: t_max, points, target, p_bright };
            (Recipe::Rabi(r), common, cfg)
        }
        Command::Kinetics { laser, power, tau_target, t_max, points, noise_counts, common } => {
            let cfg = resolve(&common)?;
            let r = KineticsRecipe {
                laser,
                power_mw: power,
                tau_target_s: tau_target,
                t_max_s: t_max,
                points,
                noise_total_counts: noise_counts,
                ..KineticsRecipe::default()
            };
            (Recipe::Kinetics(r), common, cfg)
        }
        Command::Powerdep { laser, direction, pmin, pmax, points, common } => {
            let cfg = resolve(&common)?;
            (Recipe::Powerdep(PowerDepRecipe { laser, direction, pmin_mw: pmin, pmax_mw: pmax, points }), common, cfg)
        }
        Command::Map2d { fmin, fmax, fpoints, red_min, red_max, red_points, red_log, red_power, rabi, duration, target, common } => {
            let mut cfg = resolve(&common)?;
            if let Some(p) = red_power {
                cfg.lasers.red_power_mw = p;
            }
            let r = Map2dRecipe {
                fmin_mhz: fmin,
                fmax_mhz: fmax,
                fpoints,
                red_min_s: red_min,
                red_max_s: red_max,
                red_points,
                red_grid: if red_log { GridKind::Log } else { GridKind::Lin },
                rabi_hz: rabi,
                rf_duration_s: duration,
                target,
            };
            (Recipe::Map2d(r), common, cfg)
        }
        Command::Run { file, common } => {
            let cfg = resolve(&common)?;
            let program = nvsim::io::read_text(&file)?;
            (Recipe::Run(RunRecipe { source_name: file.display().to_string(), program }), common, cfg)
        }
        Command::Fit { model, csv, common } => {
            let cfg = resolve(&common)?;
            let r: FitRecipe = recipes::fit_recipe(&model, &csv)?;
            (Recipe::Fit(r), common, cfg)
        }
    };
    let csv_path = match &common.out {
        Some(p) => p.clone(),
        None => cfg.output_dir.join(format!("{recipe}.csv")),
    };
    // The manifest records where outputs went.
    if common.out.is_some() {
        cfg.output_dir = csv_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    }
    recipes::run_to_files(&recipe, &cfg, &csv_path)?;
    println!("{}", csv_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
