//! Figure recipes behind the `nvsim` subcommands, their manifests and replay.
//!
//! A [`Manifest`] stores the recipe, the fully resolved [`RunConfig`] (seed
//! included), the crate version and the digest of every file written, so the
//! same binary regenerates the CSV bit for bit.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, RunConfig};
use crate::dsl::{self, GridKind, ParseError, SweepDecl};
use crate::fit::{self, FitError, ModelFunction, ModelKind};
use crate::io::{self, IoError, Table};
use crate::kinetics::{evolve_populations, rate, ChargePopulations, Laser};
use crate::qnd::{self, QndError, RfPulse};
use crate::spin::{HalfInt, IsotopeKind};

pub const TOOL: &str = "nvsim";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RecipeError {
    #[error("{0}")]
    Usage(String),
    #[error("{source_name}: {error}")]
    Parse { source_name: String, error: ParseError },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] QndError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("replay of {file} differs: expected sha256 {expected}, got {actual}")]
    ReplayMismatch { file: String, expected: String, actual: String },
}

impl RecipeError {
    /// 2 for usage, configuration and parse errors, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            RecipeError::Usage(_) | RecipeError::Parse { .. } | RecipeError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> RecipeError {
    RecipeError::Usage(msg.into())
}

/// Which charge states the spectrum starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldSelection {
    /// Green steady state.
    All,
    Bright,
    Dark,
}

impl FromStr for ManifoldSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" | "bright,dark" | "dark,bright" => Ok(Self::All),
            "bright" => Ok(Self::Bright),
            "dark" => Ok(Self::Dark),
            other => Err(format!("unknown manifold selection `{other}` (expected all, bright or dark)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transfer {
    BrightToDark,
    DarkToBright,
}

impl FromStr for Transfer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bright-to-dark" | "bright_to_dark" | "ionization" => Ok(Self::BrightToDark),
            "dark-to-bright" | "dark_to_bright" | "recharge" => Ok(Self::DarkToBright),
            other => Err(format!("unknown direction `{other}` (expected bright-to-dark or dark-to-bright)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecipe {
    pub fmin_mhz: f64,
    pub fmax_mhz: f64,
    pub points: usize,
    pub rabi_hz: f64,
    pub duration_s: f64,
    pub manifolds: ManifoldSelection,
    /// Defaults to `m_I = 0` for N14 and `+1/2` for N15.
    pub target: Option<HalfInt>,
}

impl Default for SpectrumRecipe {
    fn default() -> Self {
        Self {
            fmin_mhz: 0.5,
            fmax_mhz: 8.0,
            points: 1501,
            rabi_hz: 25e3,
            duration_s: 20e-6,
            manifolds: ManifoldSelection::All,
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiRecipe {
    /// Defaults to the lowest bright line that involves the target.
    pub frequency_mhz: Option<f64>,
    pub rabi_hz: f64,
    pub t_max_s: f64,
    pub points: usize,
    pub target: Option<HalfInt>,
    /// Fixes the bright share instead of using the green steady state.
    pub p_bright: Option<f64>,
}

impl Default for RabiRecipe {
    fn default() -> Self {
        Self { frequency_mhz: None, rabi_hz: 25e3, t_max_s: 100e-6, points: 41, target: None, p_bright: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticsRecipe {
    pub laser: Laser,
    /// Defaults to the configured power for this laser.
    pub power_mw: Option<f64>,
    /// Recalibrates the red law so that the aligned decay time is this value.
    pub tau_target_s: Option<f64>,
    /// Defaults to five relaxation times.
    pub t_max_s: Option<f64>,
    pub points: usize,
    pub counts_bright: f64,
    pub counts_dark: f64,
    /// Adds a Poisson `counts` column with this many photons in total.
    pub noise_total_counts: Option<f64>,
}

impl Default for KineticsRecipe {
    fn default() -> Self {
        Self {
            laser: Laser::Red,
            power_mw: None,
            tau_target_s: None,
            t_max_s: None,
            points: 101,
            counts_bright: 1.0,
            counts_dark: 0.0,
            noise_total_counts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDepRecipe {
    pub laser: Laser,
    pub direction: Transfer,
    pub pmin_mw: f64,
    pub pmax_mw: f64,
    pub points: usize,
}

impl Default for PowerDepRecipe {
    fn default() -> Self {
        Self { laser: Laser::Red, direction: Transfer::BrightToDark, pmin_mw: 1e-3, pmax_mw: 1e3, points: 61 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Map2dRecipe {
    pub fmin_mhz: f64,
    pub fmax_mhz: f64,
    pub fpoints: usize,
    pub red_min_s: f64,
    pub red_max_s: f64,
    pub red_points: usize,
    pub red_grid: GridKind,
    pub rabi_hz: f64,
    pub rf_duration_s: f64,
    pub target: Option<HalfInt>,
}

impl Default for Map2dRecipe {
    fn default() -> Self {
        Self {
            fmin_mhz: 1.55,
            fmax_mhz: 2.65,
            fpoints: 111,
            red_min_s: 0.0,
            red_max_s: 1e-3,
            red_points: 21,
            red_grid: GridKind::Lin,
            rabi_hz: 25e3,
            rf_duration_s: 100e-6,
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecipe {
    /// Where the program came from, for messages only.
    pub source_name: String,
    /// Full program text, so the manifest is self-contained.
    pub program: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecipe {
    pub model: String,
    pub input: PathBuf,
    pub input_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Recipe {
    Spectrum(SpectrumRecipe),
    Rabi(RabiRecipe),
    Kinetics(KineticsRecipe),
    Powerdep(PowerDepRecipe),
    Map2d(Map2dRecipe),
    Run(RunRecipe),
    Fit(FitRecipe),
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recipe::Spectrum(_) => "spectrum",
            Recipe::Rabi(_) => "rabi",
            Recipe::Kinetics(_) => "kinetics",
            Recipe::Powerdep(_) => "powerdep",
            Recipe::Map2d(_) => "map2d",
            Recipe::Run(_) => "run",
            Recipe::Fit(_) => "fit",
        })
    }
}

/// CSV table plus an optional JSON document (fit results).
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeOutput {
    pub table: Table,
    pub json: Option<String>,
}

fn grid(start: f64, stop: f64, count: usize, kind: GridKind) -> Vec<f64> {
    SweepDecl { name: String::new(), dimension: dsl::Dimension::Time, start, stop, count, kind }.values()
}

fn default_target(cfg: &RunConfig) -> HalfInt {
    match cfg.spin.isotope {
        IsotopeKind::N14 => HalfInt::ZERO,
        IsotopeKind::N15 => HalfInt::HALF,
    }
}

fn check_range(lo: f64, hi: f64, points: usize, what: &str) -> Result<(), RecipeError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(usage(format!("{what}: need min < max, got {lo} and {hi}")));
    }
    if points < 2 {
        return Err(usage(format!("{what}: need at least 2 points, got {points}")));
    }
    Ok(())
}

fn check_positive(v: f64, what: &str) -> Result<(), RecipeError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{what} must be positive, got {v}")))
    }
}

fn result_row(x: &[f64], r: &qnd::ExperimentResult, expected: f64) -> Vec<String> {
    let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
    row.extend([r.flip_fraction.to_string(), r.stderr.to_string(), r.n_shots.to_string(), expected.to_string()]);
    row
}

/// Runs `recipe` under `cfg`.
pub fn execute(recipe: &Recipe, cfg: &RunConfig) -> Result<RecipeOutput, RecipeError> {
    cfg.validate()?;
    match recipe {
        Recipe::Spectrum(r) => spectrum(r, cfg),
        Recipe::Rabi(r) => rabi(r, cfg),
        Recipe::Kinetics(r) => kinetics(r, cfg),
        Recipe::Powerdep(r) => powerdep(r, cfg),
        Recipe::Map2d(r) => map2d(r, cfg),
        Recipe::Run(r) => run_program(r, cfg),
        Recipe::Fit(r) => fit_file(r),
    }
}

fn spectrum(r: &SpectrumRecipe, cfg: &RunConfig) -> Result<RecipeOutput, RecipeError> {
    check_range(r.fmin_mhz, r.fmax_mhz, r.points, "frequency range")?;
    if r.fmin_mhz <= 0.0 {
        return Err(usage("fmin must be positive"));
    }
    check_positive(r.rabi_hz, "rabi")?;
    check_positive(r.duration_s, "duration")?;
    let mut exp = cfg.experiment()?;
    exp.options.initial_populations = match r.manifolds {
        ManifoldSelection::All => None,
        ManifoldSelection::Bright => Some(ChargePopulations::BRIGHT),
        ManifoldSelection::Dark => Some(ChargePopulations::DARK),
    };
    let target = r.target.unwrap_or_else(|| default_target(cfg));
    let freqs = grid(r.fmin_mhz, r.fmax_mhz, r.points, GridKind::Lin);
    let hz: Vec<f64> = freqs.iter().map(|f| f * 1e6).collect();
    let pulse = RfPulse { rabi_hz: r.rabi_hz, duration_s: r.duration_s };
    let results = exp.spectrum_scan(target, &hz, pulse, cfg.n_shots, cfg.seed)?;
    let mut t = Table::new(["frequency_MHz", "flip_fraction", "stderr", "n_shots", "expected"]);
    for ((f, h), res) in freqs.iter().zip(&hz).zip(&results) {
        let expected = exp.analytic_flip_fraction(&qnd::rf_program(target, *h, pulse))?;
        t.push(result_row(&[*f], res, expected));
    }
    Ok(RecipeOutput { table: t, json: None })
}

fn rabi(r: &RabiRecipe, cfg: &RunConfig) -> Result<RecipeOutput, RecipeError> {
    check_positive(r.rabi_hz, "rabi")?;
    check_positive(r.t_max_s, "t_max")?;
    if r.points < 2 {
        return Err(usage("rabi needs at least 2 points"));
    }
    let mut exp = cfg.experiment()?;
    if let Some(p) = r.p_bright {
        if !(0.0..=1.0).contains(&p) {
            return Err(usage(format!("p_bright must lie in [0, 1], got {p}")));
        }
        exp.options.initial_populations = Some(ChargePopulations::from_dark(1.0 - p));
    }
    let target = r.target.unwrap_or_else(|| default_target(cfg));
    let f_hz = match r.frequency_mhz {
        Some(f) => {
            check_positive(f, "frequency")?;
            f * 1e6
        }
        None => {
            let sys = &exp.system;
            sys.transitions(sys.bright())
                .into_iter()
                .find(|t| t.involves(target))
                .map(|t| t.frequency_mhz * 1e6)
                .ok_or_else(|| usage(format!("no bright transition involves m_I = {target}")))?
        }
    };
    let durations = grid(0.0, r.t_max_s, r.points, GridKind::Lin);
    let results = exp.rabi_scan(target, f_hz, r.rabi_hz, &durations, cfg.n_shots, cfg.seed)?;
    let mut t = Table::new(["duration_s", "flip_fraction", "stderr", "n_shots", "expected"]);
    for (d, res) in durations.iter().zip(&results) {
        let pulse = RfPulse { rabi_hz: r.rabi_hz, duration_s: *d };
        let expected = exp.analytic_flip_fraction(&qnd::rf_program(target, f_hz, pulse))?;
        t.push(result_row(&[*d], res, expected));
    }
    Ok(RecipeOutput { table: t, json: None })
}

fn kinetics(r: &KineticsRecipe, cfg: &RunConfig) -> Result<RecipeOutput, RecipeError> {
    let power = r.power_mw.unwrap_or(match r.laser {
        Laser::Green => cfg.lasers.green_power_mw,
        _ => cfg.lasers.red_power_mw,
    });
    if !(power >= 0.0 && power.is_finite()) {
        return Err(usage(format!("power must be ≥ 0, got {power}")));
    }
    let mut kin = cfg.kinetics;
    if let Some(tau) = r.tau_target_s {
        check_positive(tau, "tau-target")?;
        if r.laser != Laser::Red {
            return Err(usage("--tau-target applies to the red laser only"));
        }
        check_positive(power, "power")?;
        kin = kin.with_red_tau(tau, power);
    }
    let (r_bd, r_db) = kin.rates(r.laser, power);
    let total = (r_bd + r_db) * 1e6;
    let t_max = match r.t_max_s {
        Some(t) => t,
        None if total > 0.0 => 5.0 / total,
        None => return Err(usage("laser is off; give --t-max")),
    };
    check_positive(t_max, "t_max")?;
    if r.points < 2 {
        return Err(usage("kinetics needs at least 2 points"));
    }
    let initial = if r.laser == Laser::Green { ChargePopulations::DARK } else { ChargePopulations::BRIGHT };
    let times = grid(0.0, t_max, r.points, GridKind::Lin);
    let pops: Vec<ChargePopulations> = times.iter().map(|&t| evolve_populations(initial, &kin, r.laser, power, t)).collect();
    let signal: Vec<f64> = pops.iter().map(|p| r.counts_dark + (r.counts_bright - r.counts_dark) * p.p_bright).collect();
    let noisy = match r.noise_total_counts {
        Some(n) => {
            check_positive(n, "noise total counts")?;
            Some(qnd::shot_noise_counts(&signal, n, cfg.seed))
        }
        None => None,
    };
    let mut header = vec!["time_s", "p_bright", "p_dark", "fluorescence"];
    if noisy.is_some() {
        header.push("counts");
    }
    let mut t = Table::new(header);
    for (i, &time) in times.iter().enumerate() {
        let mut row = vec![time, pops[i].p_bright, pops[i].p_dark, signal[i]];
        if let Some(c) = &noisy {
            row.push(c[i]);
        }
        t.push_numbers(&row);
    }
    Ok(RecipeOutput { table: t, json: None })
}

fn powerdep(r: &PowerDepRecipe, cfg: &RunConfig) -> Result<RecipeOutput, RecipeError> {
    check_range(r.pmin_mw, r.pmax_mw, r.points, "power range")?;
    check_positive(r.pmin_mw, "pmin")?;
    let k = &cfg.kinetics;
    let (law, eta) = match (r.laser, r.direction) {
        (Laser::Red, Transfer::BrightToDark) => (k.red_bright_to_dark, k.misalignment_eta),
        (Laser::Red, Transfer::DarkToBright) => (k.red_dark_to_bright, 1.0),
        (Laser::Green, Transfer::BrightToDark) => (k.green_bright_to_dark, k.misalignment_eta),
        (Laser::Green, Transfer::DarkToBright) => (k.green_dark_to_bright, 1.0),
        (Laser::Off, _) => return Err(usage("powerdep needs a red or green laser")),
    };
    let mut t = Table::new(["power_mW", "rate_MHz"]);
    for p in grid(r.pmin_mw, r.pmax_mw, r.points, GridKind::Log) {
        t.push_numbers(&[p, rate(&law, p, eta)]);
    }
    Ok(RecipeOutput { table: t, json: None })
}

fn map2d(r: &Map2dRecipe, cfg: &RunConfig) -> Result<RecipeOutput, RecipeError> {
    check_range(r.fmin_mhz, r.fmax_mhz, r.fpoints, "frequency range")?;
    check_positive(r.fmin_mhz, "fmin")?;
    if !(r.red_min_s >= 0.0 && r.red_min_s < r.red_max_s && r.red_points >= 1) {
        return Err(usage(format!("red range: need 0 ≤ min < max, got {} and {}", r.red_min_s, r.red_max_s)));
    }
    if r.red_grid == GridKind::Log && r.red_min_s <= 0.0 {
        return Err(usage("a log red-length grid needs a positive minimum"));
    }
    check_positive(r.rabi_hz, "rabi")?;
    check_positive(r.rf_duration_s, "rf duration")?;
    let exp = cfg.experiment()?;
    let target = r.target.unwrap_or_else(|| default_target(cfg));
    let freqs = grid(r.fmin_mhz, r.fmax_mhz, r.fpoints, GridKind::Lin);
    let hz: Vec<f64> = freqs.iter().map(|f| f * 1e6).collect();
    let reds = grid(r.red_min_s, r.red_max_s, r.red_points, r.red_grid);
    let pulse = RfPulse { rabi_hz: r.rabi_hz, duration_s: r.rf_duration_s };
    let rows = exp.map2d(target, &hz, &reds, cfg.lasers.red_power_mw, pulse, cfg.n_shots, cfg.seed)?;
    let mut header = vec!["red_length_s".to_string()];
    header.extend(freqs.iter().map(|f| f.to_string()));
    let mut t = Table::new(header);
    for (l, row) in reds.iter().zip(&rows) {
        let mut cells = vec![*l];
        cells.extend(row.iter().map(|r| r.flip_fraction));
        t.push_numbers(&cells);
    }
    Ok(RecipeOutput { table: t, json: None })
}

fn run_program(r: &RunRecipe, cfg: &RunConfig) -> Result<RecipeOutput, RecipeError> {
    let program =
        dsl::parse(&r.program).map_err(|error| RecipeError::Parse { source_name: r.source_name.clone(), error })?;
    let exp = cfg.experiment()?;
    let points = exp.run_sweeps(&program, cfg.n_shots, cfg.seed)?;
    let mut header: Vec<String> =
        program.sweeps.iter().map(|s| format!("{}_{}", s.name, s.dimension.base_unit())).collect();
    header.extend(["flip_fraction", "stderr", "n_shots", "expected"].map(String::from));
    let expanded = dsl::expand_sweeps(&program).map_err(QndError::from)?;
    let mut t = Table::new(header);
    for ((coords, res), point) in points.iter().zip(&expanded) {
        let xs: Vec<f64> = coords.iter().map(|c| c.1).collect();
        t.push(result_row(&xs, res, exp.analytic_flip_fraction(&point.program)?));
    }
    Ok(RecipeOutput { table: t, json: None })
}

/// Digest and path of a fit input, as recorded in [`FitRecipe`].
pub fn fit_recipe(model: &str, input: &Path) -> Result<FitRecipe, RecipeError> {
    ModelFunction::from_str(model).map_err(usage)?;
    let bytes = std::fs::read(input).map_err(|source| IoError::Io { path: input.display().to_string(), source })?;
    let input = std::fs::canonicalize(input).unwrap_or_else(|_| input.to_path_buf());
    Ok(FitRecipe { model: model.to_string(), input, input_sha256: io::sha256_hex(&bytes) })
}

fn fit_file(r: &FitRecipe) -> Result<RecipeOutput, RecipeError> {
    let model = ModelFunction::from_str(&r.model).map_err(usage)?;
    let bytes = std::fs::read(&r.input).map_err(|source| IoError::Io { path: r.input.display().to_string(), source })?;
    let digest = io::sha256_hex(&bytes);
    if digest != r.input_sha256 {
        return Err(RecipeError::ReplayMismatch {
            file: r.input.display().to_string(),
            expected: r.input_sha256.clone(),
            actual: digest,
        });
    }
    let text = String::from_utf8_lossy(&bytes);
    let data = io::parse_xy_csv(&text, &r.input.display().to_string())?;
    let (params, model_used, json) = if model.kind == ModelKind::SaturablePower && data.sigmas.is_none() {
        let pf = fit::fit_power_dependence(&data.xs, &data.ys)?;
        let json = serde_json::to_string_pretty(&pf).expect("serializable");
        (pf.fit.estimates.clone(), pf.fit.model.clone(), json)
    } else {
        let fr = fit::fit(&model, &data.xs, &data.ys, data.sigmas.as_deref(), None)?;
        let json = serde_json::to_string_pretty(&fr).expect("serializable");
        (fr.estimates.clone(), fr.model.clone(), json)
    };
    let mut t = Table::new(["x", "y", "fit", "residual"]);
    for (&x, &y) in data.xs.iter().zip(&data.ys) {
        let m = model_used.eval(x, &params);
        t.push_numbers(&[x, y, m, y - m]);
    }
    Ok(RecipeOutput { table: t, json: Some(json) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    /// File name relative to the manifest's directory.
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub recipe: Recipe,
    pub config: RunConfig,
    pub outputs: Vec<OutputDigest>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str, path: &str) -> Result<Self, RecipeError> {
        serde_json::from_str(text).map_err(|e| RecipeError::Manifest { path: path.to_string(), message: e.to_string() })
    }
}

/// `<stem>.manifest.json` next to the CSV.
pub fn manifest_path_for(csv_path: &Path) -> PathBuf {
    sibling(csv_path, "manifest.json")
}

/// `<stem>.fit.json` next to the CSV.
pub fn json_path_for(csv_path: &Path) -> PathBuf {
    sibling(csv_path, "fit.json")
}

fn sibling(csv_path: &Path, suffix: &str) -> PathBuf {
    let stem = csv_path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    csv_path.with_file_name(format!("{stem}.{suffix}"))
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

/// Executes `recipe`, writes the CSV to `csv_path` (plus the fit JSON when
/// there is one) and the manifest beside it.
pub fn run_to_files(recipe: &Recipe, cfg: &RunConfig, csv_path: &Path) -> Result<Manifest, RecipeError> {
    let out = execute(recipe, cfg)?;
    let csv = out.table.to_csv();
    io::write_text(csv_path, &csv)?;
    let mut outputs = vec![OutputDigest { file: file_name(csv_path), sha256: io::sha256_hex(csv.as_bytes()) }];
    if let Some(json) = &out.json {
        let p = json_path_for(csv_path);
        io::write_text(&p, json)?;
        outputs.push(OutputDigest { file: file_name(&p), sha256: io::sha256_hex(json.as_bytes()) });
    }
    let manifest =
        Manifest { tool: TOOL.into(), version: VERSION.into(), recipe: recipe.clone(), config: cfg.clone(), outputs };
    io::write_text(&manifest_path_for(csv_path), &manifest.to_json())?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub manifest: Manifest,
    pub csv_path: PathBuf,
    /// Set when the manifest was written by another crate version.
    pub version_note: Option<String>,
}

/// Re-executes a manifest and checks every output digest. The regenerated
/// CSV goes to `out`, or to `<stem>.replay.csv` beside the manifest.
pub fn replay(manifest_path: &Path, out: Option<&Path>) -> Result<ReplayReport, RecipeError> {
    let text = io::read_text(manifest_path)?;
    let manifest = Manifest::from_json(&text, &manifest_path.display().to_string())?;
    let first = manifest.outputs.first().ok_or_else(|| RecipeError::Manifest {
        path: manifest_path.display().to_string(),
        message: "no outputs recorded".into(),
    })?;
    let result = execute(&manifest.recipe, &manifest.config)?;
    let csv = result.table.to_csv();
    let csv_path = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = Path::new(&first.file).file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
            manifest_path.with_file_name(format!("{stem}.replay.csv"))
        }
    };
    io::write_text(&csv_path, &csv)?;
    let mut produced = vec![io::sha256_hex(csv.as_bytes())];
    if let Some(json) = &result.json {
        produced.push(io::sha256_hex(json.as_bytes()));
    }
    for (want, got) in manifest.outputs.iter().zip(&produced) {
        if &want.sha256 != got {
            return Err(RecipeError::ReplayMismatch { file: want.file.clone(), expected: want.sha256.clone(), actual: got.clone() });
        }
    }
    let version_note = (manifest.version != VERSION)
        .then(|| format!("manifest written by {} {}, replayed with {VERSION}", manifest.tool, manifest.version));
    Ok(ReplayReport { manifest, csv_path, version_note })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> RunConfig {
        RunConfig { n_shots: 200, ..RunConfig::default() }
    }

    #[test]
    fn recipe_json_round_trip() {
        for r in [
            Recipe::Spectrum(SpectrumRecipe::default()),
            Recipe::Rabi(RabiRecipe::default()),
            Recipe::Kinetics(KineticsRecipe { tau_target_s: Some(120e-6), ..KineticsRecipe::default() }),
            Recipe::Powerdep(PowerDepRecipe::default()),
            Recipe::Map2d(Map2dRecipe::default()),
            Recipe::Run(RunRecipe { source_name: "a.seq".into(), program: "seq \"a\"\nend".into() }),
        ] {
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(serde_json::from_str::<Recipe>(&json).unwrap(), r);
        }
    }

    #[test]
    fn kinetics_trace_is_exponential() {
        let r = KineticsRecipe { tau_target_s: Some(120e-6), t_max_s: Some(600e-6), points: 7, ..KineticsRecipe::default() };
        let out = execute(&Recipe::Kinetics(r), &small_cfg()).unwrap();
        let t = out.table.column("time_s").unwrap();
        let p = out.table.column("p_bright").unwrap();
        for (t, p) in t.iter().zip(&p) {
            assert!((p - (-t / 120e-6).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn usage_errors_exit_2() {
        let bad = SpectrumRecipe { fmin_mhz: 5.0, fmax_mhz: 2.0, ..SpectrumRecipe::default() };
        let e = execute(&Recipe::Spectrum(bad), &small_cfg()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let zero = RunConfig { n_shots: 0, ..RunConfig::default() };
        let e = execute(&Recipe::Spectrum(SpectrumRecipe::default()), &zero).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = execute(&Recipe::Run(RunRecipe { source_name: "x.seq".into(), program: "seq \"a\"\nbogus\nend".into() }), &small_cfg())
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().starts_with("x.seq: line 2, column 1"), "{e}");
    }
}
