//! Run configuration: built-in defaults, overlaid by a TOML file, overlaid by
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bloch::IntegratorConfig;
use crate::kinetics::{ChargeKinetics, DEFAULT_GREEN_POWER_MW, DEFAULT_RED_POWER_MW};
use crate::qnd::{Experiment, ExperimentOptions};
use crate::readout::ReadoutModel;
use crate::spin::{self, Isotope, IsotopeKind, Relaxation, SpinSystem};

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "NVSIM_CONFIG";

/// The documented default file, identical to [`RunConfig::default`].
pub const DEFAULT_TOML: &str = include_str!("../config/default.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config{}: {message}", .path.as_ref().map(|p| format!(" {}", p.display())).unwrap_or_default())]
    Parse { path: Option<PathBuf>, message: String },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinConfig {
    pub isotope: IsotopeKind,
    pub field_t: f64,
    pub gamma_n14_mhz_per_t: f64,
    pub gamma_n15_mhz_per_t: f64,
    pub quadrupole_n14_mhz: f64,
    /// Signed `a·m_M` of the polarized dark branch.
    pub dark_product_n14_mhz: f64,
    pub dark_product_n15_mhz: f64,
    pub dark_visibility_threshold_t: f64,
    pub bright: Relaxation,
    pub dark: Relaxation,
}

impl Default for SpinConfig {
    fn default() -> Self {
        Self {
            isotope: IsotopeKind::N15,
            field_t: 0.6,
            gamma_n14_mhz_per_t: spin::GAMMA_N14_MHZ_PER_T,
            gamma_n15_mhz_per_t: spin::GAMMA_N15_MHZ_PER_T,
            quadrupole_n14_mhz: spin::QUADRUPOLE_N14_MHZ,
            dark_product_n14_mhz: spin::DARK_HYPERFINE_PRODUCT_N14_MHZ,
            dark_product_n15_mhz: spin::DARK_HYPERFINE_PRODUCT_N15_MHZ,
            dark_visibility_threshold_t: 0.4,
            bright: Relaxation { t1_s: 0.8, t2_s: 1.6 },
            dark: Relaxation { t1_s: 0.09, t2_s: 6e-6 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserConfig {
    pub red_power_mw: f64,
    pub green_power_mw: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self { red_power_mw: DEFAULT_RED_POWER_MW, green_power_mw: DEFAULT_GREEN_POWER_MW }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub p_pol: f64,
    pub max_rk4_steps: u64,
    pub rk4_tolerance: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let i = IntegratorConfig::default();
        Self { p_pol: 0.92, max_rk4_steps: i.max_steps, rk4_tolerance: i.tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n_shots: u64,
    pub output_dir: PathBuf,
    pub spin: SpinConfig,
    pub kinetics: ChargeKinetics,
    pub lasers: LaserConfig,
    pub readout: ReadoutModel,
    pub simulation: SimulationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_shots: 1000,
            output_dir: PathBuf::from("."),
            spin: SpinConfig::default(),
            kinetics: ChargeKinetics::default(),
            lasers: LaserConfig::default(),
            readout: ReadoutModel::bernoulli(0.98).expect("valid default"),
            simulation: SimulationConfig::default(),
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with the keys present in `text`.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::overlay(text, None)
    }

    fn overlay(text: &str, path: Option<&Path>) -> Result<Self, ConfigError> {
        let perr = |message: String| ConfigError::Parse { path: path.map(Path::to_path_buf), message };
        let over: toml::Table = toml::from_str(text).map_err(|e| perr(e.to_string()))?;
        let mut base = toml::Table::try_from(RunConfig::default()).map_err(|e| perr(e.to_string()))?;
        // The readout mode tag decides which other keys are valid, so a file
        // that sets it replaces the whole table.
        if let Some(toml::Value::Table(r)) = over.get("readout") {
            if r.contains_key("mode") {
                base.remove("readout");
            }
        }
        merge(&mut base, over);
        let cfg: RunConfig = toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| perr(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::overlay(&text, Some(path))
    }

    /// `explicit`, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.system()?;
        self.kinetics.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.readout.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.simulation.p_pol) {
            return Err(ConfigError::Invalid(format!("p_pol must lie in [0, 1], got {}", self.simulation.p_pol)));
        }
        if self.n_shots == 0 {
            return Err(ConfigError::Invalid("n_shots must be ≥ 1".into()));
        }
        for (name, p) in [("red_power_mw", self.lasers.red_power_mw), ("green_power_mw", self.lasers.green_power_mw)] {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be finite and ≥ 0, got {p}")));
            }
        }
        Ok(())
    }

    pub fn isotope(&self) -> Result<Isotope, ConfigError> {
        let s = &self.spin;
        let iso = match s.isotope {
            IsotopeKind::N14 => Isotope::new(IsotopeKind::N14, s.gamma_n14_mhz_per_t, s.quadrupole_n14_mhz),
            IsotopeKind::N15 => Isotope::new(IsotopeKind::N15, s.gamma_n15_mhz_per_t, 0.0),
        };
        iso.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn dark_product_mhz(&self) -> f64 {
        match self.spin.isotope {
            IsotopeKind::N14 => self.spin.dark_product_n14_mhz,
            IsotopeKind::N15 => self.spin.dark_product_n15_mhz,
        }
    }

    pub fn system(&self) -> Result<SpinSystem, ConfigError> {
        let s = &self.spin;
        let bright = Relaxation::new(s.bright.t1_s, s.bright.t2_s).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let dark = Relaxation::new(s.dark.t1_s, s.dark.t2_s).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        SpinSystem::with_dark_pair(self.isotope()?, s.field_t, self.dark_product_mhz(), bright, dark)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn experiment_options(&self) -> ExperimentOptions {
        ExperimentOptions {
            p_pol: self.simulation.p_pol,
            green_power_mw: self.lasers.green_power_mw,
            visibility_threshold_t: self.spin.dark_visibility_threshold_t,
            initial_populations: None,
            integrator: IntegratorConfig {
                max_steps: self.simulation.max_rk4_steps,
                tolerance: self.simulation.rk4_tolerance,
                refine: 1,
            },
        }
    }

    pub fn experiment(&self) -> Result<Experiment, ConfigError> {
        Ok(Experiment::new(self.system()?, self.kinetics, self.readout).with_options(self.experiment_options()))
    }
}
