//! Laser-driven interconversion between the bright (NV⁻) and dark state.
//!
//! Each optical pathway follows the saturable two-photon law
//! `R(P) = η·k·P²/(P + P_sat)`: quadratic below `P_sat`, linear above it.
//! Rates are in MHz (per µs); durations are in seconds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KineticsError {
    #[error("no steady state: both transfer rates vanish")]
    NoSteadyState,
    #[error("invalid rate law: {0}")]
    InvalidRateLaw(&'static str),
    #[error("misalignment factor must lie in (0, 1], got {0}")]
    InvalidMisalignment(f64),
    #[error("laser power must be finite and ≥ 0, got {0} mW")]
    InvalidPower(f64),
    #[error("invalid populations ({bright}, {dark})")]
    InvalidPopulations { bright: f64, dark: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Laser {
    Red,
    Green,
    Off,
}

impl fmt::Display for Laser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Laser::Red => "red",
            Laser::Green => "green",
            Laser::Off => "off",
        })
    }
}

impl FromStr for Laser {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "red" => Ok(Laser::Red),
            "green" => Ok(Laser::Green),
            "off" => Ok(Laser::Off),
            other => Err(format!("unknown laser `{other}` (expected red, green or off)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLaw {
    /// Asymptotic linear coefficient, MHz per mW.
    pub k_mhz_per_mw: f64,
    pub p_sat_mw: f64,
}

impl RateLaw {
    pub fn new(k_mhz_per_mw: f64, p_sat_mw: f64) -> Result<Self, KineticsError> {
        if !(k_mhz_per_mw >= 0.0 && k_mhz_per_mw.is_finite()) {
            return Err(KineticsError::InvalidRateLaw("k must be finite and ≥ 0"));
        }
        if !(p_sat_mw > 0.0 && p_sat_mw.is_finite()) {
            return Err(KineticsError::InvalidRateLaw("P_sat must be finite and > 0"));
        }
        Ok(Self { k_mhz_per_mw, p_sat_mw })
    }

    pub const fn zero() -> Self {
        Self { k_mhz_per_mw: 0.0, p_sat_mw: 1.0 }
    }
}

/// `η·k·P²/(P + P_sat)` in MHz.
pub fn rate(law: &RateLaw, power_mw: f64, eta: f64) -> f64 {
    if power_mw <= 0.0 {
        return 0.0;
    }
    eta * law.k_mhz_per_mw * power_mw * power_mw / (power_mw + law.p_sat_mw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeKinetics {
    pub red_bright_to_dark: RateLaw,
    pub green_bright_to_dark: RateLaw,
    pub green_dark_to_bright: RateLaw,
    pub red_dark_to_bright: RateLaw,
    pub misalignment_eta: f64,
}

/// Reference red power at which the default red law gives τ = 120 µs.
pub const DEFAULT_RED_POWER_MW: f64 = 1.0;
pub const DEFAULT_GREEN_POWER_MW: f64 = 1.0;
/// Bright-state decay time under red light with the field aligned.
pub const RED_TAU_ALIGNED_S: f64 = 120e-6;
/// Same decay with a strongly misaligned field.
pub const RED_TAU_MISALIGNED_S: f64 = 184e-6;

impl Default for ChargeKinetics {
    /// Calibration: green laws share `P_sat` with `k_BD/k_DB = 3/7`, which
    /// pins the green equilibrium to 70 % bright at every power; the red law
    /// gives `1/R = 120 µs` at [`DEFAULT_RED_POWER_MW`].
    fn default() -> Self {
        let red_psat = 1.0;
        let p = DEFAULT_RED_POWER_MW;
        let red_k = 1.0 / (RED_TAU_ALIGNED_S * 1e6) * (p + red_psat) / (p * p);
        let green_db = 0.1;
        Self {
            red_bright_to_dark: RateLaw { k_mhz_per_mw: red_k, p_sat_mw: red_psat },
            green_bright_to_dark: RateLaw { k_mhz_per_mw: green_db * 3.0 / 7.0, p_sat_mw: 1.0 },
            green_dark_to_bright: RateLaw { k_mhz_per_mw: green_db, p_sat_mw: 1.0 },
            red_dark_to_bright: RateLaw::zero(),
            misalignment_eta: 1.0,
        }
    }
}

impl ChargeKinetics {
    pub fn validate(&self) -> Result<(), KineticsError> {
        for law in [self.red_bright_to_dark, self.green_bright_to_dark, self.green_dark_to_bright, self.red_dark_to_bright] {
            RateLaw::new(law.k_mhz_per_mw, law.p_sat_mw)?;
        }
        if !(self.misalignment_eta > 0.0 && self.misalignment_eta <= 1.0) {
            return Err(KineticsError::InvalidMisalignment(self.misalignment_eta));
        }
        Ok(())
    }

    pub fn with_misalignment(mut self, eta: f64) -> Self {
        self.misalignment_eta = eta;
        self
    }

    /// Rescales the red bright→dark law so that the aligned decay time at
    /// `power_mw` equals `tau_s`.
    pub fn with_red_tau(mut self, tau_s: f64, power_mw: f64) -> Self {
        let unit = rate(&RateLaw { k_mhz_per_mw: 1.0, ..self.red_bright_to_dark }, power_mw, 1.0);
        self.red_bright_to_dark.k_mhz_per_mw = 1.0 / (tau_s * 1e6 * unit);
        self
    }

    /// Transfer rates `(R_BD, R_DB)` in MHz for the given illumination.
    pub fn rates(&self, laser: Laser, power_mw: f64) -> (f64, f64) {
        let eta = self.misalignment_eta;
        match laser {
            Laser::Red => (rate(&self.red_bright_to_dark, power_mw, eta), rate(&self.red_dark_to_bright, power_mw, 1.0)),
            Laser::Green => {
                (rate(&self.green_bright_to_dark, power_mw, eta), rate(&self.green_dark_to_bright, power_mw, 1.0))
            }
            Laser::Off => (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargePopulations {
    pub p_bright: f64,
    pub p_dark: f64,
}

impl ChargePopulations {
    pub const BRIGHT: ChargePopulations = ChargePopulations { p_bright: 1.0, p_dark: 0.0 };
    pub const DARK: ChargePopulations = ChargePopulations { p_bright: 0.0, p_dark: 1.0 };

    pub fn from_dark(p_dark: f64) -> Self {
        Self { p_bright: 1.0 - p_dark, p_dark }
    }

    pub fn new(p_bright: f64, p_dark: f64) -> Result<Self, KineticsError> {
        let ok = (0.0..=1.0).contains(&p_bright) && (0.0..=1.0).contains(&p_dark) && (p_bright + p_dark - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(KineticsError::InvalidPopulations { bright: p_bright, dark: p_dark });
        }
        Ok(Self { p_bright, p_dark })
    }
}

/// Closed-form solution of `dp_B/dt = −R_BD·p_B + R_DB·p_D`.
pub fn evolve_populations(
    pop: ChargePopulations,
    kin: &ChargeKinetics,
    laser: Laser,
    power_mw: f64,
    duration_s: f64,
) -> ChargePopulations {
    let (r_bd, r_db) = kin.rates(laser, power_mw);
    let total = r_bd + r_db;
    if total == 0.0 || duration_s == 0.0 {
        return pop;
    }
    let ss_dark = r_bd / total;
    let decay = (-total * duration_s * 1e6).exp();
    ChargePopulations::from_dark(ss_dark + (pop.p_dark - ss_dark) * decay)
}

pub fn steady_state(kin: &ChargeKinetics, laser: Laser, power_mw: f64) -> Result<ChargePopulations, KineticsError> {
    let (r_bd, r_db) = kin.rates(laser, power_mw);
    let total = r_bd + r_db;
    if total == 0.0 {
        return Err(KineticsError::NoSteadyState);
    }
    Ok(ChargePopulations::from_dark(r_bd / total))
}

/// Bright-state fluorescence `c_D + (c_B − c_D)·p_B(t)` in kcounts/s.
pub fn fluorescence_trace(
    kin: &ChargeKinetics,
    laser: Laser,
    power_mw: f64,
    initial: ChargePopulations,
    times_s: &[f64],
    counts_bright: f64,
    counts_dark: f64,
) -> Vec<f64> {
    times_s
        .iter()
        .map(|&t| {
            let p = evolve_populations(initial, kin, laser, power_mw, t);
            counts_dark + (counts_bright - counts_dark) * p.p_bright
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn rate_law_regimes() {
        let law = RateLaw::new(1.0, 1.0).unwrap();
        let ratio = rate(&law, 0.01, 1.0) / rate(&law, 0.005, 1.0);
        assert_relative_eq!(ratio, (1e-4 / 1.01) / (2.5e-5 / 1.005), max_relative = 1e-12);
        assert_abs_diff_eq!(ratio, 3.980, epsilon = 1e-3);
        assert_eq!(rate(&law, 0.0, 1.0), 0.0);
        assert_relative_eq!(rate(&law, 100.0, 1.0), 1e4 / 101.0, max_relative = 1e-12);
        assert!(RateLaw::new(1.0, 0.0).is_err());
        assert!(RateLaw::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn red_decay_aligned_and_misaligned() {
        let kin = ChargeKinetics::default();
        let p = evolve_populations(ChargePopulations::BRIGHT, &kin, Laser::Red, DEFAULT_RED_POWER_MW, 120e-6);
        assert_relative_eq!(p.p_bright, (-1f64).exp(), max_relative = 1e-12);

        let mis = kin.with_misalignment(RED_TAU_ALIGNED_S / RED_TAU_MISALIGNED_S);
        let p = evolve_populations(ChargePopulations::BRIGHT, &mis, Laser::Red, DEFAULT_RED_POWER_MW, 184e-6);
        assert_relative_eq!(p.p_bright, (-1f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn zero_duration_or_dark_laser_is_identity() {
        let kin = ChargeKinetics::default();
        let p0 = ChargePopulations::from_dark(0.3);
        assert_eq!(evolve_populations(p0, &kin, Laser::Green, 1.0, 0.0), p0);
        assert_eq!(evolve_populations(p0, &kin, Laser::Off, 1.0, 1.0), p0);
    }

    #[test]
    fn steady_states() {
        let kin = ChargeKinetics::default();
        for p in [0.01, 1.0, 100.0] {
            assert_abs_diff_eq!(steady_state(&kin, Laser::Green, p).unwrap().p_dark, 0.30, epsilon = 1e-12);
        }
        assert_eq!(steady_state(&kin, Laser::Red, 1.0).unwrap().p_dark, 1.0);
        let no_bd = ChargeKinetics { green_bright_to_dark: RateLaw::zero(), ..kin };
        assert_eq!(steady_state(&no_bd, Laser::Green, 1.0).unwrap().p_dark, 0.0);
        assert_eq!(steady_state(&kin, Laser::Off, 1.0), Err(KineticsError::NoSteadyState));
    }

    #[test]
    fn fluorescence_traces() {
        let kin = ChargeKinetics::default();
        let times: Vec<f64> = (0..20).map(|i| f64::from(i) * 20e-6).collect();
        let trace = fluorescence_trace(&kin, Laser::Red, 1.0, ChargePopulations::BRIGHT, &times, 50.0, 0.0);
        for (t, c) in times.iter().zip(&trace) {
            assert_relative_eq!(*c, 50.0 * (-t / 120e-6).exp(), max_relative = 1e-10);
        }
        let flat = fluorescence_trace(&kin, Laser::Red, 1.0, ChargePopulations::BRIGHT, &times, 7.0, 7.0);
        assert!(flat.iter().all(|&c| c == 7.0));

        // Log-linear regression of the noiseless trace recovers −1/τ.
        let n = times.len() as f64;
        let ys: Vec<f64> = trace.iter().map(|c| c.ln()).collect();
        let mx = times.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = times.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = times.iter().map(|x| (x - mx).powi(2)).sum();
        assert_relative_eq!(-sxx / sxy, 120e-6, max_relative = 1e-3);
    }

    #[test]
    fn validation() {
        assert!(ChargeKinetics::default().validate().is_ok());
        assert!(ChargeKinetics::default().with_misalignment(0.0).validate().is_err());
        assert!(ChargeKinetics::default().with_misalignment(1.2).validate().is_err());
        assert!(ChargePopulations::new(0.5, 0.6).is_err());
        let tuned = ChargeKinetics::default().with_red_tau(50e-6, 3.0);
        assert_relative_eq!(1.0 / (tuned.rates(Laser::Red, 3.0).0 * 1e6), 50e-6, max_relative = 1e-12);
    }
}
