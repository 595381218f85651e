//! Driven two-level Bloch equations for a single nuclear transition.
//!
//! In the frame rotating with the rf field, with `ω₁ = 2πΩ` and `Δ = 2πδ`:
//!
//! ```text
//! u' =  Δ·v           − u/T2
//! v' = −Δ·u + ω₁·w    − v/T2
//! w' =      − ω₁·v    − w/T1
//! ```
//!
//! The longitudinal equilibrium is `w = 0` (infinite-temperature nuclear
//! bath). Integration uses fixed-step classical RK4 so that results are
//! bitwise reproducible.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BlochError {
    #[error("integration needs {needed} steps, above the cap of {cap}")]
    StepUnderflow { needed: f64, cap: u64 },
    #[error("invalid drive: {0}")]
    InvalidDrive(&'static str),
    #[error("relaxation times must be positive (T1 = {t1}, T2 = {t2})")]
    InvalidRelaxation { t1: f64, t2: f64 },
}

/// Rectangular rf pulse. Ω is the on-resonance Rabi frequency in cycles per
/// second, so a π-pulse lasts `1/(2Ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub rabi_hz: f64,
    pub detuning_hz: f64,
    pub duration_s: f64,
}

impl DriveParams {
    pub fn new(rabi_hz: f64, detuning_hz: f64, duration_s: f64) -> Self {
        Self { rabi_hz, detuning_hz, duration_s }
    }

    pub fn pi_pulse(rabi_hz: f64) -> Self {
        Self { rabi_hz, detuning_hz: 0.0, duration_s: 0.5 / rabi_hz }
    }

    fn validate(&self) -> Result<(), BlochError> {
        if !(self.rabi_hz >= 0.0 && self.rabi_hz.is_finite()) {
            return Err(BlochError::InvalidDrive("Rabi frequency must be finite and ≥ 0"));
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return Err(BlochError::InvalidDrive("duration must be finite and ≥ 0"));
        }
        if !self.detuning_hz.is_finite() {
            return Err(BlochError::InvalidDrive("detuning must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl BlochState {
    /// Full population in the addressed starting level.
    pub const UP: BlochState = BlochState { u: 0.0, v: 0.0, w: 1.0 };

    pub fn norm(&self) -> f64 {
        (self.u * self.u + self.v * self.v + self.w * self.w).sqrt()
    }

    fn axpy(self, h: f64, d: BlochState) -> BlochState {
        BlochState { u: self.u + h * d.u, v: self.v + h * d.v, w: self.w + h * d.w }
    }
}

/// Step-size controls for the RK4 integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Upper bound on the number of RK4 steps for one pulse.
    pub max_steps: u64,
    /// Target global error of the RK4 rotation phase, used to shrink the
    /// step below the coarse `min(T2/100, 1/(50(Ω+|δ|)))` bound.
    pub tolerance: f64,
    /// Extra refinement factor; `2` halves every step (convergence checks).
    pub refine: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { max_steps: 200_000_000, tolerance: 1e-9, refine: 1 }
    }
}

struct Rhs {
    omega1: f64,
    delta: f64,
    gamma2: f64,
    gamma1: f64,
}

impl Rhs {
    #[inline]
    fn eval(&self, s: BlochState) -> BlochState {
        BlochState {
            u: self.delta * s.v - self.gamma2 * s.u,
            v: -self.delta * s.u + self.omega1 * s.w - self.gamma2 * s.v,
            w: -self.omega1 * s.v - self.gamma1 * s.w,
        }
    }
}

/// Number of RK4 steps used for `drive`.
pub fn step_count(drive: &DriveParams, t2_s: f64, cfg: &IntegratorConfig) -> Result<u64, BlochError> {
    let t = drive.duration_s;
    if t == 0.0 {
        return Ok(0);
    }
    let freq = drive.rabi_hz + drive.detuning_hz.abs();
    let mut h = (t2_s / 100.0).min(1.0 / (50.0 * freq + f64::EPSILON));
    // Per-step RK4 phase error is θ⁵/120 for θ = ω·h; bound N·θ⁵/120.
    let omega = 2.0 * PI * drive.rabi_hz.hypot(drive.detuning_hz) + 1.0 / t2_s;
    if omega > 0.0 {
        let h_acc = (120.0 * cfg.tolerance / (t * omega.powi(5))).powf(0.25);
        h = h.min(h_acc);
    }
    let needed = (t / h).ceil().max(1.0) * f64::from(cfg.refine.max(1));
    if needed > cfg.max_steps as f64 {
        return Err(BlochError::StepUnderflow { needed, cap: cfg.max_steps });
    }
    Ok(needed as u64)
}

pub fn evolve_with(
    state: BlochState,
    drive: &DriveParams,
    t2_s: f64,
    t1_s: f64,
    cfg: &IntegratorConfig,
) -> Result<BlochState, BlochError> {
    drive.validate()?;
    if !(t1_s > 0.0 && t2_s > 0.0) {
        return Err(BlochError::InvalidRelaxation { t1: t1_s, t2: t2_s });
    }
    let n = step_count(drive, t2_s, cfg)?;
    if n == 0 {
        return Ok(state);
    }
    let rhs = Rhs {
        omega1: 2.0 * PI * drive.rabi_hz,
        delta: 2.0 * PI * drive.detuning_hz,
        gamma2: 1.0 / t2_s,
        gamma1: 1.0 / t1_s,
    };
    let h = drive.duration_s / n as f64;
    let mut s = state;
    for _ in 0..n {
        let k1 = rhs.eval(s);
        let k2 = rhs.eval(s.axpy(0.5 * h, k1));
        let k3 = rhs.eval(s.axpy(0.5 * h, k2));
        let k4 = rhs.eval(s.axpy(h, k3));
        s = BlochState {
            u: s.u + h / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
            v: s.v + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
            w: s.w + h / 6.0 * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w),
        };
    }
    Ok(s)
}

pub fn evolve(state: BlochState, drive: &DriveParams, t2_s: f64, t1_s: f64) -> Result<BlochState, BlochError> {
    evolve_with(state, drive, t2_s, t1_s, &IntegratorConfig::default())
}

pub fn flip_probability_with(
    drive: &DriveParams,
    t2_s: f64,
    t1_s: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, BlochError> {
    let end = evolve_with(BlochState::UP, drive, t2_s, t1_s, cfg)?;
    Ok(((1.0 - end.w) / 2.0).clamp(0.0, 1.0))
}

/// Probability that the rf pulse moves the spin out of its starting level.
pub fn flip_probability(drive: &DriveParams, t2_s: f64, t1_s: f64) -> Result<f64, BlochError> {
    flip_probability_with(drive, t2_s, t1_s, &IntegratorConfig::default())
}

/// Relaxation-free detuned Rabi formula
/// `Ω²/(Ω²+δ²)·sin²(π·√(Ω²+δ²)·t)`.
pub fn detuned_rabi_probability(rabi_hz: f64, detuning_hz: f64, duration_s: f64) -> f64 {
    let gen2 = rabi_hz * rabi_hz + detuning_hz * detuning_hz;
    if gen2 == 0.0 {
        return 0.0;
    }
    let s = (PI * gen2.sqrt() * duration_s).sin();
    rabi_hz * rabi_hz / gen2 * s * s
}

/// Flip probability across a detuning grid for a fixed rectangular pulse.
/// Relaxation during the pulse uses `t1_s`; pass a long value when only
/// dephasing matters.
pub fn line_profile(
    rabi_hz: f64,
    pulse_duration_s: f64,
    t2_s: f64,
    t1_s: f64,
    detuning_grid_hz: &[f64],
) -> Result<Vec<f64>, BlochError> {
    if detuning_grid_hz.is_empty() {
        return Err(BlochError::InvalidDrive("detuning grid is empty"));
    }
    if detuning_grid_hz.windows(2).any(|w| w[1] < w[0]) {
        return Err(BlochError::InvalidDrive("detuning grid must be sorted"));
    }
    detuning_grid_hz
        .par_iter()
        .map(|&d| flip_probability(&DriveParams::new(rabi_hz, d, pulse_duration_s), t2_s, t1_s))
        .collect()
}

/// Nuclear polarization remaining after `dwell_s` towards a zero equilibrium.
pub fn t1_relaxation(polarization: f64, dwell_s: f64, t1_s: f64) -> f64 {
    polarization * (-dwell_s / t1_s).exp()
}
