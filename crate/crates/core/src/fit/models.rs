use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Shape of a model function. Parameter order is fixed per variant and listed
/// by [`ModelFunction::param_names`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum ModelKind {
    /// `A·exp(−x/τ) + c`; parameters `[A, tau, c]`.
    ExpDecay,
    /// `A·(Γ/2)²/((x−x0)² + (Γ/2)²) + c`; parameters `[A, x0, gamma, c]`.
    Lorentzian,
    /// Relaxation-free rectangular-pulse line
    /// `A·Ω²/(Ω²+(x−x0)²)·sin²(π·√(Ω²+(x−x0)²)·t) + c` with the pulse length
    /// `t` held fixed; `x` and `Ω` share a unit and `t` is in its reciprocal.
    /// Parameters `[A, x0, rabi, c]`.
    DetunedRabiLine { pulse_duration: f64 },
    /// `A·(1 − exp(−x/T2′)·cos(2πΩx))/2 + c`; parameters `[A, t2, rabi, c]`.
    DampedRabi,
    /// `k·x²/(x + P_sat)` with any misalignment factor folded into `k`;
    /// parameters `[k, p_sat]`.
    SaturablePower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFunction {
    pub kind: ModelKind,
    /// Inclusive `(lower, upper)` per parameter.
    pub bounds: Vec<(f64, f64)>,
}

const POSITIVE: (f64, f64) = (f64::MIN_POSITIVE, f64::INFINITY);
const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);

impl ModelFunction {
    pub fn new(kind: ModelKind) -> Self {
        let bounds = match kind {
            ModelKind::ExpDecay => vec![FREE, POSITIVE, FREE],
            ModelKind::Lorentzian => vec![FREE, FREE, POSITIVE, FREE],
            ModelKind::DetunedRabiLine { .. } => vec![FREE, FREE, POSITIVE, FREE],
            ModelKind::DampedRabi => vec![FREE, POSITIVE, POSITIVE, FREE],
            ModelKind::SaturablePower => vec![POSITIVE, POSITIVE],
        };
        Self { kind, bounds }
    }

    pub fn exp_decay() -> Self {
        Self::new(ModelKind::ExpDecay)
    }

    pub fn lorentzian() -> Self {
        Self::new(ModelKind::Lorentzian)
    }

    pub fn detuned_rabi_line(pulse_duration: f64) -> Self {
        Self::new(ModelKind::DetunedRabiLine { pulse_duration })
    }

    pub fn damped_rabi() -> Self {
        Self::new(ModelKind::DampedRabi)
    }

    pub fn saturable_power() -> Self {
        Self::new(ModelKind::SaturablePower)
    }

    pub fn with_bound(mut self, index: usize, lower: f64, upper: f64) -> Self {
        self.bounds[index] = (lower, upper);
        self
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self.kind {
            ModelKind::ExpDecay => &["amplitude", "tau", "offset"],
            ModelKind::Lorentzian => &["amplitude", "center", "fwhm", "offset"],
            ModelKind::DetunedRabiLine { .. } => &["amplitude", "center", "rabi", "offset"],
            ModelKind::DampedRabi => &["amplitude", "t2", "rabi", "offset"],
            ModelKind::SaturablePower => &["k", "p_sat"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }

    pub fn eval(&self, x: f64, p: &[f64]) -> f64 {
        match self.kind {
            ModelKind::ExpDecay => p[0] * (-x / p[1]).exp() + p[2],
            ModelKind::Lorentzian => {
                let hw = 0.5 * p[2];
                p[0] * hw * hw / ((x - p[1]).powi(2) + hw * hw) + p[3]
            }
            ModelKind::DetunedRabiLine { pulse_duration } => {
                let d = x - p[1];
                let gen2 = p[2] * p[2] + d * d;
                let s = (PI * gen2.sqrt() * pulse_duration).sin();
                p[0] * p[2] * p[2] / gen2 * s * s + p[3]
            }
            ModelKind::DampedRabi => p[0] * (1.0 - (-x / p[1]).exp() * (2.0 * PI * p[2] * x).cos()) / 2.0 + p[3],
            ModelKind::SaturablePower => p[0] * x * x / (x + p[1]),
        }
    }

    /// Feature width for location parameters, used to size their
    /// finite-difference step instead of the (possibly huge) location itself.
    pub fn location_width(&self, k: usize, p: &[f64]) -> Option<f64> {
        let w = match (self.kind, k) {
            (ModelKind::Lorentzian, 1) => p[2].abs(),
            (ModelKind::DetunedRabiLine { pulse_duration }, 1) => p[2].abs().min(1.0 / pulse_duration),
            _ => return None,
        };
        (w > 0.0 && w.is_finite()).then_some(w)
    }

    pub fn project(&self, p: &mut [f64]) {
        for (v, &(lo, hi)) in p.iter_mut().zip(&self.bounds) {
            *v = v.clamp(lo, hi);
        }
    }
}

impl fmt::Display for ModelFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.kind {
            ModelKind::ExpDecay => "exp_decay",
            ModelKind::Lorentzian => "lorentzian",
            ModelKind::DetunedRabiLine { .. } => "detuned_rabi_line",
            ModelKind::DampedRabi => "damped_rabi",
            ModelKind::SaturablePower => "saturable_power",
        })
    }
}

impl FromStr for ModelFunction {
    type Err = String;

    /// Accepts the short CLI names; `rabi-line:<t>` carries the fixed pulse
    /// length.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.replace('-', "_");
        match s.as_str() {
            "exp" | "exp_decay" | "expdecay" => Ok(Self::exp_decay()),
            "lorentzian" => Ok(Self::lorentzian()),
            "damped_rabi" | "dampedrabi" => Ok(Self::damped_rabi()),
            "saturable" | "saturable_power" | "saturablepower" => Ok(Self::saturable_power()),
            other => match other.split_once(':') {
                Some(("rabi_line" | "detuned_rabi_line", t)) => t
                    .parse::<f64>()
                    .ok()
                    .filter(|t| *t > 0.0)
                    .map(Self::detuned_rabi_line)
                    .ok_or_else(|| format!("invalid pulse duration in `{s}`")),
                _ => Err(format!(
                    "unknown model `{s}` (expected exp, lorentzian, damped_rabi, saturable or rabi_line:<duration>)"
                )),
            },
        }
    }
}
