use serde::{Deserialize, Serialize};

use super::{fit, FitError, FitResult, ModelFunction};

/// Saturable-power fit together with the log-log slopes of the fitted law at
/// the ends of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDependenceFit {
    pub fit: FitResult,
    /// `d ln R / d ln P` at the lowest measured power.
    pub low_power_slope: f64,
    /// Same at the highest measured power.
    pub high_power_slope: f64,
    pub warnings: Vec<String>,
}

fn log_slope(model: &ModelFunction, p: &[f64], x: f64) -> f64 {
    let h: f64 = 1e-4;
    let (lo, hi) = (x * (-h).exp(), x * h.exp());
    (model.eval(hi, p).ln() - model.eval(lo, p).ln()) / (2.0 * h)
}

/// Fits `k·P²/(P + P_sat)` with relative weights (each rate is its own
/// uncertainty scale), so every decade of the sweep counts equally.
/// `P_sat` is capped at 1000× the largest power; reaching the cap means the
/// data never leave the quadratic regime.
pub fn fit_power_dependence(powers: &[f64], rates: &[f64]) -> Result<PowerDependenceFit, FitError> {
    if powers.len() != rates.len() {
        return Err(FitError::LengthMismatch { xs: powers.len(), ys: rates.len(), sigmas: None });
    }
    if powers.iter().chain(rates).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(FitError::NonFinite);
    }
    let p_max = powers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p_min = powers.iter().copied().fold(f64::INFINITY, f64::min);
    let cap = 1e3 * p_max;
    let model = ModelFunction::saturable_power().with_bound(1, f64::MIN_POSITIVE, cap);
    let result = fit(&model, powers, rates, Some(rates), None)?;

    let mut warnings = result.warnings.clone();
    if powers.len() < 5 {
        warnings.push(format!("only {} points; at least 5 are recommended", powers.len()));
    }
    if p_max / p_min < 100.0 {
        warnings.push(format!("sweep spans {:.2} decades; at least 2 are recommended", (p_max / p_min).log10()));
    }
    let p_sat = result.estimates[1];
    if p_sat >= cap * (1.0 - 1e-9) {
        warnings.push(format!("P_sat reached its upper bound {cap}: saturation is not resolved by the data"));
    }
    Ok(PowerDependenceFit {
        low_power_slope: log_slope(&model, &result.estimates, p_min),
        high_power_slope: log_slope(&model, &result.estimates, p_max),
        fit: result,
        warnings,
    })
}
