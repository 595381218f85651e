//! Weighted nonlinear least squares for the model functions used across the
//! crate.
//!
//! The solver is a damped Gauss–Newton (Marquardt) iteration with a
//! forward-difference Jacobian, bound projection after every step and a
//! covariance estimate `s²·(JᵀJ)⁺` with `s² = RSS/(n − p)`.

mod guess;
mod models;
mod power;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use models::{ModelFunction, ModelKind};
pub use power::{fit_power_dependence, PowerDependenceFit};

pub const MAX_ITERATIONS: usize = 500;
pub const JACOBIAN_STEP: f64 = 1e-7;
pub const PARAM_TOLERANCE: f64 = 1e-10;
pub const GRADIENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("xs, ys and sigmas must have equal lengths ({xs}, {ys}, {sigmas:?})")]
    LengthMismatch { xs: usize, ys: usize, sigmas: Option<usize> },
    #[error("need at least {needed} points for {params} parameters, got {got}")]
    TooFewPoints { needed: usize, params: usize, got: usize },
    #[error("data must be finite with positive uncertainties")]
    NonFinite,
    #[error("initial parameters have length {got}, model expects {expected}")]
    InitLength { got: usize, expected: usize },
    #[error("normal equations are singular: no parameter influences the residuals")]
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelFunction,
    pub param_names: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Weighted residual sum of squares at the optimum.
    pub residual_norm: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.param_names.iter().position(|n| n == name).map(|i| self.estimates[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.param_names.iter().position(|n| n == name).map(|i| self.std_errors[i])
    }
}

struct Problem<'a> {
    model: &'a ModelFunction,
    xs: Vec<f64>,
    ys: Vec<f64>,
    inv_sigma: Vec<f64>,
    scale: Vec<f64>,
}

impl Problem<'_> {
    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().zip(&self.ys).zip(&self.inv_sigma).map(|((&x, &y), &w)| (self.model.eval(x, p) - y) * w),
        )
    }

    fn cost(r: &DVector<f64>) -> f64 {
        r.norm_squared()
    }

    fn jacobian(&self, p: &[f64], r0: &DVector<f64>) -> DMatrix<f64> {
        jacobian_forward(self.model, &self.xs, &self.inv_sigma, p, r0, &self.scale)
    }
}

fn step_for(p: f64, scale: f64) -> f64 {
    JACOBIAN_STEP * p.abs().max(scale)
}

fn jacobian_forward(
    model: &ModelFunction,
    xs: &[f64],
    inv_sigma: &[f64],
    p: &[f64],
    r0: &DVector<f64>,
    scale: &[f64],
) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(xs.len(), p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let mut h = match model.location_width(k, p) {
            Some(w) => JACOBIAN_STEP * w,
            None => step_for(p[k], scale[k]),
        };
        // Step backwards when the forward point would leave the box.
        if p[k] + h > model.bounds[k].1 {
            h = -h;
        }
        q[k] = p[k] + h;
        let h_eff = q[k] - p[k];
        for (i, (&x, &w)) in xs.iter().zip(inv_sigma).enumerate() {
            let y0 = r0[i];
            j[(i, k)] = ((model.eval(x, &q) * w - y0) - (model.eval(x, p) * w - y0)) / h_eff;
        }
        q[k] = p[k];
    }
    j
}

/// Forward-difference Jacobian of the model values with respect to the
/// parameters (relative step 1e−7, line centers stepped by 1e−7 of the
/// width), as used inside [`fit`].
pub fn numeric_jacobian(model: &ModelFunction, xs: &[f64], p: &[f64]) -> Vec<Vec<f64>> {
    let ones = vec![1.0; xs.len()];
    let r0 = DVector::from_iterator(xs.len(), xs.iter().map(|&x| model.eval(x, p)));
    let scale: Vec<f64> = p.iter().map(|v| if *v != 0.0 { v.abs() } else { 1.0 }).collect();
    let j = jacobian_forward(model, xs, &ones, p, &r0, &scale);
    (0..xs.len()).map(|i| j.row(i).iter().copied().collect()).collect()
}

fn sort_pairs(xs: &[f64], ys: &[f64], sigmas: Option<&[f64]>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    let sig = |i: usize| sigmas.map_or(1.0, |s| s[i]);
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(ys[a].total_cmp(&ys[b])).then(sig(a).total_cmp(&sig(b))));
    (
        idx.iter().map(|&i| xs[i]).collect(),
        idx.iter().map(|&i| ys[i]).collect(),
        idx.iter().map(|&i| 1.0 / sig(i)).collect(),
    )
}

/// Fits `model` to `(xs, ys)`. Data are sorted by `x` first, so the result
/// does not depend on the input order. When `init` is absent a model-specific
/// heuristic supplies the starting point. Hitting the iteration cap is not an
/// error: the partial result comes back with `converged = false`.
pub fn fit(
    model: &ModelFunction,
    xs: &[f64],
    ys: &[f64],
    sigmas: Option<&[f64]>,
    init: Option<&[f64]>,
) -> Result<FitResult, FitError> {
    let n_params = model.n_params();
    if xs.len() != ys.len() || sigmas.is_some_and(|s| s.len() != xs.len()) {
        return Err(FitError::LengthMismatch { xs: xs.len(), ys: ys.len(), sigmas: sigmas.map(<[f64]>::len) });
    }
    if xs.len() < n_params + 1 {
        return Err(FitError::TooFewPoints { needed: n_params + 1, params: n_params, got: xs.len() });
    }
    let finite = xs.iter().chain(ys).all(|v| v.is_finite())
        && sigmas.is_none_or(|s| s.iter().all(|v| v.is_finite() && *v > 0.0));
    if !finite {
        return Err(FitError::NonFinite);
    }
    let (xs, ys, inv_sigma) = sort_pairs(xs, ys, sigmas);

    let mut p = match init {
        Some(v) if v.len() != n_params => return Err(FitError::InitLength { got: v.len(), expected: n_params }),
        Some(v) => {
            let mut v = v.to_vec();
            model.project(&mut v);
            v
        }
        None => guess::initial_guess(model, &xs, &ys),
    };
    if p.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let scale: Vec<f64> = p.iter().map(|v| if *v != 0.0 { v.abs() } else { 1.0 }).collect();
    let problem = Problem { model, xs, ys, inv_sigma, scale };

    let mut r = problem.residuals(&p);
    let mut cost = Problem::cost(&r);
    if !cost.is_finite() {
        return Err(FitError::NonFinite);
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = problem.jacobian(&p, &r);
    if jac.iter().all(|v| *v == 0.0) {
        return Err(FitError::Singular);
    }

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * &r;
        if g.amax() < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        let max_diag = a.diagonal().amax();
        let accepted = loop {
            let mut m = a.clone();
            for k in 0..n_params {
                m[(k, k)] += lambda * a[(k, k)].max(1e-12 * max_diag);
            }
            let step = m.cholesky().map(|c| -c.solve(&g));
            if let Some(delta) = step {
                let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
                model.project(&mut trial);
                let r_trial = problem.residuals(&trial);
                let c_trial = Problem::cost(&r_trial);
                if c_trial.is_finite() && c_trial < cost {
                    lambda = (lambda / 10.0).max(1e-15);
                    break Some((trial, r_trial, c_trial));
                }
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break None;
            }
        };
        match accepted {
            Some((trial, r_trial, c_trial)) => {
                let rel = trial.iter().zip(&p).map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
                p = trial;
                r = r_trial;
                cost = c_trial;
                jac = problem.jacobian(&p, &r);
                if rel < PARAM_TOLERANCE {
                    converged = true;
                    break;
                }
            }
            None => {
                // No damped step lowers the cost: the parameter change is zero.
                converged = true;
                break;
            }
        }
    }

    let n = problem.xs.len();
    let a = jac.transpose() * &jac;
    let dof = (n - n_params) as f64;
    let s2 = cost / dof;
    // Parameters differ by many decades; scale to unit diagonal before the
    // pseudo-inverse so its cutoff does not drop small-scale directions.
    let d = DMatrix::from_diagonal(&a.diagonal().map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 }));
    let scaled = &d * &a * &d;
    let pinv = scaled.pseudo_inverse(1e-14).map(|s| &d * s * &d).unwrap_or_else(|_| DMatrix::zeros(n_params, n_params));
    let cov = (&pinv + pinv.transpose()) * (0.5 * s2);
    let covariance: Vec<Vec<f64>> = (0..n_params).map(|i| (0..n_params).map(|j| cov[(i, j)]).collect()).collect();
    let std_errors = (0..n_params).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();

    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("iteration cap of {MAX_ITERATIONS} reached"));
    }
    Ok(FitResult {
        model: model.clone(),
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        estimates: p,
        std_errors,
        covariance,
        residual_norm: cost,
        n_iterations: iterations,
        converged,
        warnings,
    })
}
