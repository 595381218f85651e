//! Starting points for the least-squares iteration. All heuristics assume the
//! data are sorted by `x`.

use std::f64::consts::PI;

use super::models::{ModelFunction, ModelKind};

pub(crate) fn initial_guess(model: &ModelFunction, xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut p = match model.kind {
        ModelKind::ExpDecay => exp_decay(xs, ys),
        ModelKind::Lorentzian => lorentzian(xs, ys),
        ModelKind::DetunedRabiLine { pulse_duration } => rabi_line(xs, ys, pulse_duration),
        ModelKind::DampedRabi => damped_rabi(xs, ys),
        ModelKind::SaturablePower => saturable(xs, ys),
    };
    model.project(&mut p);
    p
}

fn span(xs: &[f64]) -> f64 {
    let s = xs[xs.len() - 1] - xs[0];
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
fn linear_regression(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Log-linear regression on baseline-subtracted data.
fn exp_decay(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let c0 = ys[n - 1];
    let z0 = ys[0] - c0;
    let fallback = vec![z0, span(xs) / 2.0, c0];
    if z0 == 0.0 {
        return vec![0.0, span(xs) / 2.0, mean(ys)];
    }
    let sign = z0.signum();
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter_map(|(&x, &y)| {
            let z = sign * (y - c0);
            (z > 0.05 * z0.abs()).then(|| (x, z.ln()))
        })
        .collect();
    match linear_regression(&pts) {
        Some((slope, intercept)) if slope < 0.0 => vec![sign * intercept.exp(), -1.0 / slope, c0],
        _ => fallback,
    }
}

fn edge_baseline(ys: &[f64]) -> f64 {
    let k = (ys.len() / 10).max(1);
    (mean(&ys[..k]) + mean(&ys[ys.len() - k..])) / 2.0
}

fn peak_index(ys: &[f64], baseline: f64) -> usize {
    ys.iter()
        .enumerate()
        .max_by(|a, b| (a.1 - baseline).abs().total_cmp(&(b.1 - baseline).abs()))
        .map_or(0, |(i, _)| i)
}

/// Peak location and a half-height width scan.
fn lorentzian(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let c0 = edge_baseline(ys);
    let i = peak_index(ys, c0);
    let a0 = ys[i] - c0;
    let half = a0.abs() / 2.0;
    let above = |j: usize| (ys[j] - c0) * a0.signum() >= half;
    let cross = |j_in: usize, j_out: usize| {
        let (y_in, y_out) = ((ys[j_in] - c0).abs(), (ys[j_out] - c0).abs());
        let t = if y_in != y_out { (y_in - half) / (y_in - y_out) } else { 0.5 };
        xs[j_in] + t * (xs[j_out] - xs[j_in])
    };
    let mut l = i;
    while l > 0 && above(l - 1) {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < xs.len() && above(r + 1) {
        r += 1;
    }
    let left = if l > 0 { cross(l, l - 1) } else { xs[0] };
    let right = if r + 1 < xs.len() { cross(r, r + 1) } else { xs[xs.len() - 1] };
    let mut width = right - left;
    if !(width > 0.0) {
        width = span(xs) / 4.0;
    }
    vec![a0, xs[i], width, c0]
}

fn rabi_line(xs: &[f64], ys: &[f64], pulse_duration: f64) -> Vec<f64> {
    let c0 = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let i = peak_index(ys, c0);
    vec![ys[i] - c0, xs[i], 0.5 / pulse_duration, c0]
}

/// Dominant discrete-Fourier component of the mean-subtracted trace.
fn dominant_frequency(xs: &[f64], ys: &[f64]) -> f64 {
    let m = mean(ys);
    let s = span(xs);
    let n = xs.len();
    let oversample = 8;
    let candidates = (1..=(n / 2).max(1) * oversample).map(|k| k as f64 / (s * oversample as f64));
    candidates
        .map(|f| {
            let (re, im) = xs.iter().zip(ys).fold((0.0, 0.0), |(re, im), (&x, &y)| {
                let ph = 2.0 * PI * f * x;
                (re + (y - m) * ph.cos(), im + (y - m) * ph.sin())
            });
            (f, re * re + im * im)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(1.0 / s, |(f, _)| f)
}

fn damped_rabi(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let c0 = ys[0];
    let level = mean(ys);
    let mut a0 = 2.0 * (level - c0);
    if a0 == 0.0 {
        let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y)));
        a0 = hi - lo;
    }
    vec![a0, span(xs) / 3.0, dominant_frequency(xs, ys), c0]
}

/// Linear slope at the high-power end, quadratic coefficient at the low end.
fn saturable(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let (x1, y1) = (xs[0], ys[0]);
    let (xa, ya, xb, yb) = (xs[n - 2], ys[n - 2], xs[n - 1], ys[n - 1]);
    let mut k0 = if xb > xa { (yb - ya) / (xb - xa) } else { 0.0 };
    if !(k0 > 0.0) {
        k0 = (yb / xb).abs().max(f64::MIN_POSITIVE);
    }
    let mut p_sat0 = if y1 > 0.0 && x1 > 0.0 { k0 * x1 * x1 / y1 - x1 } else { xb };
    if !(p_sat0 > 0.0) {
        p_sat0 = x1.max(f64::MIN_POSITIVE);
    }
    vec![k0, p_sat0]
}
