//! Least-squares fit of `A·exp(-t/τ)` with amplitude and time constant free.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub tau: f64,
    pub amplitude: f64,
    pub rmse: f64,
    pub n_points: usize,
}

/// Best amplitude for a fixed `tau` and the resulting RMSE.
fn profile(samples: &[(f64, f64)], tau: f64) -> (f64, f64) {
    let (mut ee, mut ve) = (0.0, 0.0);
    for &(t, v) in samples {
        let e = (-t / tau).exp();
        ee += e * e;
        ve += v * e;
    }
    let amp = if ee > 0.0 { ve / ee } else { 0.0 };
    let sse: f64 = samples
        .iter()
        .map(|&(t, v)| {
            let r = v - amp * (-t / tau).exp();
            r * r
        })
        .sum();
    (amp, (sse / samples.len() as f64).sqrt())
}

/// Log-linear regression over the positive samples; returns the slope of
/// `ln v` against `t`.
fn log_slope(samples: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples.iter().filter(|s| s.1 > 0.0).map(|&(t, v)| (t, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    (stt > 0.0).then(|| stl / stt)
}

const GRID: usize = 121;
const SPAN: f64 = 4.0;

/// Minimizes the RMSE of `A·exp(-t/τ)` over `(A, τ)`.
///
/// A log-linear regression gives the starting `τ`. The search then runs over
/// `ln τ` on a grid spanning `e^±4` around it, followed by golden-section
/// refinement, with `A` solved in closed form at every step.
pub fn fit_exponential(samples: &[(f64, f64)]) -> Result<FitResult> {
    if samples.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 samples, got {}", samples.len())));
    }
    if samples.iter().any(|s| !s.0.is_finite() || !s.1.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    let span_t = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max)
        - samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let tau0 = match log_slope(samples) {
        Some(slope) if slope < 0.0 => -1.0 / slope,
        Some(_) => return Err(Error::Fit("samples show no decay".into())),
        None if span_t > 0.0 => span_t,
        None => return Err(Error::Fit("samples show no decay".into())),
    };
    let center = tau0.ln();
    let lo = center - SPAN;
    let step = 2.0 * SPAN / (GRID - 1) as f64;
    let cost = |log_tau: f64| profile(samples, log_tau.exp()).1;
    let (best_i, _) = (0..GRID)
        .map(|i| (i, cost(lo + i as f64 * step)))
        .fold((0, f64::INFINITY), |acc, (i, c)| if c < acc.1 { (i, c) } else { acc });
    if best_i == 0 || best_i == GRID - 1 {
        return Err(Error::Fit(format!("time constant search diverged (start {tau0:.3e} s)")));
    }

    let (mut a, mut b) = (lo + (best_i - 1) as f64 * step, lo + (best_i + 1) as f64 * step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
        if (b - a).abs() < 1e-13 {
            break;
        }
    }
    let tau = ((a + b) / 2.0).exp();
    let (amplitude, rmse) = profile(samples, tau);
    if !rmse.is_finite() || !(tau > 0.0) {
        return Err(Error::Fit("non-finite result".into()));
    }
    Ok(FitResult { tau, amplitude, rmse, n_points: samples.len() })
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
