use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MIN_ANNULUS_NODES: usize = 32;

/// Samples h on `nodes` equally spaced points covering [R/4, 2R].
pub fn sample_annulus(h: impl Fn(f64) -> f64, radius: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (0.25 * radius, 2.0 * radius);
    let step = (hi - lo) / (nodes.max(2) - 1) as f64;
    let r: Vec<f64> = (0..nodes).map(|i| lo + i as f64 * step).collect();
    let vals = r.iter().map(|&x| h(x)).collect();
    (r, vals)
}

/// Both sides of ‖h‖_{L∞(R/2 ≤ r ≤ R)} ≤ C R⁻¹ Σ_{j≤2} ‖∂_r^j h‖_{L²(R/4 ≤ |x| ≤ 2R)} for radial h
/// sampled on a uniform mesh of [R/4, 2R].
pub fn annulus_sup_check(r: &[f64], h: &[f64], radius: f64) -> Result<(f64, f64)> {
    if !(radius > 1.0) {
        return Err(Error::invalid(format!("annulus radius must exceed 1, got {radius}")));
    }
    if r.len() != h.len() || r.len() < MIN_ANNULUS_NODES {
        return Err(Error::invalid(format!(
            "annulus sampling needs at least {MIN_ANNULUS_NODES} nodes, got {}",
            r.len().min(h.len())
        )));
    }
    let step = r[1] - r[0];
    let tol = 1e-9 * radius;
    if (r[0] - 0.25 * radius).abs() > tol || (r[r.len() - 1] - 2.0 * radius).abs() > tol || !(step > 0.0) {
        return Err(Error::invalid("samples must cover [R/4, 2R] uniformly"));
    }
    let lhs = r
        .iter()
        .zip(h)
        .filter(|(x, _)| **x >= 0.5 * radius - tol && **x <= radius + tol)
        .map(|(_, y)| y.abs())
        .fold(0.0, f64::max);

    let d1 = diff(h, step);
    let d2 = diff(&d1, step);
    let rhs = (l2(r, h, step) + l2(r, &d1, step) + l2(r, &d2, step)) / radius;
    Ok((lhs, rhs))
}

/// Second-order differences, one-sided at both ends.
fn diff(f: &[f64], step: f64) -> Vec<f64> {
    let n = f.len();
    let half = 0.5 / step;
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * half;
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * half;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * half;
    }
    out
}

/// sqrt(4π∫ f² r² dr), trapezoid rule.
fn l2(r: &[f64], f: &[f64], step: f64) -> f64 {
    let n = f.len();
    let mut s = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        s += w * f[i] * f[i] * r[i] * r[i];
    }
    (4.0 * PI * s * step).sqrt()
}
