//! Least-squares fits and sampling grids shared by the experiment modules.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, clamped to [0, 1]; 1 when y is constant and fitted exactly.
    pub r_squared: f64,
}

fn r_squared(y: &[f64], fitted: impl Iterator<Item = f64>) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fitted).map(|(v, f)| (v - f).powi(2)).sum();
    if ss_tot <= f64::EPSILON * y.iter().map(|v| v * v).sum::<f64>() {
        return if ss_res <= f64::EPSILON { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

/// Ordinary least squares y ≈ slope·x + intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!("line fit needs ≥ 2 points, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("line fit needs two distinct abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = r_squared(y, x.iter().map(|a| slope * a + intercept));
    Ok(LineFit { slope, intercept, r_squared: r2 })
}

/// r² of the least-squares quadratic y ≈ c0 + c1·x + c2·x².
pub fn quadratic_r_squared(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InsufficientData(format!("quadratic fit needs ≥ 3 points, got {}", x.len())));
    }
    // centre and scale x for conditioning
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt().max(f64::MIN_POSITIVE);
    let z: Vec<f64> = x.iter().map(|a| (a - mx) / sx).collect();
    let mut m = [[0.0f64; 4]; 3];
    for (zi, yi) in z.iter().zip(y) {
        let b = [1.0, *zi, zi * zi];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += b[r] * b[c];
            }
            m[r][3] += b[r] * yi;
        }
    }
    let c = solve3(m).ok_or_else(|| Error::InsufficientData("degenerate quadratic fit".into()))?;
    Ok(r_squared(y, z.iter().map(|zi| c[0] + c[1] * zi + c[2] * zi * zi)))
}

fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Times 10^(k/per_decade) lying in [t_min, t_max], with t_max appended if it is not hit.
pub fn log_times(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    let mut out = Vec::new();
    if !(t_min > 0.0 && t_max >= t_min) || per_decade == 0 {
        return out;
    }
    let pd = per_decade as f64;
    let mut k = (t_min.log10() * pd - 1e-9).ceil() as i64;
    loop {
        let t = 10f64.powf(k as f64 / pd);
        if t > t_max * (1.0 + 1e-12) {
            break;
        }
        out.push(if (t - t_max).abs() <= 1e-9 * t_max { t_max } else { t });
        k += 1;
    }
    if out.last().is_none_or(|&t| t < t_max * (1.0 - 1e-9)) {
        out.push(t_max);
    }
    out
}
