//! Exact solution of the homogeneous reduced problem on the half-line r ≥ R0 with
//! v(t, R0) = 0, by odd reflection of the data about R0.

use crate::error::{Error, Result};
use crate::model::{DataProfile, RadialGrid, Shape};

/// v and its first and second derivatives on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFields {
    pub v: Vec<f64>,
    pub vt: Vec<f64>,
    pub vr: Vec<f64>,
    pub vtr: Vec<f64>,
    /// Equal to v_rr for the homogeneous equation.
    pub vtt: Vec<f64>,
}

/// Odd extension about R0 of s ↦ ε·ρ·shape(ρ), ρ = R0 + s, with derivatives and antiderivative.
struct Reduced<'a> {
    shape: &'a Shape,
    r0: f64,
    eps: f64,
}

impl Reduced<'_> {
    /// k-th derivative of the reduced profile on s ≥ 0.
    fn half(&self, s: f64, k: usize) -> f64 {
        let rho = self.r0 + s;
        let f = |j: usize| self.shape.deriv(rho, j);
        let val = match k {
            0 => rho * f(0),
            k => k as f64 * f(k - 1) + rho * f(k),
        };
        self.eps * val
    }

    /// Derivative of the odd extension: parity alternates with k.
    fn ext(&self, x: f64, k: usize) -> f64 {
        if self.shape.is_zero() {
            return 0.0;
        }
        let sign = if x < 0.0 && k % 2 == 0 { -1.0 } else { 1.0 };
        sign * self.half(x.abs(), k)
    }

    /// ∫_0^x of the odd extension (even in x).
    fn prim(&self, x: f64) -> Result<f64> {
        if self.shape.is_zero() {
            return Ok(0.0);
        }
        let s = x.abs();
        Ok(self.eps
            * (self.shape.first_moment_antiderivative(self.r0 + s)?
                - self.shape.first_moment_antiderivative(self.r0)?))
    }
}

fn check(grid: &RadialGrid, data: &DataProfile, t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!("oracle time must be non-negative, got {t}")));
    }
    data.validate()?;
    if matches!(data.f_shape, Shape::SmoothBump { .. }) || matches!(data.g_shape, Shape::SmoothBump { .. }) {
        return Err(Error::UnsupportedProfile(
            "the oracle needs closed-form antiderivatives (gaussian or polynomial bump)".into(),
        ));
    }
    if let Some((lo, _)) = data.support() {
        if lo < grid.r0() && grid.geometry.is_exterior() {
            return Err(Error::invalid("oracle data must vanish inside the obstacle"));
        }
    }
    Ok(())
}

/// Exact v(t, r_i) on every grid node.
pub fn dalembert_oracle(grid: &RadialGrid, data: &DataProfile, t: f64) -> Result<Vec<f64>> {
    Ok(dalembert_fields(grid, data, t)?.v)
}

pub fn dalembert_fields(grid: &RadialGrid, data: &DataProfile, t: f64) -> Result<OracleFields> {
    check(grid, data, t)?;
    let r0 = grid.r0();
    let phi = Reduced { shape: &data.f_shape, r0, eps: data.eps };
    let psi = Reduced { shape: &data.g_shape, r0, eps: data.eps };
    let n = grid.n;
    let mut out = OracleFields {
        v: vec![0.0; n],
        vt: vec![0.0; n],
        vr: vec![0.0; n],
        vtr: vec![0.0; n],
        vtt: vec![0.0; n],
    };
    if data.is_zero() {
        return Ok(out);
    }
    for i in 0..n {
        let s = grid.r(i) - r0;
        let (a, b) = (s + t, s - t);
        out.v[i] = 0.5 * (phi.ext(a, 0) + phi.ext(b, 0)) + 0.5 * (psi.prim(a)? - psi.prim(b)?);
        out.vt[i] = 0.5 * (phi.ext(a, 1) - phi.ext(b, 1)) + 0.5 * (psi.ext(a, 0) + psi.ext(b, 0));
        out.vr[i] = 0.5 * (phi.ext(a, 1) + phi.ext(b, 1)) + 0.5 * (psi.ext(a, 0) - psi.ext(b, 0));
        out.vtt[i] = 0.5 * (phi.ext(a, 2) + phi.ext(b, 2)) + 0.5 * (psi.ext(a, 1) - psi.ext(b, 1));
        out.vtr[i] = 0.5 * (phi.ext(a, 2) - phi.ext(b, 2)) + 0.5 * (psi.ext(a, 1) + psi.ext(b, 1));
    }
    Ok(out)
}
