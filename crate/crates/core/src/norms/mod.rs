//! Norms of radial solutions: energies, the weighted space-time (KSS) accumulator, dyadic and
//! local pieces, derivative fields ∂_t^j ∂_r^m u′ and the annulus Sobolev check.
//!
//! All spatial integrals are over ℝ³ (minus the obstacle) and carry the factor 4π r².
//! In the reduced variables the energy density 4π r²|u′|² equals 4π(p² + (v_r − v/r)²).

mod fields;
mod sobolev;
mod tracker;

pub use fields::{derivative_fields, derivative_fields_from, multi_indices, DerivativeFields, FieldPair};
pub use sobolev::{annulus_sup_check, sample_annulus};
pub use tracker::{DyadicProfile, LevelNorms, NormLog, NormTracker};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linear::StateView;
use crate::model::Radii;

pub const MAX_ORDER: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct NormConfig {
    /// Derivative order N (at most 2).
    pub order: usize,
    pub dyadic_base: f64,
    /// The 2 in ln(2 + t).
    pub log_shift: f64,
    /// The 1 in (1 + r).
    pub weight_shift: f64,
    /// Radii R of the local quantities over {r < R}.
    pub local_radii: Vec<f64>,
    /// Keep every k-th level row in the log (the accumulators still run at full rate).
    pub keep_every: usize,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            order: 0,
            dyadic_base: 2.0,
            log_shift: 2.0,
            weight_shift: 1.0,
            local_radii: vec![1.0, 2.0, 4.0],
            keep_every: 1,
        }
    }
}

impl NormConfig {
    pub fn with_order(order: usize) -> Self {
        NormConfig { order, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order > MAX_ORDER {
            return Err(Error::invalid(format!(
                "derivative order {} exceeds {MAX_ORDER}",
                self.order
            )));
        }
        if !(self.dyadic_base > 1.0) || !(self.log_shift > 1.0) || !(self.weight_shift > 0.0) {
            return Err(Error::invalid("norm shifts must be positive and the dyadic base above 1"));
        }
        if self.keep_every == 0 {
            return Err(Error::invalid("keep_every must be at least 1"));
        }
        if self.local_radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("local radii must be positive"));
        }
        Ok(())
    }

    pub fn log_factor(&self, t: f64) -> f64 {
        (self.log_shift + t).ln()
    }
}

/// Visits every cell [r_i, r_{i+1}] of the state as (i, p-part at r_i, p-part at r_{i+1},
/// gradient part at the midpoint), all without the 4π·dr factor.
///
/// The gradient part is (sqrt(r_i r_{i+1})·(u_{i+1} − u_i)/dr)²; summed over cells it equals
/// Σ (D₊v)², so the unweighted total is exactly the invariant of the semi-discrete scheme.
#[inline]
pub(crate) fn for_each_cell(radii: &Radii, v: &[f64], p: &[f64], mut f: impl FnMut(usize, f64, f64, f64)) {
    let m = v.len().min(radii.len());
    if m < 2 {
        return;
    }
    let inv_dr = 1.0 / radii.dr;
    let mut u_prev = v[0] * radii.inv_r[0];
    let mut p_prev = p[0] * p[0];
    for i in 0..m - 1 {
        let (r0, r1) = (radii.r[i], radii.r[i + 1]);
        let u_next = v[i + 1] * radii.inv_r[i + 1];
        let p_next = p[i + 1] * p[i + 1];
        let w = if r0 > 0.0 { (r0 * r1).sqrt() * (u_next - u_prev) * inv_dr } else { 0.0 };
        f(i, 0.5 * p_prev, 0.5 * p_next, w * w);
        u_prev = u_next;
        p_prev = p_next;
    }
}

/// ‖u′(t, ·)‖_{L²} of the state.
pub fn energy(radii: &Radii, state: &StateView<'_>) -> f64 {
    weighted_energy(radii, state.v, state.p, |_| 1.0).sqrt()
}

/// 4π∫ ω(r)|u′|² r² dr with the cell quadrature.
pub fn weighted_energy(radii: &Radii, v: &[f64], p: &[f64], weight: impl Fn(f64) -> f64) -> f64 {
    let mut s = 0.0;
    let half = 0.5 * radii.dr;
    for_each_cell(radii, v, p, |i, a, b, g| {
        let (r0, r1) = (radii.r[i], radii.r[i + 1]);
        s += weight(r0) * a + weight(r1) * b + weight(r0 + half) * g;
    });
    4.0 * PI * s * radii.dr
}

/// Running ∫₀ᵗ ‖(1+r)^{-1/2} u′(s)‖² ds, left-endpoint rule in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KssAccumulator {
    pub value: f64,
    pub t: f64,
    pub weight_shift: f64,
    pub log_shift: f64,
}

impl Default for KssAccumulator {
    fn default() -> Self {
        KssAccumulator {
            value: 0.0,
            t: 0.0,
            weight_shift: 1.0,
            log_shift: 2.0,
        }
    }
}

impl KssAccumulator {
    /// value / ln(2 + t).
    pub fn log_normalized(&self) -> f64 {
        self.value / (self.log_shift + self.t).ln()
    }
}

/// Adds dt times the weighted energy density of `state`, which must sit at `acc.t`.
pub fn kss_accumulate(acc: &KssAccumulator, radii: &Radii, state: &StateView<'_>, dt: f64) -> Result<KssAccumulator> {
    let tol = 1e-9 * dt.max(f64::MIN_POSITIVE);
    if (state.t - acc.t).abs() > tol.max(1e-12 * acc.t) {
        return Err(Error::InvalidSequence(format!(
            "accumulator is at t = {}, state at t = {}",
            acc.t, state.t
        )));
    }
    let shift = acc.weight_shift;
    let density = weighted_energy(radii, state.v, state.p, |r| 1.0 / (shift + r));
    Ok(KssAccumulator {
        value: acc.value + dt * density,
        t: acc.t + dt,
        ..*acc
    })
}

/// ratio lhs/rhs with 0/0 := 0 and x/0 := +∞.
pub fn safe_ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}
