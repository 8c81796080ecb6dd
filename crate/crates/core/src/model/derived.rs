//! Conversions between the reduced field v = r·u and the physical u, u_t, u_r.

use crate::model::grid::{Geometry, RadialGrid};

/// Cached node radii and their reciprocals (0 at r = 0).
#[derive(Debug, Clone)]
pub struct Radii {
    pub r: Vec<f64>,
    pub inv_r: Vec<f64>,
    pub dr: f64,
    pub minkowski: bool,
}

impl Radii {
    pub fn new(grid: &RadialGrid) -> Self {
        let r = grid.radii();
        let inv_r = r.iter().map(|&x| if x > 0.0 { 1.0 / x } else { 0.0 }).collect();
        Radii {
            r,
            inv_r,
            dr: grid.dr,
            minkowski: matches!(grid.geometry, Geometry::Minkowski),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// u = v/r on nodes; at r = 0 the limit is taken as ∂_r v(0) = v(dr)/dr (v is odd).
pub fn to_u(radii: &Radii, v: &[f64], u: &mut [f64]) {
    let m = v.len().min(u.len());
    for i in 0..m {
        u[i] = v[i] * radii.inv_r[i];
    }
    if radii.minkowski && m > 1 {
        u[0] = v[1] / radii.dr;
    }
}

/// v = r·u on nodes.
pub fn to_reduced(radii: &Radii, u: &[f64], v: &mut [f64]) {
    for ((vi, ui), ri) in v.iter_mut().zip(u).zip(&radii.r) {
        *vi = ui * ri;
    }
}

/// Node values of u_t and u_r from (v, p = v_t), over nodes `0..len` where `len = v.len()`.
///
/// Nodes beyond the slices are treated as zero. `u` is scratch of at least the same length.
/// u_r uses centred differences of u; at r = 0 (Minkowski) u_r = 0 by symmetry, at the
/// exterior boundary a one-sided second-order difference.
pub fn velocity_fields(radii: &Radii, v: &[f64], p: &[f64], u: &mut [f64], ut: &mut [f64], ur: &mut [f64]) {
    velocity_fields_from(radii, 0, v, p, u, ut, ur)
}

/// As [`velocity_fields`], but only nodes `lo..len` of `ut`, `ur` (and `lo - 1..len` of `u`) are written.
pub fn velocity_fields_from(
    radii: &Radii,
    lo: usize,
    v: &[f64],
    p: &[f64],
    u: &mut [f64],
    ut: &mut [f64],
    ur: &mut [f64],
) {
    let m = v.len();
    debug_assert!(p.len() == m && u.len() >= m && ut.len() >= m && ur.len() >= m);
    if m == 0 || lo >= m {
        return;
    }
    let start = lo.saturating_sub(1);
    for i in start..m {
        u[i] = v[i] * radii.inv_r[i];
        ut[i] = p[i] * radii.inv_r[i];
    }
    if radii.minkowski && start == 0 && m > 1 {
        u[0] = v[1] / radii.dr;
        ut[0] = p[1] / radii.dr;
    }
    let half = 0.5 / radii.dr;
    let at = |i: usize| if i < m { u[i] } else { 0.0 };
    if lo == 0 {
        ur[0] = if radii.minkowski {
            0.0
        } else {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) * half
        };
    }
    for i in lo.max(1)..m {
        ur[i] = (at(i + 1) - u[i - 1]) * half;
    }
}
