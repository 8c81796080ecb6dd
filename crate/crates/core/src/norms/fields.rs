use crate::error::{Error, Result};
use crate::linear::{Level, Trajectory};
use crate::model::{velocity_fields, Radii};
use crate::norms::MAX_ORDER;

/// Multi-indices (j, m) for ∂_t^j ∂_r^m with j + m ≤ order, in increasing total order.
pub fn multi_indices(order: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for total in 0..=order {
        for j in (0..=total).rev() {
            out.push((j, total - j));
        }
    }
    out
}

/// The two components (∂^α u_t, ∂^α u_r) of a derivative of u′.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub j: usize,
    pub m: usize,
    pub ut: Vec<f64>,
    pub ur: Vec<f64>,
}

/// ∂_t^j ∂_r^m u′ at one time level; rotation derivatives vanish on radial fields.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeFields {
    pub t: f64,
    pub fields: Vec<FieldPair>,
    /// Ω^α u′ ≡ 0 for |α| ≥ 1, recorded rather than computed.
    pub radial: bool,
}

impl DerivativeFields {
    pub fn get(&self, j: usize, m: usize) -> Option<&FieldPair> {
        self.fields.iter().find(|f| f.j == j && f.m == m)
    }

    /// Ω^α u′ for |α| ≥ 1: exactly zero on a radial trajectory.
    pub fn angular(&self, len: usize) -> Vec<f64> {
        vec![0.0; len]
    }
}

/// Centred radial derivative. `even` gives the parity of f about r = 0 (used at the origin);
/// the exterior boundary uses a one-sided second-order difference. Values past the end are 0.
pub(crate) fn d_r(radii: &Radii, f: &[f64], even: bool, out: &mut Vec<f64>) {
    let m = f.len();
    out.clear();
    out.resize(m, 0.0);
    if m == 0 {
        return;
    }
    let half = 0.5 / radii.dr;
    let at = |i: usize| if i < m { f[i] } else { 0.0 };
    out[0] = if radii.minkowski {
        if even {
            0.0
        } else {
            2.0 * at(1) * half
        }
    } else {
        (-3.0 * f[0] + 4.0 * at(1) - at(2)) * half
    };
    for i in 1..m {
        out[i] = (at(i + 1) - f[i - 1]) * half;
    }
}

/// Time-difference weights for derivative order j at position `pos` within `len` consecutive levels.
pub(crate) fn time_weights(j: usize, len: usize, pos: usize) -> Option<Vec<f64>> {
    match (j, len, pos) {
        (0, _, pos) => {
            let mut w = vec![0.0; len];
            w[pos] = 1.0;
            Some(w)
        }
        (1, 3, 1) | (1, 4, 1) | (1, 4, 2) => {
            let mut w = vec![0.0; len];
            w[pos - 1] = -0.5;
            w[pos + 1] = 0.5;
            Some(w)
        }
        (2, 3, 1) | (2, 4, 1) | (2, 4, 2) => {
            let mut w = vec![0.0; len];
            w[pos - 1] = 1.0;
            w[pos] = -2.0;
            w[pos + 1] = 1.0;
            Some(w)
        }
        (1, 4, 0) => Some(vec![-1.5, 2.0, -0.5, 0.0]),
        (2, 4, 0) => Some(vec![2.0, -5.0, 4.0, -1.0]),
        (1, 4, 3) => Some(vec![0.0, 0.5, -2.0, 1.5]),
        (2, 4, 3) => Some(vec![-1.0, 4.0, -5.0, 2.0]),
        _ => None,
    }
}

/// Builds all ∂_t^j ∂_r^m u′ (j + m ≤ order) at position `pos` of consecutive velocity levels
/// `(ut, ur)` spaced by `dt`.
pub(crate) fn build_fields(
    radii: &Radii,
    levels: &[(&[f64], &[f64])],
    pos: usize,
    dt: f64,
    order: usize,
) -> Option<Vec<FieldPair>> {
    let len = levels.iter().map(|(a, _)| a.len()).max().unwrap_or(0);
    let mut out = Vec::new();
    let mut tmp = Vec::new();
    for j in 0..=order {
        let w = time_weights(j, levels.len(), pos)?;
        let scale = dt.powi(j as i32).recip();
        let mut ut = vec![0.0; len];
        let mut ur = vec![0.0; len];
        for (wk, (a, b)) in w.iter().zip(levels) {
            if *wk == 0.0 {
                continue;
            }
            for (o, x) in ut.iter_mut().zip(a.iter()) {
                *o += wk * scale * x;
            }
            for (o, x) in ur.iter_mut().zip(b.iter()) {
                *o += wk * scale * x;
            }
        }
        // u_t is even in r, u_r odd; each r-derivative flips parity
        let (mut ft, mut fr) = (ut, ur);
        for m in 0..=order - j {
            if m > 0 {
                d_r(radii, &ft, m % 2 == 1, &mut tmp);
                std::mem::swap(&mut ft, &mut tmp);
                d_r(radii, &fr, m % 2 == 0, &mut tmp);
                std::mem::swap(&mut fr, &mut tmp);
            }
            out.push(FieldPair { j, m, ut: ft.clone(), ur: fr.clone() });
        }
    }
    out.sort_by_key(|f| (f.j + f.m, std::cmp::Reverse(f.j)));
    Some(out)
}

/// Derivative fields at the middle of three consecutive levels.
pub fn derivative_fields_from(radii: &Radii, levels: &[&Level], dt: f64, order: usize) -> Result<DerivativeFields> {
    if order > MAX_ORDER {
        return Err(Error::invalid(format!("derivative order {order} exceeds {MAX_ORDER}")));
    }
    if levels.len() < 3 {
        return Err(Error::InvalidSequence(format!(
            "derivative fields need 3 consecutive levels, have {}",
            levels.len()
        )));
    }
    let lv = &levels[levels.len() - 3..];
    for w in lv.windows(2) {
        if w[1].step != w[0].step + 1 {
            return Err(Error::InvalidSequence("levels are not consecutive steps".into()));
        }
    }
    let vel: Vec<(Vec<f64>, Vec<f64>)> = lv
        .iter()
        .map(|l| {
            let m = l.v.len();
            let (mut u, mut ut, mut ur) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
            velocity_fields(radii, &l.v, &l.p, &mut u, &mut ut, &mut ur);
            (ut, ur)
        })
        .collect();
    let refs: Vec<(&[f64], &[f64])> = vel.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
    let fields = build_fields(radii, &refs, 1, dt, order).expect("three-level stencils exist");
    Ok(DerivativeFields { t: lv[1].t, fields, radial: true })
}

/// Derivative fields from the trajectory's last three levels.
pub fn derivative_fields(traj: &Trajectory, order: usize) -> Result<DerivativeFields> {
    let radii = Radii::new(&traj.grid);
    let levels: Vec<&Level> = traj.ring().collect();
    derivative_fields_from(&radii, &levels, traj.grid.dt, order)
}
