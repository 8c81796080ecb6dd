use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linear::{Source, StageCtx};
use crate::model::{Radii, RadialGrid, Shape};

/// Prescribed forcing G(t, r) of □u = G, in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingField {
    Zero,
    /// G = amplitude · time(t) · space(r).
    Separable { amplitude: f64, time: Shape, space: Shape },
}

impl ForcingField {
    pub fn separable(amplitude: f64, time: Shape, space: Shape) -> Self {
        ForcingField::Separable { amplitude, time, space }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ForcingField::Zero => true,
            ForcingField::Separable { amplitude, time, space } => *amplitude == 0.0 || time.is_zero() || space.is_zero(),
        }
    }

    /// Radial support [lo, hi], None when G vanishes.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            ForcingField::Separable { space, .. } if !self.is_zero() => space.support(),
            _ => None,
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.support().map(|s| s.1.max(0.0)).unwrap_or(0.0)
    }

    /// Time interval outside of which G vanishes.
    pub fn time_support(&self) -> Option<(f64, f64)> {
        match self {
            ForcingField::Separable { time, .. } if !self.is_zero() => time.support(),
            _ => None,
        }
    }

    pub fn validate_on(&self, grid: &RadialGrid) -> Result<()> {
        if let ForcingField::Separable { amplitude, time, space } = self {
            time.validate()?;
            space.validate()?;
            if !amplitude.is_finite() {
                return Err(Error::invalid("forcing amplitude must be finite"));
            }
        }
        let Some((lo, hi)) = self.support() else {
            return Ok(());
        };
        if hi > grid.support_radius + 1e-12 {
            return Err(Error::invalid(format!(
                "forcing support reaches r = {hi}, grid was sized for {}",
                grid.support_radius
            )));
        }
        if grid.geometry.is_exterior() && lo <= grid.r0() {
            return Err(Error::invalid("forcing support must lie outside the obstacle"));
        }
        Ok(())
    }

    /// ∂_t^j ∂_r^m G(t, r).
    pub fn deriv(&self, t: f64, r: f64, j: usize, m: usize) -> f64 {
        match self {
            ForcingField::Zero => 0.0,
            ForcingField::Separable { amplitude, time, space } => {
                let s = space.deriv(r, m);
                if s == 0.0 {
                    return 0.0;
                }
                amplitude * time.deriv(t, j) * s
            }
        }
    }

    pub fn value(&self, t: f64, r: f64) -> f64 {
        self.deriv(t, r, 0, 0)
    }

    /// ‖∂_t^j ∂_r^m G(t, ·)‖ in L²(ℝ³ minus the obstacle), trapezoid rule on the grid nodes.
    pub fn norm(&self, radii: &Radii, t: f64, j: usize, m: usize) -> f64 {
        let Some((lo, hi)) = self.support() else {
            return 0.0;
        };
        let mut s = 0.0;
        for &r in &radii.r {
            if r <= lo || r >= hi {
                continue;
            }
            let g = self.deriv(t, r, j, m);
            s += g * g * r * r;
        }
        (4.0 * PI * s * radii.dr).sqrt()
    }

    /// Writes r·G(t, r_i) into `out`; returns false (leaving `out` alone) when G(t, ·) ≡ 0.
    pub fn fill_reduced(&self, radii: &Radii, t: f64, out: &mut [f64]) -> bool {
        match self {
            ForcingField::Zero => false,
            ForcingField::Separable { amplitude, time, space } => {
                let a = amplitude * time.value(t);
                if a == 0.0 {
                    return false;
                }
                for (o, &r) in out.iter_mut().zip(&radii.r) {
                    *o = a * r * space.value(r);
                }
                true
            }
        }
    }
}

impl Source for ForcingField {
    fn eval(&mut self, ctx: &StageCtx, radii: &Radii, _v: &[f64], _p: &[f64], out: &mut [f64]) -> bool {
        let m = (ctx.hi + 1).min(out.len());
        self.fill_reduced(radii, ctx.t, &mut out[..m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_grid, Geometry};

    #[test]
    fn norm_matches_fine_quadrature() {
        let space = Shape::poly_bump(1.0, 3.0, 2);
        let f = ForcingField::separable(2.0, Shape::poly_bump(0.0, 2.0, 2), space.clone());
        let g = make_grid(Geometry::Minkowski, 0.01, 1.0, 3.0).unwrap();
        let radii = Radii::new(&g);
        let got = f.norm(&radii, 1.0, 0, 0);
        let m = 200_000;
        let h = 2.0 / m as f64;
        let s: f64 = (0..m)
            .map(|k| {
                let r = 1.0 + (k as f64 + 0.5) * h;
                let v = 2.0 * space.value(r);
                v * v * r * r * h
            })
            .sum();
        let exact = (4.0 * PI * s).sqrt();
        assert!((got - exact).abs() < 1e-4 * exact, "{got} vs {exact}");
    }

    #[test]
    fn exterior_forcing_must_clear_obstacle() {
        let f = ForcingField::separable(1.0, Shape::poly_bump(0.0, 1.0, 2), Shape::poly_bump(0.2, 2.0, 2));
        let g = make_grid(Geometry::exterior_default(), 0.05, 1.0, 2.0).unwrap();
        assert!(f.validate_on(&g).is_err());
    }

    #[test]
    fn vanishes_outside_time_window() {
        let f = ForcingField::separable(1.0, Shape::poly_bump(0.0, 1.0, 2), Shape::poly_bump(1.0, 2.0, 2));
        assert_eq!(f.value(1.5, 1.5), 0.0);
        assert!(f.value(0.5, 1.5) > 0.0);
        assert_eq!(f.time_support(), Some((0.0, 1.0)));
    }
}
