//! Closed-form radial profiles used for data and separable forcing.

use crate::error::{Error, Result};
use crate::model::grid::{Geometry, RadialGrid};

/// Gaussians are cut where exp(-z²) drops below ~1e-18.
const GAUSSIAN_CUTOFF: f64 = 6.5;

/// Boundary clearance (in grid steps) required of data on the exterior ball.
pub const BOUNDARY_CLEARANCE_STEPS: f64 = 4.0;

/// Dense polynomial with coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Antiderivative vanishing at x = 0.
    fn integral(&self) -> Poly {
        let mut out = vec![0.0];
        out.extend(self.0.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
        Poly(out)
    }

    fn mul_x(&self) -> Poly {
        let mut out = vec![0.0];
        out.extend_from_slice(&self.0);
        Poly(out)
    }

    /// (1 - x²)^m
    fn bump(m: u32) -> Poly {
        let mut coeffs = vec![0.0; 2 * m as usize + 1];
        let mut binom = 1.0;
        for k in 0..=m as usize {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[2 * k] = sign * binom;
            binom = binom * (m as usize - k) as f64 / (k + 1) as f64;
        }
        Poly(coeffs)
    }
}

/// A named radial (or temporal) profile with unit peak scale.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Zero,
    /// exp(-((r - center)/width)²), truncated at machine precision.
    Gaussian { center: f64, width: f64 },
    /// (1 - x²)^power on [lo, hi], x the affine image of r in [-1, 1]; C^(power-1).
    PolyBump { lo: f64, hi: f64, power: u32 },
    /// exp(1 - 1/(1 - x²)) on [lo, hi]; C^∞ but with no closed-form moments.
    SmoothBump { lo: f64, hi: f64 },
}

impl Shape {
    pub fn gaussian(center: f64, width: f64) -> Self {
        Shape::Gaussian { center, width }
    }

    pub fn poly_bump(lo: f64, hi: f64, power: u32) -> Self {
        Shape::PolyBump { lo, hi, power }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Shape::Zero)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Zero => true,
            Shape::Gaussian { center, width } => center.is_finite() && width.is_finite() && width > 0.0,
            Shape::PolyBump { lo, hi, power } => lo.is_finite() && hi.is_finite() && hi > lo && power >= 1,
            Shape::SmoothBump { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("malformed profile {self:?}")))
        }
    }

    /// Closed interval outside of which the profile is exactly zero.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Shape::Zero => None,
            Shape::Gaussian { center, width } => Some((
                center - GAUSSIAN_CUTOFF * width,
                center + GAUSSIAN_CUTOFF * width,
            )),
            Shape::PolyBump { lo, hi, .. } | Shape::SmoothBump { lo, hi } => Some((lo, hi)),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.deriv(r, 0)
    }

    /// k-th derivative; smooth bumps support k <= 2.
    pub fn deriv(&self, r: f64, k: usize) -> f64 {
        match *self {
            Shape::Zero => 0.0,
            Shape::Gaussian { center, width } => {
                let z = (r - center) / width;
                if z.abs() > GAUSSIAN_CUTOFF {
                    return 0.0;
                }
                let e = (-z * z).exp();
                // d^k/dz^k exp(-z²) = (-1)^k H_k(z) exp(-z²), physicists' Hermite recurrence
                let (mut h0, mut h1) = (1.0, 2.0 * z);
                if k == 0 {
                    h1 = h0;
                }
                for j in 1..k {
                    let h2 = 2.0 * z * h1 - 2.0 * j as f64 * h0;
                    h0 = h1;
                    h1 = h2;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * h1 * e / width.powi(k as i32)
            }
            Shape::PolyBump { lo, hi, power } => {
                let half = 0.5 * (hi - lo);
                let x = (r - 0.5 * (lo + hi)) / half;
                if x.abs() >= 1.0 {
                    return 0.0;
                }
                let mut p = Poly::bump(power);
                for _ in 0..k {
                    p = p.derivative();
                }
                p.eval(x) / half.powi(k as i32)
            }
            Shape::SmoothBump { lo, hi } => {
                let half = 0.5 * (hi - lo);
                let x = (r - 0.5 * (lo + hi)) / half;
                if x.abs() >= 1.0 {
                    return 0.0;
                }
                let s = 1.0 - x * x;
                let f = (1.0 - 1.0 / s).exp();
                // derivatives of exp(1 - 1/s) with s = 1 - x², in x
                let g1 = -2.0 * x / (s * s);
                let out = match k {
                    0 => f,
                    1 => f * g1,
                    2 => {
                        let g2 = (-2.0 * s * s - 8.0 * x * x * s) / s.powi(4);
                        f * (g1 * g1 + g2)
                    }
                    _ => panic!("smooth bump derivatives implemented up to order 2"),
                };
                out / half.powi(k as i32)
            }
        }
    }

    /// Antiderivative of r ↦ r·shape(r), constant outside the support.
    pub fn first_moment_antiderivative(&self, r: f64) -> Result<f64> {
        match *self {
            Shape::Zero => Ok(0.0),
            Shape::Gaussian { center, width } => {
                let z = ((r - center) / width).clamp(-GAUSSIAN_CUTOFF, GAUSSIAN_CUTOFF);
                let sqrt_pi = std::f64::consts::PI.sqrt();
                Ok(width * center * 0.5 * sqrt_pi * libm::erf(z) - 0.5 * width * width * (-z * z).exp())
            }
            Shape::PolyBump { lo, hi, power } => {
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                let x = ((r - mid) / half).clamp(-1.0, 1.0);
                let p = Poly::bump(power);
                // ∫ (mid + half·x) P(x) half dx
                let prim = p.integral();
                let prim_x = p.mul_x().integral();
                Ok(half * (mid * prim.eval(x) + half * prim_x.eval(x)))
            }
            Shape::SmoothBump { .. } => Err(Error::UnsupportedProfile(
                "smooth bump has no closed-form antiderivative".into(),
            )),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Shape::Zero => "zero".into(),
            Shape::Gaussian { center, width } => format!("gaussian:{center}:{width}"),
            Shape::PolyBump { lo, hi, power } => format!("bump:{lo}:{hi}:{power}"),
            Shape::SmoothBump { lo, hi } => format!("smooth:{lo}:{hi}"),
        }
    }

    /// Parses the `describe` syntax: `zero`, `gaussian:c:w`, `bump:lo:hi:m`, `smooth:lo:hi`.
    pub fn parse(s: &str) -> Result<Shape> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::invalid(format!("profile `{s}` is missing a field")))?
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("profile `{s}` has a non-numeric field")))
        };
        let shape = match parts[0] {
            "zero" => Shape::Zero,
            "gaussian" => Shape::gaussian(num(1)?, num(2)?),
            "bump" => {
                let power = num(3)?;
                if power.fract() != 0.0 || power < 1.0 {
                    return Err(Error::invalid(format!("bump power must be a positive integer in `{s}`")));
                }
                Shape::poly_bump(num(1)?, num(2)?, power as u32)
            }
            "smooth" => Shape::SmoothBump { lo: num(1)?, hi: num(2)? },
            other => return Err(Error::invalid(format!("unknown profile kind `{other}`"))),
        };
        shape.validate()?;
        Ok(shape)
    }
}

/// Initial data (f, g) = ε·(f_shape, g_shape).
#[derive(Debug, Clone, PartialEq)]
pub struct DataProfile {
    pub f_shape: Shape,
    pub g_shape: Shape,
    pub eps: f64,
}

impl DataProfile {
    pub fn new(f_shape: Shape, g_shape: Shape, eps: f64) -> Self {
        DataProfile { f_shape, g_shape, eps }
    }

    pub fn zero() -> Self {
        DataProfile::new(Shape::Zero, Shape::Zero, 0.0)
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        DataProfile { eps, ..self.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.eps == 0.0 || (self.f_shape.is_zero() && self.g_shape.is_zero())
    }

    /// Union of the supports of f and g.
    pub fn support(&self) -> Option<(f64, f64)> {
        match (self.f_shape.support(), self.g_shape.support()) {
            (None, None) => None,
            (Some(a), None) | (None, Some(a)) => Some(a),
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
        }
    }

    /// Outer edge of the support (0 when the data vanish).
    pub fn support_radius(&self) -> f64 {
        self.support().map(|s| s.1.max(0.0)).unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.f_shape.validate()?;
        self.g_shape.validate()?;
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::invalid(format!("eps must be non-negative, got {}", self.eps)));
        }
        Ok(())
    }

    /// Checks that the support lies inside the grid and clears the obstacle.
    pub fn check_against(&self, grid: &RadialGrid) -> Result<()> {
        self.validate()?;
        let Some((lo, hi)) = self.support() else {
            return Ok(());
        };
        if hi > grid.support_radius + 1e-12 {
            return Err(Error::invalid(format!(
                "data support reaches r = {hi}, grid was sized for {}",
                grid.support_radius
            )));
        }
        match grid.geometry {
            Geometry::Minkowski => {
                if lo < 0.0 && !self.is_origin_symmetric() {
                    return Err(Error::invalid("data support extends below r = 0".to_string()));
                }
            }
            Geometry::ExteriorBall { r0 } => {
                let clearance = r0 + BOUNDARY_CLEARANCE_STEPS * grid.dr;
                if lo <= clearance {
                    return Err(Error::invalid(format!(
                        "data support starts at r = {lo}, must clear the boundary: r_lo > {clearance}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Gaussians centred at the origin are even in r and admissible in Minkowski space.
    fn is_origin_symmetric(&self) -> bool {
        [&self.f_shape, &self.g_shape].iter().all(|s| match s {
            Shape::Zero => true,
            Shape::Gaussian { center, .. } => *center == 0.0,
            Shape::PolyBump { lo, hi, .. } | Shape::SmoothBump { lo, hi } => *lo >= 0.0 || *lo == -*hi,
        })
    }
}

/// Samples the reduced data v0 = r·f, p0 = r·g on the grid nodes.
pub fn sample_data(profile: &DataProfile, grid: &RadialGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    profile.check_against(grid)?;
    let mut v0 = vec![0.0; grid.n];
    let mut p0 = vec![0.0; grid.n];
    if profile.is_zero() {
        return Ok((v0, p0));
    }
    let eps = profile.eps;
    for i in 1..grid.n - 2 {
        let r = grid.r(i);
        v0[i] = eps * r * profile.f_shape.value(r);
        p0[i] = eps * r * profile.g_shape.value(r);
    }
    Ok((v0, p0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::grid::make_grid;

    #[test]
    fn eps_zero_gives_zero_data() {
        let g = make_grid(Geometry::Minkowski, 0.1, 5.0, 6.75).unwrap();
        let prof = DataProfile::new(Shape::gaussian(3.5, 0.5), Shape::poly_bump(1.0, 3.0, 3), 0.0);
        let (v, p) = sample_data(&prof, &g).unwrap();
        assert!(v.iter().chain(p.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn gaussian_sample_is_r_times_f() {
        // exp(-16 (r-3)²) has width 1/4
        let prof = DataProfile::new(Shape::gaussian(3.0, 0.25), Shape::Zero, 0.1);
        let g = make_grid(Geometry::Minkowski, 0.1, 5.0, prof.support_radius()).unwrap();
        let (v, _) = sample_data(&prof, &g).unwrap();
        let i = g.index_at_or_above(3.0);
        assert!((g.r(i) - 3.0).abs() < 1e-12);
        assert!((v[i] - 0.3).abs() < 1e-12, "v0(3) = {}", v[i]);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[g.n - 1], 0.0);
    }

    #[test]
    fn boundary_clearance_enforced() {
        let prof = DataProfile::new(Shape::poly_bump(0.5, 2.0, 3), Shape::Zero, 0.1);
        let g = make_grid(Geometry::exterior_default(), 0.05, 5.0, 2.0).unwrap();
        assert!(matches!(sample_data(&prof, &g), Err(Error::InvalidArgument(_))));
        let ok = DataProfile::new(Shape::poly_bump(1.0, 2.0, 3), Shape::Zero, 0.1);
        assert!(sample_data(&ok, &g).is_ok());
    }

    #[test]
    fn support_must_fit_grid() {
        let prof = DataProfile::new(Shape::poly_bump(1.0, 8.0, 3), Shape::Zero, 0.1);
        let g = make_grid(Geometry::Minkowski, 0.1, 5.0, 2.0).unwrap();
        assert!(sample_data(&prof, &g).is_err());
    }

    fn numeric_derivative(s: &Shape, r: f64, k: usize) -> f64 {
        let h = 1e-4;
        (s.deriv(r + h, k) - s.deriv(r - h, k)) / (2.0 * h)
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let shapes = [
            Shape::gaussian(2.0, 0.7),
            Shape::poly_bump(1.0, 3.0, 4),
            Shape::SmoothBump { lo: 1.0, hi: 3.0 },
        ];
        for s in &shapes {
            for &r in &[1.3, 1.9, 2.4, 2.8] {
                for k in 0..2 {
                    let fd = numeric_derivative(s, r, k);
                    let an = s.deriv(r, k + 1);
                    assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{s:?} r={r} k={k}: {fd} vs {an}");
                }
            }
        }
    }

    /// Composite Simpson quadrature, used as an independent check of the closed forms.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn first_moment_antiderivatives_match_quadrature() {
        for s in [Shape::gaussian(2.5, 0.4), Shape::poly_bump(1.0, 2.0, 3), Shape::poly_bump(0.0, 4.0, 2)] {
            let (lo, hi) = s.support().unwrap();
            let a = lo - 0.3;
            for &b in &[lo + 0.2 * (hi - lo), 0.5 * (lo + hi), hi + 1.0] {
                let quad = simpson(|r| r * s.value(r), a, b, 20_000);
                let closed = s.first_moment_antiderivative(b).unwrap() - s.first_moment_antiderivative(a).unwrap();
                assert!((quad - closed).abs() < 1e-9, "{s:?} on [{a}, {b}]: {quad} vs {closed}");
            }
        }
        assert!(matches!(
            Shape::SmoothBump { lo: 1.0, hi: 2.0 }.first_moment_antiderivative(1.5),
            Err(Error::UnsupportedProfile(_))
        ));
    }

    #[test]
    fn parse_round_trips_describe() {
        for s in [
            Shape::Zero,
            Shape::gaussian(3.0, 0.25),
            Shape::poly_bump(1.0, 3.0, 4),
            Shape::SmoothBump { lo: 1.0, hi: 2.5 },
        ] {
            assert_eq!(Shape::parse(&s.describe()).unwrap(), s);
        }
        assert!(Shape::parse("bump:1:0:3").is_err());
        assert!(Shape::parse("triangle:1:2").is_err());
    }
}
