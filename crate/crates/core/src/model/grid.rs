use crate::error::{Error, Result};

/// Environment variable holding the memory cap in MiB.
pub const MEM_CAP_ENV: &str = "RADWAVE_MEM_CAP_MB";
const DEFAULT_MEM_CAP_MB: u64 = 4096;

/// Bytes budgeted per grid node by the stepper (state, stage buffers, derived fields).
const STEPPER_BYTES_PER_NODE: u64 = 160;

/// Extra nodes integrated beyond the light cone of the support.
const WINDOW_PAD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Whole space, reduced to the half-line r >= 0.
    Minkowski,
    /// Exterior of the ball of radius `r0`, Dirichlet at r = r0.
    ExteriorBall { r0: f64 },
}

impl Geometry {
    pub const DEFAULT_BALL_RADIUS: f64 = 0.5;

    pub fn exterior_default() -> Self {
        Geometry::ExteriorBall {
            r0: Self::DEFAULT_BALL_RADIUS,
        }
    }

    pub fn inner_radius(&self) -> f64 {
        match *self {
            Geometry::Minkowski => 0.0,
            Geometry::ExteriorBall { r0 } => r0,
        }
    }

    pub fn is_exterior(&self) -> bool {
        matches!(self, Geometry::ExteriorBall { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Minkowski => "minkowski",
            Geometry::ExteriorBall { .. } => "exterior",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Geometry::Minkowski => Ok(()),
            Geometry::ExteriorBall { r0 } if r0.is_finite() && r0 > 0.0 => Ok(()),
            Geometry::ExteriorBall { r0 } => Err(Error::invalid(format!(
                "exterior ball requires r0 > 0, got {r0}"
            ))),
        }
    }
}

/// Memory budget shared by grid construction and trajectory storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryCap {
    bytes: u64,
}

impl MemoryCap {
    pub fn from_mib(mib: u64) -> Self {
        MemoryCap {
            bytes: mib.saturating_mul(1 << 20),
        }
    }

    /// Reads `RADWAVE_MEM_CAP_MB`, falling back to 4 GiB.
    pub fn from_env() -> Self {
        let mib = std::env::var(MEM_CAP_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<u64>().ok())
            .unwrap_or(DEFAULT_MEM_CAP_MB);
        Self::from_mib(mib)
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn max_nodes(&self) -> usize {
        (self.bytes / STEPPER_BYTES_PER_NODE) as usize
    }

    pub fn check(&self, what: &str, bytes: u64) -> Result<()> {
        if bytes > self.bytes {
            Err(Error::ResourceLimit(format!(
                "{what} needs {} MiB, cap is {} MiB (set {MEM_CAP_ENV})",
                bytes >> 20,
                self.bytes >> 20
            )))
        } else {
            Ok(())
        }
    }
}

/// Uniform grid r_i = R0 + i·dr, i = 0..n, sized so that nothing reaches the outer edge by `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub geometry: Geometry,
    pub dr: f64,
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub cfl: f64,
    /// Radius containing the support of the data and of any prescribed forcing.
    pub support_radius: f64,
    /// When false every interior node is integrated at every step.
    pub windowed: bool,
    /// Trailing characteristic r = t + q: nodes behind it are frozen once the edge passes.
    /// The region r − t >= q is closed under the outgoing flow, so nothing ahead of it depends
    /// on the frozen nodes (apart from origin reflections, which only occur while t <= −q).
    pub trailing: Option<f64>,
}

pub const DEFAULT_CFL: f64 = 0.5;
pub const MIN_NODES: usize = 8;

pub fn make_grid(geometry: Geometry, dr: f64, t_end: f64, support_radius: f64) -> Result<RadialGrid> {
    make_grid_with(geometry, dr, DEFAULT_CFL, t_end, support_radius, MemoryCap::from_env())
}

pub fn make_grid_with(
    geometry: Geometry,
    dr: f64,
    cfl: f64,
    t_end: f64,
    support_radius: f64,
    cap: MemoryCap,
) -> Result<RadialGrid> {
    geometry.validate()?;
    if !(dr.is_finite() && dr > 0.0) {
        return Err(Error::invalid(format!("dr must be positive, got {dr}")));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::invalid(format!("t_end must be positive, got {t_end}")));
    }
    if !(support_radius.is_finite() && support_radius >= 0.0) {
        return Err(Error::invalid(format!(
            "support radius must be non-negative, got {support_radius}"
        )));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::invalid(format!("cfl must lie in (0, 1], got {cfl}")));
    }
    let r0 = geometry.inner_radius();
    let reach = support_radius.max(r0) + t_end + 2.0 * dr;
    let steps = ((reach - r0) / dr - 1e-9).ceil().max(0.0);
    if steps > cap.max_nodes() as f64 {
        return Err(Error::ResourceLimit(format!(
            "grid needs {steps} nodes, memory cap allows {} (set {MEM_CAP_ENV})",
            cap.max_nodes()
        )));
    }
    let n = (steps as usize).max(MIN_NODES);
    Ok(RadialGrid {
        geometry,
        dr,
        n,
        t_end,
        dt: cfl * dr,
        cfl,
        support_radius,
        windowed: true,
        trailing: None,
    })
}

impl RadialGrid {
    pub fn r0(&self) -> f64 {
        self.geometry.inner_radius()
    }

    pub fn r_max(&self) -> f64 {
        self.r0() + self.n as f64 * self.dr
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.r0() + i as f64 * self.dr
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.r(i)).collect()
    }

    /// Number of whole steps needed to reach `t`.
    pub fn steps_to(&self, t: f64) -> usize {
        (t / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Index of the last node advanced when integrating up to time `t`.
    ///
    /// The last two nodes are never advanced, so they stay at zero.
    pub fn window_hi(&self, t: f64) -> usize {
        let last = self.n - 3;
        if !self.windowed {
            return last;
        }
        let front = (self.support_radius + t - self.r0()) / self.dr;
        let idx = front.max(0.0).ceil() as usize + WINDOW_PAD;
        idx.min(last)
    }

    /// Index of the first node advanced on a step starting at time `t` (at least 1).
    pub fn window_lo(&self, t: f64) -> usize {
        match self.trailing {
            None => 1,
            Some(q) => {
                let edge = ((t + q - self.r0()) / self.dr).floor();
                let idx = edge.max(0.0) as usize;
                idx.saturating_sub(WINDOW_PAD).clamp(1, self.window_hi(t).max(1))
            }
        }
    }

    pub fn with_trailing(mut self, q: Option<f64>) -> Self {
        self.trailing = q;
        self
    }

    /// Index of the first node with r >= `radius` (clamped to the grid).
    pub fn index_at_or_above(&self, radius: f64) -> usize {
        let x = ((radius - self.r0()) / self.dr - 1e-9).ceil();
        (x.max(0.0) as usize).min(self.n - 1)
    }

    /// Same geometry and support with `dr` halved (dt follows through the cfl number).
    pub fn refined(&self) -> Result<RadialGrid> {
        let mut g = make_grid_with(
            self.geometry,
            self.dr / 2.0,
            self.cfl,
            self.t_end,
            self.support_radius,
            MemoryCap::from_env(),
        )?;
        g.windowed = self.windowed;
        g.trailing = self.trailing;
        Ok(g)
    }

    /// Grows the grid so it covers a later horizon; existing node positions are unchanged.
    pub fn extended_to(&self, t_end: f64, cap: MemoryCap) -> Result<RadialGrid> {
        let mut g = make_grid_with(self.geometry, self.dr, self.cfl, t_end, self.support_radius, cap)?;
        g.windowed = self.windowed;
        g.trailing = self.trailing;
        g.dt = self.dt;
        Ok(g)
    }

    pub fn describe(&self) -> String {
        format!(
            "{} r0={} dr={} dt={} n={} r_max={} t_end={}",
            self.geometry.name(),
            self.r0(),
            self.dr,
            self.dt,
            self.n,
            self.r_max(),
            self.t_end
        ) + &self.trailing.map(|q| format!(" trailing={q}")).unwrap_or_default()
    }
}
