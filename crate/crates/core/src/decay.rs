//! Local energy decay outside the ball and the local space-time bound for forced problems.

use crate::error::{Error, Result};
use crate::estimates::{forcing_integral, Scenario};
use crate::fit::linear_fit;
use crate::linear::{solve_linear_with, ForcingField, SolveOptions, Trajectory};
use crate::model::{DataProfile, Geometry, Radii, Shape};
use crate::norms::{safe_ratio, weighted_energy, NormConfig};
use crate::par::{par_map, ExecMode};

/// Absolute floor of the local energy below which samples are not fitted.
pub const ENERGY_FLOOR: f64 = 1e-24;
/// Minimum number of samples in a decay fit.
pub const MIN_FIT_POINTS: usize = 16;
pub const DEFAULT_RADIUS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DecaySeries {
    pub radius: f64,
    pub times: Vec<f64>,
    /// 4π∫_{R0<r<radius} |u′|² r² dr at each stored level.
    pub local_energy: Vec<f64>,
}

impl DecaySeries {
    pub fn max(&self) -> f64 {
        self.local_energy.iter().copied().fold(0.0, f64::max)
    }

    /// Largest value at times ≥ t, relative to the overall maximum (0 for a zero series).
    pub fn tail_relative(&self, t: f64) -> f64 {
        let tail = self
            .times
            .iter()
            .zip(&self.local_energy)
            .filter(|(s, _)| **s >= t)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max);
        safe_ratio(tail, self.max())
    }

    /// Value at the stored time closest to t.
    pub fn at(&self, t: f64) -> Option<f64> {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some(self.local_energy[k])
    }
}

/// Local energy on {r < radius} at every stored level of an exterior run.
pub fn local_energy_series(run: &Trajectory, radius: f64) -> Result<DecaySeries> {
    if !run.grid.geometry.is_exterior() {
        return Err(Error::invalid("local energy decay is measured outside the ball"));
    }
    if !(radius > run.grid.r0()) {
        return Err(Error::invalid(format!("radius {radius} must exceed the ball radius")));
    }
    let radii = Radii::new(&run.grid);
    let (mut times, mut local_energy) = (Vec::new(), Vec::new());
    for lv in run.levels() {
        times.push(lv.t);
        local_energy.push(weighted_energy(&radii, &lv.v, &lv.p, |r| if r < radius { 1.0 } else { 0.0 }));
    }
    Ok(DecaySeries { radius, times, local_energy })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// c in E(t) ≈ C e^{−c t}; None when too few samples lie above the floor.
    pub rate: Option<f64>,
    pub r_squared: Option<f64>,
    /// First time at which the series drops below the floor.
    pub floor_time: Option<f64>,
    /// The window contains no sample above the floor, or reaches it before a fit is possible.
    pub below_floor: bool,
    pub window_start: f64,
    pub points: usize,
}

/// Fits ln E against t on [window_start, first floor crossing).
pub fn fit_decay(series: &DecaySeries, window_start: f64) -> Result<DecayFit> {
    let window: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.local_energy)
        .filter(|(t, _)| **t >= window_start)
        .map(|(t, e)| (*t, *e))
        .collect();
    if window.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "decay fit needs {MIN_FIT_POINTS} samples after t = {window_start}, got {}",
            window.len()
        )));
    }
    let cut = window.iter().position(|(_, e)| *e < ENERGY_FLOOR);
    let floor_time = cut.map(|k| window[k].0);
    let above = &window[..cut.unwrap_or(window.len())];
    let mut fit = DecayFit {
        rate: None,
        r_squared: None,
        floor_time,
        below_floor: false,
        window_start,
        points: above.len(),
    };
    if above.len() < MIN_FIT_POINTS {
        if floor_time.is_some() {
            fit.below_floor = true;
            return Ok(fit);
        }
        return Err(Error::InsufficientData("too few samples above the floor".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = above.iter().map(|(t, e)| (*t, e.ln())).unzip();
    let line = linear_fit(&x, &y)?;
    fit.rate = Some(-line.slope);
    fit.r_squared = Some(line.r_squared);
    Ok(fit)
}

/// Time after which every characteristic from the data (and forcing) support has left {r < radius}:
/// in-going rays reach the ball, reflect and leave.
pub fn evacuation_time(r0: f64, support_hi: f64, radius: f64, forcing_end: f64) -> f64 {
    forcing_end + 2.0 * (support_hi - r0).max(0.0) + (radius - r0).max(0.0)
}

/// Exterior free run with data in [1, 2] around the default ball.
pub fn default_scenario() -> (Geometry, DataProfile) {
    (
        Geometry::exterior_default(),
        DataProfile::new(Shape::Zero, Shape::poly_bump(1.0, 2.0, 4), 1.0),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayRun {
    pub series: DecaySeries,
    pub evacuation: f64,
    pub fit: std::result::Result<DecayFit, String>,
    pub dr: f64,
}

/// Solves the exterior problem with the given data and forcing and records the local energy.
pub fn decay_run(geometry: Geometry, data: &DataProfile, forcing: &ForcingField, horizon: f64, dr: f64, radius: f64) -> Result<DecayRun> {
    let support = data.support_radius().max(forcing.support_radius()).max(radius);
    let grid = crate::model::make_grid(geometry, dr, horizon, support)?;
    let opts = SolveOptions { stride: 1, norms: None };
    let traj = solve_linear_with(&grid, data, forcing, horizon, &opts)?;
    let series = local_energy_series(&traj, radius)?;
    let hi = data.support().map_or(0.0, |s| s.1).max(forcing.support().map_or(0.0, |s| s.1));
    let forcing_end = forcing.time_support().map_or(0.0, |s| s.1);
    let evacuation = evacuation_time(grid.r0(), hi, radius, forcing_end);
    let fit = fit_decay(&series, forcing_end).map_err(|e| e.to_string());
    Ok(DecayRun { series, evacuation, fit, dr })
}

/// Local space-time bound on one forced zero-data scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBound {
    pub seed: u64,
    /// ‖u′‖_{L²({0≤s≤T, r<2})} / ∫₀ᵀ‖F‖ ds.
    pub ratio: f64,
    /// Share of the final local space-time norm² gained over [T/2, T].
    pub late_growth: f64,
}

/// The local space-time bound over seeded exterior scenarios with zero data.
pub fn local_spacetime_bounds(seeds: &[u64], horizon: f64, dr: f64, mode: ExecMode) -> Result<Vec<LocalBound>> {
    par_map(mode, seeds, |&seed| {
        let sc = Scenario::random(Geometry::exterior_default(), seed, horizon, dr, true);
        let grid = sc.grid()?;
        let cfg = NormConfig::default();
        let slot = cfg
            .local_radii
            .iter()
            .position(|&r| r == 2.0)
            .ok_or_else(|| Error::Internal("local radius 2 missing".into()))?;
        let opts = SolveOptions { stride: 0, norms: Some(cfg) };
        let traj = solve_linear_with(&grid, &sc.data, &sc.forcing, horizon, &opts)?;
        let log = traj.norms.ok_or_else(|| Error::Internal("norm log missing".into()))?;
        let fint = forcing_integral(&sc.forcing, &grid, grid.steps_to(horizon) + 1);
        let end = log.last().ok_or_else(|| Error::Internal("empty norm log".into()))?;
        let mid = log.row_at(0.5 * horizon).ok_or_else(|| Error::Internal("missing row".into()))?;
        let total = end.local_spacetime[slot];
        Ok(LocalBound {
            seed,
            ratio: safe_ratio(total.sqrt(), *fint.last().unwrap()),
            late_growth: safe_ratio(total - mid.local_spacetime[slot], total),
        })
    })
    .into_iter()
    .collect()
}
