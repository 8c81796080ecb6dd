//! Both sides of the linear estimates on seeded scenarios, reported as ratio series.
//!
//! Every scenario is a linear solve of □v = G; the left sides come from the norm tracker,
//! the right sides from the data norms at t = 0 and Riemann sums in time of the
//! forcing norms on the same step grid.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fit::{linear_fit, log_times};
use crate::linear::{solve_linear_with, ForcingField, SolveOptions};
use crate::model::{make_grid, DataProfile, Geometry, Radii, RadialGrid, Shape};
use crate::norms::{multi_indices, safe_ratio, NormConfig, NormLog};
use crate::par::{par_map, ExecMode};

/// Samples per decade of t in every report.
pub const SAMPLES_PER_DECADE: usize = 32;
/// First sampled time.
pub const FIRST_SAMPLE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimateId {
    /// Weighted space-time bound with the logarithmic loss.
    Kss,
    /// Space-time norm on the unit ball.
    LocalBall,
    /// Unweighted space-time norm, (1+t)^{-1/2} scaling.
    SpaceTime,
    /// Space-time norm with weight r^{-1/2} on each dyadic annulus.
    Dyadic,
    /// Space-time L² norm of the solution itself on the unit ball.
    LocalL2,
    /// Derivative sums: energy plus normalised weighted norm.
    HigherOrder,
    /// Exterior problem with zero data.
    Exterior,
}

impl EstimateId {
    pub const ALL: [EstimateId; 7] = [
        EstimateId::Kss,
        EstimateId::LocalBall,
        EstimateId::SpaceTime,
        EstimateId::Dyadic,
        EstimateId::LocalL2,
        EstimateId::HigherOrder,
        EstimateId::Exterior,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            EstimateId::Kss => "E2.1",
            EstimateId::LocalBall => "E2.2",
            EstimateId::SpaceTime => "E2.3",
            EstimateId::Dyadic => "E2.4",
            EstimateId::LocalL2 => "E2.5",
            EstimateId::HigherOrder => "E2.6",
            EstimateId::Exterior => "E4.3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown estimate id `{s}`")))
    }

    fn uses_derivatives(&self) -> bool {
        matches!(self, EstimateId::HigherOrder | EstimateId::Exterior)
    }
}

/// One linear run: geometry, data, forcing, horizon and the grid step.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: Geometry,
    pub data: DataProfile,
    pub forcing: ForcingField,
    pub horizon: f64,
    pub dr: f64,
    /// Derivative order for the derivative-sum estimates.
    pub order: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn zero(geometry: Geometry, horizon: f64, dr: f64) -> Self {
        Scenario {
            geometry,
            data: DataProfile::zero(),
            forcing: ForcingField::Zero,
            horizon,
            dr,
            order: 1,
            seed: 0,
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.data.support_radius().max(self.forcing.support_radius())
    }

    pub fn describe(&self) -> String {
        let forcing = match &self.forcing {
            ForcingField::Zero => "zero".to_string(),
            ForcingField::Separable { amplitude, time, space } => {
                format!("{amplitude}*[{}]x[{}]", time.describe(), space.describe())
            }
        };
        format!(
            "{} f={} g={} eps={} G={} T={} dr={}",
            self.geometry.name(),
            self.data.f_shape.describe(),
            self.data.g_shape.describe(),
            self.data.eps,
            forcing,
            self.horizon,
            self.dr
        )
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        make_grid(self.geometry, self.dr, self.horizon, self.support_radius())
    }

    /// Checks the admissibility constraints of `id`.
    pub fn check_admissible(&self, id: EstimateId) -> Result<()> {
        self.data.validate()?;
        if !(self.horizon > FIRST_SAMPLE) {
            return Err(Error::invalid(format!("horizon must exceed {FIRST_SAMPLE}")));
        }
        if self.order > crate::norms::MAX_ORDER {
            return Err(Error::invalid(format!("derivative order {} exceeds 2", self.order)));
        }
        match id {
            EstimateId::Exterior => {
                if !self.geometry.is_exterior() {
                    return Err(Error::invalid("E4.3 needs the exterior geometry"));
                }
                if !self.data.is_zero() {
                    return Err(Error::invalid("E4.3 needs zero initial data"));
                }
            }
            _ => {
                if self.geometry.is_exterior() {
                    return Err(Error::invalid(format!("{} is stated on the whole space", id.label())));
                }
            }
        }
        Ok(())
    }

    /// Random scenario from the documented ranges, deterministic in `seed`.
    ///
    /// Bumps: centre in [1.2, 2.5], half-width in [0.3, 0.8] (inner edge kept ≥ 0.4, or ≥ 1.0
    /// outside the ball), power in {3, 4, 5}; ε in [0.2, 1]. Forcing (probability 1/2, always
    /// for zero-data scenarios): time window start in [0, 2], length in [0.5, 2], amplitude
    /// in [0.2, 1]. Data are drawn with probability 3/4 unless `zero_data`.
    pub fn random(geometry: Geometry, seed: u64, horizon: f64, dr: f64, zero_data: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = if geometry.is_exterior() { 1.0 } else { 0.4 };
        let bump = |rng: &mut ChaCha8Rng| {
            let c: f64 = rng.random_range(1.2..2.5);
            let h: f64 = rng.random_range(0.3..0.8f64).min(c - inner);
            let power = rng.random_range(3..=5u32);
            Shape::poly_bump(c - h, c + h, power)
        };
        let with_data = !zero_data && rng.random_bool(0.75);
        let data = if with_data {
            let f = if rng.random_bool(0.5) { bump(&mut rng) } else { Shape::Zero };
            let g = if f.is_zero() || rng.random_bool(0.5) { bump(&mut rng) } else { Shape::Zero };
            DataProfile::new(f, g, rng.random_range(0.2..1.0))
        } else {
            DataProfile::zero()
        };
        let with_forcing = !with_data || rng.random_bool(0.5);
        let forcing = if with_forcing {
            let t0: f64 = rng.random_range(0.0..2.0);
            let len: f64 = rng.random_range(0.5..2.0);
            let time = Shape::poly_bump(t0, t0 + len, 4);
            let space = bump(&mut rng);
            ForcingField::separable(rng.random_range(0.2..1.0), time, space)
        } else {
            ForcingField::Zero
        };
        Scenario {
            geometry,
            data,
            forcing,
            horizon,
            dr,
            order: 1,
            seed,
        }
    }
}

/// Sampled sides of one estimate on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub id: EstimateId,
    pub seed: u64,
    pub geometry: &'static str,
    pub scenario: String,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub max_ratio: f64,
    /// d(ratio)/d(ln t) fitted over the last decade.
    pub tail_slope: f64,
    /// False when some rhs vanished under a positive lhs.
    pub valid: bool,
}

impl RatioReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.lhs.iter().zip(&self.rhs).map(|(l, r)| safe_ratio(*l, *r)).collect()
    }
}

/// Running forcing norms on the step grid (left-endpoint rule).
#[derive(Debug, Clone)]
struct ForcingSeries {
    /// Σ_{|α|≤N} ∫₀ᵗ ‖∂^α G‖ ds, per step.
    integral: Vec<f64>,
    /// Same with N = 0.
    integral0: Vec<f64>,
    /// sup_{s≤t} Σ_{|α|≤N−1} ‖∂^α G(s)‖.
    sup_lower: Vec<f64>,
    /// Σ_{|α|≤N−1} ‖∂^α G‖ in L²([0, t] × space).
    l2_lower: Vec<f64>,
}

impl ForcingSeries {
    fn build(forcing: &ForcingField, grid: &RadialGrid, steps: usize, order: usize) -> Self {
        let indices = multi_indices(order);
        let radii = Radii::new(grid);
        let dt = grid.dt;
        // separable forcing: ‖∂_t^j ∂_r^m G(t)‖ = |a·T^{(j)}(t)|·‖S^{(m)}‖
        let (amplitude, time, space_norms) = match forcing {
            ForcingField::Separable { amplitude, time, space } if !forcing.is_zero() => {
                let norms: Vec<f64> = (0..=order).map(|m| space_norm(&radii, space, m)).collect();
                (*amplitude, time.clone(), norms)
            }
            _ => (0.0, Shape::Zero, vec![0.0; order + 1]),
        };
        let mut out = ForcingSeries {
            integral: Vec::with_capacity(steps + 1),
            integral0: Vec::with_capacity(steps + 1),
            sup_lower: Vec::with_capacity(steps + 1),
            l2_lower: Vec::with_capacity(steps + 1),
        };
        let (mut int_all, mut int0, mut sup) = (0.0, 0.0, 0.0f64);
        let mut sq_lower: Vec<f64> = vec![0.0; indices.len()];
        for k in 0..=steps {
            let t = k as f64 * dt;
            let norms: Vec<f64> = indices
                .iter()
                .map(|&(j, m)| (amplitude * time.deriv(t, j)).abs() * space_norms[m])
                .collect();
            let lower: f64 = indices
                .iter()
                .zip(&norms)
                .filter(|((j, m), _)| j + m < order)
                .map(|(_, n)| n)
                .sum();
            sup = sup.max(lower);
            out.integral.push(int_all);
            out.integral0.push(int0);
            out.sup_lower.push(sup);
            out.l2_lower.push(
                indices
                    .iter()
                    .zip(&sq_lower)
                    .filter(|((j, m), _)| j + m < order)
                    .map(|(_, s)| s.sqrt())
                    .sum(),
            );
            int_all += dt * norms.iter().sum::<f64>();
            int0 += dt * norms[0];
            for (s, n) in sq_lower.iter_mut().zip(&norms) {
                *s += dt * n * n;
            }
        }
        out
    }
}

/// ‖S^{(m)}‖ in L²(ℝ³) on the grid (trapezoid rule on interior nodes of the support).
fn space_norm(radii: &Radii, space: &Shape, m: usize) -> f64 {
    let Some((lo, hi)) = space.support() else {
        return 0.0;
    };
    let s: f64 = radii
        .r
        .iter()
        .filter(|&&r| r > lo && r < hi)
        .map(|&r| {
            let g = space.deriv(r, m);
            g * g * r * r
        })
        .sum();
    (4.0 * PI * s * radii.dr).sqrt()
}

/// ∫₀ᵗ ‖G(s)‖ ds (left-endpoint rule) at every step 0..=steps.
pub fn forcing_integral(forcing: &ForcingField, grid: &RadialGrid, steps: usize) -> Vec<f64> {
    ForcingSeries::build(forcing, grid, steps, 0).integral0
}

/// Solves the scenario once and returns the norm log plus forcing series.
fn run_scenario(scenario: &Scenario, order: usize) -> Result<(NormLog, ForcingSeries, RadialGrid)> {
    let grid = scenario.grid()?;
    let opts = SolveOptions {
        stride: 0,
        norms: Some(NormConfig::with_order(order)),
    };
    let traj = solve_linear_with(&grid, &scenario.data, &scenario.forcing, scenario.horizon, &opts).map_err(|e| match e {
        Error::IntegrationFailure { t, node } => {
            Error::Internal(format!("linear scenario produced non-finite values at t = {t}, node {node}"))
        }
        other => other,
    })?;
    let log = traj
        .norms
        .ok_or_else(|| Error::Internal("norm log missing".into()))?;
    let steps = grid.steps_to(scenario.horizon) + 2;
    let series = ForcingSeries::build(&scenario.forcing, &grid, steps, order);
    Ok((log, series, grid))
}

fn tail_slope(times: &[f64], ratios: &[f64], horizon: f64) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(ratios)
        .filter(|(t, r)| **t >= horizon / 10.0 * (1.0 - 1e-12) && r.is_finite())
        .map(|(t, r)| (t.ln(), *r))
        .unzip();
    linear_fit(&x, &y).map(|f| f.slope).unwrap_or(0.0)
}

/// Computes lhs(t), rhs(t) of estimate `id` at log-spaced times up to the horizon.
pub fn verify_estimate(id: EstimateId, scenario: &Scenario) -> Result<RatioReport> {
    scenario.check_admissible(id)?;
    let order = if id.uses_derivatives() { scenario.order } else { 0 };
    let (log, forcing, grid) = run_scenario(scenario, order)?;
    let times = log_times(FIRST_SAMPLE, scenario.horizon, SAMPLES_PER_DECADE);
    let first = log
        .rows
        .first()
        .ok_or_else(|| Error::Internal("empty norm log".into()))?;
    let data0 = first.energy[0];
    let data_all: f64 = first.energy.iter().sum();
    let unit_ball = log
        .config
        .local_radii
        .iter()
        .position(|&r| r == 1.0)
        .ok_or_else(|| Error::Internal("unit local radius missing".into()))?;
    let (mut lhs, mut rhs) = (Vec::with_capacity(times.len()), Vec::with_capacity(times.len()));
    for &t in &times {
        let row = log
            .row_at(t)
            .ok_or_else(|| Error::Internal(format!("no norm row at t = {t}")))?;
        // sums include the forcing at every level the row depends on: t_k, and t_{k+1}
        // for rows with time derivatives (their stencil reaches one level ahead)
        let last = forcing.integral.len() - 1;
        let k = ((row.t / grid.dt).round() as usize + 1).min(last);
        let kd = (k + 1).min(last);
        let base = data0 + forcing.integral0[k];
        let (l, r) = match id {
            EstimateId::Kss => ((row.kss[0] / log.config.log_factor(row.t)).sqrt(), base),
            EstimateId::LocalBall => (row.ball.sqrt(), base),
            EstimateId::SpaceTime => ((row.spacetime / (1.0 + row.t)).sqrt(), base),
            EstimateId::Dyadic => {
                let prof = log.dyadic_profile(row.t).expect("row exists");
                (prof.annuli.iter().map(|a| a.1).fold(0.0, f64::max), base)
            }
            EstimateId::LocalL2 => (row.local_u2[unit_ball].sqrt(), base),
            EstimateId::HigherOrder => (
                row.weighted_sum(log.config.log_shift),
                data_all + forcing.integral[kd],
            ),
            EstimateId::Exterior => (
                row.weighted_sum(log.config.log_shift),
                forcing.integral[kd] + forcing.sup_lower[kd] + forcing.l2_lower[kd],
            ),
        };
        lhs.push(l);
        rhs.push(r);
    }
    let ratios: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| safe_ratio(*l, *r)).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(RatioReport {
        id,
        seed: scenario.seed,
        geometry: scenario.geometry.name(),
        scenario: scenario.describe(),
        tail_slope: tail_slope(&times, &ratios, scenario.horizon),
        valid: max_ratio.is_finite(),
        max_ratio,
        times,
        lhs,
        rhs,
    })
}

/// Geometry and data constraints used for `id` in the battery.
pub fn battery_geometry(id: EstimateId) -> Geometry {
    match id {
        EstimateId::Exterior => Geometry::exterior_default(),
        _ => Geometry::Minkowski,
    }
}

/// Battery settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryConfig {
    pub ids: Vec<EstimateId>,
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub dr: f64,
    pub order: usize,
    pub mode: ExecMode,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            ids: EstimateId::ALL.to_vec(),
            seeds: (1..=20).collect(),
            horizon: 1000.0,
            dr: 0.1,
            order: 1,
            mode: ExecMode::Parallel,
        }
    }
}

/// Runs every (id, seed) pair; output is ordered by (id, seed).
pub fn run_battery(cfg: &BatteryConfig) -> Result<Vec<RatioReport>> {
    let jobs: Vec<(EstimateId, u64)> = cfg
        .ids
        .iter()
        .flat_map(|&id| cfg.seeds.iter().map(move |&s| (id, s)))
        .collect();
    let results = par_map(cfg.mode, &jobs, |&(id, seed)| {
        let geometry = battery_geometry(id);
        let mut sc = Scenario::random(geometry, seed, cfg.horizon, cfg.dr, id == EstimateId::Exterior);
        sc.order = cfg.order;
        verify_estimate(id, &sc)
    });
    let mut out: Vec<RatioReport> = results.into_iter().collect::<Result<_>>()?;
    out.sort_by_key(|r| (r.id, r.seed));
    Ok(out)
}

/// Growth of the raw weighted accumulator: fits of the E2.1 ratio and of the same ratio without
/// the logarithmic normalisation against ln t, plus a fit of the raw accumulator against ln t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogFactorCheck {
    pub normalized_slope: f64,
    pub raw_slope: f64,
    /// Fit of ∫₀ᵗ‖(1+r)^{-1/2}v′‖² against ln t over [t_lo, t_hi].
    pub accumulator: crate::fit::LineFit,
}

pub fn log_factor_check(scenario: &Scenario, t_lo: f64, t_hi: f64) -> Result<LogFactorCheck> {
    scenario.check_admissible(EstimateId::Kss)?;
    if !(t_lo > 0.0 && t_hi > t_lo && t_hi <= scenario.horizon) {
        return Err(Error::invalid("log-factor window must satisfy 0 < t_lo < t_hi <= horizon"));
    }
    let (log, forcing, grid) = run_scenario(scenario, 0)?;
    let data0 = log.rows[0].energy[0];
    let times = log_times(t_lo, t_hi, SAMPLES_PER_DECADE);
    let (mut x, mut norm, mut raw, mut acc) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &t in &times {
        let row = log.row_at(t).ok_or_else(|| Error::Internal("missing row".into()))?;
        let k = ((row.t / grid.dt).round() as usize + 1).min(forcing.integral0.len() - 1);
        let rhs = data0 + forcing.integral0[k];
        x.push(row.t.ln());
        norm.push(safe_ratio((row.kss[0] / log.config.log_factor(row.t)).sqrt(), rhs));
        raw.push(safe_ratio(row.kss[0].sqrt(), rhs));
        acc.push(row.kss[0]);
    }
    Ok(LogFactorCheck {
        normalized_slope: linear_fit(&x, &norm)?.slope,
        raw_slope: linear_fit(&x, &raw)?.slope,
        accumulator: linear_fit(&x, &acc)?,
    })
}
