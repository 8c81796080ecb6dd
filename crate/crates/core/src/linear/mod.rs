//! Reduced linear wave equation v_tt − v_rr = g(t, r) with a Dirichlet inner boundary.
//!
//! The semi-discrete system uses centred second differences in r and is advanced by
//! classical RK4 on y = [v | p], p = v_t. Only nodes inside the causal window
//! `1..=grid.window_hi(t)` are integrated; everything further out is identically zero.

mod forcing;
mod oracle;
mod trajectory;

pub use forcing::ForcingField;
pub use oracle::{dalembert_fields, dalembert_oracle, OracleFields};
pub use trajectory::{Blowup, BlowupTrigger, Level, Trajectory};

use crate::error::{Error, Result};
use crate::model::{sample_data, DataProfile, Radii, RadialGrid};
use crate::norms::{NormConfig, NormTracker};
use crate::rk4::{NonFinite, Rk4};

/// Where a right-hand-side evaluation happens inside a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageCtx {
    pub step: usize,
    /// RK stage 0..4.
    pub stage: usize,
    /// Stage time.
    pub t: f64,
    /// First advanced node.
    pub lo: usize,
    /// Last advanced node.
    pub hi: usize,
}

/// Supplies the reduced forcing r·g at each RK stage.
pub trait Source {
    /// Writes r·g on nodes `ctx.lo..=ctx.hi` of `out`. `v`, `p` are the stage state on
    /// nodes `0..=ctx.hi + 1`. Returning false means the forcing is zero (and `out` is ignored).
    fn eval(&mut self, ctx: &StageCtx, radii: &Radii, v: &[f64], p: &[f64], out: &mut [f64]) -> bool;
}

impl Source for () {
    fn eval(&mut self, _: &StageCtx, _: &Radii, _: &[f64], _: &[f64], _: &mut [f64]) -> bool {
        false
    }
}

impl<S: Source + ?Sized> Source for &mut S {
    fn eval(&mut self, ctx: &StageCtx, radii: &Radii, v: &[f64], p: &[f64], out: &mut [f64]) -> bool {
        (**self).eval(ctx, radii, v, p, out)
    }
}

/// Borrowed state at one time level, truncated to the causal window (plus one zero node).
#[derive(Debug, Clone, Copy)]
pub struct StateView<'a> {
    pub t: f64,
    pub step: usize,
    /// First node still being advanced; values below it are frozen.
    pub lo: usize,
    pub v: &'a [f64],
    pub p: &'a [f64],
}

/// Receives every time level once, in order.
pub trait Observer {
    fn observe(&mut self, radii: &Radii, state: &StateView<'_>) -> Result<()>;
}

impl Observer for () {
    fn observe(&mut self, _: &Radii, _: &StateView<'_>) -> Result<()> {
        Ok(())
    }
}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn observe(&mut self, radii: &Radii, state: &StateView<'_>) -> Result<()> {
        (**self).observe(radii, state)
    }
}

impl<O: Observer> Observer for Option<O> {
    fn observe(&mut self, radii: &Radii, state: &StateView<'_>) -> Result<()> {
        match self {
            Some(o) => o.observe(radii, state),
            None => Ok(()),
        }
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn observe(&mut self, radii: &Radii, state: &StateView<'_>) -> Result<()> {
        self.0.observe(radii, state)?;
        self.1.observe(radii, state)
    }
}

impl<A: Observer, B: Observer, C: Observer> Observer for (A, B, C) {
    fn observe(&mut self, radii: &Radii, state: &StateView<'_>) -> Result<()> {
        self.0.observe(radii, state)?;
        self.1.observe(radii, state)?;
        self.2.observe(radii, state)
    }
}

/// Method-of-lines integrator for v_tt − v_rr = (forcing from `S`).
#[derive(Debug, Clone)]
pub struct Integrator<S> {
    grid: RadialGrid,
    radii: Radii,
    y: Vec<f64>,
    rk: Rk4,
    step: usize,
    observed: Option<usize>,
    source: S,
    forcing: Vec<f64>,
    lo: usize,
}

impl<S: Source> Integrator<S> {
    pub fn new(grid: &RadialGrid, v0: &[f64], p0: &[f64], source: S) -> Result<Self> {
        let n = grid.n;
        if v0.len() != n || p0.len() != n {
            return Err(Error::invalid(format!(
                "initial state has {} / {} nodes, grid has {n}",
                v0.len(),
                p0.len()
            )));
        }
        if let Some(i) = v0.iter().chain(p0).position(|x| !x.is_finite()) {
            return Err(Error::IntegrationFailure { t: 0.0, node: i % n });
        }
        if v0[0] != 0.0 || p0[0] != 0.0 {
            return Err(Error::invalid("initial state violates the inner Dirichlet condition"));
        }
        let mut y = Vec::with_capacity(2 * n);
        y.extend_from_slice(v0);
        y.extend_from_slice(p0);
        Ok(Integrator {
            grid: grid.clone(),
            radii: Radii::new(grid),
            rk: Rk4::new(&y),
            y,
            step: 0,
            observed: None,
            source,
            forcing: vec![0.0; n],
            lo: 1,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn radii(&self) -> &Radii {
        &self.radii
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn t(&self) -> f64 {
        self.step as f64 * self.grid.dt
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    pub fn source_mut(&mut self) -> &mut S {
        &mut self.source
    }

    pub fn into_source(self) -> S {
        self.source
    }

    /// Full-length reduced field and its time derivative.
    pub fn v(&self) -> &[f64] {
        &self.y[..self.grid.n]
    }

    pub fn p(&self) -> &[f64] {
        &self.y[self.grid.n..]
    }

    /// Current state truncated to the window.
    pub fn view(&self) -> StateView<'_> {
        let n = self.grid.n;
        let m = self.grid.window_hi(self.t()) + 2;
        StateView {
            t: self.t(),
            step: self.step,
            lo: self.lo,
            v: &self.y[..m],
            p: &self.y[n..n + m],
        }
    }

    /// One RK4 step. On failure the state stays at the old time level.
    pub fn advance(&mut self) -> std::result::Result<(), NonFinite> {
        let n = self.grid.n;
        let dt = self.grid.dt;
        let t = self.t();
        let hi = self.grid.window_hi(t + dt);
        let lo = self.grid.window_lo(t).max(self.lo);
        if lo > self.lo {
            self.rk.sync_range(&self.y, self.lo..lo);
            self.rk.sync_range(&self.y, n + self.lo..n + lo);
            self.lo = lo;
        }
        let inv_dr2 = 1.0 / (self.grid.dr * self.grid.dr);
        let step = self.step;
        let radii = &self.radii;
        let source = &mut self.source;
        let g = &mut self.forcing;
        let mut rhs = |ts: f64, stage: usize, y: &[f64], dy: &mut [f64]| {
            let (v, p) = y.split_at(n);
            let (dv, dp) = dy.split_at_mut(n);
            let ctx = StageCtx { step, stage, t: ts, lo, hi };
            let active = source.eval(&ctx, radii, &v[..hi + 2], &p[..hi + 2], &mut g[..hi + 2]);
            dv[lo..=hi].copy_from_slice(&p[lo..=hi]);
            if active {
                for i in lo..=hi {
                    dp[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_dr2 + g[i];
                }
            } else {
                for i in lo..=hi {
                    dp[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_dr2;
                }
            }
        };
        let ranges = [lo..hi + 1, n + lo..n + hi + 1];
        self.rk.step(&mut rhs, t, dt, &mut self.y, &ranges)?;
        self.step += 1;
        Ok(())
    }

    /// Moves onto a larger grid with the same geometry, dr and dt (zero padding).
    pub fn extend(&mut self, grid: RadialGrid) -> Result<()> {
        let (old, new) = (self.grid.n, grid.n);
        if grid.geometry != self.grid.geometry || grid.dr != self.grid.dr || grid.dt != self.grid.dt || new < old {
            return Err(Error::invalid("grid extension must keep geometry, dr and dt"));
        }
        let mut y = vec![0.0; 2 * new];
        y[..old].copy_from_slice(&self.y[..old]);
        y[new..new + old].copy_from_slice(&self.y[old..]);
        self.y = y;
        self.rk.sync(&self.y);
        self.forcing.resize(new, 0.0);
        self.radii = Radii::new(&grid);
        self.grid = grid;
        Ok(())
    }

    /// Integrates up to `t_end`, calling `obs` on every level (the current one included,
    /// unless it was already observed) and `stop` after each step.
    ///
    /// Returns the blow-up record if `stop` fired or a step produced non-finite values.
    pub fn run_to<O, F>(&mut self, t_end: f64, obs: &mut O, mut stop: F) -> Result<Option<Blowup>>
    where
        O: Observer + ?Sized,
        F: FnMut(&Radii, &StateView<'_>) -> bool,
    {
        if t_end > self.grid.t_end + 1e-9 * self.grid.t_end.max(1.0) {
            return Err(Error::invalid(format!(
                "requested horizon {t_end} exceeds the grid horizon {}",
                self.grid.t_end
            )));
        }
        let steps = self.grid.steps_to(t_end);
        if self.observed != Some(self.step) {
            obs.observe(&self.radii, &self.view())?;
            self.observed = Some(self.step);
            if stop(&self.radii, &self.view()) {
                return Ok(Some(Blowup::threshold(self.t())));
            }
        }
        while self.step < steps {
            if self.advance().is_err() {
                return Ok(Some(Blowup::non_finite(self.t())));
            }
            self.observed = Some(self.step);
            let view = self.view();
            obs.observe(&self.radii, &view)?;
            if stop(&self.radii, &view) {
                return Ok(Some(Blowup::threshold(self.t())));
            }
        }
        Ok(None)
    }
}

/// Advances a linear integrator by one step, reporting non-finite values as an error.
pub fn step_linear<S: Source>(integ: &mut Integrator<S>) -> Result<()> {
    let n = integ.grid().n;
    let t = integ.t();
    integ
        .advance()
        .map_err(|NonFinite(i)| Error::IntegrationFailure { t, node: i % n })
}

/// Options for [`solve_linear_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Keep every `stride`-th level (0 keeps only the last three).
    pub stride: usize,
    /// Norms tracked on the fly at full step rate.
    pub norms: Option<NormConfig>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            stride: 1,
            norms: Some(NormConfig::default()),
        }
    }
}

pub fn solve_linear(grid: &RadialGrid, data: &DataProfile, forcing: &ForcingField, t_end: f64) -> Result<Trajectory> {
    solve_linear_with(grid, data, forcing, t_end, &SolveOptions::default())
}

pub fn solve_linear_with(
    grid: &RadialGrid,
    data: &DataProfile,
    forcing: &ForcingField,
    t_end: f64,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    forcing.validate_on(grid)?;
    let (v0, p0) = sample_data(data, grid)?;
    let mut integ = Integrator::new(grid, &v0, &p0, forcing.clone())?;
    let mut traj = Trajectory::recorder(grid, opts.stride);
    let mut tracker = opts.norms.clone().map(|cfg| NormTracker::new(grid, cfg));
    let blow = integ.run_to(t_end, &mut (&mut traj, &mut tracker), |_, _| false)?;
    if let Some(b) = blow {
        let node = integ.v().iter().chain(integ.p()).position(|x| !x.is_finite()).unwrap_or(0);
        return Err(Error::IntegrationFailure { t: b.t, node: node % grid.n });
    }
    if let Some(tr) = tracker {
        traj.norms = Some(tr.finish()?);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_grid, make_grid_with, Geometry, MemoryCap, Shape};

    fn gaussian_data(eps: f64) -> DataProfile {
        DataProfile::new(Shape::gaussian(3.5, 0.5), Shape::Zero, eps)
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = make_grid(Geometry::Minkowski, 0.1, 5.0, 4.0).unwrap();
        let tr = solve_linear(&g, &DataProfile::zero(), &ForcingField::Zero, 5.0).unwrap();
        for k in 0..tr.len() {
            let lv = tr.level(k);
            assert!(lv.v.iter().chain(&lv.p).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn matches_oracle_to_second_order() {
        let data = gaussian_data(1.0);
        let mut errs = Vec::new();
        for &dr in &[0.1, 0.05] {
            let g = make_grid(Geometry::Minkowski, dr, 4.0, 6.75).unwrap();
            let tr = solve_linear_with(&g, &data, &ForcingField::Zero, 4.0, &SolveOptions { stride: 0, norms: None }).unwrap();
            let last = tr.last().unwrap();
            let exact = dalembert_oracle(&g, &data, last.t).unwrap();
            let e = last.v.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8 && order < 2.2, "order {order}, errors {errs:?}");
    }

    #[test]
    fn cfl_above_one_is_refused() {
        assert!(make_grid_with(Geometry::Minkowski, 0.1, 1.5, 1.0, 1.0, MemoryCap::from_mib(64)).is_err());
    }

    #[test]
    fn linear_in_the_data() {
        let g = make_grid(Geometry::exterior_default(), 0.05, 3.0, 3.5).unwrap();
        let a = DataProfile::new(Shape::gaussian(2.2, 0.2), Shape::Zero, 1.0);
        let b = DataProfile::new(Shape::Zero, Shape::poly_bump(1.5, 3.0, 3), 1.0);
        let opts = SolveOptions { stride: 0, norms: None };
        let ua = solve_linear_with(&g, &a, &ForcingField::Zero, 3.0, &opts).unwrap();
        let ub = solve_linear_with(&g, &b, &ForcingField::Zero, 3.0, &opts).unwrap();
        let (v0a, p0a) = sample_data(&a, &g).unwrap();
        let (v0b, p0b) = sample_data(&b, &g).unwrap();
        let v0: Vec<f64> = v0a.iter().zip(&v0b).map(|(x, y)| 2.5 * x + y).collect();
        let p0: Vec<f64> = p0a.iter().zip(&p0b).map(|(x, y)| 2.5 * x + y).collect();
        let mut integ = Integrator::new(&g, &v0, &p0, ()).unwrap();
        integ.run_to(3.0, &mut (), |_, _| false).unwrap();
        let (la, lb) = (ua.last().unwrap(), ub.last().unwrap());
        for i in 0..g.n {
            let expect = 2.5 * la.v_at(i) + lb.v_at(i);
            assert!((integ.v()[i] - expect).abs() <= 1e-13 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn forcing_leaves_origin_after_it_passes() {
        // G supported in t ∈ [0,1], r ∈ [1,2]; incoming waves cross the origin and leave
        let forcing = ForcingField::separable(1.0, Shape::poly_bump(0.0, 1.0, 4), Shape::poly_bump(1.0, 2.0, 4));
        let g = make_grid(Geometry::Minkowski, 0.025, 8.0, 2.0).unwrap();
        let tr = solve_linear_with(&g, &DataProfile::zero(), &forcing, 8.0, &SolveOptions { stride: 4, norms: None })
            .unwrap();
        let peak = (0..tr.len())
            .flat_map(|k| tr.level(k).v.iter().map(|x| x.abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        let i1 = g.index_at_or_above(1.0);
        for k in 0..tr.len() {
            let lv = tr.level(k);
            if lv.t > 4.0 + 0.5 {
                let near: f64 = (0..=i1).map(|i| lv.v_at(i).abs()).fold(0.0, f64::max);
                assert!(near < 1e-5 * peak, "t = {}: {near} vs peak {peak}", lv.t);
            }
        }
    }

    #[test]
    fn step_reports_non_finite_state() {
        let g = make_grid(Geometry::Minkowski, 0.1, 1.0, 1.0).unwrap();
        struct Bad;
        impl Source for Bad {
            fn eval(&mut self, _: &StageCtx, _: &Radii, _: &[f64], _: &[f64], out: &mut [f64]) -> bool {
                out[1] = f64::NAN;
                true
            }
        }
        let z = vec![0.0; g.n];
        let mut integ = Integrator::new(&g, &z, &z, Bad).unwrap();
        match step_linear(&mut integ) {
            Err(Error::IntegrationFailure { node, .. }) => assert_eq!(node, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(integ.step_index(), 0);
    }
}
