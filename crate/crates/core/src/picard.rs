//! Picard iteration for □u = Q(u′): the whole-space scheme □u_k = Q(u′_{k−1}) and the
//! exterior scheme u = u₀ + w with a local solution cut off in time.
//!
//! Each iterate records r·Q of its own RK stage states; the next iterate reads those values
//! back at the same (step, stage), so a fixed point of the iteration is exactly the direct
//! RK4 semilinear solve on the same grid.

use crate::error::{Error, Result};
use crate::linear::{Integrator, Level, Observer, Source, StageCtx, StateView, Trajectory};
use crate::model::{make_grid, sample_data, DataProfile, Geometry, MemoryCap, QuadraticForm, Radii, RadialGrid};
use crate::norms::{safe_ratio, NormConfig, NormLog, NormTracker};
use crate::semilinear::{reduced_q, run_with, Detector, RunOptions, Scratch, Threshold};

/// Smooth cutoff in time: 1 on t ≤ 1/2, 0 on t ≥ 1, a degree-9 smoothstep in between.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CutoffProfile;

impl CutoffProfile {
    const START: f64 = 0.5;
    const END: f64 = 1.0;

    fn x(t: f64) -> Option<f64> {
        (t > Self::START && t < Self::END).then(|| (t - Self::START) / (Self::END - Self::START))
    }

    pub fn eta(&self, t: f64) -> f64 {
        if t <= Self::START {
            1.0
        } else if t >= Self::END {
            0.0
        } else {
            1.0 - step9(Self::x(t).unwrap(), 0)
        }
    }

    pub fn eta_d1(&self, t: f64) -> f64 {
        Self::x(t).map_or(0.0, |x| -2.0 * step9(x, 1))
    }

    pub fn eta_d2(&self, t: f64) -> f64 {
        Self::x(t).map_or(0.0, |x| -4.0 * step9(x, 2))
    }

    pub fn support_of_derivatives(&self) -> (f64, f64) {
        (Self::START, Self::END)
    }
}

/// k-th derivative of 70x⁹ − 315x⁸ + 540x⁷ − 420x⁶ + 126x⁵.
fn step9(x: f64, k: usize) -> f64 {
    let x4 = x.powi(4);
    match k {
        0 => x4 * x * (126.0 + x * (-420.0 + x * (540.0 + x * (-315.0 + 70.0 * x)))),
        1 => x4 * (630.0 + x * (-2520.0 + x * (3780.0 + x * (-2520.0 + 630.0 * x)))),
        2 => x.powi(3) * (2520.0 + x * (-12600.0 + x * (22680.0 + x * (-17640.0 + 5040.0 * x)))),
        _ => unreachable!("only two derivatives are used"),
    }
}

/// Values per (step, RK stage), each slice covering nodes 0..=hi+1 of its stage.
#[derive(Debug, Clone, Default)]
struct StageSlab {
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl StageSlab {
    fn push(&mut self, ctx: &StageCtx, vals: &[f64], cap: MemoryCap) -> Result<()> {
        if self.offsets.len() != 4 * ctx.step + ctx.stage {
            return Err(Error::Internal(format!(
                "stage record out of order at step {}, stage {}",
                ctx.step, ctx.stage
            )));
        }
        self.offsets.push(self.data.len());
        self.data.extend_from_slice(vals);
        cap.check("Picard stage slab", 8 * self.data.len() as u64)
    }

    fn get(&self, step: usize, stage: usize) -> Option<&[f64]> {
        let k = 4 * step + stage;
        let start = *self.offsets.get(k)?;
        let end = self.offsets.get(k + 1).copied().unwrap_or(self.data.len());
        Some(&self.data[start..end])
    }

    fn bytes(&self) -> u64 {
        8 * (self.data.len() + self.offsets.len()) as u64
    }
}

/// Source wrapper that stores the stage states it is handed.
struct StageRecorder<S> {
    inner: S,
    v: StageSlab,
    p: StageSlab,
    cap: MemoryCap,
    error: Option<Error>,
}

impl<S: Source> Source for StageRecorder<S> {
    fn eval(&mut self, ctx: &StageCtx, radii: &Radii, v: &[f64], p: &[f64], out: &mut [f64]) -> bool {
        if self.error.is_none() {
            if let Err(e) = self.v.push(ctx, v, self.cap).and_then(|_| self.p.push(ctx, p, self.cap)) {
                self.error = Some(e);
            }
        }
        self.inner.eval(ctx, radii, v, p, out)
    }
}

/// Local solution on [0, 1] multiplied by the cutoff: u₀ = η·u_loc.
#[derive(Debug, Clone)]
pub struct LocalSolution {
    pub grid: RadialGrid,
    pub eps: f64,
    /// sup_{t≤1} Σ_α(‖∂^α u′‖ + log-normalised weighted norm) of u_loc, divided by ε.
    pub constant: f64,
    /// Same supremum without the division.
    pub sup_norm: f64,
    pub cutoff: CutoffProfile,
    /// Levels of u_loc (not yet multiplied by η), one per step up to t = 1.
    levels: Vec<Level>,
    stage_v: StageSlab,
    stage_p: StageSlab,
    /// r·Q(u₀′) at each stage: the forcing of the first exterior iterate.
    rq0: StageSlab,
}

impl LocalSolution {
    /// Writes (V₀, P₀) = (η v, η′ v + η p) of the stage into `bv`, `bp`; false when u₀ vanishes there.
    fn stage_base(&self, ctx: &StageCtx, bv: &mut [f64], bp: &mut [f64]) -> bool {
        let e = self.cutoff.eta(ctx.t);
        let e1 = self.cutoff.eta_d1(ctx.t);
        if e == 0.0 && e1 == 0.0 {
            return false;
        }
        let (Some(v), Some(p)) = (self.stage_v.get(ctx.step, ctx.stage), self.stage_p.get(ctx.step, ctx.stage)) else {
            return false;
        };
        fill_cut(e, e1, v, p, bv, bp);
        true
    }

    /// (V₀, P₀) at a time level, None once u₀ vanishes.
    pub fn level_base(&self, step: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        let lv = self.levels.get(step)?;
        let (e, e1) = (self.cutoff.eta(lv.t), self.cutoff.eta_d1(lv.t));
        if e == 0.0 && e1 == 0.0 {
            return None;
        }
        let mut bv = vec![0.0; lv.v.len()];
        let mut bp = vec![0.0; lv.v.len()];
        fill_cut(e, e1, &lv.v, &lv.p, &mut bv, &mut bp);
        Some((bv, bp))
    }

    /// Time levels of u_loc itself.
    pub fn local_levels(&self) -> &[Level] {
        &self.levels
    }
}

fn fill_cut(e: f64, e1: f64, v: &[f64], p: &[f64], bv: &mut [f64], bp: &mut [f64]) {
    let m = v.len().min(bv.len());
    for i in 0..m {
        bv[i] = e * v[i];
        bp[i] = e1 * v[i] + e * p[i];
    }
    bv[m..].fill(0.0);
    bp[m..].fill(0.0);
}

fn zero_data(grid: &RadialGrid) -> (Vec<f64>, Vec<f64>) {
    (vec![0.0; grid.n], vec![0.0; grid.n])
}

/// Direct semilinear solve on [0, 1] (stage states recorded), then cut off by η.
pub fn local_solve_and_cutoff(data: &DataProfile, form: &QuadraticForm, grid: &RadialGrid, order: usize) -> Result<LocalSolution> {
    if !grid.geometry.is_exterior() {
        return Err(Error::invalid("the local solve with cutoff belongs to the exterior scheme"));
    }
    data.check_against(grid)?;
    let cap = MemoryCap::from_env();
    let (v0, p0) = sample_data(data, grid)?;
    let source = StageRecorder {
        inner: crate::semilinear::SemilinearSource::new(*form),
        v: StageSlab::default(),
        p: StageSlab::default(),
        cap,
        error: None,
    };
    let mut integ = Integrator::new(grid, &v0, &p0, source)?;
    let mut traj = Trajectory::recorder(grid, 1).with_cap(cap);
    let mut tracker = NormTracker::new(grid, NormConfig::with_order(order));
    let blow = integ.run_to(CutoffProfile::END.min(grid.t_end), &mut (&mut traj, &mut tracker), |_, _| false)?;
    if let Some(b) = blow {
        return Err(Error::LocalExistenceFailure { t: b.t });
    }
    let norms = tracker.finish()?;
    let rec = integ.into_source();
    if let Some(e) = rec.error {
        return Err(e);
    }
    let sup_norm = norms.m_norm(CutoffProfile::END);
    let mut local = LocalSolution {
        grid: grid.clone(),
        eps: data.eps,
        constant: if data.eps > 0.0 { sup_norm / data.eps } else { 0.0 },
        sup_norm,
        cutoff: CutoffProfile,
        levels: traj.levels().to_vec(),
        stage_v: rec.v,
        stage_p: rec.p,
        rq0: StageSlab::default(),
    };
    // r·Q(u₀′) at every recorded stage
    let radii = Radii::new(grid);
    let mut rq0 = StageSlab::default();
    let mut scratch = (Vec::new(), Vec::new(), Vec::new());
    let stages = local.stage_v.offsets.len();
    for k in 0..stages {
        let (step, stage) = (k / 4, k % 4);
        let t = step as f64 * grid.dt + [0.0, 0.5, 0.5, 1.0][stage] * grid.dt;
        let m = local.stage_v.get(step, stage).unwrap().len();
        let ctx = StageCtx { step, stage, t, lo: 1, hi: m.saturating_sub(2) };
        let (mut bv, mut bp, mut out) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        if local.stage_base(&ctx, &mut bv, &mut bp) {
            reduced_q(form, &radii, 1, &bv, &bp, (&mut scratch.0, &mut scratch.1, &mut scratch.2), &mut out);
        }
        rq0.push(&ctx, &out, cap)?;
    }
    local.rq0 = rq0;
    Ok(local)
}

/// One Picard iterate: its stored levels, stage forcing for the next iterate and its norms.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub k: usize,
    /// Levels of the solved unknown (u_k, or w_k outside the ball), one per step.
    pub trajectory: Trajectory,
    /// Norms of the full iterate (u_k, or u₀ + w_k).
    pub norms: NormLog,
    /// Norms of the difference to the previous iterate.
    pub diff_norms: NormLog,
    /// Set when a step produced non-finite values.
    pub failed_at: Option<f64>,
    rq: StageSlab,
}

impl Iterate {
    pub fn grid(&self) -> &RadialGrid {
        &self.trajectory.grid
    }

    pub fn slab_bytes(&self) -> u64 {
        self.rq.bytes()
    }
}

struct IterationSource<'a> {
    form: QuadraticForm,
    prev: Option<&'a StageSlab>,
    base: Option<&'a LocalSolution>,
    next: StageSlab,
    cap: MemoryCap,
    bv: Vec<f64>,
    bp: Vec<f64>,
    rq: Vec<f64>,
    scratch: (Vec<f64>, Vec<f64>, Vec<f64>),
    error: Option<Error>,
}

impl Source for IterationSource<'_> {
    fn eval(&mut self, ctx: &StageCtx, radii: &Radii, v: &[f64], p: &[f64], out: &mut [f64]) -> bool {
        let m = v.len();
        for b in [&mut self.bv, &mut self.bp, &mut self.rq] {
            if b.len() < m {
                b.resize(m, 0.0);
            }
        }
        let with_base = match self.base {
            Some(b) => b.stage_base(ctx, &mut self.bv[..m], &mut self.bp[..m]),
            None => false,
        };
        if with_base {
            for i in 0..m {
                self.bv[i] += v[i];
                self.bp[i] += p[i];
            }
        }
        let (fv, fp) = if with_base { (&self.bv[..m], &self.bp[..m]) } else { (v, p) };
        self.rq[..m].fill(0.0);
        if !self.form.is_zero() {
            let s = &mut self.scratch;
            reduced_q(&self.form, radii, ctx.lo, fv, fp, (&mut s.0, &mut s.1, &mut s.2), &mut self.rq[..m]);
        }
        if self.error.is_none() {
            if let Err(e) = self.next.push(ctx, &self.rq[..m], self.cap) {
                self.error = Some(e);
            }
        }
        let (weight, e1, e2) = match self.base {
            Some(b) => (1.0 - b.cutoff.eta(ctx.t), b.cutoff.eta_d1(ctx.t), b.cutoff.eta_d2(ctx.t)),
            None => (1.0, 0.0, 0.0),
        };
        let prev = self.prev.and_then(|s| s.get(ctx.step, ctx.stage)).unwrap_or(&[]);
        for i in ctx.lo..=ctx.hi {
            let q = prev.get(i).copied().unwrap_or(0.0);
            out[i] = weight * q - e2 * fv[i] - 2.0 * e1 * fp[i];
        }
        true
    }
}

/// Feeds the norm trackers with the full iterate and the difference to the previous one.
struct IterateObserver<'a> {
    base: Option<&'a LocalSolution>,
    prev: Option<&'a Trajectory>,
    traj: Trajectory,
    norms: NormTracker,
    diff: NormTracker,
    fv: Vec<f64>,
    fp: Vec<f64>,
}

impl Observer for IterateObserver<'_> {
    fn observe(&mut self, radii: &Radii, s: &StateView<'_>) -> Result<()> {
        self.traj.observe(radii, s)?;
        let m = s.v.len();
        self.fv.clear();
        self.fv.extend_from_slice(s.v);
        self.fp.clear();
        self.fp.extend_from_slice(s.p);
        // the difference u_k − u_{k−1} = w_k − w_{k−1}
        if let Some(prev) = self.prev {
            let lv = prev
                .levels()
                .get(s.step)
                .ok_or_else(|| Error::invalid("previous iterate is shorter than the current one"))?;
            for i in 0..m {
                self.fv[i] -= lv.v_at(i);
                self.fp[i] -= lv.p_at(i);
            }
        }
        let base = self.base.and_then(|b| b.level_base(s.step));
        if self.prev.is_none() {
            if let Some((bv, bp)) = &base {
                add_into(&mut self.fv, bv);
                add_into(&mut self.fp, bp);
            }
        }
        self.diff.observe(radii, &StateView { v: &self.fv, p: &self.fp, ..*s })?;
        self.fv.clear();
        self.fv.extend_from_slice(s.v);
        self.fp.clear();
        self.fp.extend_from_slice(s.p);
        if let Some((bv, bp)) = &base {
            add_into(&mut self.fv, bv);
            add_into(&mut self.fp, bp);
        }
        self.norms.observe(radii, &StateView { v: &self.fv, p: &self.fp, ..*s })
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn check_prev(grid: &RadialGrid, prev: Option<&Iterate>) -> Result<()> {
    if let Some(p) = prev {
        if p.grid() != grid {
            return Err(Error::invalid(format!(
                "previous iterate lives on {}, requested grid is {}",
                p.grid().describe(),
                grid.describe()
            )));
        }
    }
    Ok(())
}

fn solve_iterate(
    grid: &RadialGrid,
    k: usize,
    v0: &[f64],
    p0: &[f64],
    form: &QuadraticForm,
    prev_rq: Option<&StageSlab>,
    prev_traj: Option<&Trajectory>,
    base: Option<&LocalSolution>,
    order: usize,
) -> Result<Iterate> {
    let cap = MemoryCap::from_env();
    let source = IterationSource {
        form: *form,
        prev: prev_rq,
        base,
        next: StageSlab::default(),
        cap,
        bv: Vec::new(),
        bp: Vec::new(),
        rq: Vec::new(),
        scratch: (Vec::new(), Vec::new(), Vec::new()),
        error: None,
    };
    let mut integ = Integrator::new(grid, v0, p0, source)?;
    let cfg = NormConfig::with_order(order);
    let mut obs = IterateObserver {
        base,
        prev: prev_traj,
        traj: Trajectory::recorder(grid, 1).with_cap(cap),
        norms: NormTracker::new(grid, cfg.clone()),
        diff: NormTracker::new(grid, cfg),
        fv: Vec::new(),
        fp: Vec::new(),
    };
    let blow = integ.run_to(grid.t_end, &mut obs, |_, _| false)?;
    let source = integ.into_source();
    if let Some(e) = source.error {
        return Err(e);
    }
    let mut trajectory = obs.traj;
    trajectory.blowup = blow;
    let finish = |t: NormTracker| -> Result<NormLog> {
        match t.finish() {
            Err(Error::InvalidSequence(_)) if blow.is_some() => Ok(NormLog {
                config: NormConfig::with_order(order),
                indices: Vec::new(),
                rows: Vec::new(),
                annulus_inner: Vec::new(),
            }),
            other => other,
        }
    };
    Ok(Iterate {
        k,
        trajectory,
        norms: finish(obs.norms)?,
        diff_norms: finish(obs.diff)?,
        failed_at: blow.map(|b| b.t),
        rq: source.next,
    })
}

/// □u_k = Q(u′_{k−1}) with the original data; `prev = None` means u_{−1} = 0.
pub fn picard_step_minkowski(
    grid: &RadialGrid,
    prev: Option<&Iterate>,
    data: &DataProfile,
    form: &QuadraticForm,
    order: usize,
) -> Result<Iterate> {
    if grid.geometry.is_exterior() {
        return Err(Error::invalid("the whole-space scheme needs the Minkowski geometry"));
    }
    check_prev(grid, prev)?;
    let (v0, p0) = sample_data(data, grid)?;
    let k = prev.map_or(0, |p| p.k + 1);
    solve_iterate(grid, k, &v0, &p0, form, prev.map(|p| &p.rq), prev.map(|p| &p.trajectory), None, order)
}

/// □w_k = (1 − η)Q((u₀ + w_{k−1})′) − [□, η](u₀ + w_k), zero data; `prev_w = None` means w_{−1} = 0.
pub fn picard_step_obstacle(
    grid: &RadialGrid,
    prev_w: Option<&Iterate>,
    u0: &LocalSolution,
    form: &QuadraticForm,
    order: usize,
) -> Result<Iterate> {
    if &u0.grid != grid {
        return Err(Error::invalid("local solution and iterate grids differ"));
    }
    check_prev(grid, prev_w)?;
    let (v0, p0) = zero_data(grid);
    let k = prev_w.map_or(0, |p| p.k + 1);
    let prev_rq = prev_w.map_or(&u0.rq0, |p| &p.rq);
    solve_iterate(grid, k, &v0, &p0, form, Some(prev_rq), prev_w.map(|p| &p.trajectory), Some(u0), order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardConfig {
    pub geometry: Geometry,
    pub data: DataProfile,
    pub form: QuadraticForm,
    pub horizon: f64,
    pub dr: f64,
    pub k_max: usize,
    pub tol_abs: f64,
    /// Derivative order N in M_k and A_k.
    pub order: usize,
    /// E2.1 constant from a battery; otherwise estimated from the first iterate.
    pub kss_constant: Option<f64>,
    /// Also run the direct solver and report the max-norm gap to the last iterate.
    pub compare_direct: bool,
}

impl PicardConfig {
    pub fn new(geometry: Geometry, data: DataProfile, horizon: f64, dr: f64) -> Self {
        PicardConfig {
            geometry,
            data,
            form: QuadraticForm::ut_squared(),
            horizon,
            dr,
            k_max: 30,
            tol_abs: 1e-10,
            order: 1,
            kss_constant: None,
            compare_direct: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.data.validate()?;
        if !(self.horizon.is_finite() && self.horizon > CutoffProfile::END) {
            return Err(Error::invalid(format!("Picard horizon must exceed 1, got {}", self.horizon)));
        }
        if self.k_max == 0 {
            return Err(Error::invalid("k_max must be at least 1"));
        }
        if !(self.tol_abs.is_finite() && self.tol_abs > 0.0) {
            return Err(Error::invalid("tol_abs must be positive"));
        }
        if self.order > crate::norms::MAX_ORDER {
            return Err(Error::invalid(format!("derivative order {} exceeds 2", self.order)));
        }
        if self.data.eps < 0.0 {
            return Err(Error::invalid("eps must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    pub m: Vec<f64>,
    pub a: Vec<f64>,
    pub c0_hat: f64,
    pub kss_constant: f64,
    /// M_k ≤ 2·C0_hat·ε.
    pub bounded: Vec<bool>,
    /// A_k ≤ A_{k−1}/2 (true for k = 0).
    pub contracting: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    /// 4·Ĉ·C0_hat·ε·ln(2+T).
    pub gate_value: f64,
    pub gate_ok: bool,
    /// Exterior scheme: C in sup_{t≤1} norms ≤ C·ε for the local solution.
    pub local_constant: Option<f64>,
    /// max over levels of sup|Δu′| between the last iterate and the direct solve.
    pub direct_gap: Option<f64>,
    /// Max interior equation residual of the last iterate (exterior scheme).
    pub residual: Option<f64>,
    pub grid: String,
}

impl PicardReport {
    /// A_k / A_{k−1} for k ≥ 1 (NaN when A_{k−1} = 0).
    pub fn ratios(&self) -> Vec<f64> {
        self.a.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::NAN }).collect()
    }
}

/// Max over t of the E2.1 ratio of the free part of an iterate (data norm only on the right).
fn kss_ratio(log: &NormLog) -> f64 {
    let d = log.rows.first().map_or(0.0, |r| r.energy[0]);
    log.rows
        .iter()
        .map(|r| safe_ratio((r.kss[0] / log.config.log_factor(r.t)).sqrt(), d))
        .filter(|x| x.is_finite())
        .fold(0.0, f64::max)
}

/// Full (v, p) of the iterate at each level.
fn full_levels<'a>(it: &'a Iterate, base: Option<&'a LocalSolution>) -> impl Iterator<Item = (f64, Vec<f64>, Vec<f64>)> + 'a {
    it.trajectory.levels().iter().map(move |lv| {
        let (mut v, mut p) = (lv.v.clone(), lv.p.clone());
        if let Some((bv, bp)) = base.and_then(|b| b.level_base(lv.step)) {
            add_into(&mut v, &bv);
            add_into(&mut p, &bp);
        }
        (lv.t, v, p)
    })
}

/// max over shared levels of sup|u′_a − u′_b|.
fn max_gap(radii: &Radii, a: impl Iterator<Item = (f64, Vec<f64>, Vec<f64>)>, b: &[Level]) -> f64 {
    let mut scratch = Scratch::default();
    let mut gap: f64 = 0.0;
    for ((_, v, p), lb) in a.zip(b) {
        let m = v.len().max(lb.v.len());
        let dv: Vec<f64> = (0..m).map(|i| v.get(i).copied().unwrap_or(0.0) - lb.v_at(i)).collect();
        let dp: Vec<f64> = (0..m).map(|i| p.get(i).copied().unwrap_or(0.0) - lb.p_at(i)).collect();
        gap = gap.max(Detector::Sup.measure(radii, 0, &dv, &dp, &mut scratch));
    }
    gap
}

/// Max over interior nodes and inner levels of |δ_t²v/dt² − δ_r²v/dr² − r·Q(u′)|.
pub fn equation_residual(grid: &RadialGrid, form: &QuadraticForm, levels: &[(f64, Vec<f64>, Vec<f64>)]) -> f64 {
    let radii = Radii::new(grid);
    let (dt2, dr2) = (grid.dt * grid.dt, grid.dr * grid.dr);
    let mut scratch = (Vec::new(), Vec::new(), Vec::new());
    let mut rq = Vec::new();
    let mut res: f64 = 0.0;
    for w in levels.windows(3) {
        let (a, b, c) = (&w[0].1, &w[1].1, &w[2].1);
        let m = b.len();
        rq.clear();
        rq.resize(m, 0.0);
        reduced_q(form, &radii, 1, b, &w[1].2, (&mut scratch.0, &mut scratch.1, &mut scratch.2), &mut rq);
        let at = |x: &Vec<f64>, i: usize| x.get(i).copied().unwrap_or(0.0);
        for i in 1..m - 1 {
            let vtt = (at(c, i) - 2.0 * b[i] + at(a, i)) / dt2;
            let vrr = (b[i + 1] - 2.0 * b[i] + b[i - 1]) / dr2;
            res = res.max((vtt - vrr - rq[i]).abs());
        }
    }
    res
}

/// Iterates until A_k ≤ tol_abs, divergence (A_k increasing three times in a row) or k_max.
pub fn run_picard(cfg: &PicardConfig) -> Result<PicardReport> {
    cfg.validate()?;
    let grid = make_grid(cfg.geometry, cfg.dr, cfg.horizon, cfg.data.support_radius())?;
    cfg.data.check_against(&grid)?;
    let local = if grid.geometry.is_exterior() {
        Some(local_solve_and_cutoff(&cfg.data, &cfg.form, &grid, cfg.order)?)
    } else {
        None
    };
    let eps = cfg.data.eps;
    let step = |prev: Option<&Iterate>| match &local {
        Some(l) => picard_step_obstacle(&grid, prev, l, &cfg.form, cfg.order),
        None => picard_step_minkowski(&grid, prev, &cfg.data, &cfg.form, cfg.order),
    };
    let (mut m, mut a) = (Vec::new(), Vec::new());
    let mut prev: Option<Iterate> = None;
    let (mut converged, mut diverged) = (false, false);
    let mut kss_constant = cfg.kss_constant.unwrap_or(0.0);
    for k in 0..cfg.k_max {
        let it = step(prev.as_ref())?;
        if it.failed_at.is_some() {
            diverged = true;
            m.push(f64::INFINITY);
            a.push(f64::INFINITY);
            prev = Some(it);
            break;
        }
        m.push(it.norms.m_norm(cfg.horizon));
        a.push(it.diff_norms.m_norm(cfg.horizon));
        if k == 0 && cfg.kss_constant.is_none() {
            kss_constant = kss_ratio(&it.norms);
        }
        prev = Some(it);
        if a[k] <= cfg.tol_abs {
            converged = true;
            break;
        }
        if k >= 3 && a[k] > a[k - 1] && a[k - 1] > a[k - 2] && a[k - 2] > a[k - 3] {
            diverged = true;
            break;
        }
    }
    let c0_hat = if eps > 0.0 { m[0] / eps } else { 0.0 };
    let bound = 2.0 * c0_hat * eps;
    let bounded = m.iter().map(|&x| x <= bound * (1.0 + 1e-12)).collect();
    let contracting = std::iter::once(true)
        .chain(a.windows(2).map(|w| w[1] <= 0.5 * w[0]))
        .collect();
    let gate_value = 4.0 * kss_constant * c0_hat * eps * (2.0 + cfg.horizon).ln();
    let last = prev.ok_or_else(|| Error::Internal("no Picard iterate".into()))?;
    let radii = Radii::new(&grid);

    let direct_gap = if cfg.compare_direct && !diverged {
        let opts = RunOptions {
            threshold: Threshold::Absolute(f64::MAX),
            stride: 1,
            norms: None,
            cap: MemoryCap::from_env(),
            ..Default::default()
        };
        let direct = run_with(&grid, &cfg.data, &cfg.form, cfg.horizon, &opts)?;
        Some(max_gap(&radii, full_levels(&last, local.as_ref()), direct.trajectory.levels()))
    } else {
        None
    };
    let residual = match &local {
        Some(l) if !diverged => {
            let levels: Vec<_> = full_levels(&last, Some(l)).collect();
            Some(equation_residual(&grid, &cfg.form, &levels))
        }
        _ => None,
    };
    Ok(PicardReport {
        iterations: m.len(),
        m,
        a,
        c0_hat,
        kss_constant,
        bounded,
        contracting,
        converged,
        diverged,
        gate_ok: gate_value < 1.0,
        gate_value,
        local_constant: local.as_ref().map(|l| l.constant),
        direct_gap,
        residual,
        grid: grid.describe(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Shape;

    fn mink_data(eps: f64) -> DataProfile {
        DataProfile::new(Shape::Zero, Shape::poly_bump(1.0, 3.0, 4), eps)
    }

    fn ext_data(eps: f64) -> DataProfile {
        DataProfile::new(Shape::Zero, Shape::poly_bump(1.0, 2.0, 4), eps)
    }

    #[test]
    fn cutoff_profile() {
        let c = CutoffProfile;
        assert_eq!(c.eta(0.3), 1.0);
        assert_eq!(c.eta(1.0), 0.0);
        assert_eq!(c.eta(1.7), 0.0);
        assert!((c.eta(0.75) - 0.5).abs() < 1e-12);
        let mut last = 1.0;
        for i in 0..=200 {
            let t = 0.4 + 0.004 * i as f64;
            let e = c.eta(t);
            assert!(e <= last + 1e-15);
            last = e;
            // derivatives against central differences
            let h = 1e-5;
            let d1 = (c.eta(t + h) - c.eta(t - h)) / (2.0 * h);
            let d2 = (c.eta_d1(t + h) - c.eta_d1(t - h)) / (2.0 * h);
            assert!((d1 - c.eta_d1(t)).abs() < 1e-6, "t {t}");
            assert!((d2 - c.eta_d2(t)).abs() < 1e-4, "t {t}");
        }
        assert_eq!(c.eta_d1(0.5), 0.0);
        assert_eq!(c.eta_d2(1.2), 0.0);
    }

    #[test]
    fn first_iterate_is_the_free_solution() {
        let data = mink_data(0.5);
        let grid = make_grid(Geometry::Minkowski, 0.1, 5.0, 3.0).unwrap();
        let it = picard_step_minkowski(&grid, None, &data, &QuadraticForm::ut_squared(), 0).unwrap();
        let free = crate::linear::solve_linear(&grid, &data, &crate::linear::ForcingField::Zero, 5.0).unwrap();
        let a = it.trajectory.last().unwrap();
        let b = free.last().unwrap();
        assert_eq!(a.v, b.v);
        assert_eq!(a.p, b.p);
    }

    #[test]
    fn zero_data_zero_iterates() {
        let grid = make_grid(Geometry::Minkowski, 0.1, 3.0, 3.0).unwrap();
        let it = picard_step_minkowski(&grid, None, &DataProfile::zero(), &QuadraticForm::ut_squared(), 1).unwrap();
        assert!(it.trajectory.levels().iter().all(|l| l.v.iter().chain(&l.p).all(|&x| x == 0.0)));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g1 = make_grid(Geometry::Minkowski, 0.1, 3.0, 3.0).unwrap();
        let g2 = make_grid(Geometry::Minkowski, 0.05, 3.0, 3.0).unwrap();
        let form = QuadraticForm::ut_squared();
        let it = picard_step_minkowski(&g1, None, &mink_data(0.1), &form, 0).unwrap();
        assert!(matches!(
            picard_step_minkowski(&g2, Some(&it), &mink_data(0.1), &form, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn eps_zero_converges_immediately() {
        let cfg = PicardConfig::new(Geometry::Minkowski, mink_data(0.0), 5.0, 0.1);
        let rep = run_picard(&cfg).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged && rep.m[0] == 0.0 && rep.a[0] == 0.0);
        assert!(rep.bounded[0]);
    }

    #[test]
    fn small_eps_contracts_and_matches_direct_solve() {
        let mut cfg = PicardConfig::new(Geometry::Minkowski, mink_data(5e-4), 20.0, 0.1);
        cfg.compare_direct = true;
        let rep = run_picard(&cfg).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.gate_ok, "gate {}", rep.gate_value);
        assert!(rep.bounded.iter().all(|&b| b));
        for (k, r) in rep.ratios().iter().enumerate().skip(1) {
            assert!(*r <= 0.55, "A ratio {r} at k = {}", k + 1);
        }
        let gap = rep.direct_gap.unwrap();
        assert!(gap <= 10.0 * cfg.tol_abs, "gap {gap}");
    }

    #[test]
    fn fixed_point_is_stable() {
        let grid = make_grid(Geometry::Minkowski, 0.1, 10.0, 3.0).unwrap();
        let (data, form) = (mink_data(0.05), QuadraticForm::ut_squared());
        let mut it = picard_step_minkowski(&grid, None, &data, &form, 1).unwrap();
        while it.diff_norms.m_norm(10.0) > 1e-11 {
            it = picard_step_minkowski(&grid, Some(&it), &data, &form, 1).unwrap();
        }
        let next = picard_step_minkowski(&grid, Some(&it), &data, &form, 1).unwrap();
        assert!((next.norms.m_norm(10.0) - it.norms.m_norm(10.0)).abs() <= 1e-10);
    }

    #[test]
    fn local_solution_vanishes_after_one_and_scales_linearly() {
        let grid = make_grid(Geometry::exterior_default(), 0.05, 3.0, 2.0).unwrap();
        let form = QuadraticForm::ut_squared();
        let zero = local_solve_and_cutoff(&DataProfile::zero(), &form, &grid, 1).unwrap();
        assert_eq!(zero.sup_norm, 0.0);
        let a = local_solve_and_cutoff(&ext_data(0.01), &form, &grid, 1).unwrap();
        let b = local_solve_and_cutoff(&ext_data(0.1), &form, &grid, 1).unwrap();
        assert!((a.constant / b.constant - 1.0).abs() < 0.1, "{} vs {}", a.constant, b.constant);
        let k1 = grid.steps_to(1.0);
        assert!(a.level_base(k1).is_none());
        assert!(a.level_base(k1 / 4).is_some());
    }

    #[test]
    fn obstacle_trivial_cases() {
        let grid = make_grid(Geometry::exterior_default(), 0.1, 3.0, 2.0).unwrap();
        let form = QuadraticForm::ut_squared();
        let u0 = local_solve_and_cutoff(&DataProfile::zero(), &form, &grid, 0).unwrap();
        let w = picard_step_obstacle(&grid, None, &u0, &form, 0).unwrap();
        assert!(w.trajectory.levels().iter().all(|l| l.v.iter().all(|&x| x == 0.0)));
        assert!(matches!(
            picard_step_minkowski(&grid, None, &ext_data(0.1), &form, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn obstacle_iterates_keep_boundary_and_initial_values() {
        let grid = make_grid(Geometry::exterior_default(), 0.1, 4.0, 2.0).unwrap();
        let form = QuadraticForm::ut_squared();
        let u0 = local_solve_and_cutoff(&ext_data(0.2), &form, &grid, 0).unwrap();
        let w0 = picard_step_obstacle(&grid, None, &u0, &form, 0).unwrap();
        let w1 = picard_step_obstacle(&grid, Some(&w0), &u0, &form, 0).unwrap();
        for w in [&w0, &w1] {
            let first = &w.trajectory.levels()[0];
            assert!(first.v.iter().chain(&first.p).all(|&x| x == 0.0));
            assert!(w.trajectory.levels().iter().all(|l| l.v[0] == 0.0 && l.p[0] == 0.0));
            assert!(w.trajectory.levels().iter().any(|l| l.v.iter().any(|&x| x != 0.0)));
        }
    }

    #[test]
    fn commutator_vanishes_after_one() {
        let c = CutoffProfile;
        for t in [1.0, 1.01, 2.0, 50.0] {
            assert_eq!((c.eta(t), c.eta_d1(t), c.eta_d2(t)), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn obstacle_scheme_converges_with_second_order_residual() {
        let form = QuadraticForm::ut_squared();
        let mut residuals = Vec::new();
        for dr in [0.05, 0.025] {
            let mut cfg = PicardConfig::new(Geometry::exterior_default(), ext_data(0.1), 4.0, dr);
            cfg.order = 0;
            cfg.tol_abs = 1e-11;
            cfg.form = form;
            let rep = run_picard(&cfg).unwrap();
            assert!(rep.converged && rep.bounded.iter().all(|&b| b), "{rep:?}");
            residuals.push(rep.residual.unwrap());
        }
        let order = (residuals[0] / residuals[1]).log2();
        assert!(order >= 1.8, "residuals {residuals:?}, order {order}");
    }
}
