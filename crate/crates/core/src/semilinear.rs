//! Direct integration of v_tt − v_rr = r·Q(u_t, u_r) with blow-up detection.

use crate::error::{Error, Result};
use crate::linear::{Blowup, BlowupTrigger, Integrator, Observer, Source, StageCtx, StateView, Trajectory};
use crate::model::{sample_data, velocity_fields_from, DataProfile, MemoryCap, QuadraticForm, Radii, RadialGrid};
use crate::norms::{NormConfig, NormLog, NormTracker};
use crate::rk4::{NonFinite, Rk4};

/// Default blow-up threshold as a multiple of the initial sup|u′|.
pub const DEFAULT_THRESHOLD_FACTOR: f64 = 1e4;
/// Horizon doublings allowed when a run survives its grid horizon.
pub const MAX_EXTENSIONS: u32 = 6;

/// Stage forcing r·Q(u_t, u_r) computed from the stage state.
#[derive(Debug, Clone)]
pub struct SemilinearSource {
    pub form: QuadraticForm,
    u: Vec<f64>,
    ut: Vec<f64>,
    ur: Vec<f64>,
}

impl SemilinearSource {
    pub fn new(form: QuadraticForm) -> Self {
        SemilinearSource {
            form,
            u: Vec::new(),
            ut: Vec::new(),
            ur: Vec::new(),
        }
    }
}

/// Writes r·Q(u′) from (v, p) into `out` on nodes lo..v.len()-1, using the given scratch buffers.
pub(crate) fn reduced_q(
    form: &QuadraticForm,
    radii: &Radii,
    lo: usize,
    v: &[f64],
    p: &[f64],
    scratch: (&mut Vec<f64>, &mut Vec<f64>, &mut Vec<f64>),
    out: &mut [f64],
) {
    let m = v.len();
    let (u, ut, ur) = scratch;
    for b in [&mut *u, &mut *ut, &mut *ur] {
        if b.len() < m {
            b.resize(m, 0.0);
        }
    }
    velocity_fields_from(radii, lo, v, p, u, ut, ur);
    for i in lo.max(1)..m - 1 {
        out[i] = radii.r[i] * form.eval(ut[i], ur[i]);
    }
}

impl Source for SemilinearSource {
    fn eval(&mut self, ctx: &StageCtx, radii: &Radii, v: &[f64], p: &[f64], out: &mut [f64]) -> bool {
        if self.form.is_zero() {
            return false;
        }
        reduced_q(&self.form, radii, ctx.lo, v, p, (&mut self.u, &mut self.ut, &mut self.ur), out);
        true
    }
}

/// max over nodes of |u_t| + |u_r| (same discretisation as the forcing).
pub fn sup_velocity(radii: &Radii, v: &[f64], p: &[f64]) -> f64 {
    Detector::Sup.measure(radii, 0, v, p, &mut Scratch::default())
}

/// Quantity compared against the blow-up threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Detector {
    /// max |u_t| + |u_r|.
    #[default]
    Sup,
    /// max max(1, r)·(|u_t| + |u_r|): stays O(1) along an outgoing front, where |u′| itself decays like 1/r.
    Weighted,
}

impl Detector {
    pub fn name(&self) -> &'static str {
        match self {
            Detector::Sup => "sup",
            Detector::Weighted => "weighted",
        }
    }

    /// Value over nodes `lo..v.len()`; NaN anywhere gives +inf.
    pub fn measure(&self, radii: &Radii, lo: usize, v: &[f64], p: &[f64], scratch: &mut Scratch) -> f64 {
        let m = v.len();
        if m == 0 {
            return 0.0;
        }
        scratch.fit(m);
        velocity_fields_from(radii, lo, v, p, &mut scratch.u, &mut scratch.ut, &mut scratch.ur);
        let mut s: f64 = 0.0;
        for i in lo..m {
            let mut x = scratch.ut[i].abs() + scratch.ur[i].abs();
            if *self == Detector::Weighted {
                x *= radii.r[i].max(1.0);
            }
            if x.is_nan() {
                return f64::INFINITY;
            }
            s = s.max(x);
        }
        s
    }
}

/// Reusable buffers for u, u_t, u_r.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    u: Vec<f64>,
    ut: Vec<f64>,
    ur: Vec<f64>,
}

impl Scratch {
    fn fit(&mut self, m: usize) {
        for b in [&mut self.u, &mut self.ut, &mut self.ur] {
            if b.len() < m {
                b.resize(m, 0.0);
            }
        }
    }
}

/// Advances one step; non-finite values are reported as a blow-up rather than an error.
pub fn step_semilinear(integ: &mut Integrator<SemilinearSource>) -> Option<BlowupTrigger> {
    match integ.advance() {
        Ok(()) => None,
        Err(NonFinite(_)) => Some(BlowupTrigger::NonFinite),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Multiple of the initial sup|u′|.
    Relative(f64),
    Absolute(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Relative(DEFAULT_THRESHOLD_FACTOR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub threshold: Threshold,
    /// Trajectory decimation (0 keeps only the last three levels).
    pub stride: usize,
    pub norms: Option<NormConfig>,
    /// Horizon doublings allowed when the run survives the requested horizon.
    pub max_extensions: u32,
    pub cap: MemoryCap,
    pub detector: Detector,
    /// When false only the final level is kept (no per-step copies).
    pub record: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threshold: Threshold::default(),
            stride: 1,
            norms: Some(NormConfig::default()),
            max_extensions: 0,
            cap: MemoryCap::from_env(),
            detector: Detector::Sup,
            record: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub blowup: Option<Blowup>,
    pub norm_log: Option<NormLog>,
    pub initial_sup: f64,
    pub threshold: f64,
    /// Time of the last valid level.
    pub t_reached: f64,
    /// Horizon doublings used.
    pub extensions: u32,
    /// Why the run stopped short of blow-up and of the horizon, if it did.
    pub stop_reason: Option<String>,
}

impl RunOutcome {
    pub fn survived(&self) -> bool {
        self.blowup.is_none()
    }
}

/// Runs to `t_end` (or blow-up) with default options and the given absolute threshold.
pub fn run(
    grid: &RadialGrid,
    data: &DataProfile,
    form: &QuadraticForm,
    t_end: f64,
    threshold: Option<f64>,
) -> Result<RunOutcome> {
    let opts = RunOptions {
        threshold: threshold.map(Threshold::Absolute).unwrap_or_default(),
        ..Default::default()
    };
    run_with(grid, data, form, t_end, &opts)
}

pub fn run_with(
    grid: &RadialGrid,
    data: &DataProfile,
    form: &QuadraticForm,
    t_end: f64,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    if !(t_end > 0.0) || t_end > grid.t_end + 1e-9 * grid.t_end {
        return Err(Error::invalid(format!("horizon {t_end} must lie in (0, {}]", grid.t_end)));
    }
    let (v0, p0) = sample_data(data, grid)?;
    let radii = Radii::new(grid);
    let mut scratch = Scratch::default();
    let initial_sup = opts.detector.measure(&radii, 0, &v0, &p0, &mut scratch);
    let threshold = match opts.threshold {
        Threshold::Relative(k) => {
            if !(k > 10.0) {
                return Err(Error::invalid(format!("relative threshold must exceed 10, got {k}")));
            }
            if initial_sup > 0.0 {
                k * initial_sup
            } else {
                f64::INFINITY
            }
        }
        Threshold::Absolute(x) => {
            if !(x > 10.0 * initial_sup) {
                return Err(Error::invalid(format!(
                    "threshold {x} must exceed 10 × initial sup|u′| = {}",
                    10.0 * initial_sup
                )));
            }
            x
        }
    };

    let mut integ = Integrator::new(grid, &v0, &p0, SemilinearSource::new(*form))?;
    let mut traj = Trajectory::recorder(grid, opts.stride).with_cap(opts.cap);
    let mut tracker = opts.norms.clone().map(|c| NormTracker::new(grid, c));
    let mut horizon = t_end;
    let mut extensions = 0;
    let mut stop_reason = None;
    let blowup = loop {
        let detector = opts.detector;
        let stop = |radii: &Radii, s: &StateView<'_>| detector.measure(radii, s.lo, s.v, s.p, &mut scratch) >= threshold;
        let b = if opts.record {
            let mut obs = (&mut traj, &mut tracker);
            integ.run_to(horizon, &mut obs as &mut dyn Observer, stop)?
        } else {
            integ.run_to(horizon, &mut tracker as &mut dyn Observer, stop)?
        };
        if b.is_some() || extensions >= opts.max_extensions {
            break b;
        }
        let next = integ.grid().extended_to(2.0 * horizon, opts.cap);
        match next {
            Ok(g) => {
                integ.extend(g)?;
                traj.regrid(integ.grid());
                horizon *= 2.0;
                extensions += 1;
            }
            Err(Error::ResourceLimit(msg)) => {
                stop_reason = Some(msg);
                break None;
            }
            Err(e) => return Err(e),
        }
    };
    if !opts.record {
        traj.observe(integ.radii(), &integ.view())?;
    }
    let norm_log = match tracker {
        Some(t) => Some(t.finish()?),
        None => None,
    };
    traj.blowup = blowup;
    Ok(RunOutcome {
        t_reached: integ.t(),
        trajectory: traj,
        blowup,
        norm_log,
        initial_sup,
        threshold,
        extensions,
        stop_reason,
    })
}

/// The same RK4 on the scalar ODE y′ = y², y(0) = y0: first time y ≥ threshold, if before t_max.
pub fn ode_blowup(y0: f64, dt: f64, threshold: f64, t_max: f64) -> Option<Blowup> {
    let mut y = vec![y0];
    let mut rk = Rk4::new(&y);
    let mut f = |_: f64, _: usize, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0];
    let steps = (t_max / dt).ceil() as usize;
    for k in 0..steps {
        let t = k as f64 * dt;
        if rk.step(&mut f, t, dt, &mut y, &[0..1]).is_err() {
            return Some(Blowup::non_finite(t));
        }
        if y[0].abs() >= threshold {
            return Some(Blowup::threshold((k + 1) as f64 * dt));
        }
    }
    None
}
