//! Blow-up time against ε and the fit ln T = c/ε + b.

use crate::error::{Error, Result};
use crate::fit::{linear_fit, quadratic_r_squared};
use crate::model::{make_grid, DataProfile, Geometry, MemoryCap, QuadraticForm, Shape};
use crate::par::{par_map, ExecMode};
use crate::semilinear::{ode_blowup, run_with, Detector, RunOptions, Threshold, DEFAULT_THRESHOLD_FACTOR, MAX_EXTENSIONS};

/// Relative disagreement between the two grids below which a record counts as resolved.
pub const RESOLVED_TOL: f64 = 0.05;

/// ε values of the default sweep.
pub const DEFAULT_EPS: [f64; 8] = [2.1, 2.0, 1.8, 1.6, 1.4, 1.3, 1.2, 1.15];

/// Solver settings shared by every point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LifespanParams {
    pub form: QuadraticForm,
    pub f_shape: Shape,
    pub g_shape: Shape,
    pub geometry: Geometry,
    pub dr: f64,
    /// Initial horizon, doubled up to `max_extensions` times while the run survives.
    pub horizon: f64,
    pub max_extensions: u32,
    pub threshold_factor: f64,
    pub detector: Detector,
    /// Freeze nodes behind the characteristic r = t − (support + 1).
    pub trailing: bool,
    /// Repeat each run at dr/2 to decide `resolved`.
    pub refine: bool,
}

impl Default for LifespanParams {
    /// f = 0, g = ε·(bump on [−2, 2]), Q = u_t², weighted detector, dr = 0.004.
    fn default() -> Self {
        LifespanParams {
            form: QuadraticForm::ut_squared(),
            f_shape: Shape::Zero,
            g_shape: Shape::poly_bump(-2.0, 2.0, 4),
            geometry: Geometry::Minkowski,
            dr: 0.004,
            horizon: 16.0,
            max_extensions: MAX_EXTENSIONS,
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
            detector: Detector::Weighted,
            trailing: true,
            refine: true,
        }
    }
}

impl LifespanParams {
    pub fn profile(&self, eps: f64) -> DataProfile {
        DataProfile::new(self.f_shape.clone(), self.g_shape.clone(), eps)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.profile(1.0).validate()?;
        if !(self.dr.is_finite() && self.dr > 0.0) {
            return Err(Error::invalid("dr must be positive"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        if self.max_extensions > MAX_EXTENSIONS {
            return Err(Error::invalid(format!("at most {MAX_EXTENSIONS} horizon doublings are allowed")));
        }
        if !(self.threshold_factor > 10.0) {
            return Err(Error::invalid("threshold factor must exceed 10"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifespanRecord {
    pub eps: f64,
    /// Blow-up time on the production grid; None when the run survived.
    pub t_star: Option<f64>,
    /// Blow-up time at dr/2.
    pub t_star_fine: Option<f64>,
    /// Horizon actually reached (after extensions) when no blow-up occurred.
    pub horizon: f64,
    pub dr: f64,
    pub threshold: f64,
    pub grid: String,
    pub resolved: bool,
    /// Why the record is unresolved or survived, if it is.
    pub reason: Option<String>,
}

impl LifespanRecord {
    pub fn survived(&self) -> bool {
        self.t_star.is_none()
    }

    pub fn relative_gap(&self) -> Option<f64> {
        match (self.t_star, self.t_star_fine) {
            (Some(a), Some(b)) => Some((a - b).abs() / b),
            _ => None,
        }
    }
}

struct Single {
    t_star: Option<f64>,
    reached: f64,
    threshold: f64,
    grid: String,
    stop: Option<String>,
}

fn single_run(eps: f64, dr: f64, horizon: f64, extensions: u32, params: &LifespanParams) -> Result<Single> {
    let data = params.profile(eps);
    let support = data.support_radius();
    let trailing = params.trailing.then_some(-support - 1.0);
    let grid = make_grid(params.geometry, dr, horizon, support)?.with_trailing(trailing);
    let opts = RunOptions {
        threshold: Threshold::Relative(params.threshold_factor),
        stride: 0,
        norms: None,
        max_extensions: extensions,
        cap: MemoryCap::from_env(),
        detector: params.detector,
        record: false,
    };
    let out = run_with(&grid, &data, &params.form, horizon, &opts)?;
    Ok(Single {
        t_star: out.blowup.map(|b| b.t),
        reached: out.t_reached,
        threshold: out.threshold,
        grid: grid.describe(),
        stop: out.stop_reason,
    })
}

/// Blow-up time for one ε, cross-checked at half the grid step.
pub fn measure_lifespan(eps: f64, params: &LifespanParams) -> Result<LifespanRecord> {
    params.validate()?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::invalid(format!("eps must be non-negative, got {eps}")));
    }
    let coarse = single_run(eps, params.dr, params.horizon, params.max_extensions, params)?;
    let mut rec = LifespanRecord {
        eps,
        t_star: coarse.t_star,
        t_star_fine: None,
        horizon: coarse.reached,
        dr: params.dr,
        threshold: coarse.threshold,
        grid: coarse.grid,
        resolved: false,
        reason: None,
    };
    let Some(t) = coarse.t_star else {
        rec.reason = Some(coarse.stop.unwrap_or_else(|| format!("survived to t = {}", coarse.reached)));
        return Ok(rec);
    };
    if !params.refine {
        rec.reason = Some("refinement not requested".into());
        return Ok(rec);
    }
    // the finer run may blow up somewhat later; allow two doublings past 1.5·t
    let fine = single_run(eps, 0.5 * params.dr, 1.5 * t, 2, params)?;
    rec.t_star_fine = fine.t_star;
    match rec.relative_gap() {
        Some(g) if g <= RESOLVED_TOL => rec.resolved = true,
        Some(g) => rec.reason = Some(format!("grids disagree by {:.1}%", 100.0 * g)),
        None => rec.reason = Some(fine.stop.unwrap_or_else(|| "no blow-up at dr/2".into())),
    }
    Ok(rec)
}

/// Blow-up time of y′ = y², y(0) = ε with the same RK4 and threshold factor.
pub fn ode_lifespan(eps: f64, dt: f64, threshold_factor: f64, t_max: f64) -> Option<f64> {
    if eps <= 0.0 {
        return None;
    }
    ode_blowup(eps, dt, threshold_factor * eps, t_max).map(|b| b.t)
}

/// All points of a sweep, ordered as `eps_list`.
pub fn sweep(eps_list: &[f64], params: &LifespanParams, mode: ExecMode) -> Result<Vec<LifespanRecord>> {
    par_map(mode, eps_list, |&e| measure_lifespan(e, params)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifespanFit {
    pub records: Vec<LifespanRecord>,
    pub c_hat: f64,
    pub b_hat: f64,
    pub r_squared: f64,
    /// |c_fine − c_hat| / |c_hat| with c_fine fitted to the dr/2 times (NaN without them).
    pub c_stability: f64,
    /// r² gained by a quadratic term in 1/ε.
    pub quadratic_gain: f64,
    pub used: usize,
    /// max t / min t over the fitted records.
    pub span: f64,
}

/// Least squares of ln t_star against 1/ε over resolved finite records.
pub fn fit_lifespan(records: &[LifespanRecord]) -> Result<LifespanFit> {
    let used: Vec<&LifespanRecord> = records
        .iter()
        .filter(|r| r.resolved && r.eps > 0.0 && r.t_star.is_some_and(|t| t.is_finite() && t > 0.0))
        .collect();
    if used.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "lifespan fit needs 4 resolved records, got {}",
            used.len()
        )));
    }
    let x: Vec<f64> = used.iter().map(|r| 1.0 / r.eps).collect();
    let times: Vec<f64> = used.iter().map(|r| r.t_star.unwrap()).collect();
    let y: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let line = linear_fit(&x, &y)?;
    let quad = quadratic_r_squared(&x, &y).unwrap_or(line.r_squared);
    let c_stability = if used.iter().all(|r| r.t_star_fine.is_some()) {
        let yf: Vec<f64> = used.iter().map(|r| r.t_star_fine.unwrap().ln()).collect();
        let fine = linear_fit(&x, &yf)?;
        (fine.slope - line.slope).abs() / line.slope.abs()
    } else {
        f64::NAN
    };
    let span = times.iter().copied().fold(0.0, f64::max) / times.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LifespanFit {
        records: records.to_vec(),
        c_hat: line.slope,
        b_hat: line.intercept,
        r_squared: line.r_squared,
        c_stability,
        quadratic_gain: quad - line.r_squared,
        used: used.len(),
        span,
    })
}

/// Runs the sweep and fits it.
pub fn sweep_and_fit(eps_list: &[f64], params: &LifespanParams, mode: ExecMode) -> Result<LifespanFit> {
    if eps_list.len() < 5 {
        return Err(Error::invalid(format!("a sweep needs at least 5 eps values, got {}", eps_list.len())));
    }
    fit_lifespan(&sweep(eps_list, params, mode)?)
}

/// Picks `count` ε values, equally spaced in 1/ε, whose coarse blow-up times span roughly
/// [t_lo, t_hi]: bisects outward from `pilot` on the production grid without refinement.
pub fn adaptive_eps(params: &LifespanParams, pilot: f64, t_lo: f64, t_hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(pilot > 0.0 && t_lo > 0.0 && t_hi > t_lo && count >= 2) {
        return Err(Error::invalid("adaptive sweep needs pilot > 0, 0 < t_lo < t_hi and count >= 2"));
    }
    let probe = LifespanParams {
        refine: false,
        ..params.clone()
    };
    let time = |eps: f64| -> Result<f64> {
        Ok(measure_lifespan(eps, &probe)?.t_star.unwrap_or(f64::INFINITY))
    };
    // smallest ε blowing up by t_lo (upper end), largest ε surviving past t_hi (lower end)
    let find = |target: f64| -> Result<f64> {
        let mut lo = pilot;
        let mut hi = pilot;
        if time(pilot)? > target {
            while time(hi)? > target {
                lo = hi;
                hi *= 1.5;
                if hi > 1e3 {
                    return Err(Error::InsufficientData("no blow-up found for any eps".into()));
                }
            }
        } else {
            while time(lo)? <= target {
                hi = lo;
                lo /= 1.5;
                if lo < 1e-3 {
                    return Err(Error::InsufficientData("blow-up persists at tiny eps".into()));
                }
            }
        }
        for _ in 0..12 {
            let mid = 0.5 * (lo + hi);
            if time(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let e_big = find(t_lo)?;
    let e_small = find(t_hi)?;
    let (a, b) = (1.0 / e_big, 1.0 / e_small);
    Ok((0..count)
        .map(|k| 1.0 / (a + (b - a) * k as f64 / (count - 1) as f64))
        .collect())
}

/// Null-form runs with horizons `factor` × the measured non-null times (no extension).
pub fn null_form_contrast(
    baseline: &[LifespanRecord],
    params: &LifespanParams,
    factor: f64,
    mode: ExecMode,
) -> Result<Vec<LifespanRecord>> {
    let jobs: Vec<(f64, f64)> = baseline
        .iter()
        .filter_map(|r| r.t_star.map(|t| (r.eps, factor * t)))
        .collect();
    let null = LifespanParams {
        form: QuadraticForm::null_form(),
        max_extensions: 0,
        refine: false,
        ..params.clone()
    };
    par_map(mode, &jobs, |&(eps, horizon)| {
        measure_lifespan(eps, &LifespanParams { horizon, ..null.clone() })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(eps: f64, t: f64) -> LifespanRecord {
        LifespanRecord {
            eps,
            t_star: Some(t),
            t_star_fine: Some(t),
            horizon: t,
            dr: 0.01,
            threshold: 1.0,
            grid: String::new(),
            resolved: true,
            reason: None,
        }
    }

    fn coarse() -> LifespanParams {
        LifespanParams {
            dr: 0.0125,
            ..Default::default()
        }
    }

    #[test]
    fn exact_fit() {
        let recs: Vec<_> = [0.5, 0.6, 0.8, 1.0, 1.5].iter().map(|&e| record(e, (3.0 / e + 1.0f64).exp())).collect();
        let fit = fit_lifespan(&recs).unwrap();
        assert!((fit.c_hat - 3.0).abs() < 1e-9 && (fit.b_hat - 1.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.c_stability, 0.0);
    }

    #[test]
    fn survived_and_unresolved_records_are_excluded() {
        let mut recs: Vec<_> = [0.5, 0.6, 0.8].iter().map(|&e| record(e, (3.0 / e).exp())).collect();
        recs.push(LifespanRecord { t_star: None, resolved: false, ..record(0.4, 1.0) });
        recs.push(LifespanRecord { resolved: false, ..record(0.45, 1e9) });
        assert!(matches!(fit_lifespan(&recs), Err(Error::InsufficientData(_))));
        recs.push(record(1.0, 3f64.exp()));
        assert_eq!(fit_lifespan(&recs).unwrap().used, 4);
    }

    #[test]
    fn eps_zero_survives() {
        let p = LifespanParams { horizon: 2.0, max_extensions: 0, ..coarse() };
        let rec = measure_lifespan(0.0, &p).unwrap();
        assert!(rec.survived() && !rec.resolved);
    }

    #[test]
    fn ode_oracle() {
        for eps in [0.5, 1.0, 2.0] {
            let (dt, k) = (1e-3, 1e4);
            let t = ode_lifespan(eps, dt, k, 10.0).unwrap();
            assert!((t - 1.0 / eps).abs() <= 2.0 * dt + 1.0 / (k * eps), "eps {eps}: {t}");
        }
        assert!(ode_lifespan(0.0, 1e-3, 1e4, 10.0).is_none());
    }

    #[test]
    fn smaller_eps_lives_longer() {
        let p = LifespanParams { refine: false, ..coarse() };
        let a = measure_lifespan(2.0, &p).unwrap().t_star.unwrap();
        let b = measure_lifespan(1.8, &p).unwrap().t_star.unwrap();
        assert!(b > a && a > 5.0, "{a} {b}");
    }

    #[test]
    fn strong_data_blows_up_resolved() {
        let rec = measure_lifespan(2.0, &coarse()).unwrap();
        assert!(rec.resolved, "{rec:?}");
        assert!((rec.t_star.unwrap() - 9.46).abs() < 0.2);
    }

    #[test]
    fn adaptive_choice_brackets_the_targets() {
        let p = LifespanParams { dr: 0.025, ..Default::default() };
        let eps = adaptive_eps(&p, 2.0, 8.0, 20.0, 3).unwrap();
        assert_eq!(eps.len(), 3);
        assert!(eps[0] > eps[1] && eps[1] > eps[2]);
        let probe = LifespanParams { refine: false, ..p };
        let first = measure_lifespan(eps[0], &probe).unwrap().t_star.unwrap();
        let last = measure_lifespan(eps[2], &probe).unwrap().t_star.unwrap();
        assert!((first / 8.0 - 1.0).abs() < 0.1 && (last / 20.0 - 1.0).abs() < 0.1, "{first} {last}");
    }

    #[test]
    fn sweep_keeps_input_order() {
        let p = LifespanParams { refine: false, dr: 0.025, ..Default::default() };
        let recs = sweep(&[2.2, 2.0, 2.1], &p, ExecMode::Parallel).unwrap();
        let eps: Vec<f64> = recs.iter().map(|r| r.eps).collect();
        assert_eq!(eps, vec![2.2, 2.0, 2.1]);
        assert!(matches!(
            sweep_and_fit(&[2.2, 2.0], &p, ExecMode::Sequential),
            Err(Error::InvalidArgument(_))
        ));
    }
}
