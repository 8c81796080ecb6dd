use std::fmt::Write;

use super::csv::{fmt_float, Table};
use super::svg::{line_chart, Axes, Series};
use super::{Artifacts, Config, KeySpec};
use crate::decay::{decay_run, local_spacetime_bounds};
use crate::error::{Error, Result};
use crate::estimates::{log_factor_check, run_battery, BatteryConfig, EstimateId, Scenario};
use crate::lifespan::{fit_lifespan, null_form_contrast, sweep, LifespanParams, LifespanRecord};
use crate::linear::ForcingField;
use crate::model::{make_grid_with, velocity_fields, DataProfile, Geometry, MemoryCap, Radii, Shape};
use crate::norms::NormConfig;
use crate::picard::{run_picard, PicardConfig};
use crate::row;
use crate::semilinear::{run_with, RunOptions, Threshold};

pub(super) const SIMULATE: &[KeySpec] = &[
    ("geometry", "minkowski", "minkowski | exterior"),
    ("r0", "0.5", "ball radius (exterior only)"),
    ("dr", "0.05", "radial step"),
    ("cfl", "0.5", "dt / dr"),
    ("T", "10", "final time"),
    ("eps", "1", "data amplitude"),
    ("f", "zero", "u(0) profile: zero | gaussian:c:w | bump:lo:hi:k | smooth:lo:hi"),
    ("g", "bump:1:3:4", "u_t(0) profile"),
    ("form", "1,0,0", "Q = a u_t^2 + b u_r^2 + c u_t u_r"),
    ("threshold", "1e4", "blow-up when the detector exceeds this multiple of its initial value"),
    ("detector", "sup", "sup | weighted"),
    ("extensions", "0", "horizon doublings while the run survives"),
    ("order", "1", "derivative order of the tracked norms (0..2)"),
    ("stride", "10", "store every stride-th level"),
    ("seed", "0", "recorded for reproducibility; the solver is deterministic"),
];

pub(super) const VERIFY: &[KeySpec] = &[
    ("ids", "E2.1,E2.2,E2.3,E2.4,E2.5,E2.6,E4.3", "estimates to check"),
    ("seeds", "20", "number of random scenarios per estimate"),
    ("seed", "1", "first scenario seed"),
    ("T", "1000", "horizon"),
    ("dr", "0.1", "radial step"),
    ("order", "1", "derivative order for E2.6 and E4.3"),
    ("mode", "parallel", "parallel | sequential"),
    ("series", "false", "write the ratio series of every scenario"),
    ("log_check", "false", "also fit the unnormalised accumulator against ln t on [1e2, 1e4]"),
];

pub(super) const PICARD: &[KeySpec] = &[
    ("geometry", "minkowski", "minkowski | exterior"),
    ("r0", "0.5", "ball radius (exterior only)"),
    ("dr", "0.05", "radial step"),
    ("T", "20", "horizon (> 1)"),
    ("eps", "5e-4", "data amplitude"),
    ("f", "zero", "u(0) profile"),
    ("g", "bump:1:3:4", "u_t(0) profile"),
    ("form", "1,0,0", "Q coefficients a,b,c"),
    ("k_max", "30", "iteration cap"),
    ("tol", "1e-10", "stop when A_k falls below this"),
    ("order", "1", "derivative order N of M_k and A_k"),
    ("kss_constant", "", "E2.1 constant; empty estimates it from the first iterate"),
    ("compare_direct", "true", "compare the last iterate with the direct solve"),
    ("seed", "0", "recorded for reproducibility; the iteration is deterministic"),
];

pub(super) const LIFESPAN: &[KeySpec] = &[
    ("eps_list", "2.1,2,1.8,1.6,1.4,1.3,1.2,1.15", "amplitudes of the sweep"),
    ("eps", "", "single amplitude; overrides eps_list when set"),
    ("geometry", "minkowski", "minkowski | exterior"),
    ("r0", "0.5", "ball radius (exterior only)"),
    ("dr", "0.004", "radial step"),
    ("T", "16", "initial horizon"),
    ("max_extensions", "6", "horizon doublings while a run survives"),
    ("threshold", "1e4", "blow-up factor over the initial detector value"),
    ("detector", "weighted", "sup | weighted"),
    ("trailing", "true", "freeze nodes behind the trailing characteristic"),
    ("refine", "true", "repeat every run at dr/2"),
    ("form", "1,0,0", "Q coefficients a,b,c"),
    ("f", "zero", "u(0) profile"),
    ("g", "bump:-2:2:4", "u_t(0) profile"),
    ("null_contrast", "false", "rerun with the null form up to null_factor times each blow-up time"),
    ("null_factor", "10", "horizon multiple for the null-form runs"),
    ("mode", "parallel", "parallel | sequential"),
    ("seed", "0", "recorded for reproducibility; the sweep is deterministic"),
];

pub(super) const DECAY: &[KeySpec] = &[
    ("r0", "0.5", "ball radius"),
    ("dr", "0.01", "radial step"),
    ("T", "20", "horizon"),
    ("radius", "4", "local energy is measured on r0 < r < radius"),
    ("eps", "1", "data amplitude"),
    ("f", "zero", "u(0) profile"),
    ("g", "bump:1:2:4", "u_t(0) profile"),
    ("forcing_amp", "0", "forcing amplitude"),
    ("forcing_time", "bump:0:2:4", "forcing time profile"),
    ("forcing_space", "bump:1:2:4", "forcing radial profile"),
    ("seeds", "10", "number of forced scenarios for the local space-time bound (0 skips it)"),
    ("seed", "1", "first scenario seed"),
    ("bound_T", "50", "horizon of the bound scenarios"),
    ("bound_dr", "0.05", "radial step of the bound scenarios"),
    ("mode", "parallel", "parallel | sequential"),
];

fn data_profile(cfg: &Config) -> Result<DataProfile> {
    let eps = cfg.f64("eps")?;
    if eps < 0.0 {
        return Err(Error::invalid("`eps` must be non-negative"));
    }
    let data = DataProfile::new(cfg.shape("f")?, cfg.shape("g")?, eps);
    data.validate()?;
    Ok(data)
}

fn order(cfg: &Config) -> Result<usize> {
    let n = cfg.usize("order")?;
    if n > crate::norms::MAX_ORDER {
        return Err(Error::invalid(format!("`order` = {n}: at most {}", crate::norms::MAX_ORDER)));
    }
    Ok(n)
}

fn seed_list(cfg: &Config) -> Result<Vec<u64>> {
    let (n, first) = (cfg.u64("seeds")?, cfg.u64("seed")?);
    let end = first
        .checked_add(n)
        .ok_or_else(|| Error::invalid("`seed` + `seeds` overflows"))?;
    Ok((first..end).collect())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), fmt_float)
}

pub(super) fn simulate(cfg: &Config) -> Result<Artifacts> {
    let geometry = cfg.geometry()?;
    let dr = cfg.positive("dr")?;
    let cfl = cfg.positive("cfl")?;
    let horizon = cfg.positive("T")?;
    let data = data_profile(cfg)?;
    let form = cfg.form("form")?;
    let factor = cfg.positive("threshold")?;
    let detector = cfg.detector("detector")?;
    let extensions = cfg.u64("extensions")?;
    if extensions > crate::semilinear::MAX_EXTENSIONS as u64 {
        return Err(Error::invalid(format!(
            "`extensions` = {extensions}: at most {}",
            crate::semilinear::MAX_EXTENSIONS
        )));
    }
    let order = order(cfg)?;
    let stride = cfg.usize("stride")?.max(1);
    cfg.u64("seed")?;
    let grid = make_grid_with(geometry, dr, cfl, horizon, data.support_radius(), MemoryCap::from_env())?;
    data.check_against(&grid)?;

    let opts = RunOptions {
        threshold: Threshold::Relative(factor),
        stride,
        norms: Some(NormConfig::with_order(order)),
        max_extensions: extensions as u32,
        detector,
        ..Default::default()
    };
    let run = run_with(&grid, &data, &form, horizon, &opts)?;
    let mut out = Artifacts::default();
    if let Some(b) = run.blowup {
        out.flag(format!("blow-up at t = {} ({})", fmt_float(b.t), b.trigger.name()));
    }
    if let Some(msg) = &run.stop_reason {
        out.flag(format!("stopped early: {msg}"));
    }

    let log = run.norm_log.as_ref().ok_or_else(|| Error::Internal("norm log missing".into()))?;
    let mut header: Vec<String> = vec!["t".into()];
    for &(j, m) in &log.indices {
        header.push(format!("energy_{j}_{m}"));
    }
    for &(j, m) in &log.indices {
        header.push(format!("kss_{j}_{m}"));
    }
    header.push("spacetime".into());
    header.push("ball".into());
    for r in &log.config.local_radii {
        header.push(format!("local_energy_{r}"));
    }
    header.push("m_norm".into());
    let mut norms = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (k, lv) in log.rows.iter().enumerate() {
        if k % stride != 0 && k + 1 != log.rows.len() {
            continue;
        }
        let mut row = row![lv.t];
        row.extend(lv.energy.iter().map(|&x| x.into()));
        row.extend(lv.kss.iter().map(|&x| x.into()));
        row.extend(row![lv.spacetime, lv.ball]);
        row.extend(lv.local_energy.iter().map(|&x| x.into()));
        row.push(lv.weighted_sum(log.config.log_shift).into());
        norms.push(row);
    }
    out.add("norms.csv", norms.render());

    let traj = &run.trajectory;
    let last = traj.last().ok_or_else(|| Error::Internal("empty trajectory".into()))?;
    let tg = &traj.grid;
    let radii = Radii::new(tg);
    let (v, p) = (last.full_v(tg.n), last.full_p(tg.n));
    let (mut u, mut ut, mut ur) = (vec![0.0; tg.n], vec![0.0; tg.n], vec![0.0; tg.n]);
    velocity_fields(&radii, &v, &p, &mut u, &mut ut, &mut ur);
    let mut fin = Table::new(&["r", "u", "u_t", "u_r"]);
    for i in 0..tg.n {
        fin.push(row![radii.r[i], u[i], ut[i], ur[i]]);
    }
    out.add("final.csv", fin.render());

    let energy: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.t, r.energy[0])).collect();
    out.add(
        "energy.svg",
        line_chart("energy", "t", "||u'(t)||", &[Series::new("energy", energy)], Axes::default()),
    );

    let e0 = log.rows.first().map_or(0.0, |r| r.energy[0]);
    let e1 = log.last().map_or(0.0, |r| r.energy[0]);
    let mut s = String::new();
    let _ = writeln!(s, "grid: {}", tg.describe());
    let _ = writeln!(s, "t_reached = {}", fmt_float(run.t_reached));
    let _ = writeln!(s, "blowup_time = {}", opt(run.blowup.map(|b| b.t)));
    let _ = writeln!(s, "initial_detector = {}", fmt_float(run.initial_sup));
    let _ = writeln!(s, "threshold = {}", fmt_float(run.threshold));
    let _ = writeln!(s, "extensions = {}", run.extensions);
    let _ = writeln!(s, "energy_initial = {}", fmt_float(e0));
    let _ = writeln!(s, "energy_final = {}", fmt_float(e1));
    let _ = writeln!(s, "m_norm = {}", fmt_float(log.m_norm(f64::INFINITY)));
    out.add("summary.txt", s);
    Ok(out)
}

pub(super) fn verify(cfg: &Config) -> Result<Artifacts> {
    let ids = cfg
        .list("ids")
        .iter()
        .map(|s| EstimateId::parse(s))
        .collect::<Result<Vec<_>>>()?;
    if ids.is_empty() {
        return Err(Error::invalid("`ids` is empty"));
    }
    let battery = BatteryConfig {
        ids,
        seeds: seed_list(cfg)?,
        horizon: cfg.positive("T")?,
        dr: cfg.positive("dr")?,
        order: order(cfg)?,
        mode: cfg.mode("mode")?,
    };
    if battery.seeds.is_empty() {
        return Err(Error::invalid("`seeds` must be at least 1"));
    }
    let series = cfg.bool("series")?;
    let log_check = cfg.bool("log_check")?;
    for &id in &battery.ids {
        let mut sc = Scenario::random(crate::estimates::battery_geometry(id), battery.seeds[0], battery.horizon, battery.dr, id == EstimateId::Exterior);
        sc.order = battery.order;
        sc.check_admissible(id)?;
        sc.grid()?;
    }

    let reports = run_battery(&battery)?;
    let mut out = Artifacts::default();
    let mut table = Table::new(&["estimate_id", "seed", "geometry", "max_ratio", "tail_slope", "valid", "scenario"]);
    for r in &reports {
        table.push(row![r.id.label(), r.seed, r.geometry, r.max_ratio, r.tail_slope, r.valid, r.scenario.clone()]);
        if !r.valid {
            out.flag(format!("{} seed {}: zero right-hand side with non-zero left-hand side", r.id.label(), r.seed));
        }
        if series {
            let mut t = Table::new(&["t", "lhs", "rhs", "ratio"]);
            for (k, ratio) in r.ratios().into_iter().enumerate() {
                t.push(row![r.times[k], r.lhs[k], r.rhs[k], ratio]);
            }
            out.add(&format!("series_{}_seed{}.csv", r.id.label(), r.seed), t.render());
        }
    }
    out.add("battery.csv", table.render());

    let mut s = String::new();
    let _ = writeln!(s, "T = {}  dr = {}  seeds = {}", battery.horizon, battery.dr, battery.seeds.len());
    let _ = writeln!(s, "estimate_id,count,worst_max_ratio,worst_tail_slope,invalid");
    let mut chart = Vec::new();
    for &id in &battery.ids {
        let rs: Vec<_> = reports.iter().filter(|r| r.id == id).collect();
        let worst = rs.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
        let slope = rs.iter().map(|r| r.tail_slope).fold(f64::NEG_INFINITY, f64::max);
        let invalid = rs.iter().filter(|r| !r.valid).count();
        let _ = writeln!(s, "{},{},{},{},{}", id.label(), rs.len(), fmt_float(worst), fmt_float(slope), invalid);
        chart.push(Series::new(id.label(), rs.iter().map(|r| (r.seed as f64, r.max_ratio)).collect()));
    }
    out.add("max_ratio.svg", line_chart("max ratio per seed", "seed", "max ratio", &chart, Axes::default()));

    if log_check {
        let sc = log_check_scenario();
        let c = log_factor_check(&sc, 1e2, 1e4)?;
        let _ = writeln!(s, "log_check_scenario = {}", sc.describe());
        let _ = writeln!(s, "log_check_accumulator_slope = {}", fmt_float(c.accumulator.slope));
        let _ = writeln!(s, "log_check_accumulator_r_squared = {}", fmt_float(c.accumulator.r_squared));
        let _ = writeln!(s, "log_check_raw_slope = {}", fmt_float(c.raw_slope));
        let _ = writeln!(s, "log_check_normalized_slope = {}", fmt_float(c.normalized_slope));
    }
    out.add("summary.txt", s);
    Ok(out)
}

/// Free wave used for the logarithmic growth check: wide shell data on a coarse grid to t = 1e4.
pub fn log_check_scenario() -> Scenario {
    let mut sc = Scenario::zero(Geometry::Minkowski, 1e4, 0.5);
    sc.data = DataProfile::new(Shape::Zero, Shape::poly_bump(1.0, 11.0, 4), 1.0);
    sc
}

pub(super) fn picard(cfg: &Config) -> Result<Artifacts> {
    let mut pc = PicardConfig::new(cfg.geometry()?, data_profile(cfg)?, cfg.positive("T")?, cfg.positive("dr")?);
    pc.form = cfg.form("form")?;
    pc.k_max = cfg.usize("k_max")?;
    pc.tol_abs = cfg.positive("tol")?;
    pc.order = order(cfg)?;
    pc.kss_constant = cfg.opt_f64("kss_constant")?;
    if pc.kss_constant.is_some_and(|c| c <= 0.0) {
        return Err(Error::invalid("`kss_constant` must be positive"));
    }
    pc.compare_direct = cfg.bool("compare_direct")?;
    cfg.u64("seed")?;
    pc.validate()?;

    let mut out = Artifacts::default();
    let mut table = Table::new(&["k", "M_k", "A_k", "ratio", "bounded", "contracting"]);
    let report = match run_picard(&pc) {
        Ok(r) => r,
        Err(Error::LocalExistenceFailure { t }) => {
            out.flag(format!("local existence failure: blow-up at t = {} before the cutoff", fmt_float(t)));
            out.add("picard.csv", table.render());
            out.add("summary.txt", "converged = false\n".into());
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    let ratios = report.ratios();
    for k in 0..report.m.len() {
        let ratio = if k == 0 { None } else { Some(ratios[k - 1]) };
        table.push(row![k, report.m[k], report.a[k], ratio, report.bounded[k], report.contracting[k]]);
    }
    out.add("picard.csv", table.render());
    let pts = |v: &[f64]| v.iter().enumerate().map(|(k, &x)| (k as f64, x)).collect::<Vec<_>>();
    out.add(
        "picard.svg",
        line_chart(
            "Picard iterates",
            "k",
            "norm",
            &[Series::new("M_k", pts(&report.m)), Series::new("A_k", pts(&report.a))],
            Axes { log_x: false, log_y: true },
        ),
    );
    if report.diverged {
        out.flag("iteration diverged");
    } else if !report.converged {
        out.flag(format!("not converged after {} iterations", report.iterations));
    }
    if !report.gate_ok {
        out.flag(format!("smallness gate not met: 4*C*C0*eps*ln(2+T) = {}", fmt_float(report.gate_value)));
    }
    if report.bounded.iter().any(|b| !b) {
        out.flag("M_k exceeded 2*C0_hat*eps");
    }

    let mut s = String::new();
    let _ = writeln!(s, "grid: {}", report.grid);
    let _ = writeln!(s, "iterations = {}", report.iterations);
    let _ = writeln!(s, "converged = {}", report.converged);
    let _ = writeln!(s, "diverged = {}", report.diverged);
    let _ = writeln!(s, "c0_hat = {}", fmt_float(report.c0_hat));
    let _ = writeln!(s, "kss_constant = {}", fmt_float(report.kss_constant));
    let _ = writeln!(s, "gate_value = {}", fmt_float(report.gate_value));
    let _ = writeln!(s, "gate_ok = {}", report.gate_ok);
    let _ = writeln!(s, "max_ratio_k_ge_2 = {}", opt(ratios.iter().skip(1).copied().filter(|x| x.is_finite()).reduce(f64::max)));
    let _ = writeln!(s, "local_constant = {}", opt(report.local_constant));
    let _ = writeln!(s, "direct_gap = {}", opt(report.direct_gap));
    let _ = writeln!(s, "residual = {}", opt(report.residual));
    out.add("summary.txt", s);
    Ok(out)
}

fn lifespan_params(cfg: &Config) -> Result<LifespanParams> {
    let p = LifespanParams {
        form: cfg.form("form")?,
        f_shape: cfg.shape("f")?,
        g_shape: cfg.shape("g")?,
        geometry: cfg.geometry()?,
        dr: cfg.positive("dr")?,
        horizon: cfg.positive("T")?,
        max_extensions: u32::try_from(cfg.u64("max_extensions")?).map_err(|_| Error::invalid("`max_extensions` too large"))?,
        threshold_factor: cfg.positive("threshold")?,
        detector: cfg.detector("detector")?,
        trailing: cfg.bool("trailing")?,
        refine: cfg.bool("refine")?,
    };
    p.validate()?;
    Ok(p)
}

fn record_table(records: &[LifespanRecord]) -> Table {
    let mut t = Table::new(&["eps", "t_star", "t_star_fine", "horizon", "dr", "threshold", "resolved", "reason"]);
    for r in records {
        t.push(row![
            r.eps,
            r.t_star,
            r.t_star_fine,
            r.horizon,
            r.dr,
            r.threshold,
            r.resolved,
            r.reason.clone().unwrap_or_default()
        ]);
    }
    t
}

pub(super) fn lifespan(cfg: &Config) -> Result<Artifacts> {
    let params = lifespan_params(cfg)?;
    let eps_list = match cfg.opt_f64("eps")? {
        Some(e) => vec![e],
        None => cfg.f64_list("eps_list")?,
    };
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid("eps values must be positive and at least one is required"));
    }
    let null_contrast = cfg.bool("null_contrast")?;
    let null_factor = cfg.positive("null_factor")?;
    let mode = cfg.mode("mode")?;
    cfg.u64("seed")?;
    let support = params.profile(1.0).support_radius();
    let grid = crate::model::make_grid(params.geometry, params.dr, params.horizon, support)?;
    params.profile(eps_list[0]).check_against(&grid)?;

    let records = sweep(&eps_list, &params, mode)?;
    let mut out = Artifacts::default();
    out.add("lifespan.csv", record_table(&records).render());
    for r in &records {
        if r.survived() {
            out.flag(format!("eps = {}: no blow-up by t = {}", r.eps, fmt_float(r.horizon)));
        } else if !r.resolved {
            out.flag(format!("eps = {}: unresolved ({})", r.eps, r.reason.clone().unwrap_or_default()));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "records = {}", records.len());
    match fit_lifespan(&records) {
        Ok(fit) => {
            let _ = writeln!(s, "[fit] ln T = c_hat / eps + b_hat");
            let _ = writeln!(s, "c_hat = {}", fmt_float(fit.c_hat));
            let _ = writeln!(s, "b_hat = {}", fmt_float(fit.b_hat));
            let _ = writeln!(s, "r_squared = {}", fmt_float(fit.r_squared));
            let _ = writeln!(s, "c_stability = {}", fmt_float(fit.c_stability));
            let _ = writeln!(s, "quadratic_gain = {}", fmt_float(fit.quadratic_gain));
            let _ = writeln!(s, "used = {}", fit.used);
            let _ = writeln!(s, "span = {}", fmt_float(fit.span));
        }
        Err(e @ Error::InsufficientData(_)) => {
            out.flag(format!("no fit: {e}"));
            let _ = writeln!(s, "[fit] unavailable");
        }
        Err(e) => return Err(e),
    }
    let pts: Vec<(f64, f64)> = records.iter().filter_map(|r| r.t_star.map(|t| (1.0 / r.eps, t))).collect();
    out.add(
        "lifespan.svg",
        line_chart("blow-up time", "1/eps", "T", &[Series::new("T(eps)", pts)], Axes { log_x: false, log_y: true }),
    );
    if null_contrast {
        let null = null_form_contrast(&records, &params, null_factor, mode)?;
        out.add("null_contrast.csv", record_table(&null).render());
        let survived = null.iter().filter(|r| r.survived()).count();
        let _ = writeln!(s, "null_form_survived = {survived}/{}", null.len());
    }
    out.add("summary.txt", s);
    Ok(out)
}

pub(super) fn decay(cfg: &Config) -> Result<Artifacts> {
    let geometry = Geometry::ExteriorBall { r0: cfg.positive("r0")? };
    geometry.validate()?;
    let dr = cfg.positive("dr")?;
    let horizon = cfg.positive("T")?;
    let radius = cfg.positive("radius")?;
    let data = data_profile(cfg)?;
    let amp = cfg.f64("forcing_amp")?;
    let forcing = if amp == 0.0 {
        ForcingField::Zero
    } else {
        ForcingField::separable(amp, cfg.shape("forcing_time")?, cfg.shape("forcing_space")?)
    };
    let seeds = seed_list(cfg)?;
    let bound_t = cfg.positive("bound_T")?;
    let bound_dr = cfg.positive("bound_dr")?;
    let mode = cfg.mode("mode")?;
    let grid = crate::model::make_grid(geometry, dr, horizon, data.support_radius().max(forcing.support_radius()).max(radius))?;
    data.check_against(&grid)?;
    forcing.validate_on(&grid)?;
    if !seeds.is_empty() {
        Scenario::random(Geometry::exterior_default(), seeds[0], bound_t, bound_dr, true).grid()?;
    }

    let run = decay_run(geometry, &data, &forcing, horizon, dr, radius)?;
    let mut out = Artifacts::default();
    let peak = run.series.max();
    let mut t = Table::new(&["t", "local_energy", "relative"]);
    for (&ti, &e) in run.series.times.iter().zip(&run.series.local_energy) {
        t.push(row![ti, e, crate::norms::safe_ratio(e, peak)]);
    }
    out.add("decay.csv", t.render());
    let pts: Vec<(f64, f64)> = run.series.times.iter().copied().zip(run.series.local_energy.iter().copied()).collect();
    out.add(
        "decay.svg",
        line_chart("local energy", "t", "E_local", &[Series::new("local energy", pts)], Axes { log_x: false, log_y: true }),
    );

    let mut s = String::new();
    let tail = run.series.tail_relative(run.evacuation);
    let _ = writeln!(s, "radius = {}", radius);
    let _ = writeln!(s, "evacuation_time = {}", fmt_float(run.evacuation));
    let _ = writeln!(s, "peak_local_energy = {}", fmt_float(peak));
    let _ = writeln!(s, "tail_relative_after_evacuation = {}", fmt_float(tail));
    match &run.fit {
        Ok(f) => {
            let _ = writeln!(s, "decay_rate = {}", opt(f.rate));
            let _ = writeln!(s, "decay_r_squared = {}", opt(f.r_squared));
            let _ = writeln!(s, "floor_time = {}", opt(f.floor_time));
        }
        Err(msg) => out.flag(format!("no decay fit: {msg}")),
    }
    if run.evacuation > horizon {
        out.flag("horizon ends before the evacuation time");
    }

    if !seeds.is_empty() {
        let bounds = local_spacetime_bounds(&seeds, bound_t, bound_dr, mode)?;
        let mut b = Table::new(&["seed", "ratio", "late_growth"]);
        for lb in &bounds {
            b.push(row![lb.seed, lb.ratio, lb.late_growth]);
        }
        out.add("local_bound.csv", b.render());
        let worst = bounds.iter().map(|b| b.ratio).fold(0.0, f64::max);
        let late = bounds.iter().map(|b| b.late_growth).fold(0.0, f64::max);
        let _ = writeln!(s, "bound_max_ratio = {}", fmt_float(worst));
        let _ = writeln!(s, "bound_max_late_growth = {}", fmt_float(late));
    }
    out.add("summary.txt", s);
    Ok(out)
}
