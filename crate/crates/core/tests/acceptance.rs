//! Acceptance criteria 1 to 10. Prints one PASS/FAIL line per criterion and fails if any fail.

use std::time::{Duration, Instant};

use radwave::decay::{decay_run, default_scenario, local_spacetime_bounds};
use radwave::estimates::{log_factor_check, run_battery, BatteryConfig, EstimateId};
use radwave::lifespan::{sweep_and_fit, LifespanParams, DEFAULT_EPS};
use radwave::linear::{dalembert_oracle, solve_linear_with, ForcingField, SolveOptions};
use radwave::model::{make_grid, sample_data, DataProfile, Geometry, QuadraticForm, Shape};
use radwave::norms::{annulus_sup_check, safe_ratio, sample_annulus, NormConfig};
use radwave::par::ExecMode;
use radwave::picard::{local_solve_and_cutoff, picard_step_obstacle, run_picard, PicardConfig};
use radwave::report::{self, Command};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed.as_secs() < limit_s
}

fn oracle_error(geometry: Geometry, data: &DataProfile, dr: f64, t: f64, support: f64) -> f64 {
    let g = make_grid(geometry, dr, t, support).unwrap();
    let opts = SolveOptions { stride: 0, norms: None };
    let tr = solve_linear_with(&g, data, &ForcingField::Zero, t, &opts).unwrap();
    let last = tr.last().unwrap();
    let exact = dalembert_oracle(&g, data, last.t).unwrap();
    (0..g.n).map(|i| (last.v_at(i) - exact[i]).abs()).fold(0.0, f64::max)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let cases = [
        (Geometry::Minkowski, DataProfile::new(Shape::gaussian(3.5, 0.5), Shape::Zero, 1.0), 6.75),
        (Geometry::exterior_default(), DataProfile::new(Shape::poly_bump(1.0, 3.0, 6), Shape::poly_bump(1.5, 2.5, 6), 1.0), 3.0),
    ];
    let mut orders = Vec::new();
    for (geometry, data, support) in &cases {
        let errs: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&dr| oracle_error(*geometry, data, dr, 4.0, *support))
            .collect();
        orders.extend(errs.windows(2).map(|w| (w[0] / w[1]).log2()));
    }
    let pass = orders.iter().all(|p| (1.8..=2.2).contains(p)) && within(start.elapsed(), 60);
    outcome(pass, format!("orders {orders:.3?}, {:.1?}", start.elapsed()))
}

fn max_energy_drift(data: &DataProfile, geometry: Geometry) -> (f64, usize) {
    let g = make_grid(geometry, 0.05, 250.0, data.support_radius()).unwrap();
    let opts = SolveOptions { stride: 0, norms: Some(NormConfig::default()) };
    let tr = solve_linear_with(&g, data, &ForcingField::Zero, 250.0, &opts).unwrap();
    let log = tr.norms.unwrap();
    let e0 = log.rows[0].energy[0].powi(2);
    let worst = log.rows.iter().map(|r| (r.energy[0].powi(2) - e0).abs() / e0).fold(0.0, f64::max);
    (worst, g.steps_to(250.0))
}

fn energy_conservation() -> Outcome {
    // RK4 damps a mode by about (k dt)^6 / 72 per step, so the data must be resolved
    let resolved = DataProfile::new(Shape::gaussian(12.5, 1.5), Shape::poly_bump(2.0, 11.0, 4), 1.0);
    let narrow = DataProfile::new(Shape::gaussian(5.5, 0.5), Shape::poly_bump(2.0, 5.0, 4), 1.0);
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for geometry in [Geometry::Minkowski, Geometry::exterior_default()] {
        let (d, n) = max_energy_drift(&resolved, geometry);
        worst = worst.max(d);
        steps = n;
    }
    let (narrow_drift, _) = max_energy_drift(&narrow, Geometry::Minkowski);
    outcome(
        worst <= 1e-6 && steps >= 10_000,
        format!("max relative drift {worst:.3e} over {steps} steps (width-0.5 data: {narrow_drift:.3e})"),
    )
}

fn kss_battery() -> Outcome {
    let start = Instant::now();
    let cfg = BatteryConfig {
        ids: vec![EstimateId::Kss],
        ..Default::default()
    };
    let reports = run_battery(&cfg).unwrap();
    let worst = reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let slope = reports.iter().map(|r| r.tail_slope).fold(f64::NEG_INFINITY, f64::max);
    let pass = reports.len() >= 20
        && reports.iter().all(|r| r.max_ratio.is_finite() && r.valid && r.tail_slope <= 0.02)
        && cfg.horizon == 1e3
        && within(start.elapsed(), 600);
    outcome(
        pass,
        format!("{} scenarios, worst max_ratio {worst:.4}, worst tail slope {slope:.5}, {:.1?}", reports.len(), start.elapsed()),
    )
}

fn log_sharpness() -> Outcome {
    let c = log_factor_check(&report::log_check_scenario(), 1e2, 1e4).unwrap();
    let pass = c.accumulator.r_squared >= 0.99 && c.accumulator.slope > 0.0;
    outcome(
        pass,
        format!(
            "accumulator vs ln t: slope {:.4e}, r2 {:.6}; ratio slopes: raw {:.4}, normalised {:.4}",
            c.accumulator.slope, c.accumulator.r_squared, c.raw_slope, c.normalized_slope
        ),
    )
}

fn lifespan_law() -> Outcome {
    let start = Instant::now();
    let fit = sweep_and_fit(&DEFAULT_EPS, &LifespanParams::default(), ExecMode::Parallel).unwrap();
    let pass = fit.used >= 5
        && fit.span >= 100.0
        && fit.r_squared >= 0.98
        && fit.c_hat > 0.0
        && fit.c_stability <= 0.10
        && within(start.elapsed(), 1800);
    let times: Vec<String> = fit
        .records
        .iter()
        .map(|r| format!("{}:{:?}/{:?}", r.eps, r.t_star.map(|t| t.round()), r.t_star_fine.map(|t| t.round())))
        .collect();
    outcome(
        pass,
        format!(
            "c_hat {:.3}, r2 {:.4}, c stability {:.3}, {} used, span {:.0}x [{}], {:.1?}",
            fit.c_hat,
            fit.r_squared,
            fit.c_stability,
            fit.used,
            fit.span,
            times.join(" "),
            start.elapsed()
        ),
    )
}

fn picard_diagnostics() -> Outcome {
    let start = Instant::now();
    let data = DataProfile::new(Shape::Zero, Shape::poly_bump(1.0, 3.0, 4), 5e-4);
    let mut cfg = PicardConfig::new(Geometry::Minkowski, data, 100.0, 0.05);
    cfg.compare_direct = true;
    let r = run_picard(&cfg).unwrap();
    let ratios = r.ratios();
    let worst = ratios.iter().skip(1).copied().fold(0.0, f64::max);
    let gap = r.direct_gap.unwrap();
    let pass = r.gate_ok
        && r.converged
        && r.bounded.iter().all(|&b| b)
        && ratios.iter().skip(1).all(|&q| q <= 0.55)
        && gap <= 10.0 * cfg.tol_abs
        && within(start.elapsed(), 600);
    outcome(
        pass,
        format!(
            "gate {:.3}, {} iterations, worst ratio (k>=2) {worst:.3e}, direct gap {gap:.2e}, {:.1?}",
            r.gate_value,
            r.iterations,
            start.elapsed()
        ),
    )
}

fn obstacle_scheme() -> Outcome {
    let data = DataProfile::new(Shape::Zero, Shape::poly_bump(1.0, 3.0, 4), 5e-4);
    let mut residuals = Vec::new();
    let mut flags_ok = true;
    for dr in [0.05, 0.025] {
        let r = run_picard(&PicardConfig::new(Geometry::exterior_default(), data.clone(), 20.0, dr)).unwrap();
        flags_ok &= r.gate_ok && r.converged && r.bounded.iter().all(|&b| b) && r.ratios().iter().skip(1).all(|&q| q <= 0.55);
        residuals.push(r.residual.unwrap());
    }
    let order = (residuals[0] / residuals[1]).log2();

    // boundary and initial values of u0 + w along a short chain of iterates
    let grid = make_grid(Geometry::exterior_default(), 0.05, 4.0, data.support_radius()).unwrap();
    let form = QuadraticForm::ut_squared();
    let u0 = local_solve_and_cutoff(&data, &form, &grid, 1).unwrap();
    let (v0, p0) = sample_data(&data, &grid).unwrap();
    let mut prev = None;
    let mut exact = true;
    for _ in 0..3 {
        let it = picard_step_obstacle(&grid, prev.as_ref(), &u0, &form, 1).unwrap();
        for lv in it.trajectory.levels() {
            let (bv, _) = u0.level_base(lv.step).unwrap_or_default();
            exact &= lv.v_at(0) + bv.first().copied().unwrap_or(0.0) == 0.0;
        }
        let first = it.trajectory.level(0);
        let (bv, bp) = u0.level_base(0).unwrap();
        let at = |x: &Vec<f64>, i: usize| x.get(i).copied().unwrap_or(0.0);
        exact &= (0..grid.n).all(|i| first.v_at(i) + at(&bv, i) == v0[i] && first.p_at(i) + at(&bp, i) == p0[i]);
        prev = Some(it);
    }
    outcome(
        flags_ok && order >= 1.8 && exact,
        format!("flags {flags_ok}, residuals {residuals:?}, order {order:.3}, boundary/initial exact {exact}"),
    )
}

fn local_energy_decay() -> Outcome {
    let (g, data) = default_scenario();
    let coarse = decay_run(g, &data, &ForcingField::Zero, 12.0, 0.01, 4.0).unwrap();
    let fine = decay_run(g, &data, &ForcingField::Zero, 12.0, 0.005, 4.0).unwrap();
    let tails = [coarse.series.tail_relative(coarse.evacuation), fine.series.tail_relative(fine.evacuation)];
    let drop = coarse.series.at(10.0).unwrap() / fine.series.at(10.0).unwrap();
    let bounds = local_spacetime_bounds(&(1..=10).collect::<Vec<_>>(), 50.0, 0.05, ExecMode::Parallel).unwrap();
    let worst = bounds.iter().map(|b| b.ratio).fold(0.0, f64::max);
    let late = bounds.iter().map(|b| b.late_growth).fold(0.0, f64::max);
    let pass = tails.iter().all(|&t| t < 1e-6)
        && drop >= 4.0
        && bounds.len() >= 10
        && bounds.iter().all(|b| b.ratio.is_finite())
        && late <= 1e-3;
    outcome(
        pass,
        format!(
            "evacuation {}, tails {tails:?}, residual drop at t=10 {drop:.1}x, bound ratio max {worst:.3} over {} seeds, late growth {late:.1e}",
            coarse.evacuation,
            bounds.len()
        ),
    )
}

fn weighted_sobolev() -> Outcome {
    let suite: Vec<(&str, Box<dyn Fn(f64) -> f64>)> = vec![
        ("1", Box::new(|_| 1.0)),
        ("-2.5", Box::new(|_| -2.5)),
        ("1/r", Box::new(|r| 1.0 / r)),
        ("1/r^2", Box::new(|r| r.powi(-2))),
        ("r^-1/2", Box::new(|r| r.powf(-0.5))),
        ("exp(-r)", Box::new(|r| (-r).exp())),
        ("sin(r)/r", Box::new(|r| r.sin() / r)),
        ("cos(r)", Box::new(|r| r.cos())),
        ("ln(1+r)/r", Box::new(|r| (1.0 + r).ln() / r)),
        ("r/(1+r)", Box::new(|r| r / (1.0 + r))),
        ("(1+r)^-3", Box::new(|r| (1.0 + r).powi(-3))),
        ("exp(-(r-3)^2)", Box::new(|r| (-(r - 3.0) * (r - 3.0)).exp())),
    ];
    let mut worst: (f64, &str, f64) = (0.0, "", 0.0);
    for (name, h) in &suite {
        for j in 1..=8 {
            let radius = 2f64.powi(j);
            let (r, vals) = sample_annulus(h, radius, 8192);
            let (lhs, rhs) = annulus_sup_check(&r, &vals, radius).unwrap();
            let ratio = safe_ratio(lhs, rhs);
            if ratio > worst.0 {
                worst = (ratio, name, radius);
            }
        }
    }
    outcome(
        suite.len() >= 10 && worst.0 <= 1.0,
        format!("{} functions, R = 2..256, max lhs/rhs {:.4} ({} at R = {})", suite.len(), worst.0, worst.1, worst.2),
    )
}

fn determinism() -> Outcome {
    let configs: [(Command, &str); 5] = [
        (Command::Simulate, "T = 3\neps = 0.5\n"),
        (Command::VerifyEstimates, "ids = E2.1,E2.6,E4.3\nseeds = 3\nT = 20\nseries = true\n"),
        (Command::Picard, "geometry = exterior\nT = 4\n"),
        (Command::Lifespan, "eps_list = 2.1,2,1.9\ndr = 0.02\nrefine = false\n"),
        (Command::Decay, "T = 8\ndr = 0.02\nseeds = 3\nbound_T = 10\n"),
    ];
    let mut files = 0;
    let mut same = true;
    for (cmd, text) in configs {
        let mut cfg = cmd.config();
        cfg.apply_text(text).unwrap();
        let a = report::run(&cfg).unwrap();
        let mut again = cmd.config();
        again.apply_text(a.get("manifest.txt").unwrap()).unwrap();
        if cfg.is_set("mode") {
            again.set("mode", "sequential").unwrap();
        }
        let b = report::run(&again).unwrap();
        for (name, body) in a.files.iter().filter(|(n, _)| n.ends_with(".csv")) {
            files += 1;
            same &= b.get(name) == Some(body.as_str());
        }
    }
    outcome(same && files >= 5, format!("{files} CSV files compared across re-runs from the manifest"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("energy conservation", energy_conservation),
        ("KSS estimate battery", kss_battery),
        ("log sharpness", log_sharpness),
        ("lifespan law", lifespan_law),
        ("Picard diagnostics", picard_diagnostics),
        ("obstacle scheme", obstacle_scheme),
        ("local energy decay", local_energy_decay),
        ("weighted Sobolev", weighted_sobolev),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(&format!(" {f}")) || name.contains(f.as_str())) {
            continue;
        }
        let o = check();
        println!("{} {id} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
