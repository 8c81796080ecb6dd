//! Longer worked cases: estimate checks on long runs, null-form contrast, decay floor, battery totals.

use radwave::decay::{decay_run, default_scenario};
use radwave::estimates::{run_battery, verify_estimate, BatteryConfig, EstimateId, Scenario};
use radwave::lifespan::{null_form_contrast, sweep, LifespanParams};
use radwave::linear::ForcingField;
use radwave::model::{DataProfile, Geometry, Shape};
use radwave::par::ExecMode;

#[test]
fn kss_ratio_for_gaussian_free_wave_stays_flat() {
    let mut sc = Scenario::zero(Geometry::Minkowski, 1e3, 0.1);
    sc.data = DataProfile::new(Shape::gaussian(6.0, 0.5), Shape::Zero, 1.0);
    let r = verify_estimate(EstimateId::Kss, &sc).unwrap();
    assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0);
    assert!(r.tail_slope <= 0.01, "tail slope {}", r.tail_slope);
}

#[test]
fn exterior_forced_ratio_settles_on_two_grids() {
    let forced = |dr: f64| {
        let mut sc = Scenario::zero(Geometry::exterior_default(), 200.0, dr);
        sc.forcing = ForcingField::separable(1.0, Shape::poly_bump(0.0, 1.0, 4), Shape::poly_bump(1.5, 2.5, 4));
        verify_estimate(EstimateId::Exterior, &sc).unwrap()
    };
    let (coarse, fine) = (forced(0.05), forced(0.025));
    for r in [&coarse, &fine] {
        assert!(r.valid && r.max_ratio <= 1.0, "ratio {}", r.max_ratio);
        assert!(r.tail_slope.abs() <= 0.01, "ratio still moving: slope {}", r.tail_slope);
    }
    let gap = (coarse.max_ratio - fine.max_ratio).abs() / fine.max_ratio;
    assert!(gap <= 0.02, "grids disagree by {gap}");
}

#[test]
fn null_form_outlives_the_non_null_blow_up_tenfold() {
    let params = LifespanParams {
        dr: 0.02,
        refine: false,
        ..Default::default()
    };
    let baseline = sweep(&[2.1, 1.9, 1.7], &params, ExecMode::Parallel).unwrap();
    assert!(baseline.iter().all(|r| r.t_star.is_some()));
    let null = null_form_contrast(&baseline, &params, 10.0, ExecMode::Parallel).unwrap();
    assert_eq!(null.len(), 3);
    for (n, b) in null.iter().zip(&baseline) {
        assert!(n.survived(), "null form blew up at eps = {}", n.eps);
        assert!(n.horizon >= 10.0 * b.t_star.unwrap() * (1.0 - 1e-9));
    }
}

#[test]
fn default_exterior_scenario_reaches_the_energy_floor() {
    let (g, data) = default_scenario();
    let run = decay_run(g, &data, &ForcingField::Zero, 20.0, 0.01, 4.0).unwrap();
    let fit = run.fit.unwrap();
    let t = fit.floor_time.expect("floor reached");
    assert!(t > run.evacuation && t < 20.0, "floor at {t}");
}

#[test]
fn battery_over_every_estimate_is_finite_and_valid() {
    let cfg = BatteryConfig {
        horizon: 100.0,
        ..Default::default()
    };
    let reports = run_battery(&cfg).unwrap();
    assert_eq!(reports.len(), 7 * 20);
    for r in &reports {
        assert!(r.valid && r.max_ratio.is_finite(), "{} seed {}: {}", r.id.label(), r.seed, r.scenario);
        assert!(r.max_ratio < 10.0, "{} seed {}: ratio {}", r.id.label(), r.seed, r.max_ratio);
    }
}

#[test]
fn sequential_and_parallel_batteries_agree_exactly() {
    let base = BatteryConfig {
        ids: vec![EstimateId::Dyadic, EstimateId::HigherOrder, EstimateId::Exterior],
        seeds: (1..=4).collect(),
        horizon: 20.0,
        ..Default::default()
    };
    let seq = run_battery(&BatteryConfig { mode: ExecMode::Sequential, ..base.clone() }).unwrap();
    let par = run_battery(&BatteryConfig { mode: ExecMode::Parallel, ..base }).unwrap();
    assert_eq!(seq, par);
}

