use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn radwave(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_radwave"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = radwave(args, &[]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn summary_value(summary: &str, key: &str) -> f64 {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from summary"))
        .parse()
        .unwrap()
}

#[test]
fn simulate_with_zero_eps_reports_zero_norms() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    run_ok(&["simulate", "--eps", "0", "--out", out.to_str().unwrap()]);
    let summary = read(&out, "summary.txt");
    assert!(summary.contains("flags: none"));
    assert_eq!(summary_value(&summary, "energy_final"), 0.0);
    assert_eq!(summary_value(&summary, "m_norm"), 0.0);
    for name in ["manifest.txt", "norms.csv", "final.csv", "energy.svg"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert!(read(&out, "manifest.txt").starts_with("# radwave "));
}

#[test]
fn blow_up_is_data_not_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_ok(&["simulate", "--config", shipped("simulate.conf").to_str().unwrap(), "--out", &path(tmp.path(), "o")]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("blow-up"));
    let summary = read(&tmp.path().join("o"), "summary.txt");
    let t = summary_value(&summary, "blowup_time");
    assert!(t > 1.0 && t < 2.0, "{t}");
}

#[test]
fn invalid_configs_exit_with_two_and_name_the_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.conf");
    let cases: [(&str, &[&str]); 5] = [
        ("dr = 0\n", &["simulate"]),
        ("geometry = sphere\n", &["picard"]),
        ("bogus = 3\n", &["decay"]),
        ("command = picard\n", &["lifespan"]),
        ("ids = E9.9\n", &["verify-estimates"]),
    ];
    let names = ["`dr`", "`geometry`", "bogus", "picard", "E9.9"];
    for ((text, args), name) in cases.iter().zip(names) {
        fs::write(&bad, text).unwrap();
        let mut a = args.to_vec();
        let (b, o) = (bad.to_str().unwrap().to_string(), path(tmp.path(), "o"));
        a.extend(["--config", &b, "--out", &o]);
        let out = radwave(&a, &[]);
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{text}: {err}");
        assert!(err.contains(name), "{text}: {err}");
    }
    let out = radwave(&["simulate", "--eps=-1", "--out", &path(tmp.path(), "o")], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`eps`"));
    let out = radwave(&["verify-estimates", "--eps", "1", "--out", &path(tmp.path(), "o")], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn memory_cap_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = radwave(&["simulate", "--dr", "1e-5", "--out", &path(tmp.path(), "o")], &[("RADWAVE_MEM_CAP_MB", "1")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("RADWAVE_MEM_CAP_MB"));
}

#[test]
fn unwritable_output_is_an_internal_error() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("not_a_dir");
    fs::write(&file, "x").unwrap();
    let out = radwave(&["simulate", "--eps", "0", "--out", file.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn divergent_picard_exits_zero_with_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let o = path(tmp.path(), "o");
    let out = run_ok(&["picard", "--eps", "1", "--out", &o]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("smallness gate not met"), "{err}");
    let csv = read(Path::new(&o), "picard.csv");
    assert!(csv.starts_with("k,M_k,A_k,ratio,bounded,contracting\n"));
}

#[test]
fn lifespan_sweep_writes_rows_and_fit_block() {
    let tmp = tempfile::tempdir().unwrap();
    let o = path(tmp.path(), "o");
    let cfg = shipped("lifespan.conf");
    run_ok(&["lifespan", "--config", cfg.to_str().unwrap(), "--dr", "0.02", "--threads", "2", "--out", &o]);
    let dir = Path::new(&o);
    let csv = read(dir, "lifespan.csv");
    assert!(csv.lines().count() - 1 >= 5);
    let summary = read(dir, "summary.txt");
    assert!(summary_value(&summary, "c_hat") > 0.0);
    assert!(summary_value(&summary, "r_squared") > 0.9);
}

#[test]
fn battery_table_has_the_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("b.conf");
    fs::write(&cfg, "seeds = 2\nT = 30\n").unwrap();
    let o = path(tmp.path(), "o");
    run_ok(&["verify-estimates", "--config", cfg.to_str().unwrap(), "--out", &o]);
    let csv = read(Path::new(&o), "battery.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("estimate_id,seed,geometry,max_ratio,tail_slope,valid,scenario"));
    assert_eq!(lines.count(), 14);
    assert!(!csv.contains('\r'));
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("v.conf");
    fs::write(&cfg, "ids = E2.1, E4.3\nseeds = 3\nT = 20\nseries = true\n").unwrap();
    let (a, b, c) = (path(tmp.path(), "a"), path(tmp.path(), "b"), path(tmp.path(), "c"));
    run_ok(&["verify-estimates", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", &a]);
    run_ok(&["verify-estimates", "--config", cfg.to_str().unwrap(), "--seed", "7", "--threads", "1", "--out", &b]);
    let manifest = Path::new(&a).join("manifest.txt");
    run_ok(&["verify-estimates", "--config", manifest.to_str().unwrap(), "--out", &c]);
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    assert!(names.contains(&"series_E2.1_seed7.csv".to_string()));
    for n in &names {
        let x = fs::read(Path::new(&a).join(n)).unwrap();
        assert_eq!(x, fs::read(Path::new(&b).join(n)).unwrap(), "{n}");
        assert_eq!(x, fs::read(Path::new(&c).join(n)).unwrap(), "{n}");
    }
    assert!(read(Path::new(&a), "manifest.txt").contains("\nseed = 7\n"));
}

#[test]
fn shipped_configs_parse() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, name) in [
        ("decay", "decay.conf"),
        ("picard", "picard_exterior.conf"),
    ] {
        let o = path(tmp.path(), name);
        run_ok(&[cmd, "--config", shipped(name).to_str().unwrap(), "--out", &o]);
        assert!(read(Path::new(&o), "summary.txt").contains("flags: none"), "{name}");
    }
}
