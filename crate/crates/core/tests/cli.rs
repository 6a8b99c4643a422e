use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bessplan::scenario::{load_dir, save_scenarios};
use bessplan::{Scenario, ScenarioSet};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bessplan"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn week() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic-week")
}

fn expected_total(dir: &Path) -> f64 {
    let text = fs::read_to_string(dir.join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["expected_total"].as_f64().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_zero_days_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synth", "--days", "0", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_is_deterministic_and_loadable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["synth", "--seed", "1", "--days", "7", "--out", s(d.path())]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["frequency.csv", "prices.csv", "probabilities.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(week().join(name)).unwrap());
    }
    assert_eq!(load_dir(a.path()).unwrap().len(), 7);
}

#[test]
fn bad_format_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["export", "--format", "xlsx", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn export_is_byte_identical_across_runs() {
    for (format, name) in [("mps", "model.mps"), ("lp", "model.lp")] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [&a, &b] {
            let out = run(&["export", "--format", format, "--days", "1", "--out", s(d.path())]);
            assert_eq!(code(&out), 0);
            assert!(String::from_utf8_lossy(&out.stdout).contains("binary"));
        }
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn full_resolution_week_exports_with_census() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", "--data", s(&week()), "--step", "1", "--export-only", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    // 7 scenarios x 24 hours x 4 markets: 96 bid, 672 acceptance, 168 fulfilment binaries
    assert!(stdout.contains("(936 binary)"), "{stdout}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("model_summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
    assert!(dir.path().join("model.mps").metadata().unwrap().len() > 0);
}

#[test]
fn degradation_cost_never_raises_the_total() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["plan", "--cdeg", "0", "--out", s(a.path())])), 0);
    assert_eq!(code(&run(&["plan", "--cdeg", "50", "--out", s(b.path())])), 0);
    let (free, priced) = (expected_total(a.path()), expected_total(b.path()));
    assert!(free >= priced - 1e-9, "{free} < {priced}");
    for f in ["participation.csv", "earnings.csv", "dispatch.csv", "solution.json", "model_summary.json"] {
        assert!(a.path().join(f).exists(), "{f}");
    }
}

#[test]
fn fcr_d_at_nominal_frequency_is_always_accepted() {
    let data = tempfile::tempdir().unwrap();
    let sc = Scenario::constant("flat", 24, 60, 50.0, [15.0, 8.0, 60.0, 60.0], 70.0, 30.0).unwrap();
    save_scenarios(&ScenarioSet::new(vec![sc]).unwrap(), data.path()).unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", "--data", s(data.path()), "--markets", "D", "--out", s(out_dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.path().join("participation.csv")).unwrap();
    assert!(text.contains("FCRD,flat,100.0,100.0"), "{text}");
    let mut rdr = csv::Reader::from_path(out_dir.path().join("earnings.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        assert_eq!(&row[4], "true");
        assert_eq!(row[12].parse::<f64>().unwrap(), 0.0, "energy");
        assert_eq!(row[13].parse::<f64>().unwrap(), 0.0, "degradation");
    }
    assert!((expected_total(out_dir.path()) - 24.0 * 0.9 * 8.0).abs() < 1e-6);
}

#[test]
fn all_markets_on_the_bundled_week() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", "--data", s(&week()), "--markets", "N,D,SDCH,SCH", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("status: Optimal"), "{stdout}");
    assert!(expected_total(dir.path()) >= 0.0);
    let rows = fs::read_to_string(dir.path().join("participation.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 7 * 4);
}

#[test]
fn no_market_needs_explicit_idle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", "--markets", "none", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);

    let cfg = dir.path().join("idle.json");
    fs::write(&cfg, r#"{"allow_idle_only": true, "days": 1}"#).unwrap();
    let out = run(&["plan", "--config", s(&cfg), "--markets", "none", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(expected_total(dir.path()), 0.0);
}

#[test]
fn data_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", "--data", s(&dir.path().join("missing")), "--out", s(dir.path())]);
    assert_eq!(code(&out), 3);

    fs::write(dir.path().join("frequency.csv"), "nonsense\n").unwrap();
    fs::write(dir.path().join("prices.csv"), "nonsense\n").unwrap();
    let out = run(&["plan", "--data", s(dir.path()), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 3);

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"bess": {"e_min": 2.0, "e_max": 1.0}}"#).unwrap();
    let out = run(&["plan", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&out), 3);
}

#[test]
fn search_limits_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", "--days", "60", "--out", s(dir.path())]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--export-only"));

    // the week at c_deg = 50 does not close at the root
    let out = run(&["plan", "--data", s(&week()), "--node-limit", "1", "--cdeg", "50", "--out", s(dir.path())]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("earnings.csv").exists());
}

#[test]
fn engines_agree() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("small.json");
    fs::write(&cfg, r#"{"days": 1, "synth": {"horizon_hours": 3}}"#).unwrap();
    for (d, engine) in [(&a, "decomposition"), (&b, "lp")] {
        let out = run(&["plan", "--config", s(&cfg), "--engine", engine, "--out", s(d.path())]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert!((expected_total(a.path()) - expected_total(b.path())).abs() < 1e-6);
}
