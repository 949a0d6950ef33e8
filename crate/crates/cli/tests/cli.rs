use std::path::Path;
use std::process::Command;

use moneyflow_cli::config::ScenarioConfig;
use moneyflow_cli::scenario::{self, analyse, run_scenario, TRAJECTORY_CSV};
use moneyflow_cli::sweep::sweep;
use moneyflow_cli::table::{self, Table};
use moneyflow_cli::CliError;
use moneyflow_core::{integrate, State};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moneyflow"))
}

fn preset_in(name: &str, dir: &Path) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::from_preset(name).unwrap();
    cfg.output.dir = dir.to_path_buf();
    cfg
}

#[test]
fn identical_config_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_scenario(&preset_in("fig-erratum", &a)).unwrap();
    run_scenario(&preset_in("fig-erratum", &b)).unwrap();
    for name in ["trajectory.csv", "indicators.csv", "report.json", "trajectory.svg"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn svg_regenerates_exactly_from_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let outcome = run_scenario(&preset_in("fig-volume-return", tmp.path())).unwrap();
    let dir = outcome.dir;
    let traj = Table::read(&dir.join(TRAJECTORY_CSV)).unwrap();
    let ind = Table::read(&dir.join(scenario::INDICATORS_CSV)).unwrap();
    let cases = [
        (scenario::TRAJECTORY_SVG, table::trajectory_svg(&traj, "fig-volume-return").unwrap()),
        (scenario::VOLUME_RETURN_SVG, table::volume_return_svg(&ind, "fig-volume-return").unwrap()),
        (scenario::VOLUME_INDEX_SVG, table::volume_index_svg(&ind, "fig-volume-return").unwrap()),
    ];
    for (name, regenerated) in cases {
        let original = std::fs::read_to_string(dir.join(name)).unwrap();
        assert!(original == regenerated, "{name} not reproducible from CSV");
    }
}

#[test]
fn every_emitted_row_meets_the_closure_bound() {
    let tmp = tempfile::tempdir().unwrap();
    for name in moneyflow_cli::preset::names() {
        let outcome = run_scenario(&preset_in(name, &tmp.path().join(name))).unwrap();
        assert!(outcome.report.max_closure_ulps <= scenario::CLOSURE_ULP_BOUND, "{name}");
        let t = Table::read(&outcome.dir.join(TRAJECTORY_CSV)).unwrap();
        let residual = t.column("closure_residual").unwrap();
        assert!(residual.iter().all(|r| *r <= 1e-14), "{name}");
    }
}

#[test]
fn tampered_sample_is_refused_before_writing() {
    let cfg = ScenarioConfig::from_preset("fig-correct").unwrap();
    let mut traj = integrate(&cfg.params().unwrap(), &cfg.initial, &cfg.integrator().unwrap()).unwrap();
    let s = traj.samples().nth(100).unwrap().state;
    traj.corrupt_sample(100, State { rho: s.rho + 1e-3, ..s });
    let err = analyse(&cfg, traj).unwrap_err();
    assert!(matches!(err, CliError::Invariant(_)), "{err}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn report_records_overrides_and_analysis() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset_in("fig-correct", tmp.path());
    cfg.set_str("initial.c0=0.1").unwrap();
    let outcome = run_scenario(&cfg).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outcome.dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["preset"], "fig-correct");
    assert_eq!(json["overrides"]["initial.c0"], "0.1");
    assert_eq!(json["regime"]["kind"], "exponential_decay_of_s");
    assert_eq!(json["regime"]["tau_c"], 15.0);
    assert!(json["linear"]["omega"].as_f64().unwrap() > 2.44);
    assert!(json["envelope"]["drift"].as_f64().unwrap() < 0.0);
    assert_eq!(json["termination"]["kind"], "completed");
}

#[test]
fn c0_sweep_crosses_regimes() {
    let tmp = tempfile::tempdir().unwrap();
    let base = preset_in("fig-correct", tmp.path());
    let rows = sweep(&base, "c0", &[-0.1, 0.0, 0.1], tmp.path()).unwrap();
    let regimes: Vec<_> = rows.iter().map(|r| r.regime.clone().unwrap()).collect();
    assert_eq!(regimes, ["ExponentialGrowthOfS", "NeutralOscillation", "ExponentialDecayOfS"]);
    assert!(rows.iter().all(|r| r.dir.join("report.json").exists()));
    let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn empty_sweep_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let rows = sweep(&ScenarioConfig::default(), "alpha1", &[], tmp.path()).unwrap();
    assert!(rows.is_empty());
    let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(summary, "value,damping,omega,drift,regime,status\n");
}

#[test]
fn sweep_flags_failures_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let rows = sweep(&ScenarioConfig::default(), "alpha2", &[10.0, -1.0, 3.0], tmp.path()).unwrap();
    assert_eq!(rows[0].status, "ok");
    assert_eq!(rows[1].exit_code, 2);
    assert_eq!(rows[2].status, "boundary-reached");
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| bin().args(args).current_dir(tmp.path()).output().unwrap().status.code();
    assert_eq!(code(&["run", "--preset", "fig-correct", "--out", "ok", "--t-end", "5", "--no-svg"]), Some(0));
    assert!(tmp.path().join("ok/trajectory.csv").exists());
    assert!(!tmp.path().join("ok/trajectory.svg").exists());
    assert_eq!(code(&["run", "--preset", "fig-none"]), Some(2));
    assert_eq!(code(&["run", "--set", "model.gamma=1"]), Some(2));
    assert_eq!(code(&["run", "--set", "rho=1.5"]), Some(2));
    assert_eq!(code(&["run", "--set", "alpha2=3", "--set", "c0=0.1", "--out", "edge"]), Some(3));
    assert!(tmp.path().join("edge/trajectory.csv").exists());
    assert_eq!(code(&["lattice", "matrix", "2", "1", "0.01"]), Some(0));
    assert_eq!(code(&["indicators", "ok/trajectory.csv", "--out", "ind"]), Some(0));
    assert!(tmp.path().join("ind/indicators.csv").exists());
    assert_eq!(code(&["indicators", "missing.csv"]), Some(1));
}

#[test]
fn config_file_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("s.toml");
    std::fs::write(
        &path,
        "preset = \"fig-c0-negative\"\n[integrator]\nt_end = 20\n[output]\nsvg = false\n",
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config", path.to_str().unwrap(), "--out", "cfg"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("cfg/report.json")).unwrap()).unwrap();
    assert_eq!(report["t_end"], 20.0);
    assert_eq!(report["c0"], -0.1);
    assert_eq!(report["overrides"]["integrator.t_end"], "20");
}
