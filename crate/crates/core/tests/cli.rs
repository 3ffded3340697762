use std::fs;
use std::process::Command;

use nlslab::experiments::{ExperimentConfig, ExperimentKind};

fn nlslab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlslab"))
}

fn small_simulation() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Simulate);
    c.grid.modes = 16;
    c.params.n = vec![2.0];
    c.solver.t0 = 0.01;
    c.solver.observe_every = 5;
    c
}

#[test]
fn simulate_writes_outputs_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(&cfg, serde_json::to_string(&small_simulation()).unwrap()).unwrap();
    let out = dir.path().join("run");

    let status = nlslab()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "initial.nls2",
        "final.nls2",
        "trajectory.csv",
        "simulation.json",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }

    let again = nlslab()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!again.status.success());

    let forced = nlslab()
        .args(["simulate", "--force", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(forced.success());
}

#[test]
fn invalid_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_simulation();
    c.params.s = 1.5;
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, serde_json::to_string(&c).unwrap()).unwrap();
    let out = nlslab()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    fs::write(&cfg, "{ not json").unwrap();
    let out = nlslab()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lambda_eval_reports_a_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(&cfg, serde_json::to_string(&small_simulation()).unwrap()).unwrap();
    let run = dir.path().join("run");
    assert!(nlslab()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&run)
        .status()
        .unwrap()
        .success());

    let out = nlslab()
        .args([
            "lambda-eval",
            "--symbol",
            "sigma4_tilde",
            "--N",
            "2",
            "--spectrum",
        ])
        .arg(run.join("initial.nls2"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.trim().is_empty());
}
