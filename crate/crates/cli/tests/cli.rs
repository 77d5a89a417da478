use std::f64::consts::FRAC_PI_3;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fovdock_core::{AxisRange, DockingConfig, StateGrid};
use serde_json::Value;

fn fovdock(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fovdock"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("FOVDOCK_OUT")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Case-2 preset on a coarse grid, written next to the outputs.
fn coarse_config(dir: &Path) -> String {
    let mut cfg = DockingConfig::preset("case2").unwrap();
    cfg.grid = StateGrid {
        rho: AxisRange::new(0.2, 2.0, 10),
        alpha: AxisRange::new(-FRAC_PI_3, FRAC_PI_3, 11),
        phi: AxisRange::new(-FRAC_PI_3, FRAC_PI_3, 11),
    };
    let path = dir.join("coarse.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_converges_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = fovdock(
        dir.path(),
        &["--config", "case1", "run", "--rho", "1.5", "--alpha", "0", "--phi", "0"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["outcome"], "converged");
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x,y,theta,rho,alpha,phi,alpha_star"));

    let manifest = json(&dir.path().join("run.manifest.json"));
    assert_eq!(manifest["config_hash"], DockingConfig::preset("case1").unwrap().hash());
    let names: Vec<_> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["path"].clone())
        .collect();
    assert_eq!(names, ["trajectory.csv", "summary.json"]);
}

#[test]
fn fov_violation_has_its_own_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = fovdock(dir.path(), &["run", "--rho", "1.0", "--alpha", "50deg", "--phi", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&dir.path().join("summary.json"))["outcome"], "fov_violation");
}

#[test]
fn sweep_fit_verify_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse_config(dir.path());
    for cmd in ["sweep", "fit", "verify"] {
        let out = fovdock(dir.path(), &["--config", &cfg, cmd]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let fit = json(&dir.path().join("fit.json"));
    assert_eq!(fit["infeasible_inside"], 0);
    assert!(fit["feasible_inside"].as_u64().unwrap() > 0);
    let report = json(&dir.path().join("lyapunov.json"));
    assert_eq!(report["violation_count"], 0);
    assert_eq!(report["samples_evaluated"], 100_000);

    // a fit made for case 2 does not apply to case 1
    let out = fovdock(dir.path(), &["--config", "case1", "verify"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let run = [
        "run",
        "--rho",
        "1.6",
        "--alpha",
        "5deg",
        "--phi",
        "-10deg",
        "--estimator",
        "truth",
    ];
    for (dir, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        let mut args = vec!["--seed", seed];
        args.extend(run);
        assert_eq!(fovdock(dir.path(), &args).status.code(), Some(0));
        let cfg = coarse_config(dir.path());
        assert_eq!(
            fovdock(dir.path(), &["--seed", seed, "--config", &cfg, "sweep"])
                .status
                .code(),
            Some(0)
        );
    }
    for name in [
        "trajectory.csv",
        "summary.json",
        "run.manifest.json",
        "feasible.csv",
        "sweep.manifest.json",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let traj = |d: &tempfile::TempDir| fs::read(d.path().join("trajectory.csv")).unwrap();
    assert_ne!(traj(&a), traj(&c));
}

#[test]
fn errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 3] = [
        (&["--config", "no-such-config", "sweep"], "io"),
        (&["run", "--rho", "-1", "--alpha", "0", "--phi", "0"], "domain"),
        (&["fit"], "io"),
    ];
    for (args, kind) in cases {
        let out = fovdock(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let record: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(record["error"]["kind"], kind, "{args:?}");
        assert!(record["error"]["message"].is_string());
    }

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[camera]\nl = 0.3\nalpha_bar = 0.7\ngamma = 0.3\nz_a = 1.0\n[landmark]\nr = 0.2\nbeta = 0.0\nlambda = 0.0\n[object]\nwidth = 0.5\ndepth = 0.5\n").unwrap();
    let out = fovdock(dir.path(), &["--config", bad.to_str().unwrap(), "sweep"]);
    let record: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "invalid_parameter");
    assert!(record["error"]["message"].as_str().unwrap().contains("landmark.r"));
}

#[test]
fn config_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        fovdock(dir.path(), &["--config", "case2", "config"]).status.code(),
        Some(0)
    );
    let dumped = dir.path().join("config.toml");
    let again = tempfile::tempdir().unwrap();
    assert_eq!(
        fovdock(again.path(), &["--config", dumped.to_str().unwrap(), "config"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        fs::read(&dumped).unwrap(),
        fs::read(again.path().join("config.toml")).unwrap()
    );
    assert_eq!(
        json(&dir.path().join("config.manifest.json"))["config_hash"],
        DockingConfig::preset("case2").unwrap().hash()
    );
}

#[test]
fn perceive_synthetic_and_file_clouds_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = fovdock(
        dir.path(),
        &["perceive", "--distance", "1.5", "--yaw", "10deg", "--noise", "0.005"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let synthetic = json(&dir.path().join("estimate.json"));
    assert!(synthetic["objective_error"].as_f64().unwrap() < 0.02);

    let other = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("cloud.xyz");
    let out = fovdock(other.path(), &["perceive", "--cloud", cloud.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let from_file = json(&other.path().join("estimate.json"));
    for key in ["objective_xy", "landmark_xy"] {
        for i in 0..2 {
            let (a, b) = (
                synthetic["estimate"][key][i].as_f64().unwrap(),
                from_file["estimate"][key][i].as_f64().unwrap(),
            );
            assert!((a - b).abs() < 1e-6, "{key}: {a} vs {b}");
        }
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fovdock"))
        .args(["run", "--rho", "1.2", "--alpha", "0", "--phi", "0"])
        .env("FOVDOCK_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("summary.json").is_file());
}
