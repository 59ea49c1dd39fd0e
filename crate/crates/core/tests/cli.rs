use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn neurofield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurofield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const GAUSSIAN: &str = r#"
[grid]
dim = 1
half_width = 15.0
points_per_dim = 512

[kernel]
spec = "gaussian(1, 1)"

[noise]
phi = "delta"

[model]
gain = "sigmoid(1)"
diffusion = "constant(1)"

[solver]
dt = 0.01
t_end = 0.1
"#;

const LINEAR_OU: &str = r#"
[grid]
dim = 1
half_width = 5.0
points_per_dim = 64

[kernel]
spec = "zero"

[noise]
phi = "indicator(1)"
seed = 11

[model]
gain = "constant(0)"
diffusion = "constant(1)"

[solver]
dt = 0.01
t_end = 3.0
n_paths = 400
record_every = 30
"#;

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(neurofield(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(neurofield(&["--help"]).status.code(), Some(0));
    assert_eq!(
        neurofield(&["simulate", "--config", "/no/such/file.toml"])
            .status
            .code(),
        Some(1)
    );

    let bad = write_config(dir.path(), "bad.toml", &GAUSSIAN.replace("sigmoid(1)", "sigmoid(x)"));
    let out = neurofield(&["simulate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.gain"));
}

#[test]
fn check_kernel_table_for_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "g.toml",
        &GAUSSIAN.replace("15.0", "10.0").replace("512", "256"),
    );
    let out = neurofield(&["check-kernel", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let row = |c: &str| text.lines().find(|l| l.starts_with(c)).unwrap().to_string();
    assert!(row("C1 ").contains("DivergesUnderRefinement"), "{text}");
    let c2p = row("C2' ");
    assert!(c2p.contains("Holds"), "{text}");
    let cw: f64 = c2p.split_whitespace().last().unwrap().parse().unwrap();
    assert!((cw - std::f64::consts::PI.sqrt()).abs() < 1e-6);
}

#[test]
fn solve_rho_writes_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.toml", GAUSSIAN);
    let out_dir = dir.path().join("rho");
    let out = neurofield(&["solve-rho", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("solve_rho.json")).unwrap()).unwrap();
    let methods = report["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 2);
    let fourier = &methods[1];
    assert_eq!(fourier["method"], "FourierConstruction");
    let lambda = fourier["lambda"].as_f64().unwrap();
    assert!((lambda - (std::f64::consts::PI.sqrt() + 1.0)).abs() <= 1e-6);
    for m in methods {
        assert!(m["defect"].as_f64().unwrap() <= 1e-6);
    }
    assert!(out_dir.join("rho_power.bin").exists() && out_dir.join("rho_fourier.bin").exists());
}

#[test]
fn simulate_then_verify_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ou.toml", LINEAR_OU);
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    let out = neurofield(&["simulate", "--config", &cfg, "--out", run_s]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "manifest.json",
        "summary.csv",
        "ensemble_t0.bin",
        "ensemble_t5.bin",
        "paths/path3_t5.bin",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }

    let out = neurofield(&[
        "verify",
        "--input",
        run_s,
        "--covariance",
        "--moments",
        "2,4",
        "--holder",
        "space",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["covariance"]["max_z"].as_f64().unwrap() < 4.0);
    assert!(run.join("covariance.csv").exists());

    // a tampered manifest no longer matches its fingerprint
    let m = run.join("manifest.json");
    let text = fs::read_to_string(&m).unwrap().replace("seed = 11", "seed = 12");
    fs::write(&m, text).unwrap();
    assert_eq!(
        neurofield(&["verify", "--input", run_s, "--covariance"]).status.code(),
        Some(1)
    );
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ou.toml",
        &LINEAR_OU.replace("n_paths = 400", "n_paths = 2"),
    );
    let target = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_neurofield"))
        .args(["simulate", "--config", &cfg])
        .env("NEUROFIELD_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("manifest.json").exists());
}

#[test]
fn picard_reports_factorial_rate() {
    let dir = tempfile::tempdir().unwrap();
    let body = GAUSSIAN
        .replace("15.0", "5.0")
        .replace("512", "64")
        .replace("\"delta\"", "\"gaussian(1)\"")
        .replace("constant(1)", "affine(0.5, 0.2)")
        .replace("t_end = 0.1", "t_end = 0.5\nn_paths = 10");
    let cfg = write_config(dir.path(), "p.toml", &body);
    let out_dir = dir.path().join("picard");
    let out = neurofield(&[
        "picard",
        "--config",
        &cfg,
        "--iterations",
        "6",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(out_dir.join("picard.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
}
