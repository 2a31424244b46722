use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hjb_cli::config;

fn hjblab(config: &Path, out: &Path, extra: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hjblab"));
    cmd.arg("--config").arg(config).arg("--out").arg(out).args(extra).env_remove("HJB_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const RICCATI: &str = r#"schema_version = 1

[experiment]
kind = "riccati"
lambdas = [2.0]
mu0 = [-1.0, 1.0]
times = [0.25, 0.5, 1.0]
"#;

const VERIFY: &str = r#"schema_version = 1
seed = 4

[experiment]
kind = "verify"
spectrum = { kind = "power_law", alpha = 2.0 }
initial = { kind = "diagonal_quadratic", mu0 = { kind = "constant", value = 1.0 } }
field = { source = "closed_form" }
lattice = { dim = 4, count = 40 }
residual = { active_modes = [2] }
"#;

#[test]
fn malformed_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &RICCATI.replace("times", "tims"));
    let out = hjblab(&cfg, &dir.path().join("out"), &[], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tims"), "{err}");

    let cfg = write(dir.path(), "bad.json", r#"{"schema_version": 1, "experiment": {"kind": "converge", "spectrum": {"kind": "power_law", "alpha": "x"}}}"#);
    let err = String::from_utf8_lossy(&hjblab(&cfg, &dir.path().join("out"), &[], &[]).stderr).to_string();
    assert!(err.contains("experiment.spectrum"), "{err}");

    let cfg = write(dir.path(), "v2.toml", &RICCATI.replace("schema_version = 1", "schema_version = 2"));
    assert_eq!(hjblab(&cfg, &dir.path().join("out"), &[], &[]).status.code(), Some(2));
    // nothing is written for a config that fails to load
    assert!(!dir.path().join("out").exists());
}

#[test]
fn riccati_reports_blow_up_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.toml", RICCATI);
    let out_dir = dir.path().join("out");
    let out = hjblab(&cfg, &out_dir, &["--quiet"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let rows = json(out_dir.join("riccati.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for r in rows.iter().filter(|r| r["mu0"] == -1.0) {
        assert_eq!(r["blowup_time"], 0.5);
        let past = r["t"].as_f64().unwrap() >= 0.5;
        assert_eq!(r["status"], if past { "blow_up" } else { "ok" });
    }
    // mu(1) = 1 / (1 + 2) for the convex mode
    let convex = rows.iter().find(|r| r["mu0"] == 1.0 && r["t"] == 1.0).unwrap();
    assert!((convex["closed_form"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let manifest = json(out_dir.join("manifest.json"));
    assert_eq!(manifest["experiment"], "riccati");
    assert_eq!(manifest["pass"], true);
    assert_eq!(manifest["config"]["experiment"]["ode_steps"], 10_000);
}

#[test]
fn failed_assertion_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.toml", &format!("{RICCATI}tol = 1e-300\node_steps = 10\n"));
    let out = hjblab(&cfg, &dir.path().join("out"), &[], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(dir.path().join("out/manifest.json"))["pass"], false);
}

#[test]
fn runtime_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = VERIFY.replace(r#"field = { source = "closed_form" }"#, r#"field = { source = "file", path = "/nonexistent/field.hjbgrid" }"#);
    let cfg = write(dir.path(), "v.toml", &body);
    let out = hjblab(&cfg, &dir.path().join("out"), &[], &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}

#[test]
fn verify_on_closed_form_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.toml", VERIFY);
    let out_dir = dir.path().join("out");
    let out = hjblab(&cfg, &out_dir, &[], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let reports = json(out_dir.join("reports.json"));
    assert_eq!(reports["estimates"].as_array().unwrap().len(), 5);
    assert_eq!(reports["residuals"][0]["active_modes"], 2);
    let table = fs::read_to_string(out_dir.join("reports.txt")).unwrap();
    assert!(table.contains("sandwich") && table.contains("transformed_residual d=2"));
}

#[test]
fn same_config_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"schema_version = 1
seed = 9

[experiment]
kind = "storage-sim"
sites = 4
horizon = 0.5
dt = 0.005
paths = 64
objective = { mu0 = { kind = "constant", value = 1.0 } }
k0 = [1.0, 0.0, -1.0, 0.5]
save_paths = true
"#;
    let cfg = write(dir.path(), "s.toml", body);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(hjblab(&cfg, &a, &["-q"], &[]).status.success());
    assert!(hjblab(&cfg, &b, &["-q"], &[("HJB_THREADS", "3")]).status.success());
    let manifest = json(a.join("manifest.json"));
    let files: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert_eq!(files, ["summary.csv", "paths.csv", "storage.json", "manifest.json"]);
    for f in &files[..3] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(json(b.join("manifest.json"))["threads"], 3);

    // --seed overrides the config and changes the draws
    let c = dir.path().join("c");
    assert!(hjblab(&cfg, &c, &["-q", "--seed", "10"], &[]).status.success());
    assert_eq!(json(c.join("manifest.json"))["seed"], 10);
    assert_ne!(fs::read(a.join("paths.csv")).unwrap(), fs::read(c.join("paths.csv")).unwrap());
}

#[test]
fn solve_fd_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let solve = r#"schema_version = 1

[experiment]
kind = "solve-fd"
spectrum = { kind = "power_law", alpha = 2.0 }
dim = 1
initial = { kind = "separable", profiles = [{ kind = "quadratic", mu = 1.0 }] }
grid = { half_width = [8.0], nodes = [401], horizon = 1.0 }
check = { count = 50 }
"#;
    let cfg = write(dir.path(), "fd.toml", solve);
    let fd = dir.path().join("fd");
    let out = hjblab(&cfg, &fd, &["-q"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(fd.join("fd_report.json"));
    assert!(report["sup_error"].as_f64().unwrap() < 5e-3);
    let header = fs::read_to_string(fd.join("slices.csv")).unwrap();
    assert!(header.starts_with("t,x0,value\n"));

    let verify = format!(
        r#"schema_version = 1

[experiment]
kind = "verify"
spectrum = {{ kind = "power_law", alpha = 2.0 }}
initial = {{ kind = "separable", profiles = [{{ kind = "quadratic", mu = 1.0 }}] }}
field = {{ source = "file", path = "{}" }}
lattice = {{ dim = 1, count = 50 }}
"#,
        fd.join("field.hjbgrid").display()
    );
    let cfg = write(dir.path(), "v.toml", &verify);
    let out = hjblab(&cfg, &dir.path().join("v"), &["-q"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(dir.path().join("v/reports.json"))["field"], "grid");
}

#[test]
fn toml_and_json_configs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let toml_cfg = config::load(&write(dir.path(), "r.toml", RICCATI)).unwrap();
    let as_json = serde_json::to_string(&toml_cfg).unwrap();
    let json_cfg = config::load(&write(dir.path(), "r.json", &as_json)).unwrap();
    assert_eq!(serde_json::to_value(&toml_cfg).unwrap(), serde_json::to_value(&json_cfg).unwrap());
    assert!(config::load(&write(dir.path(), "r.yaml", RICCATI)).is_err());
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        config::load(&path).unwrap_or_else(|e| panic!("{e}"));
        n += 1;
    }
    assert!(n >= 7);
}
