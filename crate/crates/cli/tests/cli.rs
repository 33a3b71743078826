use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use waveinv_cli::binfmt::{self, Role};

const SMALL: &str = r#"
m = 2
[domain]
n = 1
extent = 1.0
final_time = 3.5
[grid]
nx = 101
nt = 401
[potential]
preset = "bump"
amplitude = 2.0
center = [0.5, 0.0]
radius_x = 0.3
t_center = 1.75
radius_t = 0.4
[reconstruction]
points = [[0.5, 1.75]]
tau = 64.0
eps = 1e-2
smooth_width = 0.04
[identity]
tau = 36.0
"#;

fn scratch(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p
}

fn waveinv(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waveinv")).args(args).arg("--out").arg(out).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn forward_writes_field_and_manifest() {
    let d = scratch("forward");
    let cfg = small_config(&d);
    let out = d.join("out");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join("notes.txt"), "kept").unwrap();
    let r = waveinv(&["forward", "--config", cfg.to_str().unwrap()], &out);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let u = binfmt::read(&out.join("u.bin")).unwrap();
    assert_eq!(u.role, Role::SpaceTime);
    assert_eq!(u.axes, vec![(3.5, 401), (1.0, 101)]);
    let summary = json(&out.join("forward.json"));
    assert_eq!(summary["report"]["converged"], Value::Bool(true));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["subcommand"], "forward");
    let files = m["files"].as_array().unwrap();
    for name in ["u.bin", "picard.csv", "forward.json", "config.json"] {
        let e = files.iter().find(|f| f["path"] == name).unwrap_or_else(|| panic!("{name} missing"));
        assert_eq!(e["sha256"].as_str().unwrap().len(), 64);
    }
    let pre = files.iter().find(|f| f["path"] == "notes.txt").unwrap();
    assert_eq!(pre["origin"], "preexisting");
    let own = files.iter().find(|f| f["path"] == "manifest.json").unwrap();
    assert!(own["sha256"].is_null());
}

#[test]
fn dn_and_identity_outputs() {
    let d = scratch("dn");
    let cfg = small_config(&d);
    let out = d.join("out");
    let r = waveinv(&["dn", "--config", cfg.to_str().unwrap()], &out);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let g = binfmt::read(&out.join("neumann.bin")).unwrap();
    assert_eq!(g.role, Role::Boundary);
    assert_eq!(g.axes[1].1, 2);
    let csv = std::fs::read_to_string(out.join("dn.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 401);

    let r = waveinv(&["identity", "--config", cfg.to_str().unwrap(), "--set", "identity.eps=[2e-2, 1e-2, 5e-3]"], &out);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let id = json(&out.join("identity.json"));
    let rows = id["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let lhs = row["lhs"].as_f64().unwrap();
        assert!(row["closure"].as_f64().unwrap().abs() < 0.05 * lhs.abs(), "{row}");
    }
    assert!(std::fs::read_to_string(out.join("identity.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn reconstruct_points_at_fixed_tau() {
    let d = scratch("reconstruct");
    let cfg = small_config(&d);
    let out = d.join("out");
    let r = waveinv(&["reconstruct", "--config", cfg.to_str().unwrap()], &out);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rep = json(&out.join("reconstruct.json"));
    assert_eq!(rep["noise"]["kind"], "none");
    let est = rep["result"]["estimates"][0]["value"].as_f64().unwrap();
    let truth = rep["result"]["truth"][0].as_f64().unwrap();
    assert!(truth > 1.0 && est > 0.0 && est < truth * 1.2, "{est} vs {truth}");
}

#[test]
fn config_errors_exit_2_with_record() {
    let d = scratch("config_error");
    let cfg = small_config(&d);
    let out = d.join("out");
    let r = waveinv(&["forward", "--config", cfg.to_str().unwrap(), "--set", "grid.nt=101"], &out);
    assert_eq!(r.status.code(), Some(2));
    let e = json(&out.join("error.json"));
    assert_eq!(e["kind"], "ConfigError");
    assert_eq!(e["key"], "grid.nt");
    assert!(e["message"].as_str().unwrap().contains("CFL"));
    assert_eq!(json(&out.join("manifest.json"))["status"], "failed");

    let r = waveinv(&["forward", "--config", cfg.to_str().unwrap(), "--set", "grid.typo=1"], &out);
    assert_eq!(r.status.code(), Some(2));
    let r = waveinv(&["forward", "--config", d.join("missing.toml").to_str().unwrap()], &out);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_record() {
    let d = scratch("runtime_error");
    let cfg = small_config(&d);
    let out = d.join("out");
    // The radon subcommand needs a 2D domain.
    let r = waveinv(&["radon", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(r.status.code(), Some(1));
    let e = json(&out.join("error.json"));
    assert_eq!(e["kind"], "DimensionUnsupported");
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["status"], "failed");
    assert_eq!(m["tasks"][0]["status"], "failed");
}

#[test]
fn selftest_passes_and_formats_filter() {
    let d = scratch("selftest");
    let out = d.join("out");
    let r = waveinv(&["selftest", "--set", "output.formats=[\"csv\"]", "--workers", "1"], &out);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(out.join("selftest.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("pass")), "{csv}");
    assert!(!out.join("selftest.json").exists());
}

#[test]
fn seed_flag_changes_noise_only() {
    let d = scratch("seed");
    let cfg = small_config(&d);
    let noisy = ["dn", "--config", cfg.to_str().unwrap(), "--set", "noise.kind=\"seeded_random_bandlimited\"", "--set", "schedule.deltas=[1e-3, 1e-4, 1e-5, 1e-6]"];
    let mut runs = Vec::new();
    for seed in ["1", "1", "2"] {
        let out = d.join(format!("out{}", runs.len()));
        let mut args = noisy.to_vec();
        args.extend(["--seed", seed]);
        let r = waveinv(&args, &out);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        runs.push(std::fs::read(out.join("neumann.bin")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    assert_ne!(runs[0], runs[2]);
}
