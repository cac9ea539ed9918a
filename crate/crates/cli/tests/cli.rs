//! End-to-end command-line tests: mesh generation, inspection, config
//! validation exit codes, and byte-reproducible runs.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> PathBuf {
    let mut p = PathBuf::from(env!("CARGO_BIN_EXE_hydrosem"));
    if !p.exists() {
        p = PathBuf::from("target/debug/hydrosem");
    }
    p
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hydrosem-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().expect("spawn");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn gen_mesh(dir: &Path) -> PathBuf {
    let mesh = dir.join("cyl.msh");
    let (code, _, err) = run(&[
        "gen-mesh",
        "cylinder",
        "--radius",
        "1",
        "--draft",
        "1",
        "--depth",
        "3",
        "--tank-radius",
        "5",
        "--far-cells",
        "4",
        "--out",
        mesh.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    mesh
}

#[test]
fn gen_and_inspect() {
    let dir = tmp_dir("inspect");
    let mesh = gen_mesh(&dir);
    let (code, out, _) = run(&["inspect-mesh", mesh.to_str().unwrap(), "--order", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("tag body"), "{out}");
    assert!(out.contains("free-surface trace"));
    assert!(out.contains("N_DOF"));
}

#[test]
fn config_error_exit_code_is_two() {
    let dir = tmp_dir("badcfg");
    let cfg = dir.join("bad.toml");
    std::fs::write(
        &cfg,
        "version = 1\n[mesh]\npath = \"x.msh\"\norder = 99\n[radiation]\nmodes = [3]\nimpulse_s = 0.4\n",
    )
    .unwrap();
    let (code, _, err) = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("mesh.order"), "{err}");
}

#[test]
fn unknown_tag_in_config_is_schema_error() {
    let dir = tmp_dir("badtag");
    let cfg = dir.join("bad.toml");
    std::fs::write(
        &cfg,
        r#"
version = 1
[mesh]
path = "x.msh"
order = 2
[radiation]
impulse_s = 0.4
[[radiation.generalized]]
index = 7
surface = "symz"
normal = "1"
parity_x = "even"
parity_y = "even"
"#,
    )
    .unwrap();
    let (code, _, err) = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("symz"), "{err}");
}

#[test]
fn missing_mesh_is_numerical_failure() {
    let dir = tmp_dir("nomesh");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        "version = 1\n[mesh]\npath = \"absent.msh\"\norder = 2\n[radiation]\nmodes = [3]\nimpulse_s = 0.4\n",
    )
    .unwrap();
    let (code, _, _) = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 3);
}

#[test]
fn impulse_diagnose_reports_band() {
    let dir = tmp_dir("diag");
    let mesh = gen_mesh(&dir);
    let (code, out, _) = run(&[
        "impulse-diagnose",
        "--mesh",
        mesh.to_str().unwrap(),
        "--s",
        "0.5",
        "--depth",
        "3.0",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("omega_limit"), "{out}");
    assert!(out.contains("nodes per shortest"), "{out}");
}

#[test]
fn run_outputs_are_byte_identical() {
    let dir = tmp_dir("determinism");
    let mesh = gen_mesh(&dir);
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            r#"
version = 1
[mesh]
path = "{}"
order = 1
[environment]
depth = 3.0
[radiation]
modes = [3]
impulse_s = 0.9
[diffraction]
heading_deg = 150.0
impulse_s = 0.9
forces = [3]
[time]
cfl = 0.9
duration = 3.0
[damping]
zones = [{{ kind = "radial", start = 2.5, end = 5.0 }}]
[output]
omega_points = 10
"#,
            mesh.display()
        ),
    )
    .unwrap();
    let out1 = dir.join("o1");
    let out2 = dir.join("o2");
    for (out, threads) in [(&out1, "1"), (&out2, "2")] {
        let (code, _, err) = run(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(code, 0, "{err}");
    }
    for name in ["radiation.csv", "diffraction.csv", "manifest.json"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    // sanity: radiation csv carries the expected columns
    let text = std::fs::read_to_string(out1.join("radiation.csv")).unwrap();
    assert!(text.starts_with("omega,omega_bar,a_33,b_33"), "{text}");
    assert!(text.contains("a_inf_33"));
}

#[test]
fn mms_subcommand_reports_error_norm() {
    let dir = tmp_dir("mms");
    let mesh = dir.join("box.msh");
    let (code, _, err) = run(&[
        "gen-mesh",
        "box",
        "--lx",
        "2",
        "--ly",
        "2",
        "--depth",
        "2",
        "--nx",
        "2",
        "--ny",
        "2",
        "--nz",
        "3",
        "--out",
        mesh.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, out, err) = run(&["mms", "--mesh", mesh.to_str().unwrap(), "--order", "2"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("l1_error"), "{out}");
}

#[test]
fn shipped_configs_validate() {
    // the example configs must always pass schema validation
    for name in ["cylinder.toml", "box.toml", "owc.toml"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../configs")
            .join(name);
        let text = std::fs::read_to_string(&path).unwrap();
        let dir = tmp_dir(&format!("cfg-{name}"));
        let copy = dir.join(name);
        std::fs::write(&copy, text).unwrap();
        // validation happens before the mesh is read, so a failure here is
        // a schema problem, not a missing mesh
        let (code, _, err) = run(&["run", "--config", copy.to_str().unwrap()]);
        assert_ne!(code, 2, "{name} failed schema validation: {err}");
    }
}

#[test]
fn moonpool_generalized_modes_run_end_to_end() {
    let dir = tmp_dir("owc");
    let mesh = dir.join("owc.msh");
    let (code, _, err) = run(&[
        "gen-mesh",
        "moonpool",
        "--lx",
        "8",
        "--depth",
        "2",
        "--nx",
        "8",
        "--nz",
        "3",
        "--body-cells",
        "2",
        "--chamber-cells",
        "1",
        "--draft-cells",
        "1",
        "--out",
        mesh.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let cfg = dir.join("owc.toml");
    std::fs::write(
        &cfg,
        format!(
            r#"
version = 1
[mesh]
path = "{}"
order = 1
[environment]
depth = 2.0
[radiation]
impulse_s = 0.6
[[radiation.generalized]]
index = 7
surface = "special1"
normal = "1"
parity_x = "even"
parity_y = "even"
[diffraction]
heading_deg = 180.0
impulse_s = 0.6
forces = [7]
[time]
duration = 4.0
[output]
omega_points = 8
"#,
            mesh.display()
        ),
    )
    .unwrap();
    let out = dir.join("out");
    let (code, stdout, err) = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("radiation.csv"), "{stdout}");
    let rad = std::fs::read_to_string(out.join("radiation.csv")).unwrap();
    assert!(rad.contains("a_77"), "{rad}");
    assert!(rad.contains("a_inf_77"));
    let dif = std::fs::read_to_string(out.join("diffraction.csv")).unwrap();
    assert!(dif.contains("re_xs_7") && dif.contains("re_x0_7"), "{dif}");
    // coefficients are finite numbers
    for line in rad.lines().skip(1).take(3) {
        if line.starts_with('#') {
            continue;
        }
        for v in line.split(',') {
            let x: f64 = v.parse().unwrap();
            assert!(x.is_finite());
        }
    }
}
