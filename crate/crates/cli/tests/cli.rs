use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bendkit")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap()).unwrap()
}

fn pipeline(example: &str, grid: &str, dir: &Path, cmds: &[&str]) -> Vec<i32> {
    let out = dir.to_str().unwrap();
    cmds.iter().map(|c| code(&run(&[c, "--example", example, "--grid", grid, "--out", out]))).collect()
}

#[test]
fn clifford_pipeline_passes() {
    let tmp = TempDir::new().unwrap();
    let codes = pipeline("clifford", "33x33x5", tmp.path(), &["solve", "build", "bend", "verify"]);
    assert_eq!(codes, vec![0, 0, 0, 0]);
    let bend = report(tmp.path(), "bend");
    assert_eq!(bend["verdict"], "bendable (hyperbolic)");
    assert_eq!(bend["info"]["trivial"], false);
    assert_eq!(bend["residuals"]["ruling"]["status"], "skipped");
    assert!(tmp.path().join("bend.timing.json").is_file());
    let slices = std::fs::read_dir(tmp.path().join("mesh")).unwrap().count();
    assert_eq!(slices, 5);
    let verify = report(tmp.path(), "verify");
    assert_eq!(verify["residuals"]["iif@t=0.5"]["status"], "pass");
}

#[test]
fn reports_are_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        assert_eq!(pipeline("elliptic-demo", "17x17x5", dir.path(), &["build", "bend"]), vec![0, 0]);
    }
    for file in ["hypersurface.json", "build.json", "bend.json", "bending.json", "mesh/slice_2.obj"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between runs");
    }
}

#[test]
fn cone_is_not_bendable() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(pipeline("cone", "17x17x5", tmp.path(), &["bend"]), vec![4]);
    let bend = report(tmp.path(), "bend");
    assert!(bend["verdict"].as_str().unwrap().contains("surface-like"));
    assert!(!tmp.path().join("bending.json").exists());
}

#[test]
fn sphere_is_rigid() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(pipeline("sphere-patch", "17x17x9", tmp.path(), &["bend", "rigidity"]), vec![0, 0]);
    let bend = report(tmp.path(), "bend");
    assert_eq!(bend["verdict"], "rigid (rank 3)");
    assert_eq!(bend["info"]["bending-space-nullity"], 0);
    assert_eq!(report(tmp.path(), "rigidity")["verdict"], "rigid");
}

#[test]
fn ruled_bending_verifies() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(pipeline("ruled-demo", "17x17x9", tmp.path(), &["bend", "verify"]), vec![0, 0]);
    assert_eq!(report(tmp.path(), "bend")["verdict"], "bendable (ruled)");
    assert_eq!(report(tmp.path(), "verify")["residuals"]["codazzi-A@t=1"]["status"], "pass");
}

#[test]
fn tightened_gates_fail_honestly() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = run(&["bend", "--example", "clifford", "--grid", "17x17x5", "--gate-scale", "1e-12", "--out", out]);
    assert_eq!(code(&o), 4);
    let bend = report(tmp.path(), "bend");
    assert_eq!(bend["residuals"]["iif"]["status"], "fail");
}

#[test]
fn input_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(code(&run(&["solve", "--out", out])), 2);
    assert_eq!(code(&run(&["solve", "--example", "torus", "--out", out])), 2);
    assert_eq!(code(&run(&["solve", "--example", "clifford", "--grid", "17by17", "--out", out])), 2);
    assert_eq!(code(&run(&["solve", "--example", "clifford", "--gate-scale", "-1", "--out", out])), 2);
    let o = run(&["verify", "--example", "clifford", "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bending.json"));
}

#[test]
fn missing_seed_file_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
seeds = [{ file = "seeds/phi0.json" }, { expr = "one" }, { expr = "u" }, { expr = "v" }, { expr = "uv" }]
[grid]
u = [0.0, 0.5]
v = [0.0, 0.5]
nu = 17
nv = 17
"#,
    )
    .unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("seeds/phi0.json"), "{}", stderr(&o));
}

#[test]
fn complex_family_from_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
kind = "complex"
seeds = [{ expr = "sin-u" }, { expr = "one" }, { expr = "u" }, { expr = "v" }, { expr = "uv" }]
m = { constant = 0.25 }
[grid]
u = [-0.3, 0.3]
v = [-0.3, 0.3]
nu = 33
nv = 33
[fiber]
range = [-0.1, 0.1]
count = 5
"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["solve", "--config", c])), 0);
    let dir = tmp.path().join("out");
    let solve = report(&dir, "solve");
    assert_eq!(solve["residuals"]["pde"]["status"], "pass");
    assert_eq!(solve["info"]["kind"], "complex");
    // the second run reads out/family.json next to the config
    assert_eq!(code(&run(&["build", "--config", c])), 0);
    assert!(dir.join("hypersurface.json").is_file());
}

#[test]
fn export_mesh_checks_coordinates() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let base = ["export-mesh", "--example", "cylinder", "--grid", "9x9x5", "--out", out];
    assert_eq!(code(&run(&[&base[..], &["--coords", "0,1,3"]].concat())), 0);
    assert_eq!(std::fs::read_dir(tmp.path().join("mesh")).unwrap().count(), 5);
    assert_eq!(code(&run(&[&base[..], &["--coords", "0,1"]].concat())), 2);
    assert_eq!(code(&run(&[&base[..], &["--coords", "0,1,7"]].concat())), 2);
}
