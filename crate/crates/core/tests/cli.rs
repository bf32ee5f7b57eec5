//! The `venation` binary: exit statuses and files on disk.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn venation(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_venation"))
        .args(args)
        .env("VENATION_OUTPUT_ROOT", root)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small(root: &Path, name: &str, body: &str) -> PathBuf {
    let path = root.join(format!("{name}.toml"));
    fs::write(&path, format!("name = \"{name}\"\n{body}")).unwrap();
    path
}

const SMALL_GRID: &str = "[grid]\nshape = \"diamond\"\nrows = 3\n";

#[test]
fn run_then_check() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("baseline.toml");
    let out = venation(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dir = tmp.path().join("baseline");
    for f in ["config.json", "graph.json", "state.csv", "result.json", "report.json", "network.svg"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    assert!(fs::read_to_string(dir.join("network.svg")).unwrap().starts_with("<svg"));

    let out = venation(tmp.path(), &["check", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.join("check.json").is_file());

    let out = venation(
        tmp.path(),
        &["render", dir.join("state.csv").to_str().unwrap(), dir.join("graph.json").to_str().unwrap()],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = String::from_utf8(out.stdout).unwrap();
    assert_eq!(svg, fs::read_to_string(dir.join("network.svg")).unwrap());
}

#[test]
fn tampered_result_is_a_violation() {
    let tmp = TempDir::new().unwrap();
    let cfg = small(tmp.path(), "tamper", SMALL_GRID);
    assert_eq!(code(&venation(tmp.path(), &["run", cfg.to_str().unwrap()])), 0);
    let dir = tmp.path().join("tamper");
    let mut result: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("result.json")).unwrap()).unwrap();
    let last = result["snapshots"].as_array_mut().unwrap().last_mut().unwrap();
    last["x"][0] = serde_json::json!(-0.5);
    fs::write(dir.join("result.json"), result.to_string()).unwrap();
    let out = venation(tmp.path(), &["check", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("invariant violation"));
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let broken = small(tmp.path(), "broken", "[grid\nrows = 3\n");
    let out = venation(tmp.path(), &["run", broken.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));

    let unknown = small(tmp.path(), "unknown", &format!("{SMALL_GRID}colour = 3\n"));
    assert_eq!(code(&venation(tmp.path(), &["run", unknown.to_str().unwrap()])), 2);

    let unbalanced = small(
        tmp.path(),
        "unbalanced",
        &format!("model = \"hu_cai\"\n{SMALL_GRID}[[sources]]\nstrength = 1.0\nregion = {{ kind = \"vertices\", ids = [0] }}\n"),
    );
    let out = venation(tmp.path(), &["run", unbalanced.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let missing = tmp.path().join("nope.toml");
    assert_eq!(code(&venation(tmp.path(), &["run", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&venation(tmp.path(), &["frobnicate"])), 2);
}

#[test]
fn singular_rhs_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = small(
        tmp.path(),
        "singular",
        &format!("{SMALL_GRID}[params]\nkappa = 0.25\ngamma = 0.5\n[initial]\nx = {{ kind = \"constant\", value = 0.0 }}\n"),
    );
    let out = venation(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn sweep_writes_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = small(tmp.path(), "sw", SMALL_GRID);
    let out = venation(tmp.path(), &["sweep", cfg.to_str().unwrap(), "--axis", "params.delta=0.5,2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(tmp.path().join("sw_sweep/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "{summary}");
    assert!(tmp.path().join("sw_sweep/params.delta=0.5/state.csv").is_file());
    assert!(tmp.path().join("sw_sweep/params.delta=2/state.csv").is_file());

    let out = venation(tmp.path(), &["sweep", cfg.to_str().unwrap(), "--axis", "params.delta"]);
    assert_eq!(code(&out), 2);
}
