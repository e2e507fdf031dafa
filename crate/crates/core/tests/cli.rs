use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-codesign"))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn codesign_writes_trace_summary_and_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "scene.json", r#"{"m_ris": 16, "interference_count": 3}"#);
    let out = dir.path().join("out");
    let status = bin()
        .args(["codesign", "--config", &scene, "--seed", "4", "--out", out.to_str().unwrap(), "--mode", "ris"])
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "codesign_ris_rnm_seed4.csv",
        "codesign_ris_rnm_seed4.json",
        "codesign_ris_rnm_seed4_timing.csv",
        "beampattern_ris_rnm_seed4.csv",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("codesign_ris_rnm_seed4.json")).unwrap()).unwrap();
    assert!(summary.get("final_sinr_db").is_some());
    let pattern = std::fs::read_to_string(out.join("beampattern_ris_rnm_seed4.csv")).unwrap();
    assert_eq!(pattern.lines().count(), 1802);
}

#[test]
fn free_and_random_modes_run() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "scene.json", r#"{"m_ris": 8}"#);
    for mode in ["free", "rris"] {
        let status = bin()
            .args(["codesign", "--config", &scene, "--mode", mode, "--out", dir.path().to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success(), "{mode}");
    }
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"m_ris": 8, "unknown": true}"#);
    let status = bin().args(["codesign", "--config", &bad, "--out", out]).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let spec = write(dir.path(), "spec.json", r#"{"sweep": "m", "values": [], "trials": 1}"#);
    let status = bin().args(["sweep", "--config", &spec, "--out", out]).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let missing = dir.path().join("nope.json");
    let status = bin().args(["codesign", "--config", missing.to_str().unwrap(), "--out", out]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn oracle_reports_and_enforces_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let small = write(dir.path(), "small.json", r#"{"m_ris": 3, "interference_count": 2}"#);
    let status = bin().args(["oracle", "--config", &small, "--out", out, "--phases", "8"]).status().unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("oracle_m3_seed0.json")).unwrap()).unwrap();
    assert_eq!(report["within_slack"], serde_json::Value::Bool(true));
    let big = write(dir.path(), "big.json", r#"{"m_ris": 6}"#);
    let status = bin().args(["oracle", "--config", &big, "--out", out]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn sweep_writes_named_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{"scene": {"m_ris": 8, "interference_count": 2}, "sweep": "inr", "values": [10, 20], "trials": 2, "seed": 9, "modes": ["ris", "free"]}"#,
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["sweep", "--config", &spec, "--out", out.to_str().unwrap(), "--mode", "free"])
        .status()
        .unwrap();
    assert!(status.success());
    let table = std::fs::read_to_string(out.join("sweep_inr_seed9.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().skip(1).all(|l| l.contains(",free,")));
    assert!(out.join("sweep_inr_10_free_seed9.json").exists());
    assert!(out.join("sweep_inr_seed9_timing.csv").exists());
}
