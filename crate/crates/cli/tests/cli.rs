use std::fs;
use std::process::Command;

use beamsight::harness::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beamsight"))
}

fn tiny_config(dir: &std::path::Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::small();
    cfg.scenario_a.sequences = 2;
    cfg.scenario_a.frames = 4;
    cfg.scenario_b.sequences = 1;
    cfg.scenario_b.frames = 4;
    let p = dir.join("config.json");
    fs::write(&p, cfg.to_json()).unwrap();
    p
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"schema_version\": 1}").unwrap();
    let st = bin().args(["gen", "--config"]).arg(&bad).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let mut cfg = ExperimentConfig::default();
    cfg.schema_version = 7;
    fs::write(&bad, cfg.to_json()).unwrap();
    let st = bin().args(["gen", "--config"]).arg(&bad).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn unknown_ablation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let st = bin()
        .args(["ablate", "--which", "9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn gen_writes_manifest_and_honours_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("data");
    let st = bin()
        .args(["gen", "--seed", "77", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 77);
    assert_eq!(m["frames"].as_array().unwrap().len(), 12);
    assert!(out.join("a/seq_0000/frame_0000.ppm").exists());
}

#[test]
fn oracle_sweep_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["oracle-sweep", "--trials", "50", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("oracle_sweep.json")).unwrap()).unwrap();
    assert_eq!(s["trials"], 50);
}
