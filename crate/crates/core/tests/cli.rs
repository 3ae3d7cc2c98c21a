use std::process::Command;

fn hzlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hzlab"))
}

#[test]
fn bks_run_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = hzlab()
        .args(["bks", "--seed", "7", "--set", "trials=200", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bundle: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(bundle["tag"], "bks");
    let csv = bundle["csv"][0].as_str().unwrap();
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 201);
    assert!(std::path::Path::new(bundle["json"].as_str().unwrap()).exists());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# kappa table\nn = 5\nseed = 1\n").unwrap();
    let out = hzlab()
        .arg("kappa")
        .arg("--config")
        .arg(&cfg)
        .args(["--seed", "9", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let bundle: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(bundle["config"].as_str().unwrap().contains("seed = 9"));
    assert_eq!(bundle["summary"]["mismatches"], 0);
    assert!(dir.path().join("kappa-9.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let missing_seed = hzlab().arg("bks").output().unwrap();
    assert_eq!(missing_seed.status.code(), Some(2));
    let unknown = hzlab().args(["bks", "--seed", "1", "--set", "dimms=3"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("dimms"));
    let dir = tempfile::tempdir().unwrap();
    let bad_theorem = hzlab()
        .args(["holder-scan", "--seed", "1", "--set", "theorem=nope", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad_theorem.status.code(), Some(2));
}

#[test]
fn keys_lists_registry() {
    let out = hzlab().arg("keys").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for k in ["seed", "dims", "theorem", "delta_points"] {
        assert!(text.lines().any(|l| l.starts_with(k)), "{k}");
    }
}
