use std::fs;
use std::process::Command;

fn dynloc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynloc"))
}

#[test]
fn preset_list_names_every_figure() {
    let out = dynloc().args(["preset", "--list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig1", "fig1-desk", "fig2", "fig2-desk", "fig2-inset", "fig3", "fig3-desk", "fig4", "fig4-desk"] {
        assert!(text.lines().any(|l| l == name), "missing {name}");
    }
}

#[test]
fn floquet_table_writes_inset_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynloc()
        .args(["floquet-table", "--a", "0", "--q", "0.4", "--nmax", "12", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ws = summary["metrics"]["omega_s"].as_f64().unwrap();
    assert!((ws - 0.2926).abs() < 1e-3);

    let inset = fs::read_to_string(dir.path().join("inset.csv")).unwrap();
    let mut lines = inset.lines();
    assert!(lines.next().unwrap().starts_with("# dynloc "));
    assert_eq!(lines.next().unwrap(), "n,abs_two_phonon,abs_four_phonon");
    assert_eq!(lines.count(), 13);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(files.contains(&"matrix_elements.csv"));
}

#[test]
fn negative_a_is_accepted_as_a_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynloc()
        .args(["floquet-table", "--a", "-0.05", "--q", "0.4", "--nmax", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unstable_trap_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynloc()
        .args(["floquet-table", "--a", "0", "--q", "1.2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("dynloc: "), "{err}");
}

#[test]
fn malformed_config_points_at_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"trap\": { \"a\": 0.0,\n }").unwrap();
    let out = dynloc().arg("run").arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn sweep_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{
  "trap": { "a": 0.0, "q": 0.4, "omega0": 2.24, "delta": 0.0, "kbar": 0.29 },
  "numerics": { "n_grid": 512, "x_max": 30.0, "t_end": "2pi", "window": ["pi", "2pi"], "trajectories": 32 },
  "experiment": { "type": "quantum" }
}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = dynloc()
        .args(["sweep", "--delta", "0:0.2:0.1"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("2e-1,"));
}
