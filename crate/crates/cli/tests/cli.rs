use std::path::{Path, PathBuf};
use std::process::Command;

fn cbwk() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cbwk"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn run_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = cbwk()
        .args(["run", "--config"])
        .arg(configs_dir().join("quick.json"))
        .arg("--out-dir")
        .arg(&out)
        .args(["--jobs", "1", "--seed-offset", "10"])
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert!(out.join("trace_cbwk_T16384_s11.csv").exists());
    assert!(out.join("trace_cbwk_T32768_s12.csv").exists());

    let written = out.join("again.csv");
    let summarize = cbwk()
        .arg("summarize")
        .arg(&out)
        .arg("--out")
        .arg(&written)
        .output()
        .unwrap();
    assert!(summarize.status.success());
    let stdout = String::from_utf8_lossy(&summarize.stdout);
    assert!(
        stdout.contains("cbwk") && stdout.contains("32768"),
        "{stdout}"
    );
    assert_eq!(
        std::fs::read(&written).unwrap(),
        std::fs::read(out.join("summary.csv")).unwrap()
    );
}

#[test]
fn bad_config_fails_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        "{\n  \"instance\": \"x.json\",\n  \"horizons\": [1, 2,\n}\n",
    )
    .unwrap();
    let out = cbwk()
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:4:"), "{err}");
}

#[test]
fn summarize_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbwk().arg("summarize").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no trace files"));
}

#[test]
fn reference_instance_matches_shipped_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let out = cbwk()
        .args(["reference-instance", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let shipped: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(configs_dir().join("reference_instance.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(written, shipped);
    // Refuses to overwrite.
    assert!(!cbwk()
        .args(["reference-instance", "--out"])
        .arg(&path)
        .output()
        .unwrap()
        .status
        .success());
}

#[test]
fn help_lists_subcommands() {
    let out = cbwk().arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["run", "summarize", "check"] {
        assert!(text.contains(sub), "{text}");
    }
}
