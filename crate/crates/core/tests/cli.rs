use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roadaudit"))
}

fn scene_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/scene/scene.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn run_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.geojson");
    let o = run(&[
        "run",
        "--manifest",
        scene_manifest().to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["frames_processed"], 1);
    assert!(out.is_file());
}

#[test]
fn validate_reports_ok_and_problems() {
    let o = run(&["validate", "--manifest", scene_manifest().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"frames\": 3}").unwrap();
    let o = run(&["validate", "--manifest", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["run", "--manifest", bad.to_str().unwrap(), "--validate-only"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_manifest_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--manifest",
        dir.path().join("missing.json").to_str().unwrap(),
        "--output",
        dir.path().join("r.geojson").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("no-such-dir").join("r.geojson");
    let o = run(&[
        "run",
        "--manifest",
        scene_manifest().to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_commands() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.jsonl");
    fs::write(&truth, "{\"frame_id\":0,\"class_id\":1,\"x\":0,\"y\":0,\"w\":10,\"h\":10,\"score\":1}\n").unwrap();
    let o = run(&["eval-map", "--pred", truth.to_str().unwrap(), "--truth", truth.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["mean_ap"], 1.0);

    let mask = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/scene/frame_50_mask.pgm");
    let m = mask.to_str().unwrap();
    let o = run(&["eval-miou", "--pred", m, "--truth", m, "--classes", "1,2,3"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["miou"], 1.0);
}
