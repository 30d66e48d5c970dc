use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use roadaudit::pipeline::{run, unlocated_path, validate, RunOptions, SceneManifest};
use roadaudit::report::validate_geojson;
use roadaudit::synth::{write_scene, SCENE_FRAME_ID, SCENE_LAT_LON};
use roadaudit::Error;
use serde_json::Value;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/scene")
}

fn scene_copy() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_scene(dir.path()).unwrap();
    (dir, manifest)
}

fn run_to(manifest: &Path, out: &Path, jobs: usize) -> roadaudit::pipeline::RunSummary {
    run(
        manifest,
        &RunOptions {
            output: out.to_path_buf(),
            debug_dir: None,
            jobs,
        },
    )
    .unwrap()
}

fn features(path: &Path) -> Vec<Value> {
    let doc: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert!(validate_geojson(&doc).is_empty());
    doc["features"].as_array().unwrap().clone()
}

fn rewrite(manifest: &Path, edit: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    edit(&mut v);
    fs::write(manifest, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

#[test]
fn checked_in_fixture_matches_generator() {
    let (dir, _) = scene_copy();
    for name in ["scene.json", "frame_50.pgm", "frame_50_mask.pgm", "detections.jsonl", "track.csv", "references/7/0.pgm"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(fixture_dir().join(name)).unwrap(),
            "{name} is stale; regenerate with the make_scene example"
        );
    }
}

#[test]
fn bundled_scene_gives_three_findings() {
    let out = tempfile::tempdir().unwrap();
    let path = out.path().join("report.geojson");
    let summary = run_to(&fixture_dir().join("scene.json"), &path, 1);
    let feats = features(&path);
    let kinds: Vec<&str> = feats.iter().map(|f| f["properties"]["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["marking_damage", "sign_skewed", "barrier_unsafe"]);
    for f in &feats {
        let c = f["geometry"]["coordinates"].as_array().unwrap();
        assert!((c[0].as_f64().unwrap() - SCENE_LAT_LON.1).abs() < 1e-6);
        assert!((c[1].as_f64().unwrap() - SCENE_LAT_LON.0).abs() < 1e-6);
        assert_eq!(f["properties"]["frame_id"], SCENE_FRAME_ID);
    }
    let theta = feats[1]["properties"]["theta_deg"].as_f64().unwrap();
    assert!((theta - 20.0).abs() <= 1.0);
    assert!(feats[2]["properties"]["solidity"].as_f64().unwrap() < 0.8);
    assert_eq!(summary.frames_processed, 1);
    assert_eq!(summary.total(), 3);
    assert!(summary.diagnostics.is_empty(), "{:?}", summary.diagnostics);
}

#[test]
fn summary_counts_match_report() {
    let out = tempfile::tempdir().unwrap();
    let path = out.path().join("r.geojson");
    let summary = run_to(&fixture_dir().join("scene.json"), &path, 2);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for f in features(&path) {
        *counts.entry(f["properties"]["kind"].as_str().unwrap().to_owned()).or_default() += 1;
    }
    assert_eq!(counts, summary.counts);
}

#[test]
fn runs_are_byte_identical_across_job_counts() {
    let out = tempfile::tempdir().unwrap();
    let manifest = fixture_dir().join("scene.json");
    let a = out.path().join("a.geojson");
    let b = out.path().join("b.geojson");
    let c = out.path().join("c.geojson");
    run_to(&manifest, &a, 1);
    run_to(&manifest, &b, 8);
    run_to(&manifest, &c, 1);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn zero_frames_gives_empty_collection() {
    let (dir, manifest) = scene_copy();
    rewrite(&manifest, |v| v["frames"] = Value::Array(vec![]));
    let path = dir.path().join("out.geojson");
    let summary = run_to(&manifest, &path, 1);
    assert!(features(&path).is_empty());
    assert_eq!(summary.total(), 0);
    assert_eq!(summary.frames_processed, 0);
}

#[test]
fn corrupt_frame_only_adds_a_diagnostic() {
    let (dir, manifest) = scene_copy();
    fs::copy(dir.path().join("frame_50.pgm"), dir.path().join("frame_60.pgm")).unwrap();
    fs::write(dir.path().join("frame_60_mask.pgm"), b"P5\n10 10\n255\n\x00\x01").unwrap();
    rewrite(&manifest, |v| {
        let frames = v["frames"].as_array_mut().unwrap();
        let mut second = frames[0].clone();
        second["frame_id"] = 60.into();
        second["image_path"] = "frame_60.pgm".into();
        second["mask_path"] = "frame_60_mask.pgm".into();
        frames.push(second);
    });
    let path = dir.path().join("out.geojson");
    let summary = run_to(&manifest, &path, 2);
    assert_eq!(features(&path).len(), 3);
    assert_eq!(summary.frames_processed, 1);
    assert_eq!(summary.frames_failed, 1);
    assert_eq!(summary.diagnostics.len(), 1);
    assert!(summary.diagnostics[0].starts_with("frame 60"));
}

#[test]
fn road_damage_boxes_pass_through() {
    let (dir, manifest) = scene_copy();
    let mut jsonl = fs::read_to_string(dir.path().join("detections.jsonl")).unwrap();
    jsonl.push_str("{\"frame_id\":50,\"class_id\":24,\"x\":10,\"y\":10,\"w\":20,\"h\":5,\"score\":0.8}\n");
    fs::write(dir.path().join("detections.jsonl"), jsonl).unwrap();
    let path = dir.path().join("out.geojson");
    let summary = run_to(&manifest, &path, 1);
    let feats = features(&path);
    assert_eq!(feats.len(), 4);
    let pothole = &feats[0]["properties"];
    assert_eq!(pothole["kind"], "road_damage");
    assert_eq!(pothole["damage_type"], "pothole");
    assert_eq!(pothole["extent"], 100.0);
    assert_eq!(summary.counts["road_damage"], 1);
}

#[test]
fn without_track_findings_go_to_sidecar() {
    let (dir, manifest) = scene_copy();
    rewrite(&manifest, |v| {
        v.as_object_mut().unwrap().remove("track_path");
    });
    let path = dir.path().join("out.geojson");
    let summary = run_to(&manifest, &path, 1);
    assert!(features(&path).is_empty());
    assert_eq!(summary.unlocated, 3);
    let side: Value = serde_json::from_str(&fs::read_to_string(unlocated_path(&path)).unwrap()).unwrap();
    assert_eq!(side["unlocated"].as_array().unwrap().len(), 3);
}

#[test]
fn debug_dir_receives_marking_masks() {
    let (dir, manifest) = scene_copy();
    let debug = dir.path().join("debug");
    run(
        &manifest,
        &RunOptions {
            output: dir.path().join("out.geojson"),
            debug_dir: Some(debug.clone()),
            jobs: 1,
        },
    )
    .unwrap();
    for name in ["refined", "hot", "flagged"] {
        assert!(debug.join(format!("frame_50_{name}.pgm")).is_file());
    }
}

#[test]
fn validation_problems() {
    assert!(validate(fixture_dir().join("scene.json")).is_empty());

    let (dir, manifest) = scene_copy();
    fs::remove_file(dir.path().join("frame_50_mask.pgm")).unwrap();
    let problems = validate(&manifest);
    assert_eq!(problems.len(), 1);
    assert!(problems[0].contains("frame_50_mask.pgm"));

    let (_dir, manifest) = scene_copy();
    rewrite(&manifest, |v| v["params"]["marking"]["density_threshold"] = 1.5.into());
    let problems = validate(&manifest);
    assert_eq!(problems.len(), 1);
    assert!(problems[0].contains("density_threshold"));
    assert!(matches!(
        run(&manifest, &RunOptions { output: "unused.geojson".into(), ..Default::default() }),
        Err(Error::ManifestInvalid(_))
    ));
}

#[test]
fn manifest_paths_resolve_against_its_directory() {
    let m = SceneManifest::load(fixture_dir().join("scene.json")).unwrap();
    assert!(m.frames[0].image_path.is_file());
    assert!(m.track_path.unwrap().is_file());
}
