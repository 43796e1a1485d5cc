use std::path::Path;
use std::process::{Command, Output};

use reconbench::scene::assets;

fn reconbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reconbench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_dataset(dir: &Path) {
    let sphere = assets::sphere_path();
    let out = reconbench(&[
        "dataset",
        "--mesh",
        sphere.to_str().unwrap(),
        "--poses",
        "6",
        "--size",
        "16x16",
        "--workdir",
        dir.to_str().unwrap(),
        "--out",
        "ds",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn dataset_frames_see_the_object() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let ds = reconbench::scene::Dataset::load(&dir.path().join("ds")).unwrap();
    assert_eq!(ds.frames.len(), 6);
    for f in &ds.frames {
        assert_eq!(f.cam.fov_y, 17.70);
        let covered = f.mask_count() as f64 / f.cam.pixel_count() as f64;
        // unit sphere at distance 8 under a 17.7 degree field of view
        assert!(covered > 0.3 && covered < 0.8, "coverage {covered}");
    }
}

#[test]
fn train_with_zero_iterations_writes_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    assert!(dir.path().join("ds/config.json").is_file());

    let out = reconbench(&[
        "train",
        "--workdir",
        dir.path().to_str().unwrap(),
        "--dataset",
        "ds",
        "--iters",
        "0",
        "--out",
        "model.tnrf",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let model = reconbench::nerf::load_model(&dir.path().join("model.tnrf")).unwrap();
    assert_eq!(model.param_count(), 360_516);
    assert!(dir.path().join("model.tnrf.config.json").is_file());
    let history = std::fs::read_to_string(dir.path().join("model.tnrf.history.json")).unwrap();
    assert_eq!(history.trim(), "[]");
}

#[test]
fn render_scores_against_the_capture() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let wd = dir.path().to_str().unwrap();
    let out = reconbench(&[
        "train", "--workdir", wd, "--dataset", "ds", "--iters", "0", "--freqs", "2", "--out", "m.tnrf",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = reconbench(&[
        "render", "--workdir", wd, "--model", "m.tnrf", "--dataset", "ds", "--pose-index", "5", "--samples", "8",
        "--out", "view.png",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("view.png").is_file());
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("view.png.config.json")).unwrap()).unwrap();
    assert!(sidecar["quality"]["mse"].as_f64().unwrap() >= 0.0);

    let out = reconbench(&[
        "render", "--workdir", wd, "--model", "m.tnrf", "--dataset", "ds", "--pose-index", "6", "--out", "x.png",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--pose-index"));
}

#[test]
fn missing_dataset_flag_is_a_usage_error() {
    let out = reconbench(&["train", "--out", "model.tnrf"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--dataset"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = reconbench(&["grid", "--dataset", "ds", "--out", "g", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--bogus"));
}

#[test]
fn nonexistent_dataset_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = reconbench(&[
        "pointcloud",
        "--workdir",
        dir.path().to_str().unwrap(),
        "--dataset",
        "nowhere",
        "--out",
        "pc.ply",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("dataset.json"));
}

#[test]
fn bad_size_and_background_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sphere = assets::sphere_path();
    let wd = dir.path().to_str().unwrap();
    let mesh = sphere.to_str().unwrap();
    let out = reconbench(&["dataset", "--workdir", wd, "--mesh", mesh, "--size", "16", "--out", "d"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--size"));
    let out = reconbench(&["dataset", "--workdir", wd, "--mesh", mesh, "--background", "2,0,0", "--out", "d"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pointcloud_voxelize_and_report_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let wd = dir.path().to_str().unwrap();
    let out = reconbench(&["pointcloud", "--workdir", wd, "--dataset", "ds", "--out", "pc.ply"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("pc.ply.config.json").is_file());
    let cloud = reconbench::pointcloud::load_ply(&dir.path().join("pc.ply")).unwrap();
    assert!(!cloud.is_empty());

    let out = reconbench(&[
        "voxelize", "--workdir", wd, "--dataset", "ds", "--resolution", "16", "--out", "v.vox",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("v.vox.config.json").is_file());

    let out = reconbench(&["report", "--workdir", wd, "--in", "ds", "--out", "r"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = reconbench(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("grid"));
}
