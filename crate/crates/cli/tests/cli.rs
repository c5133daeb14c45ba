use std::path::Path;
use std::process::{Command, Output};

fn surfdamage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfdamage")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small crack scene: coarse points and three low-resolution cameras.
fn synth_scene(dir: &Path) {
    let spec = dir.join("spec.toml");
    std::fs::write(
        &spec,
        r#"
[wall]
spacing = 0.003

[cameras]
count = 4
width = 512
height = 384
focal = 400.0

[[cracks]]
class = "crack"
width = 0.006
branches = [[[-0.6, -0.2], [0.5, 0.3]]]
"#,
    )
    .unwrap();
    let scene = dir.join("scene");
    let out = surfdamage(&["synth", "--out", path(&scene), "--spec", path(&spec), "--seed", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn pipeline_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path());
    let scene = dir.path().join("scene");
    let mut docs = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "3")] {
        let out_dir = dir.path().join(run);
        let out = surfdamage(&["pipeline", "--scene", path(&scene), "--out", path(&out_dir), "--threads", threads]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(String::from_utf8_lossy(&out.stdout).contains("Tol."));
        docs.push(std::fs::read(out_dir.join("instances.json")).unwrap());
    }
    assert!(String::from_utf8_lossy(&docs[0]).contains("\"medial_axis\""));
    assert_eq!(docs[0], docs[1]);
}

#[test]
fn evaluate_prints_the_requested_tolerance_row() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path());
    let scene = dir.path().join("scene");
    let out_dir = dir.path().join("out");
    let out = surfdamage(&["pipeline", "--scene", path(&scene), "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = surfdamage(&[
        "evaluate",
        "--predictions",
        path(&out_dir.join("instances.json")),
        "--annotations",
        path(&scene.join("annotations.json")),
        "--tol",
        "0.04",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].starts_with("Tol."), "{text}");
    assert!(lines[1].starts_with("4.0 cm"), "{text}");
}

#[test]
fn missing_cameras_file_is_a_validation_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path());
    let scene = dir.path().join("scene");
    let missing = dir.path().join("nowhere.json");
    let out = surfdamage(&[
        "map",
        "--cloud",
        path(&scene.join("cloud.ply")),
        "--cameras",
        path(&missing),
        "--heatmaps",
        path(&scene.join("heatmaps")),
        "--out",
        path(&dir.path().join("seg.ply")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nowhere.json"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_exits_with_one() {
    let out = surfdamage(&["pipeline", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--no-such-flag"));
}

#[test]
fn help_exits_cleanly() {
    let out = surfdamage(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("pipeline"));
}
