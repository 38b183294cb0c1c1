use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).display().to_string()
}

fn shellforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shellforge")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect()
}

fn report(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

/// Runs `args` twice and checks the output directory is byte-identical.
fn twice(dir: &Path, args: &[&str]) {
    let mut full: Vec<&str> = args.to_vec();
    let out = dir.display().to_string();
    full.extend(["-o", &out, "-q"]);
    let first = shellforge(&full);
    assert_eq!(code(&first), 0, "{args:?}: {}", stderr(&first));
    let a = snapshot(dir);
    let second = shellforge(&full);
    assert_eq!(code(&second), 0, "{args:?}: {}", stderr(&second));
    let b = snapshot(dir);
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{} differs between runs of {args:?}", k.display());
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = shellforge(&["shell", "--mesh", "x.stl", "--bogus"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(code(&shellforge(&["pipeline"])), 1);
    assert_eq!(code(&shellforge(&["frobnicate"])), 1);
    assert_eq!(code(&shellforge(&["split", "--mesh", "a.stl", "--normal", "1,2"])), 1);
}

#[test]
fn every_subcommand_has_help() {
    let subs: [&[&str]; 13] = [
        &["blank"],
        &["bracket"],
        &["validate"],
        &["shell"],
        &["split"],
        &["place"],
        &["fasten"],
        &["pipeline"],
        &["gesture", "synth"],
        &["gesture", "train"],
        &["gesture", "eval"],
        &["gesture", "classify"],
        &["gesture", "check"],
    ];
    for s in subs {
        let mut args = s.to_vec();
        args.push("--help");
        let o = shellforge(&args);
        assert_eq!(code(&o), 0, "{s:?}");
        let text = String::from_utf8_lossy(&o.stdout);
        assert!(text.contains("Usage: shellforge") && text.contains("--pitch"), "{s:?}: {text}");
    }
}

#[test]
fn stage_failures_exit_2_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = shellforge(&["validate", "--mesh", &fixture("malformed/truncated.stl"), "-o", &out]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("input stage failed") && err.contains("truncated"), "{err}");
    assert!(!err.contains("panicked") && !err.contains("backtrace"), "{err}");
    let r = report(dir.path(), "validate_report.json");
    assert_eq!(r["status"], "failed");
    assert_eq!(r["failure"]["stage"], "input");
    assert_eq!(r["config"]["args"]["mesh"], fixture("malformed/truncated.stl"));

    let o = shellforge(&["gesture", "check", "--hole", "5", "-o", &out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("check stage failed"));
    let r = report(dir.path(), "gesture_check_report.json");
    let kinds: Vec<&str> = r["failure"]["detail"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["uncovered_hole", "window_too_small"]);

    let o = shellforge(&["shell", "--mesh", &fixture("does-not-exist.stl"), "-o", &out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("input stage failed"));
}

#[test]
fn pipeline_writes_parts_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = shellforge(&[
        "pipeline",
        "--scan",
        &fixture("egg.stl"),
        "--spec",
        &fixture("mouse.json"),
        "--fiducials",
        &fixture("egg_fiducials.txt"),
        "--pitch",
        "0.5",
        "-o",
        &out,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["egg_a.stl", "egg_b.stl", "egg_report.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let r = report(dir.path(), "egg_report.json");
    assert_eq!(r["status"], "ok");
    assert_eq!(r["config"]["pitch"], 0.5);
    assert_eq!(r["result"]["parts"]["watertight_a"], true);
    assert_eq!(r["result"]["parts"]["watertight_b"], true);
    assert!(r["result"]["registration"]["residual_rms"].as_f64().unwrap() < 1e-6);
}

#[test]
fn pipeline_failure_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let bad = dir.path().join("flat.txt");
    std::fs::write(&bad, "0 0 0\n1 0 0\n2 0 0\n").unwrap();
    let o = shellforge(&[
        "pipeline",
        "--scan",
        &fixture("egg.stl"),
        "--spec",
        &fixture("mouse.json"),
        "--fiducials",
        &bad.display().to_string(),
        "-o",
        &out,
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("register stage failed"), "{}", stderr(&o));
    assert_eq!(report(dir.path(), "egg_report.json")["failure"]["stage"], "register");
}

#[test]
fn geometry_subcommands_are_deterministic() {
    let root = tempfile::tempdir().unwrap();
    let d = |n: &str| root.path().join(n);
    let spec = fixture("mouse.json");
    twice(&d("blank"), &["blank", "--spec", &spec, "--pitch", "0.5"]);
    twice(&d("bracket"), &["bracket", "--spec", &spec]);
    twice(&d("validate"), &["validate", "--mesh", &fixture("egg.stl"), "--repair"]);

    let sphere = d("sphere");
    twice(&sphere, &["shell", "--mesh", &fixture("sphere.stl"), "--pitch", "0.5"]);
    let shell = sphere.join("sphere_shell.stl").display().to_string();
    twice(&sphere, &["split", "--mesh", &shell, "--point", "0,0,0"]);
    let a = sphere.join("sphere_shell_a.stl").display().to_string();
    let b = sphere.join("sphere_shell_b.stl").display().to_string();
    twice(&sphere, &["fasten", "--a", &a, "--b", &b, "--plan", &fixture("sphere_plan.json")]);
    let r = report(&sphere, "fasten_report.json");
    assert!(r["result"]["parts"]["interference_volume"].as_f64().unwrap() <= r["result"]["parts"]["interference_bound"].as_f64().unwrap());

    let egg = d("egg");
    twice(&egg, &["shell", "--mesh", &fixture("egg.stl"), "--pitch", "0.5"]);
    let shell = egg.join("egg_shell.stl").display().to_string();
    twice(
        &egg,
        &["place", "--piece", &shell, "--spec", &spec, "--fiducials", &fixture("egg_fiducials.txt"), "--pitch", "0.5"],
    );
    twice(
        &d("pipeline"),
        &[
            "pipeline",
            "--scan",
            &fixture("egg.stl"),
            "--spec",
            &spec,
            "--fiducials",
            &fixture("egg_fiducials.txt"),
            "--pitch",
            "0.5",
        ],
    );
}

#[test]
fn gesture_subcommands_are_deterministic() {
    let root = tempfile::tempdir().unwrap();
    let g = root.path().join("g");
    twice(&g, &["gesture", "synth", "--n", "5"]);
    twice(&g, &["gesture", "train", "--strokes", &fixture("gestures.jsonl"), "--epochs", "200"]);
    let model = g.join("model.json").display().to_string();
    twice(&g, &["gesture", "classify", "--model", &model, "--strokes", &fixture("gestures.jsonl")]);
    twice(&g, &["gesture", "classify", "--model", &model, "--strokes", &fixture("stream.jsonl"), "--stream"]);
    let r = report(&g, "gesture_classify_report.json");
    let labels: Vec<&str> = r["result"]["strokes"].as_array().unwrap().iter().map(|s| s["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["swipe-left", "swipe-right", "swipe-up", "swipe-down", "circle-cw", "circle-ccw"]);
    twice(&g, &["gesture", "eval", "--n", "10", "--splits", "2", "--epochs", "100"]);
    twice(&g, &["gesture", "check", "--hole", "14", "--cover", "2"]);
}

#[test]
fn eval_prints_and_records_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = shellforge(&["gesture", "eval", "--corpus", "synth", "--seed", "7", "-o", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("mean") && text.contains("user-3"), "{text}");
    let r = report(dir.path(), "gesture_eval_report.json");
    assert_eq!(r["result"]["splits"].as_array().unwrap().len(), 5);
    assert!(r["result"]["mean_accuracy"].as_f64().unwrap() >= 0.89);
}

#[test]
fn classify_refuses_other_devices() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    assert_eq!(code(&shellforge(&["gesture", "train", "--strokes", &fixture("gestures.jsonl"), "--epochs", "50", "-o", &out, "-q"])), 0);
    let model = dir.path().join("model.json").display().to_string();
    let o = shellforge(&["gesture", "classify", "--model", &model, "--strokes", &fixture("gestures.jsonl"), "--device", "other", "-o", &out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("classify stage failed"));
}
