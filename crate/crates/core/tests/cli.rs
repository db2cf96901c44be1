use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use deepir::synth::{random_weights, scene, SMALL_WIDTHS};
use deepir::Image;

fn deepir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepir")).args(args).output().unwrap()
}

fn fixtures(dir: &Path, h: usize, w: usize) -> (String, String) {
    let img = dir.join("in.png");
    let weights = dir.join("w.dirw");
    scene(h, w, 1).save_png(&img).unwrap();
    random_weights(&SMALL_WIDTHS, 7).save(&weights).unwrap();
    (img.to_string_lossy().into_owned(), weights.to_string_lossy().into_owned())
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn epsilon_out_of_range_is_a_usage_error() {
    let out = deepir(&["retarget", "--input", "a.png", "--weights", "w.dirw", "--epsilon", "1.5", "--output", "o.png"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon must be in (0,1]"));
    assert_eq!(deepir(&["retarget", "--epsilon", "0.5"]).status.code(), Some(1));
    assert_eq!(deepir(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(deepir(&["--help"]).status.code(), Some(0));
}

#[test]
fn unreadable_inputs_are_processing_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = fixtures(dir.path(), 32, 32);
    let bogus = dir.path().join("bogus.dirw");
    fs::write(&bogus, b"NOPE and some more bytes").unwrap();
    let out = deepir(&["retarget", "--input", &img, "--weights", &s(&bogus), "--epsilon", "0.5", "--output", &s(&dir.path().join("o.png"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad magic") && err.lines().count() == 1, "{err}");
    let missing = deepir(&["baseline", "--method", "sc", "--input", "nowhere.png", "--epsilon", "0.5", "--output", "o.png"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn retarget_writes_the_target_shape_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let (img, weights) = fixtures(dir.path(), 64, 64);
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = deepir(&["retarget", "--input", &img, "--weights", &weights, "--epsilon", "0.5", "--seed", "3", "--output", &s(&path)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(summary["width"], 32);
        fs::read(path).unwrap()
    };
    let (a, b) = (run("a.png"), run("b.png"));
    assert_eq!(a, b);
    let out = Image::load(dir.path().join("a.png")).unwrap();
    assert_eq!((out.height(), out.width()), (64, 32));
}

#[test]
fn retarget_dumps_intermediates() {
    let dir = tempfile::tempdir().unwrap();
    let (img, weights) = fixtures(dir.path(), 32, 40);
    let dump = dir.path().join("dump");
    let out = deepir(&[
        "retarget", "--input", &img, "--weights", &weights, "--epsilon", "0.8", "--axis", "rows", "--alpha", "0.5,0.5,0.5",
        "--operator", "sc", "--max-iterations", "20", "--dump-intermediate", &s(&dump), "--output", &s(&dir.path().join("o.png")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["3_fused.png", "2_matched.dirn", "1_inverted.dirf", "1_inversion_loss.csv"] {
        assert!(dump.join(name).exists(), "{name}");
    }
    let o = Image::load(dir.path().join("o.png")).unwrap();
    assert_eq!((o.height(), o.width()), (26, 40));
}

#[test]
fn baselines_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (img, weights) = fixtures(dir.path(), 48, 64);
    for method in ["scl", "cr", "sc", "colrm"] {
        let path = dir.path().join(format!("{method}.png"));
        let out = deepir(&["baseline", "--method", method, "--input", &img, "--epsilon", "0.5", "--output", &s(&path)]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(Image::load(&path).unwrap().width(), 32);
    }
    let fixed = dir.path().join("fixed.png");
    let out = deepir(&["baseline", "--method", "cr", "--crop-offset", "5", "--input", &img, "--epsilon", "0.5", "--output", &s(&fixed)]);
    assert_eq!(out.status.code(), Some(0));
    let out = deepir(&["metrics", "--original", &img, "--retargeted", &s(&dir.path().join("sc.png")), "--weights", &weights]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["frr"].as_f64().unwrap() > 0.0 && v["fd"].as_f64().unwrap() >= 0.0);
}

#[test]
fn compare_writes_grid_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let (img, weights) = fixtures(dir.path(), 48, 64);
    let out_dir = dir.path().join("cmp");
    let out = deepir(&["compare", "--input", &img, "--epsilon", "0.75", "--weights", &weights, "--out-dir", &s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("grid.png").exists());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("scores.json")).unwrap()).unwrap();
    for key in ["urs", "scl", "cr", "sc", "colrm"] {
        assert!(v[key]["frr"].is_f64() && v[key]["fd"].is_f64() && v[key]["millis"].is_u64(), "{key}");
    }
    assert_eq!(v.as_object().unwrap().len(), 5);
}
