mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use fpp_forge::imageio::{read_exr, write_exr};
use fpp_forge::scene::{primitives, Vec3};
use fpp_forge::Raster;

fn fpp(args: &[&str]) -> (i32, Value, String) {
    let out: Output = Command::new(env!("CARGO_BIN_EXE_fpp-forge")).args(args).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let report: Value = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("report is not JSON ({e}): {stdout}"));
    (out.status.code().unwrap(), report, String::from_utf8(out.stderr).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

fn cube(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("cube.stl");
    common::write_ascii_stl(&p, &primitives::cube(Vec3::zeros(), 1.0));
    p
}

const SMALL: &str = "[render]\nwidth = 48\nheight = 40\n";

#[test]
fn render_writes_one_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("default.ini");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("pair");
    let rep = dir.path().join("report.json");
    let (code, report, _) = fpp(&["render", "--mesh", s(&cube(dir.path())), "--config", s(&cfg), "--out", s(&out), "--report", s(&rep)]);
    assert_eq!(code, 0, "{report}");
    assert_eq!(files(&out), ["depth.exr", "fringe.png"]);
    assert_eq!(report["command"], "render");
    assert_eq!(report["exit_code"], 0);
    let saved: Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    assert_eq!(saved["command"], report["command"]);
    assert_eq!(read_exr(out.join("depth.exr")).unwrap().dims(), (48, 40));
}

#[test]
fn render_sequence_counts_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("seq");
    let (code, report, _) = fpp(&[
        "render", "--mesh", s(&cube(dir.path())), "--out", s(&out),
        "--set", "render.width=32", "--set", "render.height=32", "--steps", "4", "--freqs", "1,8",
    ]);
    assert_eq!(code, 0, "{report}");
    let all = files(&out);
    assert_eq!(all.iter().filter(|f| f.ends_with(".png")).count(), 8);
    assert_eq!(all.iter().filter(|f| f.ends_with(".exr")).count(), 1);
    assert!(all.contains(&"f8_s3.png".to_string()));
}

#[test]
fn render_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = cube(dir.path());
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let (code, _, _) = fpp(&["render", "--mesh", s(&mesh), "--out", s(&out), "--set", "render.width=32", "--set", "render.height=32", "--seed", seed]);
        assert_eq!(code, 0);
        std::fs::read(out.join("fringe.png")).unwrap()
    };
    assert_eq!(run("a", "5"), run("b", "5"));
    assert_ne!(run("a", "5"), run("c", "6"));
}

#[test]
fn missing_mesh_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let ghost = dir.path().join("ghost.stl");
    let (code, report, stderr) = fpp(&["render", "--mesh", s(&ghost), "--out", s(&dir.path().join("o"))]);
    assert_ne!(code, 0);
    assert!(report["error"].as_str().unwrap().contains("ghost.stl"));
    assert!(stderr.contains("ghost.stl"));
}

#[test]
fn bad_config_reports_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    std::fs::write(&cfg, "[render]\nwidth = 32\n\nwidht = 40\n").unwrap();
    let (code, report, _) = fpp(&["render", "--mesh", s(&cube(dir.path())), "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code, 1);
    let err = report["error"].as_str().unwrap();
    assert!(err.contains("line 4") && err.contains("widht"), "{err}");
}

#[test]
fn usage_errors_exit_one_with_a_report() {
    let (code, report, _) = fpp(&["render", "--no-such-flag"]);
    assert_eq!(code, 1);
    assert_eq!(report["exit_code"], 1);
    assert!(report["error"].is_string());
    let (code, _, _) = fpp(&["dataset", "build", "--out", "x", "--recipe", "D9"]);
    assert_eq!(code, 1);
}

fn toy_dataset(dir: &Path) -> std::path::PathBuf {
    common::write_ascii_stl(&dir.join("a.stl"), &primitives::cube(Vec3::zeros(), 1.0));
    common::write_ascii_stl(&dir.join("b.stl"), &primitives::icosphere(Vec3::zeros(), 1.0, 1));
    let cfg = dir.join("toy.ini");
    std::fs::write(
        &cfg,
        "[recipe]\nid = D1\nn_groups = 1\nseed = 11\nmodels = a.stl, b.stl\n\n[render]\nwidth = 16\nheight = 16\n\n[schedule]\nn_yaw = 2\nn_roll = 2\n",
    )
    .unwrap();
    cfg
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn dataset_build_counts_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_dataset(dir.path());
    let build = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let (code, report, _) = fpp(&["dataset", "build", "--config", s(&cfg), "--out", s(&out), "--seed", "3", "--workers", workers]);
        assert_eq!(code, 0, "{report}");
        out
    };
    let a = build("a", "1");
    let b = build("b", "3");
    let m = manifest(&a);
    assert_eq!(m["entries"].as_array().unwrap().len(), 8);
    assert_eq!(m["complete"], true);
    assert_eq!(std::fs::read(a.join("manifest.json")).unwrap(), std::fs::read(b.join("manifest.json")).unwrap());
    assert!(a.join("group00/a/pose003.png").exists());
    assert!(a.join("group00/b/pose000.exr").exists());
}

#[test]
fn recipe_d3_varies_all_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_dataset(dir.path());
    let out = dir.path().join("d3");
    let (code, report, _) = fpp(&["dataset", "build", "--config", s(&cfg), "--out", s(&out), "--recipe", "D3"]);
    assert_eq!(code, 0, "{report}");
    let m = manifest(&out);
    let groups = m["groups"].as_array().unwrap();
    assert!(!groups.is_empty());
    for g in groups {
        assert_eq!(g["varying"].as_array().unwrap().len(), 6, "{g}");
    }
}

#[test]
fn demod_recovers_plane_depth() {
    let dir = tempfile::tempdir().unwrap();
    let plane = dir.path().join("plane.stl");
    common::write_ascii_stl(&plane, &primitives::square(Vec3::zeros(), -Vec3::y(), 1.0));
    let seq = dir.path().join("seq");
    let (code, report, _) = fpp(&[
        "render", "--mesh", s(&plane), "--out", s(&seq), "--steps", "4", "--freqs", "1,16",
        "--set", "render.width=128", "--set", "render.height=128", "--set", "render.noise_sigma=0",
    ]);
    assert_eq!(code, 0, "{report}");
    let out = dir.path().join("rec");
    let (code, report, _) = fpp(&["demod", "--input", s(&seq), "--out", s(&out)]);
    assert_eq!(code, 0, "{report}");
    let agg = &report["aggregate"];
    let rms = agg["rms"].as_f64().unwrap();
    let z0 = agg["truth_depth_min"].as_f64().unwrap();
    assert!(agg["compared_pixels"].as_u64().unwrap() > 1000);
    assert!(rms < 1e-4 * z0, "rms {rms} vs z0 {z0}");
    assert!(out.join("depth.exr").exists());
    let text = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.contains("rms") && text.contains("valid_fraction"));
}

#[test]
fn demod_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    let (code, _, _) = fpp(&[
        "render", "--mesh", s(&cube(dir.path())), "--out", s(&seq), "--steps", "3", "--freqs", "1,4",
        "--set", "render.width=24", "--set", "render.height=24",
    ]);
    assert_eq!(code, 0);

    let (code, report, _) = fpp(&["demod", "--input", s(&seq), "--calib", s(&dir.path().join("none.json")), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code, 3);
    assert!(report["error"].as_str().unwrap().contains("none.json"));

    std::fs::remove_file(seq.join("f4_s2.png")).unwrap();
    let (code, report, _) = fpp(&["demod", "--input", s(&seq), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code, 1);
    assert!(report["error"].as_str().unwrap().contains("N < 3"), "{report}");
}

fn csv_rows(path: &Path) -> Vec<(String, f64, f64, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["image", "mae", "msde", "ssim"]);
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].to_string(), rec[1].parse().unwrap(), rec[2].parse().unwrap(), rec[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn eval_identity_rows() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt");
    for name in ["a.exr", "sub/b.exr"] {
        let r = Raster::from_fn(12, 10, |x, y| 1.3 + 0.01 * (x * y) as f64 + 0.002 * x as f64);
        write_exr(gt.join(name), &r).unwrap();
    }
    let out = dir.path().join("ev");
    let (code, report, _) = fpp(&["eval", "--pred", s(&gt), "--gt", s(&gt), "--out", s(&out)]);
    assert_eq!(code, 0, "{report}");
    let rows = csv_rows(&out.join("eval.csv"));
    assert_eq!(rows.iter().map(|r| r.0.as_str()).collect::<Vec<_>>(), ["a.exr", "sub/b.exr", "mean"]);
    for (_, mae, msde, ssim) in rows {
        assert_eq!((mae, msde), (0.0, 0.0));
        assert!((ssim - 1.0).abs() < 1e-12);
    }
    assert!(out.join("eval.txt").exists());
}

#[test]
fn eval_lists_missing_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    let r = Raster::from_fn(9, 9, |x, _| x as f64);
    write_exr(gt.join("a.exr"), &r).unwrap();
    write_exr(gt.join("b.exr"), &r).unwrap();
    write_exr(pred.join("a.exr"), &r).unwrap();
    write_exr(pred.join("c.exr"), &r).unwrap();
    let (code, report, _) = fpp(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--out", s(&dir.path().join("ev"))]);
    assert_eq!(code, 2);
    assert_eq!(report["aggregate"]["missing_predictions"], serde_json::json!(["b.exr"]));
    assert_eq!(report["aggregate"]["missing_ground_truth"], serde_json::json!(["c.exr"]));
    assert_eq!(report["aggregate"]["pairs"], 1);
}

#[test]
fn eval_aggregates_match_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    // pair a: constant offset 0.25, so MAE 0.25, error spread 0
    write_exr(pred.join("a.exr"), &Raster::filled(8, 8, 0.5)).unwrap();
    write_exr(gt.join("a.exr"), &Raster::filled(8, 8, 0.25)).unwrap();
    // pair b: errors 0 and 1 on alternating columns, so MAE 0.5, spread 0.5
    write_exr(pred.join("b.exr"), &Raster::from_fn(8, 8, |x, _| (x % 2) as f64)).unwrap();
    write_exr(gt.join("b.exr"), &Raster::filled(8, 8, 0.0)).unwrap();
    let out = dir.path().join("ev");
    let (code, report, _) = fpp(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--out", s(&out), "--raw", "--dynamic-range", "1"]);
    assert_eq!(code, 0, "{report}");
    let rows = csv_rows(&out.join("eval.csv"));
    let tol = 1e-12;
    assert!((rows[0].1 - 0.25).abs() < tol && rows[0].2.abs() < tol);
    assert!((rows[1].1 - 0.5).abs() < tol && (rows[1].2 - 0.5).abs() < tol);
    // constant images: SSIM reduces to the luminance term (2·μg·μd + c1)/(μg² + μd² + c1)
    let c1 = 1e-4;
    let ssim_a = (2.0 * 0.5 * 0.25 + c1) / (0.25 + 0.0625 + c1);
    assert!((rows[0].3 - ssim_a).abs() < tol, "{} vs {ssim_a}", rows[0].3);
    let mean = &rows[2];
    assert_eq!(mean.0, "mean");
    assert!((mean.1 - 0.375).abs() < tol && (mean.2 - 0.25).abs() < tol);
    assert!((mean.3 - (rows[0].3 + rows[1].3) / 2.0).abs() < tol);
    assert!((report["aggregate"]["mae"].as_f64().unwrap() - 0.375).abs() < tol);
}

#[test]
fn shipped_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.ini");
    let cfg = fpp_forge::config::Config::load(&path).unwrap();
    let base = fpp_forge::config::Config::default();
    assert_eq!(cfg.render, base.render);
    assert_eq!(cfg.ranges, base.ranges);
    assert_eq!(cfg.schedule().unwrap(), base.schedule().unwrap());
    assert_eq!(cfg.recipe(), base.recipe());
}
