use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tmc::image::{read_image, write_image};
use tmc::RasterImage;

fn tmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmc")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn gradient(n: usize) -> RasterImage {
    RasterImage::from_fn(n, n, |x, y| [(x * 255 / n) as u8, (y * 255 / n) as u8, ((x + y) * 2) as u8])
}

#[test]
fn constant_image_hits_the_cap_in_few_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.ppm");
    write_image(&RasterImage::filled(64, 64, [90, 30, 200]), &input).unwrap();
    let tmc_path = dir.path().join("flat.tmc");
    let out = tmc(&["encode", s(&input), "--size", "64", "--proposals", "500", "--out", s(&tmc_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["psnr"], 99.0);
    assert!(report["bytes"].as_u64().unwrap() <= 20);
    assert_eq!(fs::metadata(&tmc_path).unwrap().len(), report["bytes"].as_u64().unwrap());
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("g.png");
    write_image(&gradient(48), &input).unwrap();
    let run = |name: &str, seed: &str| {
        let out_path = dir.path().join(name);
        let out = tmc(&[
            "encode", s(&input), "--size", "48", "--grid", "13", "--palette", "8", "--budget", "90",
            "--proposals", "1500", "--seed", seed, "--out", s(&out_path),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(out_path).unwrap()
    };
    assert_eq!(run("a.tmc", "4"), run("b.tmc", "4"));
}

#[test]
fn infeasible_budget_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("g.ppm");
    write_image(&gradient(32), &input).unwrap();
    let out = tmc(&["encode", s(&input), "--size", "32", "--grid", "9", "--budget", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(tmc(&["encode"]).status.code(), Some(1));
    assert_eq!(tmc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tmc(&["encode", "x.png", "--grid", "many"]).status.code(), Some(1));
    assert_eq!(tmc(&["--help"]).status.code(), Some(0));
    assert_eq!(tmc(&["decode", "/nonexistent/file.tmc"]).status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("g.ppm");
    write_image(&gradient(40), &input).unwrap();
    let config = dir.path().join("cfg.json");
    fs::write(&config, r#"{"grid_dim": 9, "palette_size": 4, "size": 40, "proposals": 300, "byte_budget": 70}"#).unwrap();
    let out = tmc(&["encode", s(&input), "--config", s(&config), "--palette", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mesh = tmc::bitstream::deserialize(&fs::read(dir.path().join("g.tmc")).unwrap()).unwrap();
    assert_eq!(mesh.grid_dim(), 9);
    assert!(mesh.palette().len() <= 2);

    fs::write(&config, r#"{"grid": 9}"#).unwrap();
    assert_eq!(tmc(&["encode", s(&input), "--config", s(&config)]).status.code(), Some(1));
}

#[test]
fn metrics_of_identical_images() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    write_image(&gradient(32), &a).unwrap();
    let out = tmc(&["metrics", s(&a), s(&a)]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out), serde_json::json!({"psnr": 99.0, "ssim": 1.0}));
}

#[test]
fn decode_features_and_blur_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = tmc::CompressedMesh::corners_only(16, vec![[0, 0, 0]]).unwrap();
    let tmc_path = dir.path().join("corners.tmc");
    fs::write(&tmc_path, tmc::bitstream::serialize(&mesh).unwrap()).unwrap();

    let fts = dir.path().join("corners.fts");
    assert!(tmc(&["features", s(&tmc_path), "--size", "64", "--out", s(&fts)]).status.success());
    assert_eq!(fs::metadata(&fts).unwrap().len(), 12 + 8 * 64 * 64 * 4);

    let png = dir.path().join("corners.png");
    assert!(tmc(&["decode", s(&tmc_path), "--size", "32", "--out", s(&png)]).status.success());
    assert_eq!(read_image(&png).unwrap(), RasterImage::new(32, 32));

    let blurred = dir.path().join("blur.ppm");
    let out = tmc(&["blur", s(&png), "--radius", "2", "--passes", "5", "--out", s(&blurred)]);
    assert!(out.status.success());
    assert_eq!(read_image(&blurred).unwrap(), RasterImage::new(32, 32));
    assert_eq!(tmc(&["blur", s(&png), "--radius", "0.5"]).status.code(), Some(1));
}

#[test]
fn bench_on_empty_dir() {
    let corpus = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    let out = tmc(&["bench", s(corpus.path()), "--out", s(out_dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out_dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rows"], serde_json::json!([]));
    assert_eq!(manifest["aggregates"]["images"], 0);
    assert_eq!(fs::read_to_string(out_dir.path().join("rows.jsonl")).unwrap(), "");
}

#[test]
fn bench_with_nn_dir_reports_improvement() {
    let corpus = tempfile::tempdir().unwrap();
    let nn = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    for (i, name) in ["b", "a", "c"].iter().enumerate() {
        let img = RasterImage::from_fn(32, 32, |x, y| [(x * 8) as u8, (y * 8) as u8, (i * 80) as u8]);
        write_image(&img, corpus.path().join(format!("{name}.png"))).unwrap();
        // A perfect learned decode for "a", a useless one for the others.
        let guess = if *name == "a" { img } else { RasterImage::new(32, 32) };
        write_image(&guess, nn.path().join(format!("{name}.png"))).unwrap();
    }
    fs::write(corpus.path().join("notes.txt"), "not an image").unwrap();
    fs::write(corpus.path().join("broken.png"), "not a png").unwrap();

    let out = tmc(&[
        "bench", s(corpus.path()), "--size", "32", "--grid", "9", "--palette", "8", "--budget", "80",
        "--proposals", "300", "--out", s(out_dir.path()), "--nn-dir", s(nn.path()), "--side-by-side",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out_dir.path().join("manifest.json")).unwrap()).unwrap();
    let rows = manifest["rows"].as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["a", "b", "broken", "c"]);
    assert!(rows[2]["error"].is_string());
    assert_eq!(rows[0]["nn_improved"], true);
    assert_eq!(rows[1]["nn_improved"], false);
    assert_eq!(manifest["aggregates"]["failed"], 1);
    assert!((manifest["aggregates"]["improved_fraction"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);

    let csv = fs::read_to_string(out_dir.path().join("summary.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.contains("improved") && header.contains("nn_psnr"));
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(fs::read_to_string(out_dir.path().join("rows.jsonl")).unwrap().lines().count(), 4);

    let strip = read_image(out_dir.path().join("a.compare.png")).unwrap();
    assert_eq!((strip.width(), strip.height()), (96, 32));
    assert!(out_dir.path().join("a.tmc").exists());
}

#[test]
fn bench_without_nn_dir_has_no_improved_column() {
    let corpus = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    write_image(&gradient(32), corpus.path().join("g.ppm")).unwrap();
    let out = tmc(&[
        "bench", s(corpus.path()), "--size", "32", "--grid", "9", "--palette", "4", "--budget", "60",
        "--proposals", "100", "--out", s(out_dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.path().join("summary.csv")).unwrap();
    assert!(!csv.lines().next().unwrap().contains("improved"));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out_dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["aggregates"].get("improved_fraction").is_none());
}
