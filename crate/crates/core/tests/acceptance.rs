//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tmc::bitstream::{deserialize, serialize, size_bytes};
use tmc::cli::{run_bench, BenchOptions, RunManifest};
use tmc::codec::EncoderConfig;
use tmc::features::{build_features, export_features, import_features, INTERP_PLANES, VERTEX_PLANE};
use tmc::geometry::{delaunay_triangulate, incircle, CircleSide};
use tmc::metrics::{gaussian_kernel, psnr, ssim};
use tmc::rasterizer::{render, render_region, Rasterizer};
use tmc::{CompressedMesh, GridVertex, RasterImage, Rgb};

const DESK_CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/desk_corpus");
const REFERENCE_PSNR: f64 = 20.7;

struct Gate {
    failures: usize,
}

impl Gate {
    fn report(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures += 1;
        }
    }
}

fn random_vertices(rng: &mut impl Rng, m: u32, max_extra: usize) -> Vec<GridVertex> {
    let cells = (m * m) as usize;
    let extra = rng.random_range(0..=max_extra.min(cells - 4));
    let mut set: HashSet<GridVertex> = GridVertex::corners(m).into_iter().collect();
    for i in sample(rng, cells, extra + 4).into_iter() {
        if set.len() == extra + 4 {
            break;
        }
        set.insert(GridVertex::from_linear_index(i as u32, m));
    }
    let mut v: Vec<_> = set.into_iter().collect();
    v.sort();
    v
}

fn random_mesh(rng: &mut impl Rng, m: u32, max_extra: usize) -> CompressedMesh {
    let verts = random_vertices(rng, m, max_extra);
    let k = rng.random_range(1..=32usize);
    let palette: Vec<Rgb> = (0..k).map(|_| rng.random()).collect();
    let vertices = verts.into_iter().map(|v| (v, rng.random_range(0..k) as u8)).collect();
    CompressedMesh::new(m, palette, vertices).unwrap()
}

fn delaunay(gate: &mut Gate) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xDE1A);
    let (mut bad_circle, mut bad_count, mut triangles) = (0, 0, 0);
    for _ in 0..200 {
        let verts = random_vertices(&mut rng, 16, 26);
        let t = delaunay_triangulate(&verts, 16).unwrap();
        let hull = verts.iter().filter(|v| v.row == 0 || v.col == 0 || v.row == 15 || v.col == 15).count();
        if t.triangles().len() != 2 * verts.len() - hull - 2 {
            bad_count += 1;
        }
        for i in 0..t.triangles().len() {
            let [a, b, c] = t.triangle_vertices(i);
            triangles += 1;
            if verts
                .iter()
                .any(|&d| d != a && d != b && d != c && incircle(a, b, c, d) == Ok(CircleSide::Inside))
            {
                bad_circle += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    gate.report(
        "delaunay oracle equivalence",
        bad_circle == 0 && bad_count == 0 && elapsed < Duration::from_secs(10),
        format!("200 sets, {triangles} triangles, {bad_circle} incircle violations, {bad_count} count mismatches, {elapsed:.2?}"),
    );
}

/// Triangles of `after` that differ from `before` in position or color.
fn changed_triangles(before: &CompressedMesh, after: &CompressedMesh) -> Vec<usize> {
    let key = |mesh: &CompressedMesh| -> Vec<[(GridVertex, Rgb); 3]> {
        let t = mesh.triangulate().unwrap();
        (0..t.triangles().len())
            .map(|i| t.triangle_vertices(i).map(|v| (v, mesh.color_of(v).unwrap())))
            .collect()
    };
    let old: HashSet<_> = key(before).into_iter().collect();
    key(after)
        .into_iter()
        .enumerate()
        .filter(|(_, k)| !old.contains(k))
        .map(|(i, _)| i)
        .collect()
}

fn single_vertex_edit(rng: &mut impl Rng, mesh: &CompressedMesh) -> CompressedMesh {
    let m = mesh.grid_dim();
    let mut verts = mesh.vertices().to_vec();
    let interior: Vec<usize> = (0..verts.len()).filter(|&i| !verts[i].0.is_corner(m)).collect();
    let k = mesh.palette().len() as u8;
    match rng.random_range(0..4) {
        0 | 1 if !interior.is_empty() => {
            let i = interior[rng.random_range(0..interior.len())];
            if rng.random_bool(0.5) {
                verts.remove(i);
            } else {
                let to = GridVertex::from_linear_index(rng.random_range(0..m * m), m);
                if mesh.color_of(to).is_none() && !to.is_corner(m) {
                    verts[i].0 = to;
                }
            }
        }
        2 => {
            let i = rng.random_range(0..verts.len());
            verts[i].1 = rng.random_range(0..k);
        }
        _ => {
            let at = GridVertex::from_linear_index(rng.random_range(0..m * m), m);
            if mesh.color_of(at).is_none() {
                verts.push((at, rng.random_range(0..k)));
            }
        }
    }
    CompressedMesh::from_unsorted(m, mesh.palette().to_vec(), verts).unwrap()
}

fn rasterizer(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7A57);
    let n = 128;
    let (mut bad_cov, mut nondet, mut bad_incr, mut edits) = (0, 0, 0, 0);
    for _ in 0..50 {
        let m = rng.random_range(2..=33);
        let mesh = random_mesh(&mut rng, m, 40);
        let cov = Rasterizer::new(m, n).unwrap().coverage(&mesh.triangulate().unwrap()).unwrap();
        if cov.iter().any(|&c| c != 1) {
            bad_cov += 1;
        }
        let full = render(&mesh, n).unwrap();
        if render(&mesh, n).unwrap() != full {
            nondet += 1;
        }
        let mut current = mesh;
        let mut raster = full;
        for _ in 0..10 {
            let next = single_vertex_edit(&mut rng, &current);
            render_region(&next, n, &changed_triangles(&current, &next), &mut raster).unwrap();
            edits += 1;
            if raster != render(&next, n).unwrap() {
                bad_incr += 1;
            }
            current = next;
        }
    }
    gate.report(
        "rasterizer coverage",
        bad_cov == 0 && nondet == 0 && bad_incr == 0,
        format!("50 meshes at N=128: {bad_cov} coverage failures, {nondet} nondeterministic, {bad_incr}/{edits} incremental mismatches"),
    );
}

fn bitstream(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB175);
    let (mut bad_trip, mut bad_size) = (0, 0);
    for _ in 0..1000 {
        let m = rng.random_range(2..=255);
        let mesh = random_mesh(&mut rng, m, 80);
        let bytes = serialize(&mesh).unwrap();
        if size_bytes(&mesh).unwrap() != bytes.len() {
            bad_size += 1;
        }
        if deserialize(&bytes).as_ref() != Ok(&mesh) {
            bad_trip += 1;
        }
    }
    let golden = serialize(&CompressedMesh::corners_only(16, vec![[0, 0, 0]]).unwrap()).unwrap();
    let expected = [0x11, 0x00, 0x10, 0x00, 0x00, 0x00, 0x00, 0x48, 0xF0, 0x1C, 0x23, 0xC0];
    gate.report(
        "bitstream",
        bad_trip == 0 && bad_size == 0 && golden == expected,
        format!(
            "1000 fuzzed meshes: {bad_trip} round-trip failures, {bad_size} size mismatches; golden {} bytes {}",
            golden.len(),
            if golden == expected { "match" } else { "MISMATCH" }
        ),
    );
}

fn desk_run() -> (RunManifest, Duration) {
    let start = Instant::now();
    let manifest = run_bench(Path::new(DESK_CORPUS), &EncoderConfig::default(), &BenchOptions::default()).unwrap();
    (manifest, start.elapsed())
}

fn rate_quality(gate: &mut Gate, manifest: &RunManifest, elapsed: Duration) {
    let rows = &manifest.rows;
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    let max_bytes = rows.iter().filter_map(|r| r.report.as_ref()?.bytes).max().unwrap_or(0);
    let monotone = rows.iter().all(|r| r.trace_monotone == Some(true));
    let improved = rows
        .iter()
        .filter(|r| matches!((r.initial_mse, r.final_mse), (Some(a), Some(b)) if b < 0.8 * a))
        .count();
    let mean = manifest.aggregates.mean_psnr;
    gate.report(
        "rate/quality desk run",
        rows.len() == 24
            && errors == 0
            && max_bytes <= 200
            && monotone
            && improved >= 20
            && (17.0..=24.0).contains(&mean)
            && elapsed < Duration::from_secs(600),
        format!(
            "{} images, max {max_bytes} bytes, traces monotone: {monotone}, final < 0.8 initial on {improved}/24, \
             mean PSNR {mean:.2} dB (reference {REFERENCE_PSNR} dB, band 17-24), mean SSIM {:.4}, {elapsed:.1?}",
            rows.len(),
            manifest.aggregates.mean_ssim
        ),
    );
}

/// SSIM straight from the definition: a full 2-D weighted window at every
/// valid position, no separable filtering.
fn ssim_direct(a: &RasterImage, b: &RasterImage) -> f64 {
    let g = gaussian_kernel(1.5, 5);
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let (w, h) = (a.width(), a.height());
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..3 {
        for y0 in 0..=h - 11 {
            for x0 in 0..=w - 11 {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..11 {
                    for dx in 0..11 {
                        let wt = g[dy] * g[dx];
                        let x = a.get(x0 + dx, y0 + dy)[ch] as f64;
                        let y = b.get(x0 + dx, y0 + dy)[ch] as f64;
                        mx += wt * x;
                        my += wt * y;
                        sxx += wt * x * x;
                        syy += wt * y * y;
                        sxy += wt * x * y;
                    }
                }
                let (vx, vy, cxy) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    total / count as f64
}

fn metric_oracles(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x551A);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let a = RasterImage::from_fn(32, 32, |_, _| rng.random());
        // Mix of unrelated and correlated pairs.
        let b = if i % 2 == 0 {
            RasterImage::from_fn(32, 32, |_, _| rng.random())
        } else {
            RasterImage::from_fn(32, 32, |x, y| a.get(x, y).map(|v| v.saturating_add(rng.random_range(0..40))))
        };
        worst = worst.max((ssim(&a, &b).unwrap() - ssim_direct(&a, &b)).abs());
    }
    let x = RasterImage::from_fn(32, 32, |_, _| rng.random());
    let identity = ssim(&x, &x).unwrap();
    let black = RasterImage::new(32, 32);
    let zero_db = psnr(&black, &RasterImage::filled(32, 32, [255; 3])).unwrap();
    let sixteen = psnr(&black, &RasterImage::filled(32, 32, [16; 3])).unwrap();
    let closed = 10.0 * (255.0f64.powi(2) / 256.0).log10();
    gate.report(
        "metric oracles",
        worst <= 1e-6 && identity == 1.0 && zero_db.abs() <= 1e-9 && (sixteen - closed).abs() <= 1e-9,
        format!(
            "max |ssim - direct| = {worst:.2e} over 100 pairs, ssim(x,x) = {identity}, psnr {zero_db:.12} dB and {sixteen:.12} dB (closed form {closed:.12})"
        ),
    );
}

fn blur_direction(gate: &mut Gate, manifest: &RunManifest) {
    let a = &manifest.aggregates;
    let ok = a.blur_mean_psnr.len() == 2
        && a.blur_mean_psnr.iter().all(|&p| p <= a.mean_psnr)
        && a.blur_mean_ssim.iter().all(|&s| s <= a.mean_ssim);
    gate.report(
        "blur direction",
        ok,
        format!(
            "interpolated {:.3} dB / {:.4}; blur x1 {:.3} dB / {:.4}; blur x5 {:.3} dB / {:.4}",
            a.mean_psnr,
            a.mean_ssim,
            a.blur_mean_psnr.first().copied().unwrap_or(f64::NAN),
            a.blur_mean_ssim.first().copied().unwrap_or(f64::NAN),
            a.blur_mean_psnr.get(1).copied().unwrap_or(f64::NAN),
            a.blur_mean_ssim.get(1).copied().unwrap_or(f64::NAN),
        ),
    );
}

fn feature_stack(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF7A5);
    let dir = tempfile::tempdir().unwrap();
    let (mut bad_interp, mut bad_mask, mut bad_file) = (0, 0, 0);
    for i in 0..20 {
        let m = rng.random_range(2..=33);
        let mesh = random_mesh(&mut rng, m, 60);
        let n = [64, 128, 256][i % 3];
        let stack = build_features(&mesh, n).unwrap();
        let decoded = render(&mesh, n).unwrap();
        let matches = INTERP_PLANES.zip(0..3).all(|(k, ch)| {
            stack
                .plane(k)
                .iter()
                .zip(decoded.pixels())
                .all(|(v, p)| (v * 255.0).round() as u8 == p[ch])
        });
        if !matches {
            bad_interp += 1;
        }
        if stack.plane(VERTEX_PLANE).iter().filter(|&&v| v != 0.0).count() != mesh.len() {
            bad_mask += 1;
        }
        let path = dir.path().join(format!("{i}.fts"));
        export_features(&stack, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        if import_features(&path).unwrap() != stack || bytes != stack.to_bytes() || bytes.len() != 12 + 8 * n * n * 4 {
            bad_file += 1;
        }
    }
    gate.report(
        "feature stack",
        bad_interp == 0 && bad_mask == 0 && bad_file == 0,
        format!("20 meshes: {bad_interp} decode-plane mismatches, {bad_mask} vertex-count mismatches, {bad_file} FTS1 round-trip failures"),
    );
}

fn main() -> ExitCode {
    let mut gate = Gate { failures: 0 };
    delaunay(&mut gate);
    rasterizer(&mut gate);
    bitstream(&mut gate);
    let (manifest, elapsed) = desk_run();
    rate_quality(&mut gate, &manifest, elapsed);
    metric_oracles(&mut gate);
    blur_direction(&mut gate, &manifest);
    feature_stack(&mut gate);
    println!("{} of 7 criteria failed", gate.failures);
    if gate.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
