//! The `tmc` command line: encode, decode, feature export, metrics, blur,
//! and the corpus benchmark.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitstream::{deserialize, serialize};
use crate::codec::{decode, encode, EncoderConfig};
use crate::features::{build_features, export_features};
use crate::image::{is_image_path, read_image, write_image, RasterImage};
use crate::metrics::{gaussian_blur, psnr, ssim, QualityReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Blur radius of the control baseline.
pub const CONTROL_BLUR_RADIUS: f64 = 2.0;
/// Pass counts of the two control rows.
pub const CONTROL_BLUR_PASSES: [u32; 2] = [1, 5];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

fn data<E: fmt::Display>(context: impl fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "tmc", version, about = "Triangle-mesh thumbnail codec")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode an image into a .tmc bitstream.
    Encode {
        input: PathBuf,
        #[command(flatten)]
        encoder: EncoderFlags,
        /// Output .tmc path (default: input with a .tmc extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a .tmc bitstream into a PPM or PNG image.
    Decode {
        input: PathBuf,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the 8-plane FTS1 feature stack of a .tmc bitstream.
    Features {
        input: PathBuf,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print PSNR and SSIM of a reconstruction against its original as JSON.
    Metrics {
        original: PathBuf,
        reconstruction: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gaussian-blur an image.
    Blur {
        input: PathBuf,
        #[arg(long, default_value_t = CONTROL_BLUR_RADIUS)]
        radius: f64,
        #[arg(long, default_value_t = 1)]
        passes: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode and score every image in a directory.
    Bench {
        corpus: PathBuf,
        #[command(flatten)]
        encoder: EncoderFlags,
        /// Output directory for the manifest, CSV, bitstreams and decodes.
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        /// Directory of learned-decoder outputs, matched by file stem.
        #[arg(long)]
        nn_dir: Option<PathBuf>,
        /// Also write original | interpolated | neural comparison strips.
        #[arg(long)]
        side_by_side: bool,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct EncoderFlags {
    /// Grid dimension M.
    #[arg(long)]
    pub grid: Option<u32>,
    /// Palette entries K.
    #[arg(long)]
    pub palette: Option<usize>,
    /// Byte budget.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Hillclimbing proposals.
    #[arg(long)]
    pub proposals: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Image size N.
    #[arg(long)]
    pub size: Option<usize>,
    /// JSON encoder config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl EncoderFlags {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<EncoderConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => EncoderConfig::default(),
        };
        if let Some(v) = self.grid {
            config.grid_dim = v;
        }
        if let Some(v) = self.palette {
            config.palette_size = v;
        }
        if let Some(v) = self.budget {
            config.byte_budget = v;
        }
        if let Some(v) = self.proposals {
            config.proposals = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.size {
            config.size = v;
        }
        Ok(config)
    }
}

/// Load an image and bring it to `size x size` (center crop, then resize).
pub fn load_square(path: &Path, size: usize) -> Result<RasterImage, CliError> {
    let img = read_image(path).map_err(data(path.display()))?;
    Ok(img.center_square(size))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodeSummary {
    pub bytes: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub vertices: usize,
    pub palette: usize,
    pub initial_mse: f64,
    pub final_mse: f64,
}

pub fn cmd_encode(input: &Path, config: &EncoderConfig, out: &Path) -> Result<EncodeSummary, CliError> {
    let img = load_square(input, config.size)?;
    let result = encode(&img, config).map_err(data("encode"))?;
    let bytes = serialize(&result.mesh).map_err(data("serialize"))?;
    fs::write(out, &bytes).map_err(data(out.display()))?;
    let decoded = decode(&result.mesh, config.size).map_err(data("decode"))?;
    Ok(EncodeSummary {
        bytes: bytes.len(),
        psnr: psnr(&img, &decoded).map_err(data("psnr"))?,
        ssim: ssim(&img, &decoded).map_err(data("ssim"))?,
        vertices: result.mesh.len(),
        palette: result.mesh.palette().len(),
        initial_mse: result.initial_mse(),
        final_mse: result.final_mse(),
    })
}

fn read_tmc(path: &Path) -> Result<crate::mesh::CompressedMesh, CliError> {
    let bytes = fs::read(path).map_err(data(path.display()))?;
    deserialize(&bytes).map_err(data(path.display()))
}

pub fn cmd_decode(input: &Path, size: usize, out: &Path) -> Result<(), CliError> {
    let mesh = read_tmc(input)?;
    let img = decode(&mesh, size).map_err(data("decode"))?;
    write_image(&img, out).map_err(data(out.display()))
}

pub fn cmd_features(input: &Path, size: usize, out: &Path) -> Result<(), CliError> {
    let mesh = read_tmc(input)?;
    let stack = build_features(&mesh, size).map_err(data("features"))?;
    export_features(&stack, out).map_err(data(out.display()))
}

pub fn cmd_metrics(original: &Path, reconstruction: &Path) -> Result<QualityReport, CliError> {
    let a = read_image(original).map_err(data(original.display()))?;
    let b = read_image(reconstruction).map_err(data(reconstruction.display()))?;
    QualityReport::compare(&a, &b).map_err(data("metrics"))
}

pub fn cmd_blur(input: &Path, radius: f64, passes: u32, out: &Path) -> Result<(), CliError> {
    let img = read_image(input).map_err(data(input.display()))?;
    let blurred = gaussian_blur(&img, radius, passes).map_err(|e| CliError::Usage(e.to_string()))?;
    write_image(&blurred, out).map_err(data(out.display()))
}

/// One corpus image's results.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct BenchRow {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<QualityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_monotone: Option<bool>,
    /// Blur-control rows, one per entry of [`CONTROL_BLUR_PASSES`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blur: Vec<QualityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nn: Option<QualityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nn_improved: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Aggregates {
    pub images: usize,
    pub failed: usize,
    pub mean_psnr: f64,
    pub median_psnr: f64,
    pub mean_ssim: f64,
    pub median_ssim: f64,
    pub mean_bytes: f64,
    pub median_bytes: f64,
    /// Mean PSNR and SSIM per blur-control row.
    pub blur_mean_psnr: Vec<f64>,
    pub blur_mean_ssim: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nn_mean_psnr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nn_mean_ssim: Option<f64>,
    /// Share of images whose learned decode beats the interpolated one on PSNR.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improved_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub config: EncoderConfig,
    pub rows: Vec<BenchRow>,
    pub aggregates: Aggregates,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mid = s.len() / 2;
    if s.len() % 2 == 1 {
        s[mid]
    } else {
        (s[mid - 1] + s[mid]) / 2.0
    }
}

impl Aggregates {
    pub fn from_rows(rows: &[BenchRow]) -> Self {
        let ok: Vec<&QualityReport> = rows.iter().filter_map(|r| r.report.as_ref()).collect();
        let psnrs: Vec<f64> = ok.iter().map(|r| r.psnr).collect();
        let ssims: Vec<f64> = ok.iter().map(|r| r.ssim).collect();
        let bytes: Vec<f64> = ok.iter().map(|r| r.bytes.unwrap_or(0) as f64).collect();
        let blur_rows = rows.iter().map(|r| r.blur.len()).max().unwrap_or(0);
        let blur_stat = |f: fn(&QualityReport) -> f64| -> Vec<f64> {
            (0..blur_rows)
                .map(|k| mean(&rows.iter().filter_map(|r| r.blur.get(k)).map(f).collect::<Vec<_>>()))
                .collect()
        };
        let nn: Vec<&QualityReport> = rows.iter().filter_map(|r| r.nn.as_ref()).collect();
        let improved: Vec<bool> = rows.iter().filter_map(|r| r.nn_improved).collect();
        Self {
            images: rows.len(),
            failed: rows.iter().filter(|r| r.error.is_some()).count(),
            mean_psnr: mean(&psnrs),
            median_psnr: median(&psnrs),
            mean_ssim: mean(&ssims),
            median_ssim: median(&ssims),
            mean_bytes: mean(&bytes),
            median_bytes: median(&bytes),
            blur_mean_psnr: blur_stat(|r| r.psnr),
            blur_mean_ssim: blur_stat(|r| r.ssim),
            nn_mean_psnr: (!nn.is_empty()).then(|| mean(&nn.iter().map(|r| r.psnr).collect::<Vec<_>>())),
            nn_mean_ssim: (!nn.is_empty()).then(|| mean(&nn.iter().map(|r| r.ssim).collect::<Vec<_>>())),
            improved_fraction: (!improved.is_empty())
                .then(|| improved.iter().filter(|&&b| b).count() as f64 / improved.len() as f64),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    /// Where to write the manifest and per-image artifacts; `None` keeps
    /// everything in memory.
    pub out_dir: Option<PathBuf>,
    pub nn_dir: Option<PathBuf>,
    pub side_by_side: bool,
}

/// Image files in `dir`, sorted by file name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(data(dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_path(p))
        .collect();
    files.sort();
    Ok(files)
}

fn find_sibling(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["png", "ppm"].iter().map(|ext| dir.join(format!("{stem}.{ext}"))).find(|p| p.is_file())
}

fn side_by_side(images: &[&RasterImage]) -> RasterImage {
    let n = images[0].width();
    RasterImage::from_fn(n * images.len(), n, |x, y| images[x / n].get(x % n, y))
}

fn bench_one(path: &Path, config: &EncoderConfig, options: &BenchOptions) -> Result<BenchRow, String> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
    let img = load_square(path, config.size).map_err(|e| e.to_string())?;
    let result = encode(&img, config).map_err(|e| e.to_string())?;
    let bytes = serialize(&result.mesh).map_err(|e| e.to_string())?;
    let decoded = decode(&result.mesh, config.size).map_err(|e| e.to_string())?;
    let report = QualityReport::compare(&img, &decoded).map_err(|e| e.to_string())?.with_bytes(bytes.len());
    let monotone = result.trace.windows(2).all(|w| w[1].mse <= w[0].mse);

    let mut blur = Vec::new();
    for passes in CONTROL_BLUR_PASSES {
        let blurred = gaussian_blur(&decoded, CONTROL_BLUR_RADIUS, passes).map_err(|e| e.to_string())?;
        blur.push(QualityReport::compare(&img, &blurred).map_err(|e| e.to_string())?);
    }

    let mut nn_image = None;
    if let Some(dir) = &options.nn_dir {
        let p = find_sibling(dir, &stem).ok_or_else(|| format!("no neural decode for {stem} in {}", dir.display()))?;
        nn_image = Some(read_image(&p).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    let nn = nn_image
        .as_ref()
        .map(|nn| QualityReport::compare(&img, nn).map_err(|e| e.to_string()))
        .transpose()?;

    if let Some(out) = &options.out_dir {
        fs::write(out.join(format!("{stem}.tmc")), &bytes).map_err(|e| e.to_string())?;
        write_image(&decoded, out.join(format!("{stem}.interp.png"))).map_err(|e| e.to_string())?;
        if options.side_by_side {
            let mut strip = vec![&img, &decoded];
            if let Some(nn) = &nn_image {
                strip.push(nn);
            }
            write_image(&side_by_side(&strip), out.join(format!("{stem}.compare.png"))).map_err(|e| e.to_string())?;
        }
    }

    Ok(BenchRow {
        name: stem,
        nn_improved: nn.as_ref().map(|n| n.psnr > report.psnr),
        report: Some(report),
        initial_mse: Some(result.initial_mse()),
        final_mse: Some(result.final_mse()),
        trace_monotone: Some(monotone),
        blur,
        nn,
        error: None,
    })
}

/// Encode, decode and score every image in `corpus`. Per-image failures are
/// recorded in their row; rows are ordered by file name.
pub fn run_bench(corpus: &Path, config: &EncoderConfig, options: &BenchOptions) -> Result<RunManifest, CliError> {
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let files = corpus_files(corpus)?;
    if let Some(out) = &options.out_dir {
        fs::create_dir_all(out).map_err(data(out.display()))?;
    }
    let rows: Vec<BenchRow> = files
        .par_iter()
        .map(|path| {
            bench_one(path, config, options).unwrap_or_else(|error| BenchRow {
                name: path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
                error: Some(error),
                ..Default::default()
            })
        })
        .collect();
    let manifest = RunManifest {
        config: config.clone(),
        aggregates: Aggregates::from_rows(&rows),
        rows,
    };
    if let Some(out) = &options.out_dir {
        write_manifest(&manifest, out, options.nn_dir.is_some())?;
    }
    Ok(manifest)
}

fn write_manifest(manifest: &RunManifest, out: &Path, with_nn: bool) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(out.join("manifest.json"), json).map_err(data("manifest.json"))?;

    let mut lines = Vec::new();
    for row in &manifest.rows {
        serde_json::to_writer(&mut lines, row).expect("row serializes");
        lines.push(b'\n');
    }
    fs::write(out.join("rows.jsonl"), lines).map_err(data("rows.jsonl"))?;

    let mut csv = csv::Writer::from_path(out.join("summary.csv")).map_err(data("summary.csv"))?;
    let mut header = vec!["name", "bytes", "psnr", "ssim", "blur1_psnr", "blur1_ssim", "blur5_psnr", "blur5_ssim"];
    if with_nn {
        header.extend(["nn_psnr", "nn_ssim", "improved"]);
    }
    header.push("error");
    csv.write_record(&header).map_err(data("summary.csv"))?;
    let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for row in &manifest.rows {
        let r = row.report.as_ref();
        let mut rec = vec![
            row.name.clone(),
            r.and_then(|r| r.bytes).map(|b| b.to_string()).unwrap_or_default(),
            f(r.map(|r| r.psnr)),
            f(r.map(|r| r.ssim)),
        ];
        for k in 0..CONTROL_BLUR_PASSES.len() {
            rec.push(f(row.blur.get(k).map(|b| b.psnr)));
            rec.push(f(row.blur.get(k).map(|b| b.ssim)));
        }
        if with_nn {
            rec.push(f(row.nn.as_ref().map(|n| n.psnr)));
            rec.push(f(row.nn.as_ref().map(|n| n.ssim)));
            rec.push(row.nn_improved.map(|b| b.to_string()).unwrap_or_default());
        }
        rec.push(row.error.clone().unwrap_or_default());
        csv.write_record(&rec).map_err(data("summary.csv"))?;
    }
    csv.flush().map_err(data("summary.csv"))?;
    Ok(())
}

fn default_out(input: &Path, ext: &str) -> PathBuf {
    input.with_extension(ext)
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string(value).expect("value serializes");
    if let Some(path) = out {
        fs::write(path, format!("{text}\n")).map_err(data(path.display()))?;
    }
    println!("{text}");
    Ok(())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Encode { input, encoder, out } => {
            let config = encoder.resolve()?;
            config.validate().map_err(|e| CliError::Data(e.to_string()))?;
            let out = out.unwrap_or_else(|| default_out(&input, "tmc"));
            let summary = cmd_encode(&input, &config, &out)?;
            emit_json(&summary, None)
        }
        Command::Decode { input, size, out } => cmd_decode(&input, size, &out.unwrap_or_else(|| default_out(&input, "ppm"))),
        Command::Features { input, size, out } => {
            cmd_features(&input, size, &out.unwrap_or_else(|| default_out(&input, "fts")))
        }
        Command::Metrics {
            original,
            reconstruction,
            out,
        } => emit_json(&cmd_metrics(&original, &reconstruction)?, out.as_deref()),
        Command::Blur {
            input,
            radius,
            passes,
            out,
        } => cmd_blur(&input, radius, passes, &out.unwrap_or_else(|| default_out(&input, "blur.ppm"))),
        Command::Bench {
            corpus,
            encoder,
            out,
            nn_dir,
            side_by_side,
        } => {
            let config = encoder.resolve()?;
            let options = BenchOptions {
                out_dir: Some(out.clone()),
                nn_dir,
                side_by_side,
            };
            let manifest = run_bench(&corpus, &config, &options)?;
            let a = &manifest.aggregates;
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(
                stdout,
                "{} images ({} failed): mean PSNR {:.2} dB, mean SSIM {:.4}, mean bytes {:.1}; wrote {}",
                a.images,
                a.failed,
                a.mean_psnr,
                a.mean_ssim,
                a.mean_bytes,
                out.display()
            );
            Ok(())
        }
    }
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("tmc: {e}");
            e.exit_code()
        }
    }
}
