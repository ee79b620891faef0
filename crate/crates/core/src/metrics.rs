//! Full-reference quality metrics and the Gaussian-blur control.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::RasterImage;

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const PEAK: f64 = 255.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image is {0}x{1}; SSIM needs at least 11x11")]
    TooSmall(usize, usize),
    #[error("invalid argument: {0}")]
    BadArgument(String),
}

fn check_dims(a: &RasterImage, b: &RasterImage) -> Result<(), MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

/// Sum of squared sample differences.
pub fn sse(a: &RasterImage, b: &RasterImage) -> Result<u64, MetricError> {
    check_dims(a, b)?;
    Ok(a.as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum())
}

/// Mean over all `W * H * 3` samples of the squared difference.
pub fn mse(a: &RasterImage, b: &RasterImage) -> Result<f64, MetricError> {
    let total = sse(a, b)?;
    Ok(total as f64 / a.as_raw().len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP)
    }
}

pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64, MetricError> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// Normalized 1-D Gaussian with the given half-width.
pub fn gaussian_kernel(sigma: f64, half_width: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (0..=2 * half_width)
        .map(|i| {
            let d = i as f64 - half_width as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

fn channel_plane(img: &RasterImage, ch: usize) -> Vec<f64> {
    img.as_raw().iter().skip(ch).step_by(3).map(|&v| v as f64).collect()
}

/// Valid-region separable correlation: output is `(w - k + 1) x (h - k + 1)`.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&src[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(j, wt)| wt * rows[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over every valid 11x11 window position and all three channels,
/// Gaussian-weighted with σ = 1.5, K1 = 0.01, K2 = 0.03, L = 255.
pub fn ssim(a: &RasterImage, b: &RasterImage) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall(w, h));
    }
    let kernel = gaussian_kernel(SSIM_SIGMA, SSIM_WINDOW / 2);
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..3 {
        let x = channel_plane(a, ch);
        let y = channel_plane(b, ch);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|p| filter_valid(p, w, h, &kernel));
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        count += mx.len();
    }
    Ok(total / count as f64)
}

/// Separable Gaussian blur with σ = `radius` and half-width `ceil(3σ)`,
/// clamp-to-edge, applied `passes` times. Intermediate passes stay in
/// floating point; the result is rounded once at the end.
pub fn gaussian_blur(img: &RasterImage, radius: f64, passes: u32) -> Result<RasterImage, MetricError> {
    let planes = blur_planes(img, radius, passes)?;
    let mut out = RasterImage::new(img.width(), img.height());
    let buf = out.as_raw_mut();
    for (ch, plane) in planes.iter().enumerate() {
        for (i, v) in plane.iter().enumerate() {
            buf[i * 3 + ch] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Unrounded blur output, one plane per channel.
pub fn blur_planes(img: &RasterImage, radius: f64, passes: u32) -> Result<[Vec<f64>; 3], MetricError> {
    if !radius.is_finite() || radius < 1.0 {
        return Err(MetricError::BadArgument(format!("blur radius must be >= 1, got {radius}")));
    }
    if passes < 1 {
        return Err(MetricError::BadArgument("blur needs at least one pass".into()));
    }
    let half = (3.0 * radius).ceil() as usize;
    let kernel = gaussian_kernel(radius, half);
    let (w, h) = (img.width(), img.height());
    Ok([0, 1, 2].map(|ch| {
        let mut plane = channel_plane(img, ch);
        let mut tmp = vec![0.0; w * h];
        for _ in 0..passes {
            for y in 0..h {
                for x in 0..w {
                    tmp[y * w + x] = kernel
                        .iter()
                        .enumerate()
                        .map(|(j, k)| {
                            let sx = (x as isize + j as isize - half as isize).clamp(0, w as isize - 1) as usize;
                            k * plane[y * w + sx]
                        })
                        .sum();
                }
            }
            for y in 0..h {
                for x in 0..w {
                    plane[y * w + x] = kernel
                        .iter()
                        .enumerate()
                        .map(|(j, k)| {
                            let sy = (y as isize + j as isize - half as isize).clamp(0, h as isize - 1) as usize;
                            k * tmp[sy * w + x]
                        })
                        .sum();
                }
            }
        }
        plane
    }))
}

/// Semantic-preservation scores, filled in by the external classifier harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticScores {
    pub l2: f64,
    pub hit_at_1: bool,
    pub hit_at_5: bool,
    pub hit_at_10: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic: Option<SemanticScores>,
}

impl QualityReport {
    pub fn compare(original: &RasterImage, reconstruction: &RasterImage) -> Result<Self, MetricError> {
        Ok(Self {
            psnr: psnr(original, reconstruction)?,
            ssim: ssim(original, reconstruction)?,
            bytes: None,
            semantic: None,
        })
    }

    pub fn with_bytes(mut self, bytes: usize) -> Self {
        self.bytes = Some(bytes);
        self
    }
}
