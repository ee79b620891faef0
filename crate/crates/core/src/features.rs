//! Eight-channel input stack for learned decoders.
//!
//! | plane | content                                         |
//! |-------|-------------------------------------------------|
//! | 0     | triangulation edges, binary                      |
//! | 1     | vertex locations, binary                         |
//! | 2..=4 | interpolated decode, R G B / 255                 |
//! | 5..=7 | vertex palette color / 255 at vertex pixels      |
//!
//! The vertex mask is needed because a pure-black vertex is otherwise
//! invisible in planes 5..=7.
//!
//! On disk (FTS1): `"FTS1"`, `N` as u32 LE, `8` as u32 LE, then the planes
//! in order, each `N * N` little-endian f32 samples, row-major.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::mesh::CompressedMesh;
use crate::rasterizer::{render, vertex_pixel, RasterError};

pub const CHANNELS: usize = 8;
pub const MAGIC: &[u8; 4] = b"FTS1";
pub const HEADER_BYTES: usize = 12;

pub const EDGE_PLANE: usize = 0;
pub const VERTEX_PLANE: usize = 1;
pub const INTERP_PLANES: std::ops::Range<usize> = 2..5;
pub const COLOR_PLANES: std::ops::Range<usize> = 5..8;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not an FTS1 file")]
    BadMagic,
    #[error("expected {CHANNELS} channels, found {0}")]
    Channels(u32),
    #[error("FTS1 payload is {found} bytes, expected {expected}")]
    Length { found: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    size: usize,
    data: Vec<f32>,
}

impl FeatureStack {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; CHANNELS * size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn plane(&self, k: usize) -> &[f32] {
        let n = self.size * self.size;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn plane_mut(&mut self, k: usize) -> &mut [f32] {
        let n = self.size * self.size;
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.size as u32).to_le_bytes());
        out.extend_from_slice(&(CHANNELS as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FeatureError> {
        if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
            return Err(FeatureError::BadMagic);
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let size = word(4) as usize;
        let channels = word(8);
        if channels as usize != CHANNELS {
            return Err(FeatureError::Channels(channels));
        }
        let expected = CHANNELS * size * size * 4;
        let payload = &bytes[HEADER_BYTES..];
        if payload.len() != expected {
            return Err(FeatureError::Length {
                found: payload.len(),
                expected,
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { size, data })
    }
}

/// Pixels on the integer line from `a` to `b`, one per major-axis step.
pub fn line_pixels(a: (usize, usize), b: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut x, mut y) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push((x as usize, y as usize));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

pub fn build_features(mesh: &CompressedMesh, size: usize) -> Result<FeatureStack, FeatureError> {
    let decoded = render(mesh, size)?;
    let triangulation = mesh.triangulate().map_err(RasterError::from)?;
    let m = mesh.grid_dim();
    let mut stack = FeatureStack::zeros(size);

    let pixels: Vec<(usize, usize)> = triangulation.vertices().iter().map(|&v| vertex_pixel(v, m, size)).collect();
    // Edges run from the lower-index endpoint, so the drawn line depends
    // only on geometry.
    let edges = stack.plane_mut(EDGE_PLANE);
    for (u, v) in triangulation.edges() {
        for (x, y) in line_pixels(pixels[u as usize], pixels[v as usize]) {
            edges[y * size + x] = 1.0;
        }
    }
    for (k, ch) in INTERP_PLANES.zip(0..3) {
        let plane = stack.plane_mut(k);
        for (i, px) in decoded.pixels().enumerate() {
            plane[i] = px[ch] as f32 / 255.0;
        }
    }
    for (&(x, y), rgb) in pixels.iter().zip(mesh.vertex_colors()) {
        let i = y * size + x;
        stack.plane_mut(VERTEX_PLANE)[i] = 1.0;
        for (k, ch) in COLOR_PLANES.zip(0..3) {
            stack.plane_mut(k)[i] = rgb[ch] as f32 / 255.0;
        }
    }
    Ok(stack)
}

pub fn export_features(stack: &FeatureStack, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    fs::write(path, stack.to_bytes())?;
    Ok(())
}

pub fn import_features(path: impl AsRef<Path>) -> Result<FeatureStack, FeatureError> {
    FeatureStack::from_bytes(&fs::read(path)?)
}
