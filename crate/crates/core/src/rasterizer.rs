//! Triangle-fill decoder.
//!
//! Grid vertex `(row, col)` maps to pixel coordinates
//! `(col * N / (M - 1), row * N / (M - 1))`, so the corners land on the
//! image corners and every pixel center `(i + 0.5, j + 0.5)` is strictly
//! inside the hull. Multiplying by `2 (M - 1)` turns both vertex positions
//! and pixel centers into integers, and all coverage and blending work is
//! done on those integers.
//!
//! A pixel center on a shared edge belongs to the triangle that would
//! contain it after a nudge of `(ε, ε²)`; in this frame that is the usual
//! top-left rule, and it assigns every pixel to exactly one triangle.

use num_rational::Ratio;
use thiserror::Error;

use crate::geometry::{GeometryError, GridVertex, Triangulation};
use crate::image::RasterImage;
use crate::mesh::{CompressedMesh, MeshError, Rgb};

pub const MIN_SIZE: usize = 8;
pub const MAX_SIZE: usize = 8192;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("invalid mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("triangulation failed: {0}")]
    Geometry(#[from] GeometryError),
    #[error("grid dimension must be at least 2, got {0}")]
    GridTooSmall(u32),
    #[error("output size {size} must be in [max(8, M), 8192] for M = {grid_dim}")]
    BadSize { size: usize, grid_dim: u32 },
    #[error("degenerate triangle")]
    DegenerateTriangle,
    #[error("triangle index {index} out of range for {count} triangles")]
    TriangleIndex { index: usize, count: usize },
    #[error("target is {width}x{height}, expected {size}x{size}")]
    TargetSize { width: usize, height: usize, size: usize },
}

/// A continuous position in pixel space, held exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelCoord {
    pub x: Ratio<i64>,
    pub y: Ratio<i64>,
}

impl PixelCoord {
    pub fn new(x: Ratio<i64>, y: Ratio<i64>) -> Self {
        Self { x, y }
    }

    pub fn from_integers(x: i64, y: i64) -> Self {
        Self::new(Ratio::from_integer(x), Ratio::from_integer(y))
    }

    /// Center of pixel `(i, j)`.
    pub fn pixel_center(i: usize, j: usize) -> Self {
        Self::new(Ratio::new(2 * i as i64 + 1, 2), Ratio::new(2 * j as i64 + 1, 2))
    }

    pub fn to_f64(self) -> (f64, f64) {
        let f = |r: Ratio<i64>| *r.numer() as f64 / *r.denom() as f64;
        (f(self.x), f(self.y))
    }
}

pub fn vertex_to_pixel(v: GridVertex, grid_dim: u32, size: usize) -> Result<PixelCoord, RasterError> {
    if grid_dim < 2 {
        return Err(RasterError::GridTooSmall(grid_dim));
    }
    let span = grid_dim as i64 - 1;
    let n = size as i64;
    Ok(PixelCoord::new(
        Ratio::new(v.col as i64 * n, span),
        Ratio::new(v.row as i64 * n, span),
    ))
}

/// The pixel containing a vertex's mapped position: the floor of its
/// coordinates, clamped to `N - 1`. Returns `(x, y)`.
pub fn vertex_pixel(v: GridVertex, grid_dim: u32, size: usize) -> (usize, usize) {
    let span = (grid_dim as usize).max(2) - 1;
    let f = |c: u32| (c as usize * size / span).min(size - 1);
    (f(v.col), f(v.row))
}

fn cross(o: PixelCoord, a: PixelCoord, b: PixelCoord) -> Ratio<i64> {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Exact barycentric weights of `p` with respect to `tri`.
pub fn barycentric_exact(tri: [PixelCoord; 3], p: PixelCoord) -> Result<[Ratio<i64>; 3], RasterError> {
    let area = cross(tri[0], tri[1], tri[2]);
    if area == Ratio::from_integer(0) {
        return Err(RasterError::DegenerateTriangle);
    }
    Ok([
        cross(tri[1], tri[2], p) / area,
        cross(tri[2], tri[0], p) / area,
        cross(tri[0], tri[1], p) / area,
    ])
}

/// Floating-point barycentric weights of `p` with respect to `tri`.
pub fn barycentric(tri: [PixelCoord; 3], p: PixelCoord) -> Result<[f64; 3], RasterError> {
    let [a, b, c] = tri.map(PixelCoord::to_f64);
    let (px, py) = p.to_f64();
    let cross = |o: (f64, f64), u: (f64, f64), x: f64, y: f64| (u.0 - o.0) * (y - o.1) - (u.1 - o.1) * (x - o.0);
    let area = cross(a, b, c.0, c.1);
    if area == 0.0 {
        return Err(RasterError::DegenerateTriangle);
    }
    let w0 = cross(b, c, px, py) / area;
    let w1 = cross(c, a, px, py) / area;
    Ok([w0, w1, 1.0 - w0 - w1])
}

/// Pixel-space scaling shared by every triangle of one render.
#[derive(Debug, Clone, Copy)]
pub struct Rasterizer {
    grid_dim: u32,
    size: usize,
    /// `M - 1`: a pixel center `i + 0.5` scales to `(2i + 1) * span`.
    span: i64,
}

/// Ownership of a pixel center lying exactly on an edge with direction `(dx, dy)`.
#[inline]
fn owns_edge(dx: i64, dy: i64) -> bool {
    dy < 0 || (dy == 0 && dx > 0)
}

impl Rasterizer {
    pub fn new(grid_dim: u32, size: usize) -> Result<Self, RasterError> {
        if grid_dim < 2 {
            return Err(RasterError::GridTooSmall(grid_dim));
        }
        if size < MIN_SIZE || size < grid_dim as usize || size > MAX_SIZE {
            return Err(RasterError::BadSize { size, grid_dim });
        }
        Ok(Self {
            grid_dim,
            size,
            span: grid_dim as i64 - 1,
        })
    }

    pub fn grid_dim(&self) -> u32 {
        self.grid_dim
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn scaled(&self, v: GridVertex) -> (i64, i64) {
        let n2 = 2 * self.size as i64;
        (v.col as i64 * n2, v.row as i64 * n2)
    }

    /// Range of pixel indices whose centers lie in `[lo, hi]` (scaled units).
    fn pixel_range(&self, lo: i64, hi: i64) -> Option<(usize, usize)> {
        let step = 2 * self.span;
        let first = (lo - self.span + step - 1).div_euclid(step).max(0);
        let last = (hi - self.span).div_euclid(step).min(self.size as i64 - 1);
        (first <= last).then_some((first as usize, last as usize))
    }

    /// Visit every pixel owned by the triangle, passing its flat index
    /// (`y * N + x`) and the blended color.
    pub fn scan(
        &self,
        verts: [GridVertex; 3],
        colors: [Rgb; 3],
        mut f: impl FnMut(usize, Rgb),
    ) -> Result<(), RasterError> {
        let mut p = verts.map(|v| self.scaled(v));
        let mut c = colors;
        let area = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[1].1 - p[0].1) * (p[2].0 - p[0].0);
        if area == 0 {
            return Err(RasterError::DegenerateTriangle);
        }
        if area < 0 {
            p.swap(1, 2);
            c.swap(1, 2);
        }
        let area = area.abs();

        // Edge k is opposite vertex k, so its function is that vertex's weight.
        let edges = [(p[1], p[2]), (p[2], p[0]), (p[0], p[1])];
        let dx = edges.map(|(a, b)| b.0 - a.0);
        let dy = edges.map(|(a, b)| b.1 - a.1);
        let bias = [0, 1, 2].map(|k| if owns_edge(dx[k], dy[k]) { 0 } else { 1 });

        let xs = p.map(|q| q.0);
        let ys = p.map(|q| q.1);
        let Some((x0, x1)) = self.pixel_range(*xs.iter().min().unwrap(), *xs.iter().max().unwrap()) else {
            return Ok(());
        };
        let Some((y0, y1)) = self.pixel_range(*ys.iter().min().unwrap(), *ys.iter().max().unwrap()) else {
            return Ok(());
        };
        let step = 2 * self.span;
        let center = |i: usize| (2 * i as i64 + 1) * self.span;
        let n = self.size;
        let denom = 2 * area;

        for y in y0..=y1 {
            let py = center(y);
            let px = center(x0);
            let mut e = [0, 1, 2].map(|k| dx[k] * (py - edges[k].0 .1) - dy[k] * (px - edges[k].0 .0));
            let inc = dy.map(|d| -d * step);
            for x in x0..=x1 {
                if e[0] >= bias[0] && e[1] >= bias[1] && e[2] >= bias[2] {
                    let blend = |ch: usize| {
                        let num = e[0] * c[0][ch] as i64 + e[1] * c[1][ch] as i64 + e[2] * c[2][ch] as i64;
                        ((2 * num + area) / denom) as u8
                    };
                    f(y * n + x, [blend(0), blend(1), blend(2)]);
                }
                for k in 0..3 {
                    e[k] += inc[k];
                }
            }
        }
        Ok(())
    }

    /// Rewrite the pixels owned by the listed triangles.
    pub fn render_triangles(
        &self,
        triangulation: &Triangulation,
        colors: &[Rgb],
        triangles: impl IntoIterator<Item = usize>,
        target: &mut RasterImage,
    ) -> Result<(), RasterError> {
        if target.width() != self.size || target.height() != self.size {
            return Err(RasterError::TargetSize {
                width: target.width(),
                height: target.height(),
                size: self.size,
            });
        }
        let count = triangulation.triangles().len();
        let buf = target.as_raw_mut();
        for t in triangles {
            if t >= count {
                return Err(RasterError::TriangleIndex { index: t, count });
            }
            let ids = triangulation.triangles()[t];
            self.scan(
                triangulation.triangle_vertices(t),
                ids.map(|i| colors[i as usize]),
                |idx, rgb| buf[idx * 3..idx * 3 + 3].copy_from_slice(&rgb),
            )?;
        }
        Ok(())
    }

    /// Number of triangles claiming each pixel, row-major.
    pub fn coverage(&self, triangulation: &Triangulation) -> Result<Vec<u32>, RasterError> {
        let mut counts = vec![0u32; self.size * self.size];
        for t in 0..triangulation.triangles().len() {
            self.scan(triangulation.triangle_vertices(t), [[0; 3]; 3], |idx, _| counts[idx] += 1)?;
        }
        Ok(counts)
    }
}

/// Decode a mesh to an `N x N` image.
pub fn render(mesh: &CompressedMesh, size: usize) -> Result<RasterImage, RasterError> {
    mesh.validate()?;
    let rasterizer = Rasterizer::new(mesh.grid_dim(), size)?;
    let triangulation = mesh.triangulate()?;
    let mut img = RasterImage::new(size, size);
    rasterizer.render_triangles(
        &triangulation,
        &mesh.vertex_colors(),
        0..triangulation.triangles().len(),
        &mut img,
    )?;
    Ok(img)
}

/// Re-render only the pixels owned by `triangles` (indices into the mesh's
/// triangulation) into `target`.
pub fn render_region(
    mesh: &CompressedMesh,
    size: usize,
    triangles: &[usize],
    target: &mut RasterImage,
) -> Result<(), RasterError> {
    mesh.validate()?;
    let rasterizer = Rasterizer::new(mesh.grid_dim(), size)?;
    let triangulation = mesh.triangulate()?;
    rasterizer.render_triangles(&triangulation, &mesh.vertex_colors(), triangles.iter().copied(), target)
}
