//! The codec's logical payload: a palette plus colored grid vertices.

use thiserror::Error;

use crate::geometry::{delaunay_triangulate, GeometryError, GridVertex, Triangulation};

pub type Rgb = [u8; 3];

pub const MIN_GRID_DIM: u32 = 2;
pub const MAX_GRID_DIM: u32 = 255;
pub const MAX_PALETTE: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeshError {
    #[error("grid dimension {0} outside [2, 255]")]
    GridDim(u32),
    #[error("palette size {0} outside [1, 255]")]
    PaletteSize(usize),
    #[error("vertex ({row}, {col}) outside the {grid_dim}x{grid_dim} grid")]
    OutOfGrid { row: u32, col: u32, grid_dim: u32 },
    #[error("vertices not strictly increasing at position {0}")]
    NotCanonical(usize),
    #[error("grid corner ({row}, {col}) missing")]
    MissingCorner { row: u32, col: u32 },
    #[error("color index {index} out of range for palette of {palette_len}")]
    ColorIndex { index: u8, palette_len: usize },
}

/// Palette plus vertices in ascending linear-index order, each tagged with
/// a palette index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompressedMesh {
    pub(crate) grid_dim: u32,
    pub(crate) palette: Vec<Rgb>,
    pub(crate) vertices: Vec<(GridVertex, u8)>,
}

impl CompressedMesh {
    /// Builds a mesh, checking every invariant. `vertices` must already be
    /// in canonical order.
    pub fn new(
        grid_dim: u32,
        palette: Vec<Rgb>,
        vertices: Vec<(GridVertex, u8)>,
    ) -> Result<Self, MeshError> {
        let mesh = Self {
            grid_dim,
            palette,
            vertices,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Like [`CompressedMesh::new`] but sorts the vertices first.
    pub fn from_unsorted(
        grid_dim: u32,
        palette: Vec<Rgb>,
        mut vertices: Vec<(GridVertex, u8)>,
    ) -> Result<Self, MeshError> {
        vertices.sort_by_key(|&(v, _)| v);
        Self::new(grid_dim, palette, vertices)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let m = self.grid_dim;
        if !(MIN_GRID_DIM..=MAX_GRID_DIM).contains(&m) {
            return Err(MeshError::GridDim(m));
        }
        if self.palette.is_empty() || self.palette.len() > MAX_PALETTE {
            return Err(MeshError::PaletteSize(self.palette.len()));
        }
        for (i, &(v, color)) in self.vertices.iter().enumerate() {
            if v.row >= m || v.col >= m {
                return Err(MeshError::OutOfGrid {
                    row: v.row,
                    col: v.col,
                    grid_dim: m,
                });
            }
            if i > 0 && self.vertices[i - 1].0 >= v {
                return Err(MeshError::NotCanonical(i));
            }
            if color as usize >= self.palette.len() {
                return Err(MeshError::ColorIndex {
                    index: color,
                    palette_len: self.palette.len(),
                });
            }
        }
        for corner in GridVertex::corners(m) {
            if self.vertices.binary_search_by_key(&corner, |&(v, _)| v).is_err() {
                return Err(MeshError::MissingCorner {
                    row: corner.row,
                    col: corner.col,
                });
            }
        }
        Ok(())
    }

    /// The smallest valid mesh: four corners, all colored with entry 0.
    pub fn corners_only(grid_dim: u32, palette: Vec<Rgb>) -> Result<Self, MeshError> {
        let vertices = GridVertex::corners(grid_dim.max(MIN_GRID_DIM))
            .into_iter()
            .map(|v| (v, 0))
            .collect();
        Self::new(grid_dim, palette, vertices)
    }

    pub fn grid_dim(&self) -> u32 {
        self.grid_dim
    }

    pub fn palette(&self) -> &[Rgb] {
        &self.palette
    }

    pub fn vertices(&self) -> &[(GridVertex, u8)] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn positions(&self) -> Vec<GridVertex> {
        self.vertices.iter().map(|&(v, _)| v).collect()
    }

    /// Palette color of each vertex, in vertex order.
    pub fn vertex_colors(&self) -> Vec<Rgb> {
        self.vertices
            .iter()
            .map(|&(_, c)| self.palette[c as usize])
            .collect()
    }

    pub fn color_of(&self, v: GridVertex) -> Option<Rgb> {
        self.vertices
            .binary_search_by_key(&v, |&(p, _)| p)
            .ok()
            .map(|i| self.palette[self.vertices[i].1 as usize])
    }

    pub fn triangulate(&self) -> Result<Triangulation, GeometryError> {
        delaunay_triangulate(&self.positions(), self.grid_dim)
    }
}
