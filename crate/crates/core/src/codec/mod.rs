//! Stochastic-hillclimbing encoder and the matching decoder.

mod encoder;
mod moves;
mod palette;

pub use encoder::{encode, init_mesh, EncodeOutput, Encoder, TracePoint};
pub use moves::{propose_move, Move, MoveKind, MoveWeights, MAX_MOVE_RETRIES};
pub use palette::{init_palette, nearest_index};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstream::BitstreamError;
use crate::geometry::GeometryError;
use crate::image::RasterImage;
use crate::mesh::{CompressedMesh, MeshError, MAX_GRID_DIM, MAX_PALETTE, MIN_GRID_DIM};
use crate::rasterizer::{render, RasterError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("byte budget {budget} is below the minimal mesh size of {minimum} bytes")]
    InfeasibleBudget { budget: usize, minimum: usize },
    #[error("image is {width}x{height}, expected {size}x{size}")]
    ImageSize { width: usize, height: usize, size: usize },
    #[error("no legal move found after {0} attempts")]
    NoLegalMove(usize),
    #[error("incremental raster diverged from a full decode")]
    RasterDiverged,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bitstream(#[from] BitstreamError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Grid dimension `M`.
    pub grid_dim: u32,
    /// Palette entries `K`.
    pub palette_size: usize,
    pub byte_budget: usize,
    pub proposals: u64,
    pub seed: u64,
    /// Output resolution `N`.
    pub size: usize,
    pub move_weights: MoveWeights,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            grid_dim: 33,
            palette_size: 32,
            byte_budget: 200,
            proposals: 20_000,
            seed: 0,
            size: 256,
            move_weights: MoveWeights::default(),
        }
    }
}

impl EncoderConfig {
    /// Size of the four-corner mesh with a full palette.
    pub fn minimal_mesh_bytes(&self) -> usize {
        let corners = crate::geometry::GridVertex::corners(self.grid_dim.max(MIN_GRID_DIM));
        crate::bitstream::size_bits_of(self.grid_dim, self.palette_size, corners).div_ceil(8) as usize
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if !(MIN_GRID_DIM..=MAX_GRID_DIM).contains(&self.grid_dim) {
            return Err(CodecError::Config(format!("grid dimension {} outside [2, 255]", self.grid_dim)));
        }
        if !(1..=MAX_PALETTE).contains(&self.palette_size) {
            return Err(CodecError::Config(format!("palette size {} outside [1, 255]", self.palette_size)));
        }
        crate::rasterizer::Rasterizer::new(self.grid_dim, self.size)?;
        self.move_weights.validate()?;
        let minimum = self.minimal_mesh_bytes();
        if self.byte_budget < minimum {
            return Err(CodecError::InfeasibleBudget {
                budget: self.byte_budget,
                minimum,
            });
        }
        Ok(())
    }
}

/// Same as [`render`]: triangulate, then interpolate vertex colors.
pub fn decode(mesh: &CompressedMesh, size: usize) -> Result<RasterImage, CodecError> {
    Ok(render(mesh, size)?)
}
