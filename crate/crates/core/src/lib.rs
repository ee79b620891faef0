//! Triangle-mesh thumbnail codec.
//!
//! Images are encoded as a small palette plus a sparse set of colored
//! vertices on an `M x M` grid, typically in 200 bytes or less. Decoding
//! builds the Delaunay triangulation of the vertices and fills each triangle
//! by interpolating its vertex colors. The same mesh can also be expanded
//! into an eight-plane feature stack for learned decoders.
//!
//! ```
//! use tmc::{codec, bitstream, metrics, RasterImage};
//!
//! let img = RasterImage::from_fn(64, 64, |x, y| [(x * 4) as u8, (y * 4) as u8, 128]);
//! let config = codec::EncoderConfig { grid_dim: 9, palette_size: 8, proposals: 200, size: 64, ..Default::default() };
//! let out = codec::encode(&img, &config).unwrap();
//! let bytes = bitstream::serialize(&out.mesh).unwrap();
//! assert!(bytes.len() <= config.byte_budget);
//! let decoded = codec::decode(&bitstream::deserialize(&bytes).unwrap(), 64).unwrap();
//! assert!(metrics::psnr(&img, &decoded).unwrap() > 10.0);
//! ```

pub mod bitstream;
pub mod cli;
pub mod codec;
pub mod features;
pub mod geometry;
pub mod image;
pub mod mesh;
pub mod metrics;
pub mod rasterizer;

pub use crate::codec::{decode, encode, EncoderConfig};
pub use crate::geometry::{GridVertex, Triangulation};
pub use crate::image::{read_image, write_image, RasterImage};
pub use crate::mesh::{CompressedMesh, Rgb};
pub use crate::metrics::QualityReport;
