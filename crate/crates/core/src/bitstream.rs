//! Bit-exact `.tmc` serialization of [`CompressedMesh`].
//!
//! Layout, MSB-first, zero-padded to a byte boundary:
//!
//! | field          | bits                          |
//! |----------------|-------------------------------|
//! | version (= 1)  | 4                             |
//! | M              | 8                             |
//! | K              | 8                             |
//! | palette        | K × 24 (R, G, B)              |
//! | V              | 16                            |
//! | positions      | V Elias-gamma gap codes       |
//! | color indices  | V × ceil(log2 K)              |
//!
//! Gaps are taken over the sorted linear indices: `g0 = x0 + 1`,
//! `gt = xt - x(t-1)`, so every gap is at least 1.

use thiserror::Error;

use crate::geometry::GridVertex;
use crate::mesh::{CompressedMesh, MeshError, Rgb};

pub const FORMAT_VERSION: u8 = 1;

const HEADER_BITS: u64 = 4 + 8 + 8 + 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitstreamError {
    #[error("stream ended early")]
    Truncated,
    #[error("unsupported format version {0}")]
    BadVersion(u8),
    #[error("malformed Elias-gamma code")]
    BadGamma,
    #[error("vertex linear index {index} outside a {grid_dim}x{grid_dim} grid")]
    VertexOutOfRange { index: u64, grid_dim: u32 },
    #[error("padding bits are not zero")]
    NonZeroPadding,
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid mesh: {0}")]
    Mesh(#[from] MeshError),
}

/// Appends bits to a byte buffer, most significant bit first.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    pub fn write_bit(&mut self, bit: bool) {
        if self.bits.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> (self.bits % 8);
        }
        self.bits += 1;
    }

    /// Writes the low `count` bits of `value`, high bit first.
    pub fn write_bits(&mut self, value: u64, count: u32) {
        debug_assert!(count <= 64);
        for i in (0..count).rev() {
            self.write_bit((value >> i) & 1 == 1);
        }
    }

    /// Elias-gamma code of `value >= 1`: `floor(log2 v)` zeros, then `v` in binary.
    pub fn write_gamma(&mut self, value: u64) {
        assert!(value >= 1, "Elias-gamma codes positive integers only");
        let width = 64 - value.leading_zeros();
        self.write_bits(0, width - 1);
        self.write_bits(value, width);
    }

    /// Pads with zero bits to the next byte boundary.
    pub fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

/// Reads bits MSB-first; never reads past the end of its slice.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.bytes.len() as u64 * 8 - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool, BitstreamError> {
        let byte = *self
            .bytes
            .get((self.pos / 8) as usize)
            .ok_or(BitstreamError::Truncated)?;
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, count: u32) -> Result<u64, BitstreamError> {
        if (count as u64) > self.remaining() {
            return Err(BitstreamError::Truncated);
        }
        let mut v = 0u64;
        for _ in 0..count {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_gamma(&mut self) -> Result<u64, BitstreamError> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 32 {
                return Err(BitstreamError::BadGamma);
            }
        }
        Ok((1 << zeros) | self.read_bits(zeros)?)
    }
}

/// `2 floor(log2 v) + 1`.
pub fn gamma_len(value: u64) -> u64 {
    debug_assert!(value >= 1);
    2 * (63 - value.leading_zeros() as u64) + 1
}

/// Bits per color index for a palette of `k` entries.
pub fn index_bits(k: usize) -> u32 {
    if k <= 1 {
        0
    } else {
        usize::BITS - (k - 1).leading_zeros()
    }
}

/// Exact bit count of the encoding, padding excluded.
pub fn size_bits_of(grid_dim: u32, palette_len: usize, positions: impl IntoIterator<Item = GridVertex>) -> u64 {
    let mut bits = HEADER_BITS + 24 * palette_len as u64;
    let per_index = index_bits(palette_len) as u64;
    let mut prev: Option<u64> = None;
    for v in positions {
        let x = v.linear_index(grid_dim) as u64;
        let gap = match prev {
            None => x + 1,
            Some(p) => x - p,
        };
        bits += gamma_len(gap) + per_index;
        prev = Some(x);
    }
    bits
}

/// Length of `serialize(mesh)` without building it.
pub fn size_bytes(mesh: &CompressedMesh) -> Result<usize, BitstreamError> {
    mesh.validate()?;
    Ok(size_bits_of(mesh.grid_dim(), mesh.palette().len(), mesh.vertices().iter().map(|&(v, _)| v)).div_ceil(8) as usize)
}

pub fn serialize(mesh: &CompressedMesh) -> Result<Vec<u8>, BitstreamError> {
    mesh.validate()?;
    let m = mesh.grid_dim();
    let mut w = BitWriter::new();
    w.write_bits(FORMAT_VERSION as u64, 4);
    w.write_bits(m as u64, 8);
    w.write_bits(mesh.palette().len() as u64, 8);
    for rgb in mesh.palette() {
        for &c in rgb {
            w.write_bits(c as u64, 8);
        }
    }
    w.write_bits(mesh.len() as u64, 16);
    let mut prev: Option<u64> = None;
    for &(v, _) in mesh.vertices() {
        let x = v.linear_index(m) as u64;
        w.write_gamma(match prev {
            None => x + 1,
            Some(p) => x - p,
        });
        prev = Some(x);
    }
    let per_index = index_bits(mesh.palette().len());
    for &(_, c) in mesh.vertices() {
        w.write_bits(c as u64, per_index);
    }
    Ok(w.finish())
}

pub fn deserialize(bytes: &[u8]) -> Result<CompressedMesh, BitstreamError> {
    let mut r = BitReader::new(bytes);
    let version = r.read_bits(4)? as u8;
    if version != FORMAT_VERSION {
        return Err(BitstreamError::BadVersion(version));
    }
    let m = r.read_bits(8)? as u32;
    if m < 2 {
        return Err(MeshError::GridDim(m).into());
    }
    let k = r.read_bits(8)? as usize;
    if k == 0 {
        return Err(MeshError::PaletteSize(0).into());
    }
    let mut palette: Vec<Rgb> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut rgb = [0u8; 3];
        for c in &mut rgb {
            *c = r.read_bits(8)? as u8;
        }
        palette.push(rgb);
    }
    let count = r.read_bits(16)? as usize;
    let cells = m as u64 * m as u64;
    let mut positions = Vec::with_capacity(count.min(cells as usize));
    let mut x: Option<u64> = None;
    for _ in 0..count {
        let gap = r.read_gamma()?;
        let next = match x {
            None => gap - 1,
            Some(p) => p + gap,
        };
        if next >= cells {
            return Err(BitstreamError::VertexOutOfRange { index: next, grid_dim: m });
        }
        positions.push(GridVertex::from_linear_index(next as u32, m));
        x = Some(next);
    }
    let per_index = index_bits(k);
    let mut vertices = Vec::with_capacity(count);
    for v in positions {
        vertices.push((v, r.read_bits(per_index)? as u8));
    }
    let used = r.position().div_ceil(8) as usize;
    if r.read_bits((used as u64 * 8 - r.position()) as u32)? != 0 {
        return Err(BitstreamError::NonZeroPadding);
    }
    if used < bytes.len() {
        return Err(BitstreamError::TrailingBytes(bytes.len() - used));
    }
    Ok(CompressedMesh::new(m, palette, vertices)?)
}
