use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitstream::size_bits_of;
use crate::geometry::{GridVertex, Triangulation};
use crate::image::RasterImage;
use crate::mesh::{CompressedMesh, Rgb};
use crate::rasterizer::{render, vertex_pixel, Rasterizer};

use super::{init_palette, nearest_index, propose_move, CodecError, EncoderConfig, Move};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// 0 for the initial mesh, otherwise the 1-based proposal number.
    pub proposal: u64,
    pub mse: f64,
}

#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub mesh: CompressedMesh,
    /// MSE after every accepted proposal, starting from the initial mesh.
    pub trace: Vec<TracePoint>,
    pub accepted: u64,
}

impl EncodeOutput {
    pub fn initial_mse(&self) -> f64 {
        self.trace.first().map_or(0.0, |t| t.mse)
    }

    pub fn final_mse(&self) -> f64 {
        self.trace.last().map_or(0.0, |t| t.mse)
    }
}

fn check_image(image: &RasterImage, config: &EncoderConfig) -> Result<(), CodecError> {
    if image.width() != config.size || image.height() != config.size {
        return Err(CodecError::ImageSize {
            width: image.width(),
            height: image.height(),
            size: config.size,
        });
    }
    Ok(())
}

/// Strided axis positions `0, s, 2s, ...` plus the last row/column.
fn axis(grid_dim: u32, stride: u32) -> Vec<u32> {
    let mut out: Vec<u32> = (0..grid_dim).step_by(stride as usize).collect();
    if *out.last().unwrap() != grid_dim - 1 {
        out.push(grid_dim - 1);
    }
    out
}

/// Starting mesh: the densest uniform subgrid (corners included) that fits
/// the budget, colored by the nearest palette entry to the pixel under each
/// vertex.
pub fn init_mesh(image: &RasterImage, config: &EncoderConfig) -> Result<CompressedMesh, CodecError> {
    config.validate()?;
    check_image(image, config)?;
    let palette = init_palette(image, config.palette_size)?;
    let m = config.grid_dim;
    let positions = (1..m)
        .map(|stride| {
            let a = axis(m, stride);
            a.iter()
                .flat_map(|&r| a.iter().map(move |&c| GridVertex::new(r, c)))
                .collect::<Vec<_>>()
        })
        .find(|pos| size_bits_of(m, palette.len(), pos.iter().copied()).div_ceil(8) as usize <= config.byte_budget)
        .expect("config validation guarantees the corner mesh fits");
    let vertices = positions
        .into_iter()
        .map(|v| {
            let (x, y) = vertex_pixel(v, m, config.size);
            (v, nearest_index(&palette, image.get(x, y)))
        })
        .collect();
    Ok(CompressedMesh::new(m, palette, vertices)?)
}

type TriKey = [u32; 3];

fn triangle_keys(t: &Triangulation, grid_dim: u32) -> Vec<TriKey> {
    t.triangles()
        .iter()
        .map(|tri| tri.map(|i| t.vertices()[i as usize].linear_index(grid_dim)))
        .collect()
}

struct Candidate {
    mesh: CompressedMesh,
    geometry: Option<(Triangulation, Vec<TriKey>)>,
    sse: u64,
}

/// Hillclimbing state: the current mesh, its triangulation, and the
/// raster it decodes to, kept in sync incrementally.
pub struct Encoder<'a> {
    config: EncoderConfig,
    target: &'a RasterImage,
    rasterizer: Rasterizer,
    mesh: CompressedMesh,
    triangulation: Triangulation,
    key_set: HashSet<TriKey>,
    raster: RasterImage,
    sse: u64,
    rng: ChaCha8Rng,
    proposals: u64,
    accepted: u64,
    trace: Vec<TracePoint>,
    pending: Vec<(u32, Rgb)>,
}

impl<'a> Encoder<'a> {
    pub fn new(target: &'a RasterImage, config: &EncoderConfig) -> Result<Self, CodecError> {
        let mesh = init_mesh(target, config)?;
        Self::from_mesh(target, config, mesh)
    }

    /// Start from an explicit mesh instead of [`init_mesh`].
    pub fn from_mesh(target: &'a RasterImage, config: &EncoderConfig, mesh: CompressedMesh) -> Result<Self, CodecError> {
        config.validate()?;
        check_image(target, config)?;
        if mesh.grid_dim() != config.grid_dim {
            return Err(CodecError::Config(format!(
                "mesh grid {} does not match config grid {}",
                mesh.grid_dim(),
                config.grid_dim
            )));
        }
        let rasterizer = Rasterizer::new(config.grid_dim, config.size)?;
        let triangulation = mesh.triangulate()?;
        let raster = render(&mesh, config.size)?;
        let sse = crate::metrics::sse(&raster, target).expect("dimensions checked");
        let keys = triangle_keys(&triangulation, config.grid_dim);
        let mut enc = Self {
            config: config.clone(),
            target,
            rasterizer,
            key_set: keys.iter().copied().collect(),
            mesh,
            triangulation,
            raster,
            sse,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            proposals: 0,
            accepted: 0,
            trace: Vec::new(),
            pending: Vec::new(),
        };
        enc.trace.push(TracePoint {
            proposal: 0,
            mse: enc.mse(),
        });
        Ok(enc)
    }

    pub fn mesh(&self) -> &CompressedMesh {
        &self.mesh
    }

    /// The incrementally maintained decode of [`Encoder::mesh`].
    pub fn raster(&self) -> &RasterImage {
        &self.raster
    }

    pub fn mse(&self) -> f64 {
        self.sse as f64 / self.target.as_raw().len() as f64
    }

    pub fn trace(&self) -> &[TracePoint] {
        &self.trace
    }

    pub fn proposals(&self) -> u64 {
        self.proposals
    }

    fn size_bytes_of(&self, mesh: &CompressedMesh) -> usize {
        size_bits_of(mesh.grid_dim(), mesh.palette().len(), mesh.vertices().iter().map(|&(v, _)| v)).div_ceil(8) as usize
    }

    /// Score `mv` without committing it. Returns `None` when the move breaks
    /// the byte budget. The candidate's changed pixels are left in `pending`.
    fn evaluate(&mut self, mv: &Move) -> Result<Option<Candidate>, CodecError> {
        let mesh = mv.apply(&self.mesh);
        let m = self.config.grid_dim;
        self.pending.clear();
        let geometry = if mv.is_geometric() {
            if self.size_bytes_of(&mesh) > self.config.byte_budget {
                return Ok(None);
            }
            let tri = mesh.triangulate()?;
            let keys = triangle_keys(&tri, m);
            Some((tri, keys))
        } else {
            None
        };

        let colors = mesh.vertex_colors();
        let (tri, affected): (&Triangulation, Vec<usize>) = match (&geometry, mv) {
            (Some((tri, keys)), _) => (tri, (0..keys.len()).filter(|&i| !self.key_set.contains(&keys[i])).collect()),
            (None, Move::RecolorVertex { at, .. }) => (&self.triangulation, self.triangulation.vertex_star(*at)?),
            (None, Move::PerturbPaletteEntry { index, .. }) => {
                let touched: Vec<u32> = mesh
                    .vertices()
                    .iter()
                    .enumerate()
                    .filter(|(_, &(_, c))| c == *index)
                    .map(|(i, _)| i as u32)
                    .collect();
                let tris = self
                    .triangulation
                    .triangles()
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.iter().any(|i| touched.binary_search(i).is_ok()))
                    .map(|(i, _)| i)
                    .collect();
                (&self.triangulation, tris)
            }
            (None, _) => unreachable!("non-geometric moves are recolors or palette edits"),
        };

        let current = self.raster.as_raw();
        let target = self.target.as_raw();
        let pending = &mut self.pending;
        let mut delta: i64 = 0;
        for t in affected {
            let ids = tri.triangles()[t];
            self.rasterizer.scan(tri.triangle_vertices(t), ids.map(|i| colors[i as usize]), |idx, rgb| {
                let base = idx * 3;
                for ch in 0..3 {
                    let want = target[base + ch] as i64;
                    let old = current[base + ch] as i64 - want;
                    let new = rgb[ch] as i64 - want;
                    delta += new * new - old * old;
                }
                pending.push((idx as u32, rgb));
            })?;
        }
        let sse = (self.sse as i64 + delta) as u64;
        Ok(Some(Candidate { mesh, geometry, sse }))
    }

    fn commit(&mut self, candidate: Candidate) {
        let buf = self.raster.as_raw_mut();
        for &(idx, rgb) in &self.pending {
            let base = idx as usize * 3;
            buf[base..base + 3].copy_from_slice(&rgb);
        }
        self.mesh = candidate.mesh;
        self.sse = candidate.sse;
        if let Some((tri, keys)) = candidate.geometry {
            self.triangulation = tri;
            self.key_set = keys.into_iter().collect();
        }
    }

    /// Propose one move and keep it only if it strictly lowers the MSE
    /// within budget. Returns whether it was accepted.
    pub fn step(&mut self) -> Result<bool, CodecError> {
        let mv = propose_move(&self.mesh, self.target, &self.config.move_weights, &mut self.rng)?;
        self.proposals += 1;
        let accepted = match self.evaluate(&mv)? {
            Some(c) if c.sse < self.sse => {
                self.commit(c);
                true
            }
            _ => false,
        };
        if accepted {
            self.accepted += 1;
            self.trace.push(TracePoint {
                proposal: self.proposals,
                mse: self.mse(),
            });
        }
        Ok(accepted)
    }

    /// Drop interior vertices whose removal does not raise the error.
    fn prune(&mut self) -> Result<(), CodecError> {
        let m = self.config.grid_dim;
        let candidates: Vec<GridVertex> = self.mesh.positions().into_iter().filter(|v| !v.is_corner(m)).collect();
        for at in candidates {
            let mv = Move::RemoveVertex { at };
            if let Some(c) = self.evaluate(&mv)? {
                if c.sse <= self.sse {
                    self.commit(c);
                }
            }
        }
        Ok(())
    }

    /// Drop unreferenced or duplicate palette entries. The decode is unchanged.
    fn compact_palette(&mut self) -> Result<(), CodecError> {
        let old = self.mesh.palette();
        let mut used = vec![false; old.len()];
        for &(_, c) in self.mesh.vertices() {
            used[c as usize] = true;
        }
        let mut palette: Vec<Rgb> = Vec::new();
        let mut remap = vec![0u8; old.len()];
        for (i, &rgb) in old.iter().enumerate().filter(|&(i, _)| used[i]) {
            remap[i] = palette.iter().position(|&p| p == rgb).unwrap_or_else(|| {
                palette.push(rgb);
                palette.len() - 1
            }) as u8;
        }
        let vertices = self.mesh.vertices().iter().map(|&(v, c)| (v, remap[c as usize])).collect();
        self.mesh = CompressedMesh::new(self.mesh.grid_dim(), palette, vertices)?;
        Ok(())
    }

    /// Run the remaining proposals, then finalize.
    pub fn run(mut self) -> Result<EncodeOutput, CodecError> {
        while self.proposals < self.config.proposals {
            if self.sse == 0 {
                break;
            }
            self.step()?;
        }
        self.finish()
    }

    /// Prune, compact the palette, and check the incremental raster against
    /// a full decode.
    pub fn finish(mut self) -> Result<EncodeOutput, CodecError> {
        let before = self.sse;
        self.prune()?;
        self.compact_palette()?;
        if render(&self.mesh, self.config.size)? != self.raster {
            return Err(CodecError::RasterDiverged);
        }
        if self.sse < before {
            self.trace.push(TracePoint {
                proposal: self.proposals,
                mse: self.mse(),
            });
        }
        debug_assert!(self.size_bytes_of(&self.mesh) <= self.config.byte_budget);
        Ok(EncodeOutput {
            mesh: self.mesh,
            trace: self.trace,
            accepted: self.accepted,
        })
    }
}

/// Encode an `N x N` image under the configured byte budget.
pub fn encode(image: &RasterImage, config: &EncoderConfig) -> Result<EncodeOutput, CodecError> {
    Encoder::new(image, config)?.run()
}
