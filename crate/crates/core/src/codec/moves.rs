use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::GridVertex;
use crate::image::RasterImage;
use crate::mesh::{CompressedMesh, Rgb};
use crate::rasterizer::vertex_pixel;

use super::{nearest_index, CodecError};

/// Draws allowed before [`propose_move`] gives up.
pub const MAX_MOVE_RETRIES: usize = 256;

/// Farthest a `MoveVertex` may travel, in Chebyshev distance.
const MOVE_RADIUS: i64 = 2;
/// Largest per-channel palette perturbation.
const PALETTE_STEP: i16 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MoveKind {
    AddVertex,
    RemoveVertex,
    MoveVertex,
    RecolorVertex,
    PerturbPaletteEntry,
}

impl MoveKind {
    pub const ALL: [MoveKind; 5] = [
        MoveKind::AddVertex,
        MoveKind::RemoveVertex,
        MoveKind::MoveVertex,
        MoveKind::RecolorVertex,
        MoveKind::PerturbPaletteEntry,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    AddVertex { at: GridVertex, color: u8 },
    RemoveVertex { at: GridVertex },
    MoveVertex { from: GridVertex, to: GridVertex },
    RecolorVertex { at: GridVertex, color: u8 },
    /// Replace palette entry `index` with `color`.
    PerturbPaletteEntry { index: u8, color: Rgb },
}

impl Move {
    pub fn kind(&self) -> MoveKind {
        match self {
            Move::AddVertex { .. } => MoveKind::AddVertex,
            Move::RemoveVertex { .. } => MoveKind::RemoveVertex,
            Move::MoveVertex { .. } => MoveKind::MoveVertex,
            Move::RecolorVertex { .. } => MoveKind::RecolorVertex,
            Move::PerturbPaletteEntry { .. } => MoveKind::PerturbPaletteEntry,
        }
    }

    /// Does the move change vertex positions (and so the triangulation)?
    pub fn is_geometric(&self) -> bool {
        matches!(
            self,
            Move::AddVertex { .. } | Move::RemoveVertex { .. } | Move::MoveVertex { .. }
        )
    }

    /// The mesh after the move. The move must be legal for `mesh`.
    pub fn apply(&self, mesh: &CompressedMesh) -> CompressedMesh {
        let mut out = mesh.clone();
        let find = |v: GridVertex| out.vertices.binary_search_by_key(&v, |&(p, _)| p);
        match *self {
            Move::AddVertex { at, color } => {
                let i = find(at).expect_err("AddVertex target is free");
                out.vertices.insert(i, (at, color));
            }
            Move::RemoveVertex { at } => {
                let i = find(at).expect("RemoveVertex target exists");
                out.vertices.remove(i);
            }
            Move::MoveVertex { from, to } => {
                let i = find(from).expect("MoveVertex source exists");
                let (_, color) = out.vertices.remove(i);
                let j = out
                    .vertices
                    .binary_search_by_key(&to, |&(p, _)| p)
                    .expect_err("MoveVertex destination is free");
                out.vertices.insert(j, (to, color));
            }
            Move::RecolorVertex { at, color } => {
                let i = find(at).expect("RecolorVertex target exists");
                out.vertices[i].1 = color;
            }
            Move::PerturbPaletteEntry { index, color } => out.palette[index as usize] = color,
        }
        out
    }
}

/// Relative frequency of each move kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoveWeights {
    pub add: f64,
    pub remove: f64,
    #[serde(rename = "move")]
    pub shift: f64,
    pub recolor: f64,
    pub palette: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        Self {
            add: 0.25,
            remove: 0.15,
            shift: 0.25,
            recolor: 0.25,
            palette: 0.10,
        }
    }
}

impl MoveWeights {
    pub fn as_array(&self) -> [f64; 5] {
        [self.add, self.remove, self.shift, self.recolor, self.palette]
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let w = self.as_array();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(CodecError::Config(format!("bad move weights {w:?}")));
        }
        Ok(())
    }

    fn distribution(&self) -> Result<WeightedIndex<f64>, CodecError> {
        WeightedIndex::new(self.as_array()).map_err(|e| CodecError::Config(format!("move weights: {e}")))
    }
}

fn is_free(mesh: &CompressedMesh, v: GridVertex) -> bool {
    mesh.vertices.binary_search_by_key(&v, |&(p, _)| p).is_err()
}

fn random_inner_vertex<R: Rng + ?Sized>(mesh: &CompressedMesh, rng: &mut R) -> Option<GridVertex> {
    let m = mesh.grid_dim;
    let movable = mesh.vertices.len().saturating_sub(4);
    if movable == 0 {
        return None;
    }
    let mut pick = rng.random_range(0..movable);
    for &(v, _) in &mesh.vertices {
        if v.is_corner(m) {
            continue;
        }
        if pick == 0 {
            return Some(v);
        }
        pick -= 1;
    }
    unreachable!()
}

fn draw<R: Rng + ?Sized>(kind: MoveKind, mesh: &CompressedMesh, target: &RasterImage, rng: &mut R) -> Option<Move> {
    let m = mesh.grid_dim;
    match kind {
        MoveKind::AddVertex => {
            let cells = (m * m) as usize;
            if mesh.vertices.len() >= cells {
                return None;
            }
            let mut slot = rng.random_range(0..cells - mesh.vertices.len());
            // Walk the free cells in linear order; the occupied ones are sorted.
            let mut occupied = mesh.vertices.iter().map(|&(v, _)| v.linear_index(m) as usize).peekable();
            let mut index = 0usize;
            loop {
                if occupied.peek() == Some(&index) {
                    occupied.next();
                } else if slot == 0 {
                    break;
                } else {
                    slot -= 1;
                }
                index += 1;
            }
            let at = GridVertex::from_linear_index(index as u32, m);
            let (x, y) = vertex_pixel(at, m, target.width());
            let color = nearest_index(&mesh.palette, target.get(x, y));
            Some(Move::AddVertex { at, color })
        }
        MoveKind::RemoveVertex => random_inner_vertex(mesh, rng).map(|at| Move::RemoveVertex { at }),
        MoveKind::MoveVertex => {
            let from = random_inner_vertex(mesh, rng)?;
            let mut candidates = Vec::with_capacity(24);
            for dr in -MOVE_RADIUS..=MOVE_RADIUS {
                for dc in -MOVE_RADIUS..=MOVE_RADIUS {
                    let (r, c) = (from.row as i64 + dr, from.col as i64 + dc);
                    if (dr, dc) == (0, 0) || r < 0 || c < 0 || r >= m as i64 || c >= m as i64 {
                        continue;
                    }
                    let to = GridVertex::new(r as u32, c as u32);
                    if is_free(mesh, to) {
                        candidates.push(to);
                    }
                }
            }
            if candidates.is_empty() {
                return None;
            }
            let to = candidates[rng.random_range(0..candidates.len())];
            Some(Move::MoveVertex { from, to })
        }
        MoveKind::RecolorVertex => {
            let k = mesh.palette.len();
            if k < 2 {
                return None;
            }
            let (at, old) = mesh.vertices[rng.random_range(0..mesh.vertices.len())];
            let mut color = rng.random_range(0..k - 1) as u8;
            if color >= old {
                color += 1;
            }
            Some(Move::RecolorVertex { at, color })
        }
        MoveKind::PerturbPaletteEntry => {
            let index = rng.random_range(0..mesh.palette.len());
            let old = mesh.palette[index];
            let mut color = old;
            for c in &mut color {
                let mut delta = rng.random_range(1..=PALETTE_STEP);
                if rng.random_bool(0.5) {
                    delta = -delta;
                }
                *c = (*c as i16 + delta).clamp(0, 255) as u8;
            }
            (color != old).then_some(Move::PerturbPaletteEntry {
                index: index as u8,
                color,
            })
        }
    }
}

/// Draw a legal move: pick a kind by weight, then a kind-specific payload,
/// redrawing both when the payload has no legal choice.
pub fn propose_move<R: Rng + ?Sized>(
    mesh: &CompressedMesh,
    target: &RasterImage,
    weights: &MoveWeights,
    rng: &mut R,
) -> Result<Move, CodecError> {
    let dist = weights.distribution()?;
    for _ in 0..MAX_MOVE_RETRIES {
        let kind = MoveKind::ALL[dist.sample(rng)];
        if let Some(mv) = draw(kind, mesh, target, rng) {
            return Ok(mv);
        }
    }
    Err(CodecError::NoLegalMove(MAX_MOVE_RETRIES))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mesh_with_interior() -> CompressedMesh {
        let mut vertices: Vec<(GridVertex, u8)> = GridVertex::corners(9).into_iter().map(|v| (v, 0)).collect();
        vertices.extend([(GridVertex::new(4, 4), 1), (GridVertex::new(2, 6), 2)]);
        CompressedMesh::from_unsorted(9, vec![[100, 100, 100], [120, 80, 60], [30, 200, 90]], vertices).unwrap()
    }

    #[test]
    fn corner_only_mesh_never_loses_a_corner() {
        let mesh = CompressedMesh::corners_only(9, vec![[10, 10, 10], [200, 200, 200]]).unwrap();
        let target = RasterImage::filled(32, 32, [50, 60, 70]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let mv = propose_move(&mesh, &target, &MoveWeights::default(), &mut rng).unwrap();
            assert!(!matches!(mv, Move::RemoveVertex { .. } | Move::MoveVertex { .. }), "{mv:?}");
            assert!(mv.apply(&mesh).validate().is_ok());
        }
    }

    #[test]
    fn moves_are_legal_and_respect_radius() {
        let mesh = mesh_with_interior();
        let target = RasterImage::from_fn(32, 32, |x, y| [(x * 8) as u8, (y * 8) as u8, 7]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5000 {
            let mv = propose_move(&mesh, &target, &MoveWeights::default(), &mut rng).unwrap();
            let next = mv.apply(&mesh);
            next.validate().unwrap();
            match mv {
                Move::MoveVertex { from, to } => {
                    assert!(!from.is_corner(9));
                    assert!(from.row.abs_diff(to.row).max(from.col.abs_diff(to.col)) <= 2);
                }
                Move::RemoveVertex { at } => assert!(!at.is_corner(9)),
                Move::PerturbPaletteEntry { index, color } => {
                    let old = mesh.palette()[index as usize];
                    for ch in 0..3 {
                        let d = old[ch].abs_diff(color[ch]);
                        assert!((1..=8).contains(&d));
                    }
                }
                Move::RecolorVertex { at, color } => assert_ne!(mesh.color_of(at), Some(mesh.palette()[color as usize])),
                Move::AddVertex { at, .. } => assert!(mesh.color_of(at).is_none()),
            }
        }
    }

    #[test]
    fn fixed_seed_gives_identical_moves() {
        let mesh = mesh_with_interior();
        let target = RasterImage::filled(32, 32, [1, 2, 3]);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..500)
                .map(|_| propose_move(&mesh, &target, &MoveWeights::default(), &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn kind_frequencies_match_weights() {
        let mesh = mesh_with_interior();
        let target = RasterImage::filled(32, 32, [1, 2, 3]);
        let weights = MoveWeights::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            let kind = propose_move(&mesh, &target, &weights, &mut rng).unwrap().kind();
            counts[MoveKind::ALL.iter().position(|&k| k == kind).unwrap()] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(weights.as_array())
            .map(|(&c, w)| {
                let expected = w * draws as f64;
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        assert!(counts.iter().all(|&c| c > 0));
        // 99.9th percentile of chi-square with 4 degrees of freedom.
        assert!(chi2 < 18.47, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn bad_weights_are_rejected() {
        let w = MoveWeights {
            add: -1.0,
            ..Default::default()
        };
        assert!(w.validate().is_err());
        let zero = MoveWeights {
            add: 0.0,
            remove: 0.0,
            shift: 0.0,
            recolor: 0.0,
            palette: 0.0,
        };
        assert!(zero.validate().is_err());
    }
}
