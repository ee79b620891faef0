//! Exact Delaunay triangulation of vertices on a regular integer grid.
//!
//! Every predicate is evaluated in integer arithmetic. Orientation is
//! measured with `row` as the first axis and `col` as the second, so a
//! triangle is counter-clockwise when `orient2d(a, b, c) > 0`.
//!
//! Grids are full of cocircular configurations. Whenever two triangulations
//! of a quadrilateral are both Delaunay, the one whose diagonal has the
//! smaller `(min, max)` linear-index pair wins. The result is that each
//! cocircular cell is fanned from its lowest-index vertex, which makes the
//! output a function of the vertex *set* alone.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("degenerate triangle (zero signed area)")]
    DegenerateTriangle,
    #[error("triangulation needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("all vertices are collinear")]
    Collinear,
    #[error("grid corner ({row}, {col}) is missing")]
    MissingCorner { row: u32, col: u32 },
    #[error("vertex ({row}, {col}) lies outside the {grid_dim}x{grid_dim} grid")]
    OutOfGrid { row: u32, col: u32, grid_dim: u32 },
    #[error("grid dimension must be at least 2, got {0}")]
    GridTooSmall(u32),
    #[error("vertex ({row}, {col}) is not part of the triangulation")]
    UnknownVertex { row: u32, col: u32 },
}

/// A vertex position on the `M x M` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridVertex {
    pub row: u32,
    pub col: u32,
}

impl GridVertex {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }

    /// `row * grid_dim + col`. Ordering by linear index is the same as the
    /// derived `(row, col)` ordering for any fixed grid.
    pub fn linear_index(self, grid_dim: u32) -> u32 {
        self.row * grid_dim + self.col
    }

    pub fn from_linear_index(index: u32, grid_dim: u32) -> Self {
        Self::new(index / grid_dim, index % grid_dim)
    }

    /// The four corners of an `M x M` grid in canonical order.
    pub fn corners(grid_dim: u32) -> [GridVertex; 4] {
        let last = grid_dim - 1;
        [
            GridVertex::new(0, 0),
            GridVertex::new(0, last),
            GridVertex::new(last, 0),
            GridVertex::new(last, last),
        ]
    }

    pub fn is_corner(self, grid_dim: u32) -> bool {
        let last = grid_dim - 1;
        (self.row == 0 || self.row == last) && (self.col == 0 || self.col == last)
    }

    fn xy(self) -> (i64, i64) {
        (self.row as i64, self.col as i64)
    }
}

/// Twice the signed area of `(a, b, c)`; positive for counter-clockwise.
pub fn orient2d(a: GridVertex, b: GridVertex, c: GridVertex) -> i64 {
    let (ax, ay) = a.xy();
    let (bx, by) = b.xy();
    let (cx, cy) = c.xy();
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

/// Position of a point relative to a triangle's circumcircle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircleSide {
    Inside,
    On,
    Outside,
}

/// Raw incircle determinant. Positive means `d` is inside the circle through
/// `a, b, c` when those three are counter-clockwise.
fn incircle_det(a: GridVertex, b: GridVertex, c: GridVertex, d: GridVertex) -> i128 {
    let (dx, dy) = d.xy();
    let row = |p: GridVertex| {
        let (x, y) = p.xy();
        let (x, y) = ((x - dx) as i128, (y - dy) as i128);
        (x, y, x * x + y * y)
    };
    let (a0, a1, a2) = row(a);
    let (b0, b1, b2) = row(b);
    let (c0, c1, c2) = row(c);
    a0 * (b1 * c2 - b2 * c1) - a1 * (b0 * c2 - b2 * c0) + a2 * (b0 * c1 - b1 * c0)
}

/// Exact incircle test of `d` against the circumcircle of `(a, b, c)`.
///
/// Clockwise input is accepted; the sign is corrected internally.
pub fn incircle(
    a: GridVertex,
    b: GridVertex,
    c: GridVertex,
    d: GridVertex,
) -> Result<CircleSide, GeometryError> {
    let orientation = orient2d(a, b, c);
    if orientation == 0 {
        return Err(GeometryError::DegenerateTriangle);
    }
    let det = incircle_det(a, b, c, d) * orientation.signum() as i128;
    Ok(match det.signum() {
        1 => CircleSide::Inside,
        0 => CircleSide::On,
        _ => CircleSide::Outside,
    })
}

/// A triangulation of a canonically ordered vertex list.
///
/// Triangles are counter-clockwise index triples into `vertices`, each
/// rotated so its smallest index comes first, and the list is sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triangulation {
    vertices: Vec<GridVertex>,
    triangles: Vec<[u32; 3]>,
}

impl Triangulation {
    pub fn vertices(&self) -> &[GridVertex] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle_vertices(&self, index: usize) -> [GridVertex; 3] {
        self.triangles[index].map(|i| self.vertices[i as usize])
    }

    pub fn vertex_index(&self, v: GridVertex) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    /// Indices of the triangles incident to `v`, in ascending order.
    pub fn vertex_star(&self, v: GridVertex) -> Result<Vec<usize>, GeometryError> {
        let index = self.vertex_index(v).ok_or(GeometryError::UnknownVertex {
            row: v.row,
            col: v.col,
        })? as u32;
        Ok(self
            .triangles
            .iter()
            .enumerate()
            .filter(|(_, t)| t.contains(&index))
            .map(|(i, _)| i)
            .collect())
    }

    /// Undirected edges as sorted index pairs, each listed once.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

/// Delaunay triangulation of a grid mesh. All four grid corners must be
/// present so the hull covers the whole grid.
pub fn delaunay_triangulate(
    vertices: &[GridVertex],
    grid_dim: u32,
) -> Result<Triangulation, GeometryError> {
    if grid_dim < 2 {
        return Err(GeometryError::GridTooSmall(grid_dim));
    }
    if vertices.len() < 3 {
        return Err(GeometryError::TooFewVertices(vertices.len()));
    }
    if let Some(v) = vertices
        .iter()
        .find(|v| v.row >= grid_dim || v.col >= grid_dim)
    {
        return Err(GeometryError::OutOfGrid {
            row: v.row,
            col: v.col,
            grid_dim,
        });
    }
    for corner in GridVertex::corners(grid_dim) {
        if !vertices.contains(&corner) {
            return Err(GeometryError::MissingCorner {
                row: corner.row,
                col: corner.col,
            });
        }
    }
    triangulate_points(vertices)
}

/// Delaunay triangulation of an arbitrary set of grid points (duplicates
/// are ignored). Use [`delaunay_triangulate`] for codec meshes.
pub fn triangulate_points(vertices: &[GridVertex]) -> Result<Triangulation, GeometryError> {
    let mut vertices = vertices.to_vec();
    vertices.sort_unstable();
    vertices.dedup();
    if vertices.len() < 3 {
        return Err(GeometryError::TooFewVertices(vertices.len()));
    }
    let triangles = sweep_triangulation(&vertices)?;
    let mut mesh = FlipMesh::new(&vertices, triangles);
    mesh.legalize();
    let mut triangles = mesh.into_triangles();
    for t in &mut triangles {
        let min_pos = (0..3).min_by_key(|&i| t[i]).unwrap();
        t.rotate_left(min_pos);
    }
    triangles.sort_unstable();
    Ok(Triangulation {
        vertices,
        triangles,
    })
}

/// Any triangulation of the sorted points: insert in lexicographic order so
/// each new point lies strictly outside the current hull, and connect it to
/// every hull edge it can see.
fn sweep_triangulation(points: &[GridVertex]) -> Result<Vec<[u32; 3]>, GeometryError> {
    let apex = (2..points.len())
        .find(|&i| orient2d(points[0], points[1], points[i]) != 0)
        .ok_or(GeometryError::Collinear)?;

    let mut triangles = Vec::with_capacity(2 * points.len());
    let ccw = orient2d(points[0], points[1], points[apex]) > 0;
    for i in 0..apex - 1 {
        let (a, b) = (i as u32, i as u32 + 1);
        triangles.push(if ccw {
            [a, b, apex as u32]
        } else {
            [b, a, apex as u32]
        });
    }
    // Counter-clockwise hull, collinear vertices kept.
    let mut hull: Vec<u32> = if ccw {
        (0..=apex as u32).collect()
    } else {
        std::iter::once(apex as u32)
            .chain((0..apex as u32).rev())
            .collect()
    };

    for p in apex + 1..points.len() {
        let point = points[p];
        let h = hull.len();
        let visible: Vec<bool> = (0..h)
            .map(|i| orient2d(points[hull[i] as usize], points[hull[(i + 1) % h] as usize], point) < 0)
            .collect();
        // The visible edges form one contiguous run; find where it starts.
        let start = (0..h)
            .find(|&i| visible[i] && !visible[(i + h - 1) % h])
            .expect("a point beyond the hull sees at least one edge");
        let mut count = 0;
        while visible[(start + count) % h] {
            let a = hull[(start + count) % h];
            let b = hull[(start + count + 1) % h];
            triangles.push([a, p as u32, b]);
            count += 1;
        }
        // Drop the hull vertices strictly inside the visible run, then
        // splice the new point in after the run's first vertex.
        let mut next = Vec::with_capacity(h + 1);
        for k in 0..=h - count {
            next.push(hull[(start + count + k) % h]);
        }
        next.push(p as u32);
        hull = next;
    }
    Ok(triangles)
}

fn edge_key(u: u32, v: u32) -> (u32, u32) {
    (u.min(v), u.max(v))
}

/// Triangle soup with a directed-edge index, for Lawson flipping.
struct FlipMesh<'a> {
    points: &'a [GridVertex],
    triangles: Vec<[u32; 3]>,
    edges: HashMap<(u32, u32), usize>,
}

impl<'a> FlipMesh<'a> {
    fn new(points: &'a [GridVertex], triangles: Vec<[u32; 3]>) -> Self {
        let mut edges = HashMap::with_capacity(triangles.len() * 3);
        for (i, &[a, b, c]) in triangles.iter().enumerate() {
            edges.insert((a, b), i);
            edges.insert((b, c), i);
            edges.insert((c, a), i);
        }
        Self {
            points,
            triangles,
            edges,
        }
    }

    /// Third vertex of triangle `t`, which must contain the directed edge `u -> v`.
    fn apex(&self, t: usize, u: u32) -> u32 {
        let tri = self.triangles[t];
        let i = tri.iter().position(|&x| x == u).unwrap();
        tri[(i + 2) % 3]
    }

    /// Flip until every interior edge is locally Delaunay and no cocircular
    /// edge can be traded for a smaller diagonal. Strict flips lower the
    /// lifted-paraboloid volume; tie flips keep it and lower the sorted edge
    /// list, so the loop terminates.
    fn legalize(&mut self) {
        let mut stack: Vec<(u32, u32)> = self
            .edges
            .keys()
            .filter(|&&(u, v)| u < v && self.edges.contains_key(&(v, u)))
            .copied()
            .collect();
        stack.sort_unstable();
        while let Some((u, v)) = stack.pop() {
            let (Some(&t1), Some(&t2)) = (self.edges.get(&(u, v)), self.edges.get(&(v, u))) else {
                continue;
            };
            // t1 = (u, v, w), t2 = (v, u, x), both counter-clockwise.
            let w = self.apex(t1, u);
            let x = self.apex(t2, v);
            let p = |i: u32| self.points[i as usize];
            let side = incircle_det(p(u), p(v), p(w), p(x)).signum();
            let flip = side > 0 || (side == 0 && edge_key(w, x) < edge_key(u, v));
            if !flip || orient2d(p(x), p(v), p(w)) <= 0 || orient2d(p(w), p(u), p(x)) <= 0 {
                continue;
            }
            for &(a, b) in &[(u, v), (v, w), (w, u), (v, u), (u, x), (x, v)] {
                self.edges.remove(&(a, b));
            }
            self.triangles[t1] = [x, v, w];
            self.triangles[t2] = [w, u, x];
            for &(a, b, t) in &[(x, v, t1), (v, w, t1), (w, x, t1), (w, u, t2), (u, x, t2), (x, w, t2)] {
                self.edges.insert((a, b), t);
            }
            stack.extend([edge_key(u, x), edge_key(x, v), edge_key(v, w), edge_key(w, u)]);
        }
    }

    fn into_triangles(self) -> Vec<[u32; 3]> {
        self.triangles
    }
}
