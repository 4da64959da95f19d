//! Triangulations of polygonal 2-D domains: loading, validation, point
//! location and barycentric coordinates.

use serde::{Deserialize, Serialize};
use std::io::Read;
use thiserror::Error;

/// Absolute tolerance on barycentric non-negativity for inside tests.
pub const INSIDE_TOL: f64 = 1e-10;

#[derive(Error, Debug)]
pub enum MeshError {
    #[error("vertex {0} and vertex {1} coincide within 1e-12")]
    DuplicateVertex(usize, usize),
    #[error("triangle {tri} references vertex {vertex} but there are only {n_vertices} vertices")]
    IndexOutOfRange {
        tri: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("triangle {0} has (near) zero area")]
    ZeroAreaTriangle(usize),
    #[error("triangle {0} repeats a vertex index")]
    RepeatedVertex(usize),
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteCoordinate(usize),
    #[error("degenerate triangle {0}")]
    DegenerateTriangle(usize),
    #[error("triangle id {0} out of range")]
    BadTriangleId(usize),
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mesh file {0}: expected a vertices/triangles JSON object or a vertex/triangle CSV pair")]
    BadFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triangle {
    pub v: [usize; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// ids of incident triangles, ascending; 1 entry = boundary edge
    pub tris: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barycentric {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl Barycentric {
    pub fn inside(&self, tol: f64) -> bool {
        self.b1 >= -tol && self.b2 >= -tol && self.b3 >= -tol
    }
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    pub triangle_areas: Vec<f64>,
    /// |△|: length of the longest edge in the mesh
    pub mesh_size: f64,
    /// per-triangle shape parameter ν_τ = longest edge / inradius
    pub shape_params: Vec<f64>,
    grid: LocateGrid,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub conforming: bool,
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub boundary_edges: usize,
    pub interior_edges: usize,
    pub mesh_size: f64,
    pub max_shape_param: f64,
    /// pairs of triangle ids violating the conforming-mesh condition
    pub offenders: Vec<(usize, usize)>,
}

/// Uniform-bucket index over the mesh bounding box used to seed point
/// location; a full scan remains as the fallback.
#[derive(Debug, Clone)]
struct LocateGrid {
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl LocateGrid {
    fn build(vertices: &[Point2], triangles: &[Triangle]) -> Self {
        let xs = vertices.iter().map(|p| p.x);
        let ys = vertices.iter().map(|p| p.y);
        let x0 = xs.clone().fold(f64::INFINITY, f64::min);
        let x1 = xs.fold(f64::NEG_INFINITY, f64::max);
        let y0 = ys.clone().fold(f64::INFINITY, f64::min);
        let y1 = ys.fold(f64::NEG_INFINITY, f64::max);
        let side = ((triangles.len() as f64).sqrt().ceil() as usize).max(1);
        let (nx, ny) = (side, side);
        let dx = ((x1 - x0) / nx as f64).max(f64::MIN_POSITIVE);
        let dy = ((y1 - y0) / ny as f64).max(f64::MIN_POSITIVE);
        let mut cells = vec![Vec::new(); nx * ny];
        for (t, tri) in triangles.iter().enumerate() {
            let px: Vec<f64> = tri.v.iter().map(|&v| vertices[v].x).collect();
            let py: Vec<f64> = tri.v.iter().map(|&v| vertices[v].y).collect();
            let clamp = |k: isize, n: usize| k.clamp(0, n as isize - 1) as usize;
            let i0 = clamp(((px.iter().cloned().fold(f64::INFINITY, f64::min) - x0) / dx) as isize, nx);
            let i1 = clamp(((px.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x0) / dx) as isize, nx);
            let j0 = clamp(((py.iter().cloned().fold(f64::INFINITY, f64::min) - y0) / dy) as isize, ny);
            let j1 = clamp(((py.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y0) / dy) as isize, ny);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    cells[i * ny + j].push(t);
                }
            }
        }
        Self { x0, y0, dx, dy, nx, ny, cells }
    }

    fn candidates(&self, p: Point2) -> Option<&[usize]> {
        let i = ((p.x - self.x0) / self.dx).floor();
        let j = ((p.y - self.y0) / self.dy).floor();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some(&self.cells[i as usize * self.ny + j as usize])
    }
}

fn signed_area2(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)
}

/// Load a triangulation from tabular vertex rows (x, y) and triangle rows of
/// three 0-based vertex indices. Triangles are re-oriented counter-clockwise.
pub fn load_mesh<R1: Read, R2: Read>(
    vertex_source: R1,
    triangle_source: R2,
) -> Result<Triangulation, MeshError> {
    let mut vertices = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(vertex_source);
    for rec in rdr.deserialize() {
        let (x, y): (f64, f64) = rec?;
        vertices.push(Point2::new(x, y));
    }
    let mut triangles = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(triangle_source);
    for rec in rdr.deserialize() {
        let (a, b, c): (usize, usize, usize) = rec?;
        triangles.push(Triangle { v: [a, b, c] });
    }
    Triangulation::from_parts(vertices, triangles)
}

/// Combined JSON form: `{ "vertices": [[x,y],...], "triangles": [[i,j,k],...] }`.
#[derive(Clone, Serialize, Deserialize)]
pub struct MeshJson {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

impl MeshJson {
    pub fn build(self) -> Result<Triangulation, MeshError> {
        Triangulation::from_parts(
            self.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect(),
            self.triangles.iter().map(|t| Triangle { v: *t }).collect(),
        )
    }
}

pub fn load_mesh_json<R: Read>(reader: R) -> Result<Triangulation, MeshError> {
    let parsed: MeshJson = serde_json::from_reader(reader)?;
    Triangulation::from_parts(
        parsed.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect(),
        parsed.triangles.iter().map(|t| Triangle { v: *t }).collect(),
    )
}

impl Triangulation {
    pub fn from_parts(vertices: Vec<Point2>, mut triangles: Vec<Triangle>) -> Result<Self, MeshError> {
        for (i, p) in vertices.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(MeshError::NonFiniteCoordinate(i));
            }
        }
        // duplicate vertex scan on lexicographically sorted order
        let mut order: Vec<usize> = (0..vertices.len()).collect();
        order.sort_by(|&i, &j| {
            vertices[i]
                .x
                .partial_cmp(&vertices[j].x)
                .unwrap()
                .then(vertices[i].y.partial_cmp(&vertices[j].y).unwrap())
        });
        for w in order.windows(2) {
            let (p, q) = (vertices[w[0]], vertices[w[1]]);
            if (p.x - q.x).abs() <= 1e-12 && (p.y - q.y).abs() <= 1e-12 {
                let (i, j) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(MeshError::DuplicateVertex(i, j));
            }
        }
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            let [a, b, c] = tri.v;
            if a == b || b == c || a == c {
                return Err(MeshError::RepeatedVertex(t));
            }
            for &v in &tri.v {
                if v >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        tri: t,
                        vertex: v,
                        n_vertices: vertices.len(),
                    });
                }
            }
            let mut s2 = signed_area2(vertices[a], vertices[b], vertices[c]);
            if s2 < 0.0 {
                tri.v.swap(1, 2);
                s2 = -s2;
            }
            if s2 <= 1e-14 {
                return Err(MeshError::ZeroAreaTriangle(t));
            }
            areas.push(0.5 * s2);
        }
        // edge table
        let mut edge_ids = std::collections::BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.v;
            for (u, v) in [(a, b), (b, c), (c, a)] {
                let key = (u.min(v), u.max(v));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(Edge { a: key.0, b: key.1, tris: Vec::new() });
                    edges.len() - 1
                });
                edges[id].tris.push(t);
            }
        }
        let mut mesh_size: f64 = 0.0;
        for e in &edges {
            let (p, q) = (vertices[e.a], vertices[e.b]);
            mesh_size = mesh_size.max(((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt());
        }
        let mut shape_params = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.v;
            let d = |p: Point2, q: Point2| ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
            let (la, lb, lc) = (
                d(vertices[b], vertices[c]),
                d(vertices[a], vertices[c]),
                d(vertices[a], vertices[b]),
            );
            let longest = la.max(lb).max(lc);
            let inradius = areas[t] / (0.5 * (la + lb + lc));
            shape_params.push(longest / inradius);
        }
        let grid = LocateGrid::build(&vertices, &triangles);
        Ok(Self {
            vertices,
            triangles,
            edges,
            triangle_areas: areas,
            mesh_size,
            shape_params,
            grid,
        })
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn total_area(&self) -> f64 {
        self.triangle_areas.iter().sum()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t].v;
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point2) -> Result<Barycentric, MeshError> {
        if t >= self.triangles.len() {
            return Err(MeshError::BadTriangleId(t));
        }
        let [va, vb, vc] = self.triangle_vertices(t);
        let denom = signed_area2(va, vb, vc);
        if denom.abs() <= 1e-14 {
            return Err(MeshError::DegenerateTriangle(t));
        }
        let b1 = signed_area2(p, vb, vc) / denom;
        let b2 = signed_area2(va, p, vc) / denom;
        Ok(Barycentric { b1, b2, b3: 1.0 - b1 - b2 })
    }

    /// Affine map from barycentric coordinates of triangle `t` back to the plane.
    pub fn from_barycentric(&self, t: usize, b: Barycentric) -> Point2 {
        let [va, vb, vc] = self.triangle_vertices(t);
        Point2::new(
            b.b1 * va.x + b.b2 * vb.x + b.b3 * vc.x,
            b.b1 * va.y + b.b2 * vb.y + b.b3 * vc.y,
        )
    }

    /// Find the triangle containing `p`. Points on a shared edge or vertex
    /// resolve to the incident triangle with the smallest id; `None` if the
    /// point lies outside the mesh.
    pub fn locate(&self, p: Point2) -> Option<(usize, Barycentric)> {
        if let Some(cands) = self.grid.candidates(p) {
            let mut best: Option<(usize, Barycentric)> = None;
            for &t in cands {
                let b = self.barycentric(t, p).expect("triangles validated at load");
                if b.inside(INSIDE_TOL) && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, b));
                }
            }
            if best.is_some() {
                return best;
            }
        }
        // fallback full scan (grid cells and bounding box can clip edge cases)
        for t in 0..self.triangles.len() {
            let b = self.barycentric(t, p).expect("triangles validated at load");
            if b.inside(INSIDE_TOL) {
                return Some((t, b));
            }
        }
        None
    }

    /// Conformity and shape diagnostics.
    pub fn validate(&self) -> ValidationReport {
        let mut offenders = Vec::new();
        for e in &self.edges {
            if e.tris.len() > 2 {
                for w in e.tris.windows(2) {
                    offenders.push((w[0], w[1]));
                }
            }
        }
        // pairwise geometric checks with a bounding-box prefilter
        let boxes: Vec<(f64, f64, f64, f64)> = (0..self.triangles.len())
            .map(|t| {
                let vs = self.triangle_vertices(t);
                (
                    vs.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
                    vs.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
                    vs.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
                    vs.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
                )
            })
            .collect();
        for t1 in 0..self.triangles.len() {
            for t2 in (t1 + 1)..self.triangles.len() {
                let (a, b) = (boxes[t1], boxes[t2]);
                if a.1 < b.0 - 1e-12 || b.1 < a.0 - 1e-12 || a.3 < b.2 - 1e-12 || b.3 < a.2 - 1e-12 {
                    continue;
                }
                if !self.pair_conforms(t1, t2) {
                    offenders.push((t1, t2));
                }
            }
        }
        offenders.sort_unstable();
        offenders.dedup();
        let boundary = self.edges.iter().filter(|e| e.tris.len() == 1).count();
        let interior = self.edges.iter().filter(|e| e.tris.len() == 2).count();
        ValidationReport {
            conforming: offenders.is_empty(),
            n_vertices: self.vertices.len(),
            n_triangles: self.triangles.len(),
            boundary_edges: boundary,
            interior_edges: interior,
            mesh_size: self.mesh_size,
            max_shape_param: self.shape_params.iter().cloned().fold(0.0, f64::max),
            offenders,
        }
    }

    /// Two triangles conform when they intersect in a shared vertex, a shared
    /// edge, or not at all.
    fn pair_conforms(&self, t1: usize, t2: usize) -> bool {
        let shared: Vec<usize> = self.triangles[t1]
            .v
            .iter()
            .filter(|v| self.triangles[t2].v.contains(v))
            .cloned()
            .collect();
        if shared.len() >= 2 {
            return true; // a genuinely shared edge
        }
        let v1 = self.triangle_vertices(t1);
        let v2 = self.triangle_vertices(t2);
        let eps = 1e-12 * (1.0 + self.mesh_size);
        // a vertex strictly inside the other triangle
        for (vs, t) in [(&v2, t1), (&v1, t2)] {
            for &p in vs.iter() {
                if let Ok(b) = self.barycentric(t, p) {
                    if b.b1 > eps && b.b2 > eps && b.b3 > eps {
                        return false;
                    }
                }
            }
        }
        // proper crossings or interior overlap of edge segments
        for i in 0..3 {
            for j in 0..3 {
                let (p1, p2) = (v1[i], v1[(i + 1) % 3]);
                let (q1, q2) = (v2[j], v2[(j + 1) % 3]);
                if segments_conflict(p1, p2, q1, q2, shared.first().map(|&v| self.vertices[v])) {
                    return false;
                }
            }
        }
        false_if_midpoint_inside(&v1, &v2) && false_if_midpoint_inside(&v2, &v1)
    }

    pub fn to_json(&self) -> MeshJson {
        MeshJson {
            vertices: self.vertices.iter().map(|p| [p.x, p.y]).collect(),
            triangles: self.triangles.iter().map(|t| t.v).collect(),
        }
    }
}

/// True when the pair is fine, false when the centroid of `a` is inside `b`
/// (covers the identical-interior overlap case missed by crossing tests).
fn false_if_midpoint_inside(a: &[Point2; 3], b: &[Point2; 3]) -> bool {
    let c = Point2::new(
        (a[0].x + a[1].x + a[2].x) / 3.0,
        (a[0].y + a[1].y + a[2].y) / 3.0,
    );
    let denom = signed_area2(b[0], b[1], b[2]);
    let b1 = signed_area2(c, b[1], b[2]) / denom;
    let b2 = signed_area2(b[0], c, b[2]) / denom;
    let b3 = 1.0 - b1 - b2;
    !(b1 > 1e-12 && b2 > 1e-12 && b3 > 1e-12)
}

/// Detect proper segment crossings and collinear interior overlap beyond a
/// single shared endpoint.
fn segments_conflict(p1: Point2, p2: Point2, q1: Point2, q2: Point2, shared: Option<Point2>) -> bool {
    let eps = 1e-12;
    let d1 = signed_area2(q1, q2, p1);
    let d2 = signed_area2(q1, q2, p2);
    let d3 = signed_area2(p1, p2, q1);
    let d4 = signed_area2(p1, p2, q2);
    if ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
        && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
    {
        return true; // proper crossing
    }
    // collinear overlap check
    if d1.abs() <= eps && d2.abs() <= eps && d3.abs() <= eps && d4.abs() <= eps {
        let t = |p: Point2| {
            let dx = p2.x - p1.x;
            let dy = p2.y - p1.y;
            if dx.abs() > dy.abs() {
                (p.x - p1.x) / dx
            } else {
                (p.y - p1.y) / dy
            }
        };
        let (mut t1, mut t2) = (t(q1), t(q2));
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        let lo = t1.max(0.0);
        let hi = t2.min(1.0);
        if hi - lo > 1e-9 {
            // overlap of positive length; allowed only if it is exactly the
            // shared-vertex degenerate case (handled above), so flag it
            let _ = shared;
            return true;
        }
    }
    false
}
