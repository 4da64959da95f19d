//! Bernstein-Bézier spline space over a triangulation: basis evaluation,
//! cross-edge smoothness constraints H, roughness penalty P and the
//! orthonormal null-space basis Q₂ used to eliminate the constraints.

use crate::linalg::{self, LinalgError};
use crate::mesh::{Barycentric, Point2, Triangulation};
use crate::quad;
use ndarray::{Array1, Array2};
use thiserror::Error;

/// Relative singular-value threshold used for the rank of H.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Error, Debug)]
pub enum BasisError {
    #[error("degree must be >= 1, got {0}")]
    InvalidDegree(usize),
    #[error("smoothness r = {r} requires degree d > r, got d = {d}")]
    SmoothnessTooHigh { d: usize, r: usize },
    #[error("energy matrix requires degree >= 2 (second derivatives vanish for d = {0})")]
    DegreeTooLowForEnergy(usize),
    #[error("point at row {row} ({x}, {y}) is outside the triangulation")]
    UnlocatablePoint { row: usize, x: f64, y: f64 },
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { got: usize, expected: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The spline space S_d^r over a triangulation, with the per-triangle
/// Bernstein coefficient indexing. Coefficients are ordered triangle by
/// triangle (file order); within a triangle the multi-indices (i, j, k) with
/// i + j + k = d are ordered by descending i, then descending j.
#[derive(Debug, Clone)]
pub struct SplineSpace {
    pub mesh: Triangulation,
    pub d: usize,
    pub r: usize,
    pub dof_per_triangle: usize,
    pub k_total: usize,
    multi_indices: Vec<[usize; 3]>,
    multinomials: Vec<f64>,
}

impl SplineSpace {
    /// Local multi-indices (i, j, k) in coefficient order.
    pub fn multi_indices(&self) -> &[[usize; 3]] {
        &self.multi_indices
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

fn multi_indices(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in (0..=d).rev() {
        for j in (0..=(d - i)).rev() {
            out.push([i, j, d - i - j]);
        }
    }
    out
}

/// Position of (i, j, k) in the descending-lexicographic ordering of degree d.
fn local_index(d: usize, i: usize, j: usize) -> usize {
    // indices with first component > i come first
    let before: usize = ((i + 1)..=d).map(|t| d - t + 1).sum();
    before + (d - i - j)
}

impl SplineSpace {
    pub fn new(mesh: Triangulation, d: usize, r: usize) -> Result<Self, BasisError> {
        if d < 1 {
            return Err(BasisError::InvalidDegree(d));
        }
        if r >= d {
            return Err(BasisError::SmoothnessTooHigh { d, r });
        }
        let dof_per_triangle = (d + 1) * (d + 2) / 2;
        let k_total = mesh.n_triangles() * dof_per_triangle;
        let mi = multi_indices(d);
        let multinomials = mi
            .iter()
            .map(|&[i, j, k]| factorial(d) / (factorial(i) * factorial(j) * factorial(k)))
            .collect();
        Ok(Self {
            mesh,
            d,
            r,
            dof_per_triangle,
            k_total,
            multi_indices: mi,
            multinomials,
        })
    }

    /// Convergence theory favors d >= 3r + 2; smaller degrees are allowed but
    /// worth flagging to the user.
    pub fn degree_warning(&self) -> Option<String> {
        (self.d < 3 * self.r + 2).then(|| {
            format!(
                "degree d = {} is below 3r + 2 = {} for smoothness r = {}; approximation may be suboptimal",
                self.d,
                3 * self.r + 2,
                self.r
            )
        })
    }

    pub fn multi_index(&self, local: usize) -> [usize; 3] {
        self.multi_indices[local]
    }

    /// Global coefficient column for triangle `t` and multi-index (i, j, k).
    pub fn column(&self, t: usize, i: usize, j: usize) -> usize {
        t * self.dof_per_triangle + local_index(self.d, i, j)
    }

    /// All degree-d Bernstein values at barycentric coordinates `b`, in local order.
    pub fn bernstein_values(&self, b: Barycentric) -> Vec<f64> {
        self.multi_indices
            .iter()
            .zip(&self.multinomials)
            .map(|(&[i, j, k], &c)| {
                c * powi(b.b1, i) * powi(b.b2, j) * powi(b.b3, k)
            })
            .collect()
    }

    /// Sparse basis row for one point: containing triangle plus the
    /// (column, value) pairs of its non-zero entries.
    pub fn basis_row(&self, p: Point2) -> Option<(usize, Vec<(usize, f64)>)> {
        let (t, b) = self.mesh.locate(p)?;
        let vals = self.bernstein_values(b);
        let base = t * self.dof_per_triangle;
        Some((t, vals.into_iter().enumerate().map(|(l, v)| (base + l, v)).collect()))
    }
}

fn powi(base: f64, exp: usize) -> f64 {
    let mut out = 1.0;
    for _ in 0..exp {
        out *= base;
    }
    out
}

/// Evaluation matrix B: row i holds the basis values at points[i] in its
/// containing triangle and zeros elsewhere.
pub fn eval_basis_matrix(space: &SplineSpace, points: &[Point2]) -> Result<Array2<f64>, BasisError> {
    let mut b = Array2::zeros((points.len(), space.k_total));
    for (row, &p) in points.iter().enumerate() {
        let (_, entries) = space
            .basis_row(p)
            .ok_or(BasisError::UnlocatablePoint { row, x: p.x, y: p.y })?;
        for (col, v) in entries {
            b[[row, col]] = v;
        }
    }
    Ok(b)
}

/// Pointwise spline evaluation; `None` marks points outside the domain.
pub fn eval_spline(
    space: &SplineSpace,
    gamma: &Array1<f64>,
    points: &[Point2],
) -> Result<Vec<Option<f64>>, BasisError> {
    if gamma.len() != space.k_total {
        return Err(BasisError::CoefficientLength {
            got: gamma.len(),
            expected: space.k_total,
        });
    }
    Ok(points
        .iter()
        .map(|&p| {
            space
                .basis_row(p)
                .map(|(_, entries)| entries.iter().map(|&(c, v)| gamma[c] * v).sum())
        })
        .collect())
}

/// Sparse linear smoothness constraints H with H γ = 0 iff the piecewise
/// polynomial is C^r across every interior edge.
#[derive(Debug, Clone)]
pub struct ConstraintMatrix {
    /// each row as sorted (column, value) pairs
    pub rows: Vec<Vec<(usize, f64)>>,
    pub n_cols: usize,
}

impl ConstraintMatrix {
    pub fn to_dense(&self) -> Array2<f64> {
        let mut h = Array2::zeros((self.rows.len(), self.n_cols));
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                h[[r, c]] += v;
            }
        }
        h
    }

    pub fn apply(&self, gamma: &Array1<f64>) -> Array1<f64> {
        Array1::from_iter(
            self.rows
                .iter()
                .map(|row| row.iter().map(|&(c, v)| v * gamma[c]).sum()),
        )
    }
}

/// Barycentric coordinates of `p` with respect to an arbitrary vertex triple.
fn bary_wrt(p: Point2, v: [Point2; 3]) -> [f64; 3] {
    let area2 = |a: Point2, b: Point2, c: Point2| (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    let denom = area2(v[0], v[1], v[2]);
    let b1 = area2(p, v[1], v[2]) / denom;
    let b2 = area2(v[0], p, v[2]) / denom;
    [b1, b2, 1.0 - b1 - b2]
}

/// Cross-edge C^j conditions, j = 0..r: the coefficient of the second
/// triangle at depth j from the shared edge must equal the degree-j
/// Bernstein combination of the first triangle's coefficients evaluated at
/// the barycentric coordinates of the second triangle's off-edge vertex.
pub fn smoothness_matrix(space: &SplineSpace) -> Result<ConstraintMatrix, BasisError> {
    if space.r >= space.d {
        return Err(BasisError::SmoothnessTooHigh { d: space.d, r: space.r });
    }
    let d = space.d;
    let mesh = &space.mesh;
    let mut rows = Vec::new();
    for edge in mesh.edges.iter().filter(|e| e.tris.len() == 2) {
        let (t1, t2) = (edge.tris[0], edge.tris[1]);
        // frames: tau = (w1, ea, eb) on t1, tilde = (w2, eb, ea) on t2
        let frame = |t: usize, second: usize, third: usize| -> [usize; 3] {
            let off = *mesh.triangles[t]
                .v
                .iter()
                .find(|&&v| v != second && v != third)
                .expect("triangle must have an off-edge vertex");
            [off, second, third]
        };
        let f1 = frame(t1, edge.a, edge.b);
        let f2 = frame(t2, edge.b, edge.a);
        let beta = bary_wrt(
            mesh.vertices[f2[0]],
            [mesh.vertices[f1[0]], mesh.vertices[f1[1]], mesh.vertices[f1[2]]],
        );
        // permutation from frame positions to stored local vertex positions
        let perm = |t: usize, fr: [usize; 3]| -> [usize; 3] {
            let stored = mesh.triangles[t].v;
            fr.map(|v| stored.iter().position(|&s| s == v).unwrap())
        };
        let p1 = perm(t1, f1);
        let p2 = perm(t2, f2);
        // frame multi-index -> global column
        let col = |t: usize, p: [usize; 3], fi: [usize; 3]| -> usize {
            let mut stored = [0usize; 3];
            for (fpos, &spos) in p.iter().enumerate() {
                stored[spos] = fi[fpos];
            }
            space.column(t, stored[0], stored[1])
        };
        for j in 0..=space.r {
            for mu in 0..=(d - j) {
                let nu = d - j - mu;
                let mut row = vec![(col(t2, p2, [j, mu, nu]), 1.0)];
                for i1 in 0..=j {
                    for i2 in 0..=(j - i1) {
                        let i3 = j - i1 - i2;
                        let coeff = factorial(j)
                            / (factorial(i1) * factorial(i2) * factorial(i3))
                            * powi(beta[0], i1)
                            * powi(beta[1], i2)
                            * powi(beta[2], i3);
                        row.push((col(t1, p1, [i1, nu + i2, mu + i3]), -coeff));
                    }
                }
                row.sort_by_key(|&(c, _)| c);
                rows.push(row);
            }
        }
    }
    Ok(ConstraintMatrix { rows, n_cols: space.k_total })
}

/// Block-diagonal roughness penalty with γᵀPγ equal to the integral of
/// squared second derivatives of the spline B γ.
#[derive(Debug, Clone)]
pub struct PenaltyMatrix {
    pub blocks: Vec<Array2<f64>>,
    pub dof_per_triangle: usize,
}

impl PenaltyMatrix {
    pub fn quad_form(&self, gamma: &Array1<f64>) -> f64 {
        let dpt = self.dof_per_triangle;
        self.blocks
            .iter()
            .enumerate()
            .map(|(t, block)| {
                let g = gamma.slice(ndarray::s![t * dpt..(t + 1) * dpt]);
                g.dot(&block.dot(&g))
            })
            .sum()
    }

    /// P · M for a dense right operand, exploiting the block structure.
    pub fn apply_mat(&self, m: &Array2<f64>) -> Array2<f64> {
        let dpt = self.dof_per_triangle;
        let mut out = Array2::zeros(m.dim());
        for (t, block) in self.blocks.iter().enumerate() {
            let rows = ndarray::s![t * dpt..(t + 1) * dpt, ..];
            let prod = block.dot(&m.slice(rows));
            out.slice_mut(rows).assign(&prod);
        }
        out
    }
}

/// Cartesian gradients of the three barycentric coordinate functions.
pub fn bary_gradients(v: [Point2; 3]) -> [[f64; 2]; 3] {
    let area2 = (v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (v[1].y - v[0].y);
    [
        [(v[1].y - v[2].y) / area2, (v[2].x - v[1].x) / area2],
        [(v[2].y - v[0].y) / area2, (v[0].x - v[2].x) / area2],
        [(v[0].y - v[1].y) / area2, (v[1].x - v[0].x) / area2],
    ]
}

/// Second Cartesian derivatives (s_xx, s_xy, s_yy) of every local basis
/// function at one barycentric point: chain rule through the constant
/// barycentric gradients and degree-(d-2) Bernstein values.
pub fn basis_second_derivatives(
    d: usize,
    grads: &[[f64; 2]; 3],
    b: [f64; 3],
) -> Vec<[f64; 3]> {
    let lower = multi_indices(d - 2);
    let lower_vals: Vec<f64> = lower
        .iter()
        .map(|&[i, j, k]| {
            factorial(d - 2) / (factorial(i) * factorial(j) * factorial(k))
                * powi(b[0], i)
                * powi(b[1], j)
                * powi(b[2], k)
        })
        .collect();
    let scale = (d * (d - 1)) as f64;
    multi_indices(d)
        .iter()
        .map(|&idx| {
            let mut out = [0.0; 3];
            for m in 0..3 {
                for n in 0..3 {
                    let mut low = idx;
                    if low[m] == 0 {
                        continue;
                    }
                    low[m] -= 1;
                    if low[n] == 0 {
                        continue;
                    }
                    low[n] -= 1;
                    let li = local_index(d - 2, low[0], low[1]);
                    let bv = scale * lower_vals[li];
                    out[0] += grads[m][0] * grads[n][0] * bv; // xx
                    out[1] += grads[m][0] * grads[n][1] * bv; // xy
                    out[2] += grads[m][1] * grads[n][1] * bv; // yy
                }
            }
            out
        })
        .collect()
}

/// Assemble the energy (roughness) penalty matrix, one block per triangle.
pub fn energy_matrix(space: &SplineSpace) -> Result<PenaltyMatrix, BasisError> {
    if space.d < 2 {
        return Err(BasisError::DegreeTooLowForEnergy(space.d));
    }
    let d = space.d;
    let dpt = space.dof_per_triangle;
    let rule = quad::triangle_rule(2 * (d - 2));
    let mut blocks = Vec::with_capacity(space.mesh.n_triangles());
    for t in 0..space.mesh.n_triangles() {
        let verts = space.mesh.triangle_vertices(t);
        let grads = bary_gradients(verts);
        let scale = 2.0 * space.mesh.triangle_areas[t];
        let mut block = Array2::zeros((dpt, dpt));
        for &(bc, w) in &rule {
            let derivs = basis_second_derivatives(d, &grads, bc);
            for a in 0..dpt {
                let da = derivs[a];
                for b in a..dpt {
                    let db = derivs[b];
                    let integrand = da[0] * db[0] + 2.0 * da[1] * db[1] + da[2] * db[2];
                    block[[a, b]] += scale * w * integrand;
                }
            }
        }
        for a in 0..dpt {
            for b in 0..a {
                block[[a, b]] = block[[b, a]];
            }
        }
        blocks.push(block);
    }
    Ok(PenaltyMatrix { blocks, dof_per_triangle: dpt })
}

/// Orthonormal basis of the null space of H, with the numerical rank of H.
#[derive(Debug, Clone)]
pub struct NullSpaceBasis {
    pub q2: Array2<f64>,
    pub rank_h: usize,
}

pub fn null_space_basis(h: &ConstraintMatrix) -> Result<NullSpaceBasis, BasisError> {
    let k = h.n_cols;
    if h.rows.is_empty() {
        return Ok(NullSpaceBasis { q2: Array2::eye(k), rank_h: 0 });
    }
    let dense = h.to_dense();
    let svd = linalg::svd(&dense, true)?;
    let smax = svd.s.iter().cloned().fold(0.0, f64::max);
    let rank = svd.s.iter().filter(|&&s| s > RANK_TOL * smax).count();
    // null space = trailing right singular vectors
    let q2 = svd.vt.slice(ndarray::s![rank.., ..]).t().to_owned();
    Ok(NullSpaceBasis { q2, rank_h: rank })
}
