//! One-time assembly of the constrained, penalized spline space.
//!
//! The orthonormal null-space basis of H is rotated by the eigenvectors of
//! the reduced penalty Q₂ᵀPQ₂, so that in the stored basis the roughness
//! penalty is exactly diagonal. This keeps every downstream solve cheap and
//! is computed once per (mesh, d, r), optionally cached on disk.

use crate::basis::{
    self, BasisError, ConstraintMatrix, NullSpaceBasis, PenaltyMatrix, SplineSpace,
};
use crate::linalg;
use crate::mesh::Triangulation;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Eigenvalues below this relative threshold count as the penalty null space.
const NULL_EIG_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct AssembledSpace {
    pub space: SplineSpace,
    pub penalty: PenaltyMatrix,
    pub rank_h: usize,
    /// K x m orthonormal basis of {γ : Hγ = 0} that diagonalizes the penalty
    pub q2: Array2<f64>,
    /// ascending penalty eigenvalues in the q2 basis; the first `n_null` are zero
    pub penalty_eigs: Array1<f64>,
    pub n_null: usize,
    /// hash identifying (mesh, d, r); recorded in fit outputs
    pub key: String,
}

pub fn space_key(mesh: &Triangulation, d: usize, r: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&mesh.to_json()).expect("mesh serializes"));
    hasher.update(d.to_le_bytes());
    hasher.update(r.to_le_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

impl AssembledSpace {
    pub fn assemble(space: SplineSpace) -> Result<Self, BasisError> {
        let h = basis::smoothness_matrix(&space)?;
        let penalty = basis::energy_matrix(&space)?;
        let nsb = basis::null_space_basis(&h)?;
        Self::finish(space, penalty, &h, nsb)
    }

    fn finish(
        space: SplineSpace,
        penalty: PenaltyMatrix,
        h: &ConstraintMatrix,
        nsb: NullSpaceBasis,
    ) -> Result<Self, BasisError> {
        let _ = h;
        let pq2 = penalty.apply_mat(&nsb.q2);
        let reduced = nsb.q2.t().dot(&pq2);
        let (mut eigs, vecs) = linalg::eigh(&reduced)?;
        let emax = eigs.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut n_null = 0;
        for e in eigs.iter_mut() {
            if *e <= NULL_EIG_TOL * emax {
                *e = 0.0;
                n_null += 1;
            }
        }
        let q2 = nsb.q2.dot(&vecs);
        let key = space_key(&space.mesh, space.d, space.r);
        Ok(Self {
            space,
            penalty,
            rank_h: nsb.rank_h,
            q2,
            penalty_eigs: eigs,
            n_null,
            key,
        })
    }

    /// Dimension of the constrained space (columns of q2).
    pub fn dim(&self) -> usize {
        self.q2.ncols()
    }

    pub fn gamma_from_theta(&self, theta: &Array1<f64>) -> Array1<f64> {
        self.q2.dot(theta)
    }

    /// Load from the cache directory if present, otherwise assemble and store.
    pub fn load_or_assemble(
        space: SplineSpace,
        cache_dir: Option<&Path>,
    ) -> Result<Self, BasisError> {
        let key = space_key(&space.mesh, space.d, space.r);
        let path = cache_dir.map(|d| cache_path(d, &key));
        if let Some(p) = &path {
            if let Some(cached) = read_cache(p, &key) {
                let penalty = basis::energy_matrix(&space)?;
                let m = cached.q2_data.len() / space.k_total;
                let q2 = Array2::from_shape_vec((space.k_total, m), cached.q2_data)
                    .expect("cache shape");
                return Ok(Self {
                    space,
                    penalty,
                    rank_h: cached.rank_h,
                    q2,
                    penalty_eigs: Array1::from_vec(cached.penalty_eigs),
                    n_null: cached.n_null,
                    key,
                });
            }
        }
        let assembled = Self::assemble(space)?;
        if let Some(p) = &path {
            let record = CacheRecord {
                key: assembled.key.clone(),
                rank_h: assembled.rank_h,
                n_null: assembled.n_null,
                penalty_eigs: assembled.penalty_eigs.to_vec(),
                q2_data: assembled.q2.iter().cloned().collect(),
            };
            if let Some(parent) = p.parent() {
                let _ = std::fs::create_dir_all(parent);
            }
            if let Ok(bytes) = bincode::serialize(&record) {
                let _ = std::fs::write(p, bytes);
            }
        }
        Ok(assembled)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    rank_h: usize,
    n_null: usize,
    penalty_eigs: Vec<f64>,
    q2_data: Vec<f64>,
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("splsm-space-{key}.bin"))
}

fn read_cache(path: &Path, key: &str) -> Option<CacheRecord> {
    let bytes = std::fs::read(path).ok()?;
    let record: CacheRecord = bincode::deserialize(&bytes).ok()?;
    (record.key == key).then_some(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Point2, Triangle};

    fn two_tri_space() -> SplineSpace {
        let mesh = Triangulation::from_parts(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.3, 1.1),
                Point2::new(0.8, -0.9),
            ],
            vec![Triangle { v: [0, 1, 2] }, Triangle { v: [0, 3, 1] }],
        )
        .unwrap();
        SplineSpace::new(mesh, 5, 1).unwrap()
    }

    #[test]
    fn assembled_space_diagonalizes_penalty() {
        let a = AssembledSpace::assemble(two_tri_space()).unwrap();
        assert_eq!(a.dim(), 42 - 11);
        // connected domain, r = 1: zero-energy splines are globally affine
        assert_eq!(a.n_null, 3);
        // penalty is diagonal in the stored basis
        let pq = a.penalty.apply_mat(&a.q2);
        let red = a.q2.t().dot(&pq);
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                let expect = if i == j { a.penalty_eigs[i] } else { 0.0 };
                assert!((red[[i, j]] - expect).abs() < 1e-8 * (1.0 + a.penalty_eigs[i].abs()));
            }
        }
        // orthonormal columns
        let qtq = a.q2.t().dot(&a.q2);
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[[i, j]] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a1 = AssembledSpace::load_or_assemble(two_tri_space(), Some(dir.path())).unwrap();
        let a2 = AssembledSpace::load_or_assemble(two_tri_space(), Some(dir.path())).unwrap();
        assert_eq!(a1.key, a2.key);
        assert_eq!(a1.rank_h, a2.rank_h);
        assert_eq!(a1.q2, a2.q2);
        assert_eq!(a1.penalty_eigs, a2.penalty_eigs);
    }
}
