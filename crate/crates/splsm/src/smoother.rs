//! Penalized least-squares smoother over the constrained spline space.
//!
//! Two equivalent routes are provided. `PenalizedSystem` factors
//! M(λ) = EᵀE + λD once per λ via Cholesky. `DesignSmoother` does a one-time
//! spectral preparation of the design so that fits, hat traces and GCV over a
//! whole λ grid cost O(n·k) per value — this is what the tuning loops and the
//! Monte Carlo harness use. In exact arithmetic the two agree.

use crate::linalg::{self, Cholesky, LinalgError};
use crate::space::AssembledSpace;
use ndarray::{s, Array1, Array2, Axis};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SmootherError {
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
    #[error("design matrix has rank-deficient unpenalized block")]
    DegenerateNullBlock,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no lambda on the grid yields effective dof below n; more data or a coarser mesh is needed")]
    Oversaturated,
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("negative penalty weight encountered")]
    NegativePenalty,
}

/// Result of a single penalized solve.
#[derive(Debug, Clone)]
pub struct SmootherFit {
    /// coefficients in the eigen-rotated null-space basis
    pub theta: Array1<f64>,
    /// spline coefficients γ = Q₂θ
    pub gamma: Array1<f64>,
    pub fitted: Array1<f64>,
    pub trace_hat: f64,
    /// true when the Cholesky needed a ridge jitter to factor
    pub jittered: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GcvRow {
    pub lambda: f64,
    pub rss: f64,
    pub trace_hat: f64,
    pub gcv: f64,
}

/// Explicit normal-equations route: M(λ) = EᵀE + λ·diag(ρ).
pub struct PenalizedSystem {
    e: Array2<f64>,
    ete: Array2<f64>,
    chol: Cholesky,
    jittered: bool,
}

impl PenalizedSystem {
    pub fn new(
        e: &Array2<f64>,
        penalty_eigs: &Array1<f64>,
        lambda: f64,
    ) -> Result<Self, SmootherError> {
        let m = e.ncols();
        if penalty_eigs.len() != m {
            return Err(SmootherError::Dimension(format!(
                "design has {m} columns but {} penalty weights given",
                penalty_eigs.len()
            )));
        }
        if penalty_eigs.iter().any(|&r| r < 0.0) || lambda < 0.0 {
            return Err(SmootherError::NegativePenalty);
        }
        let ete = e.t().dot(e);
        let mut mmat = ete.clone();
        for i in 0..m {
            mmat[[i, i]] += lambda * penalty_eigs[i];
        }
        let (chol, jittered) = match Cholesky::new(&mmat) {
            Ok(c) => (c, false),
            Err(_) => {
                let trace: f64 = (0..m).map(|i| mmat[[i, i]]).sum();
                let jitter = 1e-10 * trace / m as f64;
                for i in 0..m {
                    mmat[[i, i]] += jitter;
                }
                (Cholesky::new(&mmat)?, true)
            }
        };
        Ok(Self {
            e: e.clone(),
            ete,
            chol,
            jittered,
        })
    }

    pub fn solve_theta(
        &self,
        space: &AssembledSpace,
        y: &Array1<f64>,
    ) -> Result<SmootherFit, SmootherError> {
        if y.len() != self.e.nrows() {
            return Err(SmootherError::Dimension(format!(
                "response length {} does not match {} rows",
                y.len(),
                self.e.nrows()
            )));
        }
        let rhs = self.e.t().dot(y);
        let theta = self.chol.solve_vec(&rhs);
        let fitted = self.e.dot(&theta);
        let gamma = space.gamma_from_theta(&theta);
        let trace_hat = self.hat_trace()?;
        Ok(SmootherFit {
            theta,
            gamma,
            fitted,
            trace_hat,
            jittered: self.jittered,
        })
    }

    /// tr H = tr(M⁻¹ EᵀE), via m back-solves; never forms the n x n hat matrix.
    pub fn hat_trace(&self) -> Result<f64, SmootherError> {
        let sol = self.chol.solve_mat(&self.ete);
        Ok((0..sol.nrows()).map(|i| sol[[i, i]]).sum())
    }
}

/// Spectral preparation of a design E = B·Q₂ with diagonal penalty ρ.
///
/// Splits off the unpenalized (ρ = 0) columns E₀ = U₀R₀, rescales the rest by
/// ρ^{-1/2}, and takes a thin SVD of the part orthogonal to U₀. Every
/// λ-dependent quantity then reduces to diagonal shrinkage of projections.
pub struct DesignSmoother {
    n: usize,
    n_null: usize,
    u0: Array2<f64>,
    r0: Array2<f64>,
    ep: Array2<f64>,
    u: Array2<f64>,
    sv: Array1<f64>,
    w: Array2<f64>,
    sqrt_eigs: Array1<f64>,
}

impl DesignSmoother {
    pub fn new(
        e: &Array2<f64>,
        penalty_eigs: &Array1<f64>,
        n_null: usize,
    ) -> Result<Self, SmootherError> {
        let (n, m) = e.dim();
        if penalty_eigs.len() != m || n_null > m {
            return Err(SmootherError::Dimension(format!(
                "design {n}x{m}, {} penalty weights, n_null {n_null}",
                penalty_eigs.len()
            )));
        }
        if penalty_eigs.iter().any(|&r| r < 0.0) {
            return Err(SmootherError::NegativePenalty);
        }
        let e0 = e.slice(s![.., ..n_null]).to_owned();
        let (u0, r0) = thin_qr(&e0)?;
        let sqrt_eigs = penalty_eigs
            .slice(s![n_null..])
            .mapv(f64::sqrt);
        let mut ep = e.slice(s![.., n_null..]).to_owned();
        for (j, mut col) in ep.axis_iter_mut(Axis(1)).enumerate() {
            let sr = sqrt_eigs[j];
            if sr > 0.0 {
                col.mapv_inplace(|v| v / sr);
            }
        }
        // project out the unpenalized column space before the SVD
        let proj = u0.t().dot(&ep);
        let etil = &ep - &u0.dot(&proj);
        let svd = linalg::svd(&etil, false)?;
        let k = svd.s.len();
        Ok(Self {
            n,
            n_null,
            u0,
            r0,
            ep,
            u: svd.u.slice(s![.., ..k]).to_owned(),
            sv: svd.s,
            w: svd.vt.slice(s![..k, ..]).t().to_owned(),
            sqrt_eigs,
        })
    }

    pub fn build(space: &AssembledSpace, b: &Array2<f64>) -> Result<Self, SmootherError> {
        let e = b.dot(&space.q2);
        Self::new(&e, &space.penalty_eigs, space.n_null)
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n_null + self.sqrt_eigs.len()
    }

    fn shrink_factors(&self, lambda: f64) -> Array1<f64> {
        let smax = self.sv.iter().cloned().fold(0.0, f64::max);
        self.sv.mapv(|sv| {
            let denom = sv * sv + lambda;
            if sv <= 1e-12 * smax || denom == 0.0 {
                0.0
            } else {
                sv * sv / denom
            }
        })
    }

    /// Apply the hat operator H_B(λ) to a response vector.
    pub fn hat_apply(&self, lambda: f64, y: &Array1<f64>) -> Result<Array1<f64>, SmootherError> {
        if y.len() != self.n {
            return Err(SmootherError::Dimension(format!(
                "response length {} does not match {}",
                y.len(),
                self.n
            )));
        }
        let f = self.shrink_factors(lambda);
        let uty = self.u.t().dot(y);
        let mut fitted = self.u.dot(&(&uty * &f));
        let u0ty = self.u0.t().dot(y);
        fitted += &self.u0.dot(&u0ty);
        Ok(fitted)
    }

    /// Apply the hat operator to every column of a matrix.
    pub fn hat_apply_mat(&self, lambda: f64, cols: &Array2<f64>) -> Result<Array2<f64>, SmootherError> {
        if cols.nrows() != self.n {
            return Err(SmootherError::Dimension(format!(
                "matrix has {} rows, expected {}",
                cols.nrows(),
                self.n
            )));
        }
        let f = self.shrink_factors(lambda);
        let utc = self.u.t().dot(cols);
        let shrunk = &utc * &f.view().insert_axis(Axis(1));
        let mut fitted = self.u.dot(&shrunk);
        fitted += &self.u0.dot(&self.u0.t().dot(cols));
        Ok(fitted)
    }

    pub fn hat_trace(&self, lambda: f64) -> f64 {
        self.n_null as f64 + self.shrink_factors(lambda).sum()
    }

    /// Full penalized solve, returning coefficients in the eigen-rotated basis.
    pub fn solve_theta(&self, lambda: f64, y: &Array1<f64>) -> Result<Array1<f64>, SmootherError> {
        if y.len() != self.n {
            return Err(SmootherError::Dimension(format!(
                "response length {} does not match {}",
                y.len(),
                self.n
            )));
        }
        let smax = self.sv.iter().cloned().fold(0.0, f64::max);
        let uty = self.u.t().dot(y);
        let g = ndarray::Zip::from(&uty)
            .and(&self.sv)
            .map_collect(|&c, &sv| {
                let denom = sv * sv + lambda;
                if sv <= 1e-12 * smax || denom == 0.0 {
                    0.0
                } else {
                    sv * c / denom
                }
            });
        let b = self.w.dot(&g);
        // unpenalized block fitted by exact least squares on the residual
        let resid = y - &self.ep.dot(&b);
        let rhs = self.u0.t().dot(&resid);
        let a = solve_upper(&self.r0, &rhs)?;
        let mut theta = Array1::zeros(self.dim());
        theta.slice_mut(s![..self.n_null]).assign(&a);
        for j in 0..self.sqrt_eigs.len() {
            let sr = self.sqrt_eigs[j];
            theta[self.n_null + j] = if sr > 0.0 { b[j] / sr } else { b[j] };
        }
        Ok(theta)
    }
}

/// Default tuning grid: 50 log-spaced values scaled by n·|△|³.
pub fn default_lambda_grid(n: usize, mesh_size: f64) -> Vec<f64> {
    let scale = n as f64 * mesh_size.powi(3);
    log_grid(1e-6 * scale, 1e4 * scale, 50)
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Minimize GCV(λ) = n·RSS(λ) / (n − tr H(λ))² over a grid.
///
/// Grid points with tr H ≥ n are skipped; ties resolve toward the larger λ.
pub fn gcv_select(
    ds: &DesignSmoother,
    y: &Array1<f64>,
    grid: &[f64],
) -> Result<(f64, Vec<GcvRow>), SmootherError> {
    if grid.is_empty() {
        return Err(SmootherError::EmptyGrid);
    }
    let n = ds.n_obs() as f64;
    let mut rows = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &lambda in &sorted {
        let fitted = ds.hat_apply(lambda, y)?;
        let rss = (y - &fitted).mapv(|v| v * v).sum();
        let tr = ds.hat_trace(lambda);
        let gcv = if tr < n {
            n * rss / (n - tr).powi(2)
        } else {
            f64::INFINITY
        };
        rows.push(GcvRow {
            lambda,
            rss,
            trace_hat: tr,
            gcv,
        });
        if gcv.is_finite() {
            match best {
                // ascending grid: "<= " keeps the largest λ among ties
                Some((_, bg)) if gcv > bg => {}
                _ => best = Some((lambda, gcv)),
            }
        }
    }
    match best {
        Some((lambda, _)) => Ok((lambda, rows)),
        None => Err(SmootherError::Oversaturated),
    }
}

/// Thin QR of a tall matrix with few columns (modified Gram-Schmidt,
/// one re-orthogonalization pass).
fn thin_qr(a: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>), SmootherError> {
    let (n, k) = a.dim();
    let mut q = a.clone();
    let mut r = Array2::zeros((k, k));
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i).to_owned();
                let proj = qi.dot(&q.column(j));
                r[[i, j]] += proj;
                let mut cj = q.column_mut(j);
                cj.scaled_add(-proj, &qi);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm <= 1e-12 * scale * (n as f64).sqrt() {
            return Err(SmootherError::DegenerateNullBlock);
        }
        r[[j, j]] = norm;
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    Ok((q, r))
}

fn solve_upper(r: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>, SmootherError> {
    let k = r.nrows();
    let mut x = b.clone();
    for i in (0..k).rev() {
        let mut v = x[i];
        for j in i + 1..k {
            v -= r[[i, j]] * x[j];
        }
        if r[[i, i]] == 0.0 {
            return Err(SmootherError::DegenerateNullBlock);
        }
        x[i] = v / r[[i, i]];
    }
    Ok(x)
}
