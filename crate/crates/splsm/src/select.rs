//! SCAD-penalized selection of the linear covariates and the three-step
//! fitting pipeline: presmooth, select, refit.

use crate::smoother::{self, DesignSmoother, GcvRow, SmootherError};
use crate::space::AssembledSpace;
use ndarray::{Array1, Array2, Axis};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error(transparent)]
    Smoother(#[from] SmootherError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("penalty parameter must be nonnegative")]
    NegativePenalty,
    #[error("oracle active set contains index {0} out of range")]
    OracleOutOfRange(usize),
    #[error("linear system for the active covariates is singular")]
    SingularActiveBlock,
}

/// SCAD penalty with shape parameter a (> 2).
#[derive(Debug, Clone, Copy)]
pub struct ScadPenalty {
    pub lambda: f64,
    pub a: f64,
}

impl ScadPenalty {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, a: 3.7 }
    }

    /// p_λ(β) for β ≥ 0.
    pub fn value(&self, beta: f64) -> f64 {
        debug_assert!(beta >= 0.0);
        let (l, a) = (self.lambda, self.a);
        if beta <= l {
            l * beta
        } else if beta <= a * l {
            -(beta * beta - 2.0 * a * l * beta + l * l) / (2.0 * (a - 1.0))
        } else {
            (a + 1.0) * l * l / 2.0
        }
    }

    /// p'_λ(β) for β ≥ 0.
    pub fn derivative(&self, beta: f64) -> f64 {
        debug_assert!(beta >= 0.0);
        let (l, a) = (self.lambda, self.a);
        if beta <= l {
            l
        } else {
            (a * l - beta).max(0.0) / (a - 1.0)
        }
    }

    /// argmin over b of ½(b − z)² + p_λ(|b|); closed form in three regimes.
    pub fn univariate_update(&self, z: f64) -> f64 {
        let (l, a) = (self.lambda, self.a);
        if l == 0.0 {
            return z;
        }
        let az = z.abs();
        if az <= 2.0 * l {
            soft_threshold(z, l)
        } else if az <= a * l {
            soft_threshold(z, a * l / (a - 1.0)) / (1.0 - 1.0 / (a - 1.0))
        } else {
            z
        }
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

#[derive(Debug, Clone, Copy)]
pub struct CdConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CdResult {
    /// coefficients on the original covariate scale
    pub beta: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// final objective in the standardized parametrization
    pub objective: f64,
}

/// Objective ½‖y − Xb‖² + n·Σ p_λ(|b_j|) on the standardized design
/// (columns of X have unit second moment).
pub fn cd_objective(y: &Array1<f64>, x: &Array2<f64>, b: &Array1<f64>, pen: &ScadPenalty) -> f64 {
    let r = y - &x.dot(b);
    let n = y.len() as f64;
    0.5 * r.dot(&r) + n * b.iter().map(|&v| pen.value(v.abs())).sum::<f64>()
}

/// Cyclic coordinate descent for the SCAD-penalized least-squares problem.
///
/// Columns are rescaled internally to unit second moment; the penalty acts on
/// the standardized coefficients and the returned beta is mapped back to the
/// original scale. After the first full sweep, only the active set is cycled
/// until it stabilizes, then a full sweep checks for violations.
pub fn coordinate_descent(
    y: &Array1<f64>,
    z: &Array2<f64>,
    pen: &ScadPenalty,
    init: Option<&Array1<f64>>,
    cfg: &CdConfig,
) -> Result<CdResult, SelectError> {
    let (n, p) = z.dim();
    if y.len() != n {
        return Err(SelectError::Dimension(format!(
            "{} responses but {} design rows",
            y.len(),
            n
        )));
    }
    if pen.lambda < 0.0 {
        return Err(SelectError::NegativePenalty);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SelectError::NonFinite("response"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(SelectError::NonFinite("design"));
    }
    let nf = n as f64;
    let scales: Vec<f64> = (0..p)
        .map(|j| (z.column(j).dot(&z.column(j)) / nf).sqrt())
        .collect();
    let mut x = z.clone();
    for (j, &s) in scales.iter().enumerate() {
        if s > 0.0 {
            x.column_mut(j).mapv_inplace(|v| v / s);
        }
    }
    let mut b: Array1<f64> = match init {
        Some(b0) => {
            if b0.len() != p {
                return Err(SelectError::Dimension("warm start length".into()));
            }
            Array1::from_iter((0..p).map(|j| b0[j] * scales[j]))
        }
        None => Array1::zeros(p),
    };
    let mut r = y - &x.dot(&b);
    let mut iterations = 0;
    let mut converged = p == 0;
    let mut scan_all = true;
    while iterations < cfg.max_iter && !converged {
        iterations += 1;
        let mut max_delta = 0.0_f64;
        for j in 0..p {
            if scales[j] == 0.0 || (!scan_all && b[j] == 0.0) {
                continue;
            }
            let zj = x.column(j).dot(&r) / nf + b[j];
            let bnew = pen.univariate_update(zj);
            let delta = bnew - b[j];
            if delta != 0.0 {
                r.scaled_add(-delta, &x.column(j));
                b[j] = bnew;
            }
            max_delta = max_delta.max(delta.abs());
        }
        let bmax = b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if max_delta <= cfg.tol * bmax {
            if scan_all {
                converged = true;
            } else {
                scan_all = true; // active set stable: verify with a full sweep
            }
        } else {
            scan_all = false;
        }
    }
    let objective = cd_objective(y, &x, &b, pen);
    let beta = Array1::from_iter((0..p).map(|j| if scales[j] > 0.0 { b[j] / scales[j] } else { 0.0 }));
    Ok(CdResult {
        beta,
        iterations,
        converged,
        objective,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BicRow {
    pub lambda2: f64,
    pub df: usize,
    pub rss: f64,
    pub bic: f64,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BicResult {
    pub lambda2: f64,
    pub beta: Array1<f64>,
    pub table: Vec<BicRow>,
}

/// Default descending λ₂ path: 50 log-spaced points from λ_max down to
/// 1e-3·λ_max, with λ_max = max_j |x_jᵀy|/n on standardized columns.
pub fn default_lambda2_grid(y: &Array1<f64>, z: &Array2<f64>) -> Vec<f64> {
    let (n, p) = z.dim();
    let nf = n as f64;
    let mut lmax = 0.0_f64;
    for j in 0..p {
        let norm2 = z.column(j).dot(&z.column(j)) / nf;
        if norm2 > 0.0 {
            lmax = lmax.max((z.column(j).dot(y) / nf).abs() / norm2.sqrt());
        }
    }
    if lmax <= 0.0 {
        lmax = 1.0;
    }
    let mut grid = smoother::log_grid(1e-3 * lmax, lmax, 50);
    grid.reverse();
    grid
}

/// Walk the λ₂ path with warm starts; pick the BIC minimizer,
/// BIC = n·log(RSS/n) + df·log(n), ties toward larger λ₂.
pub fn bic_select(
    y: &Array1<f64>,
    z: &Array2<f64>,
    grid: &[f64],
    cfg: &CdConfig,
) -> Result<BicResult, SelectError> {
    let (n, p) = z.dim();
    let nf = n as f64;
    let mut table = Vec::with_capacity(grid.len());
    let mut warm: Option<Array1<f64>> = None;
    let mut best: Option<(f64, f64, Array1<f64>)> = None;
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for &lambda2 in &sorted {
        let pen = ScadPenalty::new(lambda2);
        let res = coordinate_descent(y, z, &pen, warm.as_ref(), cfg)?;
        let fit = z.dot(&res.beta);
        let rss = (y - &fit).mapv(|v| v * v).sum().max(f64::MIN_POSITIVE);
        let df = res.beta.iter().filter(|v| **v != 0.0).count();
        let bic = nf * (rss / nf).ln() + df as f64 * nf.ln();
        table.push(BicRow {
            lambda2,
            df,
            rss,
            bic,
            beta: res.beta.to_vec(),
        });
        // descending walk: strict "<" keeps the earlier (larger) λ₂ on ties
        match &best {
            Some((_, bb, _)) if bic >= *bb => {}
            _ => best = Some((lambda2, bic, res.beta.clone())),
        }
        warm = Some(res.beta);
    }
    let _ = p;
    let (lambda2, _, beta) = best.ok_or(SmootherError::EmptyGrid)?;
    Ok(BicResult {
        lambda2,
        beta,
        table,
    })
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// grid for the smoothing parameter (steps 0 and 2); default is scaled to n·|△|³
    pub lambda1_grid: Option<Vec<f64>>,
    /// grid for the selection parameter; default descends from λ_max
    pub lambda2_grid: Option<Vec<f64>>,
    /// fix the active set instead of selecting it (oracle refit)
    pub oracle_active: Option<Vec<usize>>,
    pub cd: CdConfig,
}

/// Fitted partially linear spatial model.
#[derive(Debug, Clone)]
pub struct PlsmFit {
    /// length-p coefficient vector; zero outside the active set
    pub beta: Array1<f64>,
    pub active: Vec<usize>,
    /// spline coefficients of the nonparametric surface
    pub gamma: Array1<f64>,
    pub theta: Array1<f64>,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub trace_hat: f64,
    pub rss: f64,
    pub fitted: Array1<f64>,
    pub gcv_step0: Vec<GcvRow>,
    pub gcv_step2: Vec<GcvRow>,
    pub bic_table: Vec<BicRow>,
}

/// Three-step fit: presmooth both Y and Z at a GCV-chosen λ₀, run SCAD
/// coordinate descent on the partial residuals with λ₂ chosen by BIC, then
/// refit β on the active set jointly with the surface at a GCV-chosen λ₁.
pub fn fit_plsm(
    aspace: &AssembledSpace,
    b: &Array2<f64>,
    y: &Array1<f64>,
    z: &Array2<f64>,
    opts: &FitOptions,
) -> Result<PlsmFit, SelectError> {
    if b.nrows() != y.len() {
        return Err(SelectError::Dimension(format!(
            "basis has {} rows but {} responses",
            b.nrows(),
            y.len()
        )));
    }
    let ds = DesignSmoother::build(aspace, b)?;
    fit_plsm_with(aspace, &ds, y, z, opts)
}

/// Same as [`fit_plsm`] but reusing an already-built smoother for the
/// observation locations (the Monte Carlo driver shares it with inference).
pub fn fit_plsm_with(
    aspace: &AssembledSpace,
    ds: &DesignSmoother,
    y: &Array1<f64>,
    z: &Array2<f64>,
    opts: &FitOptions,
) -> Result<PlsmFit, SelectError> {
    let (n, p) = z.dim();
    if ds.n_obs() != n || y.len() != n {
        return Err(SelectError::Dimension(format!(
            "rows: smoother {}, y {}, z {}",
            ds.n_obs(),
            y.len(),
            n
        )));
    }
    let lambda1_grid = opts
        .lambda1_grid
        .clone()
        .unwrap_or_else(|| smoother::default_lambda_grid(n, aspace.space.mesh.mesh_size));

    // Step 0: presmooth
    let (lambda0, gcv_step0) = smoother::gcv_select(ds, y, &lambda1_grid)?;
    let y_work = y - &ds.hat_apply(lambda0, y)?;
    let z_work = if p > 0 {
        z - &ds.hat_apply_mat(lambda0, z)?
    } else {
        z.clone()
    };

    // Step 1: SCAD selection on the partial residuals
    let (active, lambda2, bic_table) = if let Some(oracle) = &opts.oracle_active {
        for &j in oracle {
            if j >= p {
                return Err(SelectError::OracleOutOfRange(j));
            }
        }
        let mut a = oracle.clone();
        a.sort_unstable();
        a.dedup();
        (a, 0.0, Vec::new())
    } else if p == 0 {
        (Vec::new(), 0.0, Vec::new())
    } else {
        let grid2 = opts
            .lambda2_grid
            .clone()
            .unwrap_or_else(|| default_lambda2_grid(&y_work, &z_work));
        let sel = bic_select(&y_work, &z_work, &grid2, &opts.cd)?;
        let active: Vec<usize> = sel
            .beta
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect();
        (active, sel.lambda2, sel.table)
    };

    // Step 2: refit on the active set, tuning λ₁ by GCV with edf = q + tr H
    let q = active.len();
    let z_act = select_columns(z, &active);
    let nf = n as f64;
    let mut gcv_step2 = Vec::with_capacity(lambda1_grid.len());
    let mut best: Option<(f64, f64)> = None;
    let mut sorted = lambda1_grid.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &lambda in &sorted {
        let beta_a = profile_beta(ds, lambda, y, &z_act)?;
        let resid_lin = y - &z_act.dot(&beta_a);
        let fitted = &z_act.dot(&beta_a) + &ds.hat_apply(lambda, &resid_lin)?;
        let rss = (y - &fitted).mapv(|v| v * v).sum();
        let tr = ds.hat_trace(lambda);
        let edf = q as f64 + tr;
        let gcv = if edf < nf {
            nf * rss / (nf - edf).powi(2)
        } else {
            f64::INFINITY
        };
        gcv_step2.push(GcvRow {
            lambda,
            rss,
            trace_hat: tr,
            gcv,
        });
        if gcv.is_finite() {
            match best {
                Some((_, bg)) if gcv > bg => {}
                _ => best = Some((lambda, gcv)),
            }
        }
    }
    let (lambda1, _) = best.ok_or(SmootherError::Oversaturated)?;

    let beta_a = profile_beta(ds, lambda1, y, &z_act)?;
    let resid_lin = y - &z_act.dot(&beta_a);
    let theta = ds.solve_theta(lambda1, &resid_lin)?;
    let gamma = aspace.gamma_from_theta(&theta);
    let fitted = &z_act.dot(&beta_a) + &ds.hat_apply(lambda1, &resid_lin)?;
    let rss = (y - &fitted).mapv(|v| v * v).sum();
    let mut beta = Array1::zeros(p);
    for (i, &j) in active.iter().enumerate() {
        beta[j] = beta_a[i];
    }
    Ok(PlsmFit {
        beta,
        active,
        gamma,
        theta,
        lambda0,
        lambda1,
        lambda2,
        trace_hat: ds.hat_trace(lambda1),
        rss,
        fitted,
        gcv_step0,
        gcv_step2,
        bic_table,
    })
}

/// Profiled linear coefficients: β = [Z*ᵀ(I−H)Z*]⁻¹ Z*ᵀ(I−H)Y.
fn profile_beta(
    ds: &DesignSmoother,
    lambda: f64,
    y: &Array1<f64>,
    z_act: &Array2<f64>,
) -> Result<Array1<f64>, SelectError> {
    let q = z_act.ncols();
    if q == 0 {
        return Ok(Array1::zeros(0));
    }
    let hz = ds.hat_apply_mat(lambda, z_act)?;
    let zmh = z_act - &hz;
    let lhs = z_act.t().dot(&zmh);
    let hy = ds.hat_apply(lambda, y)?;
    let rhs = z_act.t().dot(&(y - &hy));
    // symmetrize before factoring; the exact matrix is symmetric PSD
    let lhs_sym = 0.5 * (&lhs + &lhs.t());
    let chol =
        crate::linalg::Cholesky::new(&lhs_sym).map_err(|_| SelectError::SingularActiveBlock)?;
    Ok(chol.solve_vec(&rhs))
}

pub fn select_columns(z: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let n = z.nrows();
    let mut out = Array2::zeros((n, idx.len()));
    for (k, &j) in idx.iter().enumerate() {
        out.index_axis_mut(Axis(1), k).assign(&z.column(j));
    }
    out
}
