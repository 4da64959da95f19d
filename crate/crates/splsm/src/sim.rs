//! Data generators and the Monte Carlo driver for the two simulation designs:
//! a horseshoe domain with spatially entangled covariates, and a unit-square
//! lattice with spatially correlated noise.

use crate::basis;
use crate::inference::{self, CovarianceReport};
use crate::linalg::Cholesky;
use crate::mesh::Point2;
use crate::select::{fit_plsm_with, FitOptions, SelectError};
use crate::smoother::DesignSmoother;
use crate::space::AssembledSpace;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

// horseshoe test surface parameters (Wood et al.'s standard configuration)
const HS_R: f64 = 0.5;
const HS_R0: f64 = 0.1;
const HS_HALF_WIDTH: f64 = HS_R - HS_R0;
const HS_ARM_LEN: f64 = 3.0;
/// slack for mesh boundaries that cut the curved part with straight edges
const HS_TOL: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("point ({0}, {1}) lies outside the horseshoe domain")]
    OutsideDomain(f64, f64),
    #[error("location row {0} has x2 = 0; covariate generator undefined there")]
    ZeroX2Row(usize),
    #[error("requested n = {needed} but the sampling grid has only {available} in-domain points")]
    NotEnoughGridPoints { needed: usize, available: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Fit(#[from] SelectError),
    #[error("{failed} of {total} replications failed (over 10%); first error: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("basis evaluation failed: {0}")]
    Basis(#[from] crate::basis::BasisError),
    #[error(transparent)]
    Smoother(#[from] crate::smoother::SmootherError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Example {
    Horseshoe,
    CorrelatedNoise,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub example: Example,
    pub n: usize,
    pub rho: f64,
    pub sigma: f64,
    pub beta_true: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    /// fit with the true support fixed instead of selecting it
    pub oracle: bool,
    /// process SD of the correlated-noise example
    pub gp_sigma: f64,
    /// correlation range of the correlated-noise example
    pub gp_phi: f64,
}

impl SimConfig {
    pub fn horseshoe(n: usize, rho: f64, replications: usize, base_seed: u64) -> Self {
        Self {
            example: Example::Horseshoe,
            n,
            rho,
            sigma: 0.2,
            beta_true: vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            replications,
            base_seed,
            oracle: false,
            gp_sigma: 0.2,
            gp_phi: 0.1 * std::f64::consts::SQRT_2,
        }
    }

    pub fn correlated_noise(n: usize, replications: usize, base_seed: u64) -> Self {
        Self {
            example: Example::CorrelatedNoise,
            rho: 0.0,
            ..Self::horseshoe(n, 0.0, replications, base_seed)
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(SimError::InvalidConfig("n must be at least 1".into()));
        }
        if self.sigma < 0.0 || self.gp_sigma < 0.0 {
            return Err(SimError::InvalidConfig("sigma must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(SimError::InvalidConfig("rho must lie in [0, 1)".into()));
        }
        if self.replications == 0 {
            return Err(SimError::InvalidConfig(
                "at least one replication required".into(),
            ));
        }
        Ok(())
    }
}

/// Wood et al.'s horseshoe test surface f = a + d², where a is arc length
/// along the spine and d the signed offset from it.
pub fn horseshoe_test_function(p: Point2) -> Result<f64, SimError> {
    let (a, d) = horseshoe_coords(p);
    if d.abs() > HS_HALF_WIDTH + HS_TOL || p.x > HS_ARM_LEN + HS_TOL {
        return Err(SimError::OutsideDomain(p.x, p.y));
    }
    Ok(a + d * d)
}

fn horseshoe_coords(p: Point2) -> (f64, f64) {
    let q = std::f64::consts::FRAC_PI_2 * HS_R;
    if p.x >= 0.0 {
        if p.y > 0.0 {
            (q + p.x, p.y - HS_R)
        } else {
            (-q - p.x, -HS_R - p.y)
        }
    } else {
        let a = -(p.y / p.x).atan() * HS_R;
        let d = (p.x * p.x + p.y * p.y).sqrt() - HS_R;
        (a, d)
    }
}

/// All points of a nx x ny grid over the mesh bounding box that fall inside
/// the triangulation.
pub fn in_domain_grid(
    mesh: &crate::mesh::Triangulation,
    nx: usize,
    ny: usize,
) -> Vec<Point2> {
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in &mesh.vertices {
        xmin = xmin.min(v.x);
        xmax = xmax.max(v.x);
        ymin = ymin.min(v.y);
        ymax = ymax.max(v.y);
    }
    let mut pts = Vec::new();
    for iy in 0..ny {
        let y = ymin + (ymax - ymin) * iy as f64 / (ny - 1) as f64;
        for ix in 0..nx {
            let x = xmin + (xmax - xmin) * ix as f64 / (nx - 1) as f64;
            let p = Point2::new(x, y);
            if mesh.locate(p).is_some() {
                pts.push(p);
            }
        }
    }
    pts
}

/// The 20 x 20 lattice over the unit square.
pub fn lattice_grid() -> Vec<Point2> {
    let mut pts = Vec::with_capacity(400);
    for iy in 0..20 {
        for ix in 0..20 {
            pts.push(Point2::new(ix as f64 / 19.0, iy as f64 / 19.0));
        }
    }
    pts
}

/// Covariates of the horseshoe design: columns 1 and 3 mix the location
/// ratio x₁/x₂ with an independent uniform; the rest are Uniform(−1, 1).
pub fn generate_covariates(
    xs: &[Point2],
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>, SimError> {
    let unif = Uniform::new_inclusive(-1.0, 1.0);
    let n = xs.len();
    let mut z = Array2::zeros((n, 8));
    for (i, p) in xs.iter().enumerate() {
        if p.y == 0.0 {
            return Err(SimError::ZeroX2Row(i));
        }
        let u: f64 = unif.sample(rng);
        let t = std::f64::consts::PI * (rho * p.x / p.y + (1.0 - rho) * u);
        z[[i, 0]] = -(2.0 / 3.0) * t.atan();
        z[[i, 2]] = t.cos();
        for j in [1usize, 3, 4, 5, 6, 7] {
            z[[i, j]] = unif.sample(rng);
        }
    }
    Ok(z)
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Vec<Point2>,
    pub z: Array2<f64>,
    pub y: Array1<f64>,
    /// true nonparametric surface at the sampled points (zero for the
    /// correlated-noise design)
    pub alpha: Array1<f64>,
}

/// One replication's data. Replication k draws from an RNG seeded with
/// base_seed + k; locations are sampled without replacement from `grid`.
pub fn generate_dataset(
    cfg: &SimConfig,
    grid: &[Point2],
    replication: usize,
) -> Result<Dataset, SimError> {
    cfg.validate()?;
    if cfg.n > grid.len() {
        return Err(SimError::NotEnoughGridPoints {
            needed: cfg.n,
            available: grid.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed.wrapping_add(replication as u64));
    let idx = rand::seq::index::sample(&mut rng, grid.len(), cfg.n);
    let points: Vec<Point2> = idx.iter().map(|i| grid[i]).collect();
    let p = cfg.beta_true.len();
    let beta = Array1::from_vec(cfg.beta_true.clone());
    match cfg.example {
        Example::Horseshoe => {
            if p != 8 {
                return Err(SimError::InvalidConfig(
                    "horseshoe design uses 8 covariates".into(),
                ));
            }
            let alpha = points
                .iter()
                .map(|&pt| horseshoe_test_function(pt))
                .collect::<Result<Array1<f64>, _>>()?;
            let z = generate_covariates(&points, cfg.rho, &mut rng)?;
            let normal = Normal::new(0.0, cfg.sigma.max(f64::MIN_POSITIVE)).unwrap();
            let eps: Array1<f64> = (0..cfg.n)
                .map(|_| if cfg.sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 })
                .collect();
            let y = &z.dot(&beta) + &alpha + &eps;
            Ok(Dataset {
                points,
                z,
                y,
                alpha,
            })
        }
        Example::CorrelatedNoise => {
            let std_normal = Normal::new(0.0, 1.0).unwrap();
            let z = Array2::from_shape_fn((cfg.n, p), |_| std_normal.sample(&mut rng));
            let eps = sample_gp(&points, cfg.gp_sigma, cfg.gp_phi, &mut rng)?;
            let alpha = Array1::zeros(cfg.n);
            let y = &z.dot(&beta) + &eps;
            Ok(Dataset {
                points,
                z,
                y,
                alpha,
            })
        }
    }
}

/// Zero-mean Gaussian process with squared-exponential covariance
/// c(h) = σ²·exp(−‖h‖²/(2φ²)), sampled via Cholesky with a small jitter.
fn sample_gp(
    points: &[Point2],
    sigma: f64,
    phi: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Array1<f64>, SimError> {
    let n = points.len();
    if sigma == 0.0 {
        return Ok(Array1::zeros(n));
    }
    let mut c = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let dx = points[i].x - points[j].x;
            let dy = points[i].y - points[j].y;
            c[[i, j]] = sigma * sigma * (-(dx * dx + dy * dy) / (2.0 * phi * phi)).exp();
        }
    }
    let jitter = 1e-10 * sigma * sigma;
    for i in 0..n {
        c[[i, i]] += jitter;
    }
    let chol = Cholesky::new(&c)
        .map_err(|e| SimError::InvalidConfig(format!("GP covariance not factorable: {e}")))?;
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let w: Array1<f64> = (0..n).map(|_| std_normal.sample(rng)).collect();
    Ok(chol.lower_apply(&w))
}

#[derive(Debug, Clone, Serialize)]
pub struct RepRecord {
    pub replication: usize,
    pub beta: Vec<f64>,
    pub active: Vec<usize>,
    /// sandwich SEs aligned with `active`
    pub se: Vec<f64>,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma2: f64,
    /// per-replication RMSE of the centered surface estimate on the grid
    pub rmse_alpha: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimMetrics {
    /// mean count of true-nonzero coefficients wrongly zeroed
    pub f: f64,
    /// mean count of true-zero coefficients correctly zeroed
    pub t: f64,
    /// percent of replications recovering the exact support
    pub c: f64,
    pub rmse_beta: Vec<f64>,
    pub rmse_alpha: f64,
    /// mean sandwich SE per coefficient over replications where it was active
    pub se_mean: Vec<f64>,
    /// Monte Carlo SD of each coefficient estimate
    pub sd_beta: Vec<f64>,
    pub replications: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimOutput {
    pub config: SimConfig,
    pub metrics: SimMetrics,
    pub records: Vec<RepRecord>,
}

/// F/T/C and per-coefficient RMSE from completed replications.
pub fn metrics(
    beta_hats: &[Array1<f64>],
    beta_true: &[f64],
    alpha_rmses: &[f64],
) -> Result<SimMetrics, SimError> {
    if beta_hats.is_empty() {
        return Err(SimError::InvalidConfig("no successful replications".into()));
    }
    let p = beta_true.len();
    for b in beta_hats {
        if b.len() != p {
            return Err(SimError::InvalidConfig(format!(
                "beta estimate has {} entries, expected {p}",
                b.len()
            )));
        }
    }
    let reps = beta_hats.len() as f64;
    let mut f_sum = 0.0;
    let mut t_sum = 0.0;
    let mut c_count = 0usize;
    for b in beta_hats {
        let mut false_zeros = 0;
        let mut true_zeros = 0;
        let mut exact = true;
        for j in 0..p {
            let truth_nz = beta_true[j] != 0.0;
            let est_nz = b[j] != 0.0;
            if truth_nz && !est_nz {
                false_zeros += 1;
            }
            if !truth_nz && !est_nz {
                true_zeros += 1;
            }
            if truth_nz != est_nz {
                exact = false;
            }
        }
        f_sum += false_zeros as f64;
        t_sum += true_zeros as f64;
        if exact {
            c_count += 1;
        }
    }
    let rmse_beta: Vec<f64> = (0..p)
        .map(|j| {
            (beta_hats
                .iter()
                .map(|b| (b[j] - beta_true[j]).powi(2))
                .sum::<f64>()
                / reps)
                .sqrt()
        })
        .collect();
    let sd_beta: Vec<f64> = (0..p)
        .map(|j| {
            let mean = beta_hats.iter().map(|b| b[j]).sum::<f64>() / reps;
            (beta_hats.iter().map(|b| (b[j] - mean).powi(2)).sum::<f64>() / reps).sqrt()
        })
        .collect();
    let rmse_alpha = if alpha_rmses.is_empty() {
        0.0
    } else {
        alpha_rmses.iter().sum::<f64>() / alpha_rmses.len() as f64
    };
    Ok(SimMetrics {
        f: f_sum / reps,
        t: t_sum / reps,
        c: 100.0 * c_count as f64 / reps,
        rmse_beta,
        rmse_alpha,
        se_mean: Vec::new(),
        sd_beta,
        replications: beta_hats.len(),
        failures: 0,
    })
}

/// Run the full Monte Carlo experiment. Replications execute in parallel on
/// the current rayon pool; per-replication RNG streams and ordered collection
/// make the result independent of scheduling.
pub fn run_monte_carlo(
    aspace: &AssembledSpace,
    cfg: &SimConfig,
    fit_opts: &FitOptions,
) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let grid = match cfg.example {
        Example::Horseshoe => in_domain_grid(&aspace.space.mesh, 180, 80),
        Example::CorrelatedNoise => lattice_grid(),
    };
    if cfg.n > grid.len() {
        return Err(SimError::NotEnoughGridPoints {
            needed: cfg.n,
            available: grid.len(),
        });
    }
    // centered true surface on the evaluation grid
    let alpha_true: Array1<f64> = match cfg.example {
        Example::Horseshoe => grid
            .iter()
            .map(|&p| horseshoe_test_function(p))
            .collect::<Result<Array1<f64>, _>>()?,
        Example::CorrelatedNoise => Array1::zeros(grid.len()),
    };
    let alpha_mean = alpha_true.sum() / alpha_true.len() as f64;
    let alpha_centered = &alpha_true - alpha_mean;

    let oracle_active: Option<Vec<usize>> = cfg.oracle.then(|| {
        cfg.beta_true
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect()
    });

    let records: Vec<RepRecord> = (0..cfg.replications)
        .into_par_iter()
        .map(|k| match run_one(aspace, cfg, &grid, &alpha_centered, &oracle_active, fit_opts, k) {
            Ok(rec) => rec,
            Err(e) => RepRecord {
                replication: k,
                beta: Vec::new(),
                active: Vec::new(),
                se: Vec::new(),
                lambda0: f64::NAN,
                lambda1: f64::NAN,
                lambda2: f64::NAN,
                sigma2: f64::NAN,
                rmse_alpha: f64::NAN,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let failed: Vec<&RepRecord> = records.iter().filter(|r| r.error.is_some()).collect();
    if failed.len() * 10 > cfg.replications {
        return Err(SimError::TooManyFailures {
            failed: failed.len(),
            total: cfg.replications,
            first: failed[0].error.clone().unwrap(),
        });
    }
    let ok: Vec<&RepRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let beta_hats: Vec<Array1<f64>> = ok
        .iter()
        .map(|r| Array1::from_vec(r.beta.clone()))
        .collect();
    let alpha_rmses: Vec<f64> = ok.iter().map(|r| r.rmse_alpha).collect();
    let mut m = metrics(&beta_hats, &cfg.beta_true, &alpha_rmses)?;
    m.failures = failed.len();
    m.replications = cfg.replications;
    // mean sandwich SE per coefficient, over replications where it was active
    let p = cfg.beta_true.len();
    m.se_mean = (0..p)
        .map(|j| {
            let vals: Vec<f64> = ok
                .iter()
                .filter_map(|r| {
                    r.active
                        .iter()
                        .position(|&a| a == j)
                        .map(|pos| r.se[pos])
                })
                .collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    Ok(SimOutput {
        config: cfg.clone(),
        metrics: m,
        records,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    aspace: &AssembledSpace,
    cfg: &SimConfig,
    grid: &[Point2],
    alpha_centered: &Array1<f64>,
    oracle_active: &Option<Vec<usize>>,
    fit_opts: &FitOptions,
    k: usize,
) -> Result<RepRecord, SimError> {
    let data = generate_dataset(cfg, grid, k)?;
    let b = basis::eval_basis_matrix(&aspace.space, &data.points)?;
    let ds = DesignSmoother::build(aspace, &b)?;
    let opts = FitOptions {
        oracle_active: oracle_active.clone(),
        ..fit_opts.clone()
    };
    let fit = fit_plsm_with(aspace, &ds, &data.y, &data.z, &opts)?;
    let report: CovarianceReport = inference::sandwich_cov(&fit, &ds, &data.z, cfg.n)?;

    // centered surface error over the evaluation grid
    let est = basis::eval_spline(&aspace.space, &fit.gamma, grid)?;
    let mut vals = Vec::with_capacity(grid.len());
    for v in est {
        match v {
            Some(x) => vals.push(x),
            None => vals.push(f64::NAN),
        }
    }
    let finite: Vec<(usize, f64)> = vals
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, &v)| (i, v))
        .collect();
    let est_mean = finite.iter().map(|(_, v)| v).sum::<f64>() / finite.len() as f64;
    let mse = finite
        .iter()
        .map(|&(i, v)| (v - est_mean - alpha_centered[i]).powi(2))
        .sum::<f64>()
        / finite.len() as f64;

    Ok(RepRecord {
        replication: k,
        beta: fit.beta.to_vec(),
        active: fit.active.clone(),
        se: report.se,
        lambda0: fit.lambda0,
        lambda1: fit.lambda1,
        lambda2: fit.lambda2,
        sigma2: report.sigma2,
        rmse_alpha: mse.sqrt(),
        error: None,
    })
}
