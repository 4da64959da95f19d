//! Variance estimation and sandwich standard errors for the linear part.

use crate::linalg::Cholesky;
use crate::select::{PlsmFit, ScadPenalty, SelectError};
use crate::smoother::DesignSmoother;
use ndarray::{Array1, Array2};
use serde::Serialize;

/// Standard errors and covariance for the active linear coefficients.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    /// active-set indices the rows/columns refer to
    pub active: Vec<usize>,
    /// sandwich covariance of the active coefficients, row-major q x q
    pub cov: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    pub sigma2: f64,
    /// effective degrees of freedom of the whole fit
    pub edf: f64,
}

/// σ̂² = RSS / (n − tr S), with tr S the effective dof of the combined
/// linear + smoothing operator.
pub fn sigma2_hat(rss: f64, n: usize, trace_s: f64) -> f64 {
    rss / (n as f64 - trace_s)
}

/// Effective dof of the full fit:
/// tr S = tr[(A + nΣ)⁻¹A] + tr H_B(λ₁), where A = (Z* − Ẑ*)ᵀ(Z* − Ẑ*) and
/// Σ = diag(p'_{λ₂}(|β_j|)/|β_j|) on the active set.
pub fn trace_s(
    a: &Array2<f64>,
    sigma_diag: &Array1<f64>,
    n: usize,
    trace_hat: f64,
) -> Result<f64, SelectError> {
    let q = a.nrows();
    if q == 0 {
        return Ok(trace_hat);
    }
    let mut m = a.clone();
    for i in 0..q {
        m[[i, i]] += n as f64 * sigma_diag[i];
    }
    let chol = Cholesky::new(&m).map_err(|_| SelectError::SingularActiveBlock)?;
    let sol = chol.solve_mat(a);
    let tr_par: f64 = (0..q).map(|i| sol[[i, i]]).sum();
    Ok(tr_par + trace_hat)
}

/// Sandwich covariance σ̂²(A + nΣ)⁻¹A(A + nΣ)⁻¹ for the active coefficients,
/// plus σ̂² from the residuals. `ds` must be the smoother used in the fit.
pub fn sandwich_cov(
    fit: &PlsmFit,
    ds: &DesignSmoother,
    z: &Array2<f64>,
    n: usize,
) -> Result<CovarianceReport, SelectError> {
    let active = fit.active.clone();
    let q = active.len();
    let z_act = crate::select::select_columns(z, &active);
    let hz = ds.hat_apply_mat(fit.lambda1, &z_act)?;
    let diff = &z_act - &hz;
    let a = diff.t().dot(&diff);

    let pen = ScadPenalty::new(fit.lambda2);
    let sigma_diag = Array1::from_iter(active.iter().map(|&j| {
        let b = fit.beta[j].abs();
        if b > 0.0 {
            pen.derivative(b) / b
        } else {
            0.0
        }
    }));
    let edf = trace_s(&a, &sigma_diag, n, fit.trace_hat)?;
    let sigma2 = sigma2_hat(fit.rss, n, edf);

    let (cov, se) = if q == 0 {
        (Vec::new(), Vec::new())
    } else {
        let mut m = a.clone();
        for i in 0..q {
            m[[i, i]] += n as f64 * sigma_diag[i];
        }
        let chol = Cholesky::new(&m).map_err(|_| SelectError::SingularActiveBlock)?;
        // (A + nΣ)⁻¹ A (A + nΣ)⁻¹, built with two solves
        let inner = chol.solve_mat(&a);
        let cov_mat = chol.solve_mat(&inner.t().to_owned());
        let cov_sym = 0.5 * (&cov_mat + &cov_mat.t());
        let se: Vec<f64> = (0..q).map(|i| (sigma2 * cov_sym[[i, i]]).sqrt()).collect();
        let cov: Vec<Vec<f64>> = (0..q)
            .map(|i| (0..q).map(|j| sigma2 * cov_sym[[i, j]]).collect())
            .collect();
        (cov, se)
    };
    Ok(CovarianceReport {
        active,
        cov,
        se,
        sigma2,
        edf,
    })
}
