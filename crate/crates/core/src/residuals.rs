//! Euler residuals and their self-normalization over a retained index set.
//!
//! The residual of interval `j` is `eps_j(alpha) = dX_j / sqrt(A(x_{j-1})'
//! alpha * h)`, ignoring the drift term; the drift-adjusted variant divides
//! out `dX_j - h B(x_{j-1})' beta` instead. Self-normalization centers by
//! the retained-set mean and scales by the retained-set standard deviation,
//! both with the population divisor `n - k`.

use serde::Serialize;

use crate::design::{dot, mask_from_retained, PathDesign};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Residuals together with their trimmed mean/variance and the
/// self-normalized values over the retained set.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualSet {
    /// Raw residuals for all `n` intervals.
    pub eps: Vec<f64>,
    /// Retained interval indices, 1-based, strictly increasing.
    pub retained: Vec<usize>,
    /// Trimmed mean over the retained set.
    pub mean: f64,
    /// Trimmed (population) variance over the retained set.
    pub var: f64,
    /// Self-normalized residuals, aligned with `retained`.
    pub normalized: Vec<f64>,
}

pub(crate) fn residuals_from_design(design: &PathDesign, alpha: &[f64]) -> Result<Vec<f64>> {
    let mut eps = Vec::with_capacity(design.n);
    for j in 0..design.n {
        let w = design.diffusion_sq_at(j, alpha)?;
        eps.push(design.dx[j] / (w * design.h).sqrt());
    }
    Ok(eps)
}

/// Euler residuals `dX_j / sqrt(A' alpha h)` for `j = 1..n`.
pub fn euler_residuals(m: &ModelSpec, x: &[f64], h: f64, alpha: &[f64]) -> Result<Vec<f64>> {
    let design = PathDesign::build(m, x, h)?;
    residuals_from_design(&design, alpha)
}

/// Drift-adjusted residuals `(dX_j - h B' beta) / sqrt(A' alpha h)`.
pub fn euler_residuals_drift_adjusted(
    m: &ModelSpec,
    x: &[f64],
    h: f64,
    alpha: &[f64],
    beta: &[f64],
) -> Result<Vec<f64>> {
    let design = PathDesign::build(m, x, h)?;
    let mut eps = Vec::with_capacity(design.n);
    for j in 0..design.n {
        let w = design.diffusion_sq_at(j, alpha)?;
        let b = dot(design.b_row(j), beta);
        eps.push((design.dx[j] - design.h * b) / (w * design.h).sqrt());
    }
    Ok(eps)
}

pub(crate) fn trimmed_mean_var(eps: &[f64], mask: &[bool]) -> (f64, f64, usize) {
    let mut count = 0usize;
    let mut sum = 0.0;
    for (e, &keep) in eps.iter().zip(mask) {
        if keep {
            sum += e;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let mut ss = 0.0;
    for (e, &keep) in eps.iter().zip(mask) {
        if keep {
            let d = e - mean;
            ss += d * d;
        }
    }
    (mean, ss / count as f64, count)
}

/// Self-normalize residuals over a retained set.
pub fn normalize(eps: &[f64], retained: &[usize]) -> Result<ResidualSet> {
    let n = eps.len();
    let mask = mask_from_retained(retained, n)?;
    if retained.len() < 2 {
        return Err(Error::invalid(
            "retained",
            "need at least two retained intervals",
        ));
    }
    let (mean, var, _) = trimmed_mean_var(eps, &mask);
    if var.is_nan() || var <= 1e-300 {
        return Err(Error::DegenerateVariance { var });
    }
    let inv_sd = 1.0 / var.sqrt();
    let normalized = retained
        .iter()
        .map(|&j| (eps[j - 1] - mean) * inv_sd)
        .collect();
    Ok(ResidualSet {
        eps: eps.to_vec(),
        retained: retained.to_vec(),
        mean,
        var,
        normalized,
    })
}
