//! Closed-form estimators over an arbitrary retained index set: the trimmed
//! least-squares diffusion estimator, its one-step improvement through the
//! Gaussian quasi-likelihood score, the plug-in drift estimator, oracle
//! variants computed from the continuous part, and the plug-in asymptotic
//! covariance blocks.
//!
//! With sums over retained intervals `j` and `A_j = A(x_{j-1})`,
//! `B_j = B(x_{j-1})`, `w_j(alpha) = A_j' alpha`:
//!
//! ```text
//! alpha_lse = (1/h) (sum A_j A_j')^{-1} sum (dX_j)^2 A_j
//! alpha_one = init - (sum A_j A_j'/w_j^2)^{-1} sum (1/w_j - dX_j^2/(h w_j^2)) A_j
//! beta_hat  = (1/h) (sum B_j B_j'/w_j)^{-1} sum (dX_j/w_j) B_j
//! ```
//!
//! all evaluated at `alpha = init` in the one-step display and at a supplied
//! `alpha_hat` in the drift display.

use serde::Serialize;

use crate::design::{mask_from_retained, retained_count, PathDesign};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, MAX_DIM};
use crate::simulate::SamplePath;

/// Solution of a small symmetric system with a cheap reciprocal-condition
/// estimate (ratio of extreme factorization pivots).
#[derive(Debug, Clone)]
pub struct Solved {
    pub x: Vec<f64>,
    pub rcond: f64,
}

/// Solve `mat * y = rhs` for a symmetric `d x d` matrix stored row-major.
///
/// Tries a Cholesky factorization first and falls back to partially pivoted
/// Gaussian elimination when the matrix is not numerically positive
/// definite. A pivot below `1e-12 * max|mat|` is reported as
/// [`Error::SingularNormalMatrix`].
pub fn solve_spd(mat: &[f64], d: usize, rhs: &[f64]) -> Result<Solved> {
    assert!((1..=MAX_DIM).contains(&d), "dimension out of range");
    assert_eq!(mat.len(), d * d);
    assert_eq!(rhs.len(), d);
    let scale = mat.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::SingularNormalMatrix { pivot: 0.0, scale });
    }
    if let Some(sol) = cholesky_solve(mat, d, rhs, scale) {
        return Ok(sol);
    }
    gauss_solve(mat, d, rhs, scale)
}

fn cholesky_solve(mat: &[f64], d: usize, rhs: &[f64], scale: f64) -> Option<Solved> {
    let mut l = vec![0.0; d * d];
    let mut min_piv = f64::INFINITY;
    let mut max_piv = 0.0f64;
    for i in 0..d {
        for j in 0..=i {
            let mut s = mat[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 1e-12 * scale {
                    return None;
                }
                min_piv = min_piv.min(s);
                max_piv = max_piv.max(s);
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    // forward then backward substitution
    let mut y = rhs.to_vec();
    for i in 0..d {
        for k in 0..i {
            y[i] -= l[i * d + k] * y[k];
        }
        y[i] /= l[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            y[i] -= l[k * d + i] * y[k];
        }
        y[i] /= l[i * d + i];
    }
    Some(Solved {
        x: y,
        rcond: min_piv / max_piv,
    })
}

fn gauss_solve(mat: &[f64], d: usize, rhs: &[f64], scale: f64) -> Result<Solved> {
    let mut a = mat.to_vec();
    let mut y = rhs.to_vec();
    let mut min_piv = f64::INFINITY;
    let mut max_piv = 0.0f64;
    for col in 0..d {
        let mut best = col;
        for r in col + 1..d {
            if a[r * d + col].abs() > a[best * d + col].abs() {
                best = r;
            }
        }
        if best != col {
            for c in 0..d {
                a.swap(col * d + c, best * d + c);
            }
            y.swap(col, best);
        }
        let pivot = a[col * d + col];
        if pivot.abs() < 1e-12 * scale {
            return Err(Error::SingularNormalMatrix {
                pivot: pivot.abs(),
                scale,
            });
        }
        min_piv = min_piv.min(pivot.abs());
        max_piv = max_piv.max(pivot.abs());
        for r in col + 1..d {
            let f = a[r * d + col] / pivot;
            if f != 0.0 {
                for c in col..d {
                    a[r * d + c] -= f * a[col * d + c];
                }
                y[r] -= f * y[col];
            }
        }
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            y[i] -= a[i * d + k] * y[k];
        }
        y[i] /= a[i * d + i];
    }
    Ok(Solved {
        x: y,
        rcond: min_piv / max_piv,
    })
}

fn invert_spd(mat: &[f64], d: usize) -> Result<(Vec<f64>, f64)> {
    let mut inv = vec![0.0; d * d];
    let mut rcond = f64::INFINITY;
    for col in 0..d {
        let mut e = vec![0.0; d];
        e[col] = 1.0;
        let sol = solve_spd(mat, d, &e)?;
        rcond = rcond.min(sol.rcond);
        for r in 0..d {
            inv[r * d + col] = sol.x[r];
        }
    }
    // enforce exact symmetry of the output
    for r in 0..d {
        for c in 0..r {
            let v = 0.5 * (inv[r * d + c] + inv[c * d + r]);
            inv[r * d + c] = v;
            inv[c * d + r] = v;
        }
    }
    Ok((inv, rcond))
}

fn to_nested(mat: &[f64], d: usize) -> Matrix {
    (0..d).map(|r| mat[r * d..(r + 1) * d].to_vec()).collect()
}

pub(crate) fn lse_from_design(design: &PathDesign, mask: &[bool]) -> Result<Solved> {
    let pa = design.pa;
    let mut m = vec![0.0; pa * pa];
    let mut v = vec![0.0; pa];
    for (j, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let a = design.a_row(j);
        let dx2 = design.dx[j] * design.dx[j];
        for r in 0..pa {
            v[r] += dx2 * a[r];
            for c in 0..pa {
                m[r * pa + c] += a[r] * a[c];
            }
        }
    }
    let mut sol = solve_spd(&m, pa, &v)?;
    for y in sol.x.iter_mut() {
        *y /= design.h;
    }
    Ok(sol)
}

pub(crate) fn onestep_from_design(
    design: &PathDesign,
    mask: &[bool],
    init: &[f64],
) -> Result<Solved> {
    let pa = design.pa;
    let mut m = vec![0.0; pa * pa];
    let mut s = vec![0.0; pa];
    for (j, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let a = design.a_row(j);
        let w = design.diffusion_sq_at(j, init)?;
        let w2 = w * w;
        let score_w = 1.0 / w - design.dx[j] * design.dx[j] / (design.h * w2);
        for r in 0..pa {
            s[r] += score_w * a[r];
            for c in 0..pa {
                m[r * pa + c] += a[r] * a[c] / w2;
            }
        }
    }
    let sol = solve_spd(&m, pa, &s)?;
    Ok(Solved {
        x: init.iter().zip(&sol.x).map(|(i, z)| i - z).collect(),
        rcond: sol.rcond,
    })
}

pub(crate) fn beta_from_design(
    design: &PathDesign,
    mask: &[bool],
    alpha_hat: &[f64],
) -> Result<Solved> {
    let pb = design.pb;
    let mut m = vec![0.0; pb * pb];
    let mut v = vec![0.0; pb];
    for (j, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let b = design.b_row(j);
        let w = design.diffusion_sq_at(j, alpha_hat)?;
        let dxw = design.dx[j] / w;
        for r in 0..pb {
            v[r] += dxw * b[r];
            for c in 0..pb {
                m[r * pb + c] += b[r] * b[c] / w;
            }
        }
    }
    let mut sol = solve_spd(&m, pb, &v)?;
    for y in sol.x.iter_mut() {
        *y /= design.h;
    }
    Ok(sol)
}

/// A symmetric matrix in nested-row form, as serialized in reports.
pub type Matrix = Vec<Vec<f64>>;

pub(crate) type SigmaBlocks = (Matrix, Matrix, f64);

pub(crate) fn sigma0_from_design(
    design: &PathDesign,
    mask: &[bool],
    alpha_hat: &[f64],
) -> Result<SigmaBlocks> {
    let (pa, pb) = (design.pa, design.pb);
    let m_count = retained_count(mask) as f64;
    let mut sa = vec![0.0; pa * pa];
    let mut sb = vec![0.0; pb * pb];
    for (j, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let a = design.a_row(j);
        let b = design.b_row(j);
        let w = design.diffusion_sq_at(j, alpha_hat)?;
        for r in 0..pa {
            for c in 0..pa {
                sa[r * pa + c] += (a[r] / w) * (a[c] / w);
            }
        }
        for r in 0..pb {
            for c in 0..pb {
                sb[r * pb + c] += b[r] * b[c] / w;
            }
        }
    }
    for v in sa.iter_mut() {
        *v /= m_count;
    }
    for v in sb.iter_mut() {
        *v /= m_count;
    }
    let (mut inv_a, rc_a) = invert_spd(&sa, pa)?;
    for v in inv_a.iter_mut() {
        *v *= 2.0;
    }
    let (inv_b, rc_b) = invert_spd(&sb, pb)?;
    Ok((to_nested(&inv_a, pa), to_nested(&inv_b, pb), rc_a.min(rc_b)))
}

/// Trimmed least-squares diffusion estimate over `retained` (1-based).
pub fn alpha_lse(m: &ModelSpec, x: &[f64], h: f64, retained: &[usize]) -> Result<Vec<f64>> {
    let design = PathDesign::build(m, x, h)?;
    let mask = mask_from_retained(retained, design.n)?;
    Ok(lse_from_design(&design, &mask)?.x)
}

/// One-step improvement of `alpha_init` through the quasi-likelihood score.
pub fn alpha_onestep(
    m: &ModelSpec,
    x: &[f64],
    h: f64,
    retained: &[usize],
    alpha_init: &[f64],
) -> Result<Vec<f64>> {
    let design = PathDesign::build(m, x, h)?;
    let mask = mask_from_retained(retained, design.n)?;
    Ok(onestep_from_design(&design, &mask, alpha_init)?.x)
}

/// Plug-in weighted least-squares drift estimate.
pub fn beta_plugin(
    m: &ModelSpec,
    x: &[f64],
    h: f64,
    retained: &[usize],
    alpha_hat: &[f64],
) -> Result<Vec<f64>> {
    let design = PathDesign::build(m, x, h)?;
    let mask = mask_from_retained(retained, design.n)?;
    Ok(beta_from_design(&design, &mask, alpha_hat)?.x)
}

/// Plug-in asymptotic covariance blocks: `sigma_alpha` scales the error of
/// `alpha` at rate `sqrt(n)`, `sigma_beta` the error of `beta` at rate
/// `sqrt(T)`; empirical averages over retained states replace the invariant
/// measure.
pub fn sigma0_plugin(
    m: &ModelSpec,
    x: &[f64],
    h: f64,
    retained: &[usize],
    alpha_hat: &[f64],
) -> Result<(Matrix, Matrix)> {
    let design = PathDesign::build(m, x, h)?;
    let mask = mask_from_retained(retained, design.n)?;
    let (sa, sb, _) = sigma0_from_design(&design, &mask, alpha_hat)?;
    Ok((sa, sb))
}

/// The quasi-likelihood score for the diffusion parameter,
/// `sum (1/w_j - dX_j^2/(h w_j^2)) A_j` over retained intervals. Zero at the
/// exact quasi-likelihood maximizer.
pub fn gql_score(
    m: &ModelSpec,
    x: &[f64],
    h: f64,
    retained: &[usize],
    alpha: &[f64],
) -> Result<Vec<f64>> {
    let design = PathDesign::build(m, x, h)?;
    let mask = mask_from_retained(retained, design.n)?;
    let mut s = vec![0.0; design.pa];
    for (j, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let a = design.a_row(j);
        let w = design.diffusion_sq_at(j, alpha)?;
        let score_w = 1.0 / w - design.dx[j] * design.dx[j] / (h * w * w);
        for r in 0..design.pa {
            s[r] += score_w * a[r];
        }
    }
    Ok(s)
}

/// Full estimate bundle for one retained set: LSE, one-step, plug-in drift,
/// and the covariance blocks, with solver condition diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub alpha_lse: Vec<f64>,
    pub alpha_onestep: Vec<f64>,
    pub beta: Vec<f64>,
    /// Asymptotic covariance of `sqrt(n) (alpha - alpha0)`, plug-in.
    pub sigma_alpha: Matrix,
    /// Asymptotic covariance of `sqrt(T) (beta - beta0)`, plug-in.
    pub sigma_beta: Matrix,
    pub retained_count: usize,
    /// Smallest reciprocal-condition estimate among the alpha-side solves.
    pub rcond_alpha: f64,
    /// Reciprocal-condition estimate of the drift normal matrix.
    pub rcond_beta: f64,
}

pub(crate) fn report_from_design(design: &PathDesign, mask: &[bool]) -> Result<EstimateReport> {
    let lse = lse_from_design(design, mask)?;
    let one = onestep_from_design(design, mask, &lse.x)?;
    let beta = beta_from_design(design, mask, &one.x)?;
    let (sigma_alpha, sigma_beta, rc_sigma) = sigma0_from_design(design, mask, &one.x)?;
    Ok(EstimateReport {
        alpha_lse: lse.x,
        alpha_onestep: one.x,
        beta: beta.x,
        sigma_alpha,
        sigma_beta,
        retained_count: retained_count(mask),
        rcond_alpha: lse.rcond.min(one.rcond).min(rc_sigma),
        rcond_beta: beta.rcond,
    })
}

/// LSE -> one-step -> plug-in drift -> covariance, over one retained set.
pub fn estimate_report(
    m: &ModelSpec,
    x: &[f64],
    h: f64,
    retained: &[usize],
) -> Result<EstimateReport> {
    let design = PathDesign::build(m, x, h)?;
    let mask = mask_from_retained(retained, design.n)?;
    report_from_design(&design, &mask)
}

/// The two infeasible benchmarks available from a simulated path: the
/// estimator computed from the continuous-part increments over all
/// intervals (one-step from `alpha_init`), and the full pipeline over the
/// true no-jump intervals.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub cont: EstimateReport,
    pub no_jump: EstimateReport,
}

pub fn oracle_estimates(
    m: &ModelSpec,
    path: &SamplePath,
    alpha_init: Option<&[f64]>,
) -> Result<OracleReport> {
    let h = path.config.h;
    let n = path.x.len() - 1;
    let full_mask = vec![true; n];

    let mut design = PathDesign::build(m, &path.x, h)?;
    design.replace_increments(&path.dx_cont());
    let lse_cont = lse_from_design(&design, &full_mask)?;
    // default pilot: the root-n-consistent LSE from the continuous increments
    let init = alpha_init.unwrap_or(&lse_cont.x);
    let one = onestep_from_design(&design, &full_mask, init)?;
    let beta = beta_from_design(&design, &full_mask, &one.x)?;
    let (sigma_alpha, sigma_beta, rc_sigma) = sigma0_from_design(&design, &full_mask, &one.x)?;
    let cont = EstimateReport {
        alpha_lse: lse_cont.x,
        alpha_onestep: one.x,
        beta: beta.x,
        sigma_alpha,
        sigma_beta,
        retained_count: n,
        rcond_alpha: one.rcond.min(rc_sigma),
        rcond_beta: beta.rcond,
    };

    let no_jump_idx = path.no_jump_intervals();
    let no_jump = estimate_report(m, &path.x, h, &no_jump_idx)?;
    Ok(OracleReport { cont, no_jump })
}
