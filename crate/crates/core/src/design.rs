//! Precomputed per-interval quantities for an observed path: basis rows
//! evaluated at the left endpoints, increments, and squared increments.
//!
//! Every estimator, residual, and test statistic is a sum over retained
//! intervals of functions of these rows, so the detection loop builds the
//! design once and re-sums under a shifting retained mask.

use crate::error::{Error, Result};
use crate::model::ModelSpec;

pub(crate) struct PathDesign {
    pub n: usize,
    pub pa: usize,
    pub pb: usize,
    pub h: f64,
    /// `A(x_{j-1})`, n rows of length `pa`, row-major.
    pub a: Vec<f64>,
    /// Componentwise derivative rows `dA/dx (x_{j-1})`.
    pub da: Vec<f64>,
    /// `B(x_{j-1})`, n rows of length `pb`.
    pub b: Vec<f64>,
    /// Left endpoint states, for error reporting.
    pub x_prev: Vec<f64>,
    /// Increments `x_j - x_{j-1}`.
    pub dx: Vec<f64>,
}

impl PathDesign {
    pub fn build(m: &ModelSpec, x: &[f64], h: f64) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::invalid("x", "need at least two observations"));
        }
        if h.is_nan() || h <= 0.0 || !h.is_finite() {
            return Err(Error::invalid("h", "step must be finite and positive"));
        }
        let n = x.len() - 1;
        let (pa, pb) = (m.p_alpha, m.p_beta);
        let mut a = vec![0.0; n * pa];
        let mut da = vec![0.0; n * pa];
        let mut b = vec![0.0; n * pb];
        let mut dx = vec![0.0; n];
        let mut x_prev = vec![0.0; n];
        for j in 0..n {
            let xj = x[j];
            if !xj.is_finite() || !x[j + 1].is_finite() {
                return Err(Error::invalid(
                    "x",
                    format!("non-finite observation at row {}", j),
                ));
            }
            m.eval_a(xj, &mut a[j * pa..(j + 1) * pa]);
            m.eval_da(xj, &mut da[j * pa..(j + 1) * pa]);
            m.eval_b(xj, &mut b[j * pb..(j + 1) * pb]);
            x_prev[j] = xj;
            dx[j] = x[j + 1] - xj;
        }
        Ok(PathDesign {
            n,
            pa,
            pb,
            h,
            a,
            da,
            b,
            x_prev,
            dx,
        })
    }

    /// Swap in alternative increments over the same states (used for the
    /// estimators computed from the continuous part).
    pub fn replace_increments(&mut self, dx: &[f64]) {
        assert_eq!(dx.len(), self.n);
        self.dx.copy_from_slice(dx);
    }

    #[inline]
    pub fn a_row(&self, j: usize) -> &[f64] {
        &self.a[j * self.pa..(j + 1) * self.pa]
    }

    #[inline]
    pub fn da_row(&self, j: usize) -> &[f64] {
        &self.da[j * self.pa..(j + 1) * self.pa]
    }

    #[inline]
    pub fn b_row(&self, j: usize) -> &[f64] {
        &self.b[j * self.pb..(j + 1) * self.pb]
    }

    /// `A(x_{j-1})' alpha`, erroring when non-positive.
    #[inline]
    pub fn diffusion_sq_at(&self, j: usize, alpha: &[f64]) -> Result<f64> {
        let w = dot(self.a_row(j), alpha);
        if w > 0.0 {
            Ok(w)
        } else {
            Err(Error::NonPositiveDiffusion {
                x: self.x_prev[j],
                alpha: alpha.to_vec(),
                value: w,
                interval: Some(j + 1),
            })
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Validate a 1-based, strictly increasing retained index set and turn it
/// into a boolean mask over intervals.
pub(crate) fn mask_from_retained(retained: &[usize], n: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    let mut prev = 0usize;
    for &j in retained {
        if j == 0 || j > n {
            return Err(Error::invalid(
                "retained",
                format!("interval index {} outside 1..={}", j, n),
            ));
        }
        if j <= prev {
            return Err(Error::invalid(
                "retained",
                "indices must be strictly increasing (1-based, no duplicates)",
            ));
        }
        mask[j - 1] = true;
        prev = j;
    }
    Ok(mask)
}

pub(crate) fn retained_count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&m| m).count()
}

/// 1-based indices of all intervals, the "no removals" retained set.
pub fn all_intervals(n: usize) -> Vec<usize> {
    (1..=n).collect()
}
