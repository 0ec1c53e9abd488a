//! Iterative jump detection: alternate estimation on the retained
//! increments, a Jarque-Bera test, and removal of the largest retained
//! increments until the test accepts.
//!
//! Each iteration re-estimates from the original `(x_{j-1}, dX_j)` pairs of
//! the retained intervals; removed increments leave the remaining data in
//! place, never re-glued into a shifted series.

use serde::Serialize;

use crate::design::{retained_count, PathDesign};
use crate::error::{Error, Result};
use crate::estimators::{report_from_design, EstimateReport};
use crate::jbtest::{jb_stat_from_design, jb_test, JbParts, JbResult};
use crate::model::ModelSpec;

/// Which estimate of the diffusion parameter feeds the test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JbEstimator {
    /// The one-step improved estimate (default).
    OneStep,
    /// The plain trimmed least-squares estimate.
    Lse,
}

#[derive(Debug, Clone)]
pub struct DetectOptions {
    /// Increments removed per rejection (1 reproduces one-at-a-time removal).
    pub batch: usize,
    pub parts: JbParts,
    pub jb_estimator: JbEstimator,
    /// Safety valve; defaults to `n / 2`.
    pub k_max: Option<usize>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            batch: 1,
            parts: JbParts::Both,
            jb_estimator: JbEstimator::OneStep,
            k_max: None,
        }
    }
}

/// Outcome of a detection run.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionState {
    /// Removed interval indices (1-based) in removal order; absolute
    /// increments are non-increasing along this list.
    pub removed: Vec<usize>,
    /// One test result per iteration (per batch round when `batch > 1`).
    pub jb_trace: Vec<JbResult>,
    /// Number of removals at termination.
    pub k_star: usize,
    /// Absolute size of the last removed increment, absent when `k_star = 0`.
    pub threshold_r: Option<f64>,
    /// Set when the safety valve stopped the loop while the test still
    /// rejected.
    pub exhausted: bool,
    pub final_report: EstimateReport,
}

/// Run the iterative procedure on an observed array (length `n + 1`).
pub fn detect(
    m: &ModelSpec,
    x: &[f64],
    h: f64,
    q: f64,
    opts: &DetectOptions,
) -> Result<DetectionState> {
    if q.is_nan() || q <= 0.0 || q >= 1.0 {
        return Err(Error::invalid("q", "significance level must lie in (0, 1)"));
    }
    if opts.batch < 1 {
        return Err(Error::invalid("batch", "batch size must be at least 1"));
    }
    let design = PathDesign::build(m, x, h)?;
    let n = design.n;
    if n < 10 {
        return Err(Error::invalid("x", "need at least 10 intervals"));
    }
    let k_max = opts.k_max.unwrap_or(n / 2).min(n.saturating_sub(5));

    let mut mask = vec![true; n];
    let mut removed: Vec<usize> = Vec::new();
    let mut jb_trace: Vec<JbResult> = Vec::new();
    let mut exhausted = false;

    loop {
        let lse = crate::estimators::lse_from_design(&design, &mask)?;
        let alpha_hat = match opts.jb_estimator {
            JbEstimator::OneStep => {
                crate::estimators::onestep_from_design(&design, &mask, &lse.x)?.x
            }
            JbEstimator::Lse => lse.x.clone(),
        };
        let stat = jb_stat_from_design(&design, &alpha_hat, &mask)?;
        let result = jb_test(stat, q, opts.parts)?;
        let reject = result.reject;
        jb_trace.push(result);

        if !reject {
            break;
        }
        if removed.len() >= k_max {
            exhausted = true;
            break;
        }
        let take = opts.batch.min(k_max - removed.len());
        for _ in 0..take {
            let j = argmax_abs_increment(&design, &mask);
            mask[j - 1] = false;
            removed.push(j);
        }
    }

    let final_report = report_from_design(&design, &mask)?;
    let k_star = removed.len();
    let threshold_r = removed.last().map(|&j| design.dx[j - 1].abs());
    debug_assert_eq!(retained_count(&mask), n - k_star);
    Ok(DetectionState {
        removed,
        jb_trace,
        k_star,
        threshold_r,
        exhausted,
        final_report,
    })
}

/// Batched variant: remove up to `batch` largest retained increments per
/// rejection. `batch = 1` is exactly [`detect`].
pub fn detect_batched(
    m: &ModelSpec,
    x: &[f64],
    h: f64,
    q: f64,
    opts: &DetectOptions,
    batch: usize,
) -> Result<DetectionState> {
    let opts = DetectOptions {
        batch,
        ..opts.clone()
    };
    detect(m, x, h, q, &opts)
}

/// Largest retained `|dX_j|`; ties broken by the smallest interval index.
fn argmax_abs_increment(design: &PathDesign, mask: &[bool]) -> usize {
    let mut best_j = 0usize;
    let mut best = f64::NEG_INFINITY;
    for (j, &keep) in mask.iter().enumerate() {
        if keep {
            let v = design.dx[j].abs();
            if v > best {
                best = v;
                best_j = j + 1;
            }
        }
    }
    best_j
}

/// Partition `{1..n}` into the one-jump group (removed intervals, sorted)
/// and the no-jump group.
pub fn classify(state: &DetectionState, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut one_jump = state.removed.clone();
    one_jump.sort_unstable();
    let mut no_jump = Vec::with_capacity(n - one_jump.len());
    let mut it = one_jump.iter().peekable();
    for j in 1..=n {
        if it.peek() == Some(&&j) {
            it.next();
        } else {
            no_jump.push(j);
        }
    }
    (one_jump, no_jump)
}
