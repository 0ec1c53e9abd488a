//! Bias-corrected Jarque-Bera statistic over a retained index set and the
//! decision against the chi-squared threshold.
//!
//! With `N_j` the self-normalized residuals and `m = n - k` retained
//! intervals, the statistic is
//!
//! ```text
//! JB = (sum N_j^3 - 3 sqrt(h) sum d_x a_{j-1})^2 / (6 m)
//!    + (sum (N_j^4 - 3))^2 / (24 m)
//! ```
//!
//! with both sums over the retained set and
//! `d_x a = (dA/dx)' alpha / (2 sqrt(A' alpha))`. Under the no-jump null the
//! statistic is asymptotically chi-squared with 2 degrees of freedom; a
//! single part (skewness or kurtosis alone) is tested against 1 degree.

use serde::Serialize;
use std::str::FromStr;

use crate::design::{dot, mask_from_retained, retained_count, PathDesign};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::residuals::trimmed_mean_var;
use crate::rngdist::{chisq1_upper_quantile, chisq2_upper_quantile};

/// Which part of the statistic to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum JbParts {
    #[default]
    Both,
    Skew,
    Kurt,
}

impl FromStr for JbParts {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "both" => Ok(JbParts::Both),
            "skew" => Ok(JbParts::Skew),
            "kurt" => Ok(JbParts::Kurt),
            other => Err(format!("unknown parts `{other}` (expected both|skew|kurt)")),
        }
    }
}

impl std::fmt::Display for JbParts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            JbParts::Both => "both",
            JbParts::Skew => "skew",
            JbParts::Kurt => "kurt",
        })
    }
}

/// The statistic's ingredients, before a threshold is attached.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JbStat {
    /// Skewness term `(sum N^3 - correction)^2 / (6 m)`.
    pub skew_part: f64,
    /// Kurtosis term `(sum (N^4 - 3))^2 / (24 m)`.
    pub kurt_part: f64,
    /// The bias correction `3 sqrt(h) sum d_x a` entering the skewness term.
    pub correction: f64,
    /// Number of retained intervals `m = n - k`.
    pub retained_count: usize,
}

/// Test decision for one statistic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JbResult {
    /// The tested statistic (both parts summed, or a single part).
    pub jb: f64,
    pub skew_part: f64,
    pub kurt_part: f64,
    pub correction: f64,
    pub parts: JbParts,
    pub threshold: f64,
    pub reject: bool,
}

pub(crate) fn jb_stat_from_design(
    design: &PathDesign,
    alpha: &[f64],
    mask: &[bool],
) -> Result<JbStat> {
    let m_count = retained_count(mask);
    if m_count < 5 {
        return Err(Error::invalid(
            "retained",
            format!("need at least 5 retained intervals, got {m_count}"),
        ));
    }
    let mut eps = vec![0.0; design.n];
    for (j, &keep) in mask.iter().enumerate() {
        if keep {
            let w = design.diffusion_sq_at(j, alpha)?;
            eps[j] = design.dx[j] / (w * design.h).sqrt();
        }
    }
    let (mean, var, _) = trimmed_mean_var(&eps, mask);
    if var.is_nan() || var <= 1e-300 {
        return Err(Error::DegenerateVariance { var });
    }
    let inv_sd = 1.0 / var.sqrt();

    let mut s3 = 0.0;
    let mut s4 = 0.0;
    let mut da_sum = 0.0;
    for (j, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let nj = (eps[j] - mean) * inv_sd;
        let nj2 = nj * nj;
        s3 += nj2 * nj;
        s4 += nj2 * nj2 - 3.0;
        let w = dot(design.a_row(j), alpha);
        da_sum += dot(design.da_row(j), alpha) / (2.0 * w.sqrt());
    }
    let mf = m_count as f64;
    let correction = 3.0 * design.h.sqrt() * da_sum;
    let skew = s3 - correction;
    Ok(JbStat {
        skew_part: skew * skew / (6.0 * mf),
        kurt_part: s4 * s4 / (24.0 * mf),
        correction,
        retained_count: m_count,
    })
}

/// Compute the statistic's parts for the given retained set (1-based).
pub fn jb_statistic(
    m: &ModelSpec,
    x: &[f64],
    h: f64,
    alpha_hat: &[f64],
    retained: &[usize],
) -> Result<JbStat> {
    let design = PathDesign::build(m, x, h)?;
    let mask = mask_from_retained(retained, design.n)?;
    jb_stat_from_design(&design, alpha_hat, &mask)
}

/// Attach the chi-squared threshold for significance level `q` and decide.
/// Rejection requires a strictly larger statistic.
pub fn jb_test(stat: JbStat, q: f64, parts: JbParts) -> Result<JbResult> {
    let (jb, threshold) = match parts {
        JbParts::Both => (stat.skew_part + stat.kurt_part, chisq2_upper_quantile(q)?),
        JbParts::Skew => (stat.skew_part, chisq1_upper_quantile(q)?),
        JbParts::Kurt => (stat.kurt_part, chisq1_upper_quantile(q)?),
    };
    Ok(JbResult {
        jb,
        skew_part: stat.skew_part,
        kurt_part: stat.kurt_part,
        correction: stat.correction,
        parts,
        threshold,
        reject: jb > threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::all_intervals;
    use crate::model::builtin_model;
    use approx::assert_relative_eq;

    fn path_from_increments(x0: f64, dx: &[f64]) -> Vec<f64> {
        let mut x = vec![x0];
        for d in dx {
            x.push(x.last().unwrap() + d);
        }
        x
    }

    // Symmetric 8-point increment pattern whose squared values solve
    // 4 sum(u^2) = 3 (sum u)^2, so sample skewness is 0 and kurtosis is 3
    // and both statistic parts vanish.
    #[test]
    fn zero_statistic_on_moment_matched_points() {
        let m = builtin_model("const-ou").unwrap();
        let h = 0.01f64;
        let big = (9.0 + 4.0 * 6.0f64.sqrt()).sqrt();
        let scale = h.sqrt();
        let dx: Vec<f64> = [big, -big, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0]
            .iter()
            .map(|e| e * scale)
            .collect();
        let x = path_from_increments(0.0, &dx);
        let stat = jb_statistic(&m, &x, h, &[1.0], &all_intervals(8)).unwrap();
        assert!(stat.skew_part < 1e-20, "skew part {}", stat.skew_part);
        assert!(stat.kurt_part < 1e-20, "kurt part {}", stat.kurt_part);
        assert_eq!(stat.correction, 0.0);
    }

    #[test]
    fn symmetric_pattern_kills_skew_term() {
        let m = builtin_model("const-ou").unwrap();
        let h = 0.01f64;
        let s = h.sqrt() * 0.7;
        let dx: Vec<f64> = [1.5, -1.5, 0.5, -0.5, 1.5, -1.5, 0.5, -0.5]
            .iter()
            .map(|e| e * s)
            .collect();
        let x = path_from_increments(0.0, &dx);
        let stat = jb_statistic(&m, &x, h, &[1.0], &all_intervals(8)).unwrap();
        assert!(stat.skew_part < 1e-20, "skew part {}", stat.skew_part);
        assert!(stat.kurt_part > 0.0);
    }

    // Independent straight-line transcription of the statistic, kept apart
    // from the production kernel on purpose.
    fn jb_oracle(m: &crate::model::ModelSpec, x: &[f64], h: f64, alpha: &[f64]) -> (f64, f64, f64) {
        let n = x.len() - 1;
        let mut eps = Vec::new();
        for j in 1..=n {
            let a2: f64 = m
                .a_vec(x[j - 1])
                .iter()
                .zip(alpha)
                .map(|(a, al)| a * al)
                .sum();
            eps.push((x[j] - x[j - 1]) / (a2 * h).sqrt());
        }
        let mean = eps.iter().sum::<f64>() / n as f64;
        let var = eps.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n as f64;
        let nh: Vec<f64> = eps.iter().map(|e| (e - mean) / var.sqrt()).collect();
        let s3: f64 = nh.iter().map(|v| v.powi(3)).sum();
        let s4: f64 = nh.iter().map(|v| v.powi(4) - 3.0).sum();
        let corr: f64 = 3.0
            * h.sqrt()
            * (1..=n)
                .map(|j| {
                    let a2: f64 = m
                        .a_vec(x[j - 1])
                        .iter()
                        .zip(alpha)
                        .map(|(a, al)| a * al)
                        .sum();
                    let da: f64 = m
                        .da_vec(x[j - 1])
                        .iter()
                        .zip(alpha)
                        .map(|(d, al)| d * al)
                        .sum();
                    da / (2.0 * a2.sqrt())
                })
                .sum::<f64>();
        let skew_part = (s3 - corr) * (s3 - corr) / (6.0 * n as f64);
        let kurt_part = s4 * s4 / (24.0 * n as f64);
        (skew_part + kurt_part, skew_part, kurt_part)
    }

    #[test]
    fn matches_independent_transcription_on_fixed_path() {
        let m = builtin_model("sine-vol-ou").unwrap();
        let h = 0.03;
        // Fixed 10-interval synthetic path exercising the sine volatility.
        let x = vec![
            0.0, 0.31, 0.08, -0.22, 0.73, 0.51, 1.12, 0.95, 0.40, -0.05, 0.27,
        ];
        let alpha = [3.0];
        let stat = jb_statistic(&m, &x, h, &alpha, &all_intervals(10)).unwrap();
        let (oracle_jb, oracle_skew, oracle_kurt) = jb_oracle(&m, &x, h, &alpha);
        let jb = stat.skew_part + stat.kurt_part;
        assert_relative_eq!(jb, oracle_jb, max_relative = 1e-12);
        assert_relative_eq!(stat.skew_part, oracle_skew, max_relative = 1e-12);
        assert_relative_eq!(stat.kurt_part, oracle_kurt, max_relative = 1e-12);
        // Frozen from the transcription above.
        assert_relative_eq!(jb, 1.0470058682629437, max_relative = 1e-12);
    }

    #[test]
    fn decision_rules() {
        let stat = JbStat {
            skew_part: 0.0,
            kurt_part: 0.0,
            correction: 0.0,
            retained_count: 10,
        };
        let r = jb_test(stat, 0.05, JbParts::Both).unwrap();
        assert!(!r.reject);

        let stat = JbStat {
            skew_part: 13.9,
            kurt_part: 0.0,
            correction: 0.0,
            retained_count: 10,
        };
        let r = jb_test(stat, 1e-3, JbParts::Skew).unwrap();
        assert!(r.jb == 13.9);
        let r_both = jb_test(stat, 1e-3, JbParts::Both).unwrap();
        assert_relative_eq!(r_both.threshold, 13.815510557964274, max_relative = 1e-12);
        assert!(r_both.reject);

        // Boundary: equal to the threshold is not a rejection.
        let threshold = chisq2_upper_quantile(1e-3).unwrap();
        let stat = JbStat {
            skew_part: threshold,
            kurt_part: 0.0,
            correction: 0.0,
            retained_count: 10,
        };
        let r = jb_test(stat, 1e-3, JbParts::Both).unwrap();
        assert!(!r.reject);
    }

    #[test]
    fn single_part_uses_one_degree_of_freedom() {
        let stat = JbStat {
            skew_part: 3.0,
            kurt_part: 1.0,
            correction: 0.0,
            retained_count: 20,
        };
        let r = jb_test(stat, 0.05, JbParts::Skew).unwrap();
        assert_relative_eq!(r.threshold, 3.8414588206941227, max_relative = 1e-8);
        assert_eq!(r.jb, 3.0);
        assert!(!r.reject);
        let r = jb_test(stat, 0.1, JbParts::Skew).unwrap();
        assert!(r.reject, "threshold {}", r.threshold);
    }

    // Shifting all raw residuals by a constant must not move the statistic;
    // with a constant basis this amounts to shifting every increment.
    #[test]
    fn invariant_to_residual_location_shift() {
        let m = builtin_model("const-ou").unwrap();
        let h = 0.04f64;
        let mut rng = crate::rngdist::RngStream::new(9, 0);
        let dx: Vec<f64> = (0..50).map(|_| rng.sample_normal() * h.sqrt()).collect();
        let shift = 0.35 * h.sqrt();
        let dx_shifted: Vec<f64> = dx.iter().map(|d| d + shift).collect();
        let x1 = path_from_increments(0.0, &dx);
        let x2 = path_from_increments(0.0, &dx_shifted);
        let s1 = jb_statistic(&m, &x1, h, &[1.0], &all_intervals(50)).unwrap();
        let s2 = jb_statistic(&m, &x2, h, &[1.0], &all_intervals(50)).unwrap();
        let jb1 = s1.skew_part + s1.kurt_part;
        let jb2 = s2.skew_part + s2.kurt_part;
        assert_relative_eq!(jb1, jb2, max_relative = 1e-9);
    }

    #[test]
    fn too_few_retained_is_rejected() {
        let m = builtin_model("const-ou").unwrap();
        let x = path_from_increments(0.0, &[0.1, -0.2, 0.15, -0.05]);
        assert!(jb_statistic(&m, &x, 0.01, &[1.0], &all_intervals(4)).is_err());
    }
}
