//! Path simulation on the observation grid `t_j = j h`, with exact jump
//! times, Euler-Maruyama refinement between observations, optional
//! conditioning on a fixed total jump count, and full ground-truth
//! annotation of the continuous part and per-interval jump counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JumpKind, ModelSpec};
use crate::rngdist::RngStream;

fn default_refine() -> usize {
    10
}

/// Simulation configuration. `T = n * h` is the terminal time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub h: f64,
    /// Euler sub-steps per observation interval.
    #[serde(default = "default_refine")]
    pub refine: usize,
    #[serde(default)]
    pub x0: f64,
    pub theta: crate::model::ThetaTrue,
    /// When present, condition on exactly this many jumps in `(0, T]`,
    /// placed as sorted uniforms.
    #[serde(default)]
    pub fixed_jump_count: Option<u64>,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl SimConfig {
    pub fn validate(&self, m: &ModelSpec) -> Result<()> {
        if self.n < 1 {
            return Err(Error::invalid("n", "need at least one interval"));
        }
        if self.h.is_nan() || self.h <= 0.0 || !self.h.is_finite() {
            return Err(Error::invalid("h", "step must be finite and positive"));
        }
        if self.refine < 1 {
            return Err(Error::invalid("refine", "need at least one sub-step"));
        }
        if !self.x0.is_finite() {
            return Err(Error::invalid("x0", "must be finite"));
        }
        if self.theta.alpha0.len() != m.p_alpha {
            return Err(Error::invalid("alpha0", "dimension mismatch with model"));
        }
        if self.theta.beta0.len() != m.p_beta {
            return Err(Error::invalid("beta0", "dimension mismatch with model"));
        }
        if !m.alpha_domain.contains(&self.theta.alpha0) {
            return Err(Error::invalid("alpha0", "outside the admissible domain"));
        }
        if !self.theta.beta0.iter().all(|b| b.is_finite()) {
            return Err(Error::invalid("beta0", "must be finite"));
        }
        m.jump_law.validate()?;
        if self.fixed_jump_count.is_some_and(|k| k > 0) && matches!(m.jump_law.kind, JumpKind::None)
        {
            return Err(Error::invalid(
                "fixed_jump_count",
                "conditioning on jumps requires a jump-size law",
            ));
        }
        Ok(())
    }
}

/// One jump of the compound Poisson driver: its time and raw size `xi`.
/// The state increment applied at the jump is `c(X_{tau-}) * xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpMark {
    pub time: f64,
    pub size: f64,
}

/// A simulated path with ground-truth annotations.
#[derive(Debug, Clone, Serialize)]
pub struct SamplePath {
    /// Observed values `X_{t_0}, ..., X_{t_n}`.
    pub x: Vec<f64>,
    /// The continuous part `X - sum of applied jump increments`, aligned to
    /// the same grid. Bitwise equal to `x` until the first jump.
    pub x_cont: Vec<f64>,
    /// Number of jumps in each interval `(t_{j-1}, t_j]`.
    pub jump_counts: Vec<u32>,
    pub jump_marks: Vec<JumpMark>,
    pub config: SimConfig,
}

impl SamplePath {
    /// Increments of the continuous part, `x_cont[j] - x_cont[j-1]`.
    pub fn dx_cont(&self) -> Vec<f64> {
        self.x_cont.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// 1-based indices of intervals without any jump (the true no-jump group).
    pub fn no_jump_intervals(&self) -> Vec<usize> {
        self.jump_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// 1-based indices of intervals containing at least one jump.
    pub fn jump_intervals(&self) -> Vec<usize> {
        self.jump_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

fn draw_jump_size(rng: &mut RngStream, kind: &JumpKind) -> f64 {
    match *kind {
        JumpKind::Gamma { shape, rate } => rng.sample_gamma(shape, rate),
        JumpKind::BilateralIg {
            delta1,
            gamma1,
            delta2,
            gamma2,
        } => rng.sample_bilateral_ig(delta1, gamma1, delta2, gamma2),
        JumpKind::None => 0.0,
    }
}

/// Draw the jump schedule: count (Poisson or conditioned), then times as
/// sorted uniforms on `(0, T]`, then i.i.d. sizes.
fn draw_jump_marks(
    rng: &mut RngStream,
    m: &ModelSpec,
    cfg: &SimConfig,
    t_end: f64,
) -> Vec<JumpMark> {
    let count = match cfg.fixed_jump_count {
        Some(k) => k,
        None => {
            if matches!(m.jump_law.kind, JumpKind::None) || m.jump_law.intensity == 0.0 {
                0
            } else {
                rng.sample_poisson_count(m.jump_law.intensity * t_end)
            }
        }
    };
    let mut times: Vec<f64> = (0..count)
        .map(|_| (1.0 - rng.uniform01()) * t_end)
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times
        .into_iter()
        .map(|time| JumpMark {
            time,
            size: draw_jump_size(rng, &m.jump_law.kind),
        })
        .collect()
}

/// Simulate one path of the model under `cfg`.
///
/// The scheme is Euler-Maruyama on the refined grid of step `h / refine`,
/// splitting a sub-step at each jump time so jumps are applied exactly at
/// their drawn times using the pre-jump state. A single state evolves with
/// the jumps; the continuous part is recorded as the state minus the running
/// sum of applied jump increments, so increments of `x` and `x_cont` agree
/// on jump-free intervals.
pub fn simulate_path(m: &ModelSpec, cfg: &SimConfig) -> Result<SamplePath> {
    cfg.validate(m)?;
    let mut rng = RngStream::new(cfg.seed, cfg.stream);
    let n = cfg.n;
    let t_end = n as f64 * cfg.h;
    let delta = cfg.h / cfg.refine as f64;
    let total_segments = n * cfg.refine;

    let marks = draw_jump_marks(&mut rng, m, cfg, t_end);

    let alpha0 = &cfg.theta.alpha0;
    let beta0 = &cfg.theta.beta0;

    let mut x = Vec::with_capacity(n + 1);
    let mut x_cont = Vec::with_capacity(n + 1);
    let mut jump_counts = vec![0u32; n];
    x.push(cfg.x0);
    x_cont.push(cfg.x0);

    let mut state = cfg.x0;
    let mut jump_sum_total = 0.0;
    let mut mark_idx = 0usize;

    let euler_step = |state: &mut f64, dt: f64, rng: &mut RngStream, seg: usize| -> Result<()> {
        let a2 = m.diffusion_sq(*state, alpha0).map_err(|e| match e {
            Error::NonPositiveDiffusion {
                x, alpha, value, ..
            } => Error::NonPositiveDiffusion {
                x,
                alpha,
                value,
                interval: Some(seg / cfg.refine + 1),
            },
            other => other,
        })?;
        let b = m.drift(*state, beta0);
        let z = rng.sample_normal();
        *state += a2.sqrt() * dt.sqrt() * z + b * dt;
        Ok(())
    };

    for j in 1..=n {
        let mut interval_jump_sum = 0.0;
        let mut count_here = 0u32;
        for s in 0..cfg.refine {
            let seg = (j - 1) * cfg.refine + s;
            let seg_begin = seg as f64 * delta;
            // The last segment absorbs any mark pushed past n*h by rounding.
            let seg_end = if seg + 1 == total_segments {
                f64::INFINITY
            } else {
                (seg + 1) as f64 * delta
            };
            let mut cur = seg_begin;
            let mut had_jump = false;
            while mark_idx < marks.len() && marks[mark_idx].time <= seg_end {
                let mark = marks[mark_idx];
                let dt = mark.time - cur;
                if dt > 0.0 {
                    euler_step(&mut state, dt, &mut rng, seg)?;
                }
                let incr = m.eval_c(state) * mark.size;
                state += incr;
                interval_jump_sum += incr;
                jump_sum_total += incr;
                count_here += 1;
                cur = mark.time;
                mark_idx += 1;
                had_jump = true;
            }
            let dt_tail = if had_jump {
                (seg_begin + delta) - cur
            } else {
                delta
            };
            if dt_tail > 0.0 {
                euler_step(&mut state, dt_tail, &mut rng, seg)?;
            }
            if !state.is_finite() {
                return Err(Error::SimulationDiverged { step: seg });
            }
        }
        let prev = *x.last().unwrap();
        let prev_cont = *x_cont.last().unwrap();
        x.push(state);
        jump_counts[j - 1] = count_here;
        let cont = if jump_sum_total == 0.0 {
            state
        } else {
            prev_cont + ((state - prev) - interval_jump_sum)
        };
        x_cont.push(cont);
    }

    Ok(SamplePath {
        x,
        x_cont,
        jump_counts,
        jump_marks: marks,
        config: cfg.clone(),
    })
}

/// Monte Carlo check of the one-step conditional moments of the continuous
/// part from a fixed start state: `E[(dX)^2]/h` against `a^2(x0)` and
/// `E[(dX)^4]/h^2` against `3 a^4(x0)`.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCheckReport {
    pub second_ratio: f64,
    pub second_se: f64,
    pub fourth_ratio: f64,
    pub fourth_se: f64,
    pub n_mc: usize,
}

pub fn interval_moment_check(
    m: &ModelSpec,
    cfg: &SimConfig,
    n_mc: usize,
) -> Result<MomentCheckReport> {
    cfg.validate(m)?;
    if cfg.fixed_jump_count.is_some_and(|k| k > 0)
        || (!matches!(m.jump_law.kind, JumpKind::None) && m.jump_law.intensity > 0.0)
    {
        return Err(Error::invalid(
            "jump_law",
            "moment check applies to the jump-free variant only",
        ));
    }
    if n_mc < 2 {
        return Err(Error::invalid("n_mc", "need at least two replications"));
    }
    let mut rng = RngStream::new(cfg.seed, cfg.stream);
    let delta = cfg.h / cfg.refine as f64;
    let alpha0 = &cfg.theta.alpha0;
    let beta0 = &cfg.theta.beta0;
    let a2_start = m.diffusion_sq(cfg.x0, alpha0)?;

    let mut s2 = 0.0;
    let mut s2sq = 0.0;
    let mut s4 = 0.0;
    let mut s4sq = 0.0;
    for _ in 0..n_mc {
        let mut state = cfg.x0;
        for _ in 0..cfg.refine {
            let a2 = m.diffusion_sq(state, alpha0)?;
            let b = m.drift(state, beta0);
            state += a2.sqrt() * delta.sqrt() * rng.sample_normal() + b * delta;
        }
        let d = state - cfg.x0;
        let v2 = d * d / cfg.h;
        let v4 = d * d * d * d / (cfg.h * cfg.h);
        s2 += v2;
        s2sq += v2 * v2;
        s4 += v4;
        s4sq += v4 * v4;
    }
    let nf = n_mc as f64;
    let m2 = s2 / nf;
    let m4 = s4 / nf;
    let sd2 = ((s2sq / nf - m2 * m2).max(0.0) / nf).sqrt();
    let sd4 = ((s4sq / nf - m4 * m4).max(0.0) / nf).sqrt();
    Ok(MomentCheckReport {
        second_ratio: m2 / a2_start,
        second_se: sd2 / a2_start,
        fourth_ratio: m4 / (3.0 * a2_start * a2_start),
        fourth_se: sd4 / (3.0 * a2_start * a2_start),
        n_mc,
    })
}
