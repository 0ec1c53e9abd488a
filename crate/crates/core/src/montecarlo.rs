//! Replication harness: simulate `R` paths of a scenario, run the
//! full-sample, detected, and true-no-jump estimators on each, and tabulate
//! per-estimator means and standard deviations.
//!
//! Replications run in parallel on stream-indexed generators and are
//! aggregated in replication order, so results are byte-identical for any
//! worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::all_intervals;
use crate::detect::{detect, DetectOptions};
use crate::error::{Error, Result};
use crate::estimators::estimate_report;
use crate::model::{builtin_model, JumpLaw, ModelSpec, ThetaTrue};
use crate::simulate::{simulate_path, SimConfig};

fn default_refine() -> usize {
    10
}

fn default_batch() -> usize {
    1
}

/// One experiment: model, true parameters, grid, jump configuration, test
/// level, and replication count. Unknown keys in a scenario file are
/// rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Label used in emitted tables.
    pub name: String,
    pub model: String,
    pub alpha0: Vec<f64>,
    pub beta0: Vec<f64>,
    pub n: usize,
    pub h: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_refine")]
    pub refine: usize,
    pub jump_law: JumpLaw,
    /// Condition every replication on exactly this many jumps.
    #[serde(default)]
    pub fixed_jump_count: Option<u64>,
    pub q: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch: usize,
}

/// Mean and standard deviation per parameter component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStat {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Per-scenario summary in the shape of the experiment tables: one
/// mean/standard-deviation pair per estimator column.
#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub scenario: Scenario,
    pub replications_ok: usize,
    pub failures: usize,
    /// Full-sample one-step estimate of the diffusion parameter.
    pub alpha_full: ColumnStat,
    pub beta_full: ColumnStat,
    /// After iterative jump removal.
    pub alpha_detect: ColumnStat,
    pub beta_detect: ColumnStat,
    /// Over the true no-jump intervals.
    pub alpha_nojump: ColumnStat,
    pub beta_nojump: ColumnStat,
    pub mean_k_star: f64,
    /// Fraction of true jump intervals that detection removed, averaged
    /// over replications that had jumps.
    pub mean_recall: Option<f64>,
}

struct RepOutcome {
    alpha_full: Vec<f64>,
    beta_full: Vec<f64>,
    alpha_detect: Vec<f64>,
    beta_detect: Vec<f64>,
    alpha_nojump: Vec<f64>,
    beta_nojump: Vec<f64>,
    k_star: usize,
    recall: Option<f64>,
}

fn scenario_model(s: &Scenario) -> Result<ModelSpec> {
    let mut m = builtin_model(&s.model)?;
    s.jump_law.validate()?;
    m.jump_law = s.jump_law;
    Ok(m)
}

fn run_replication(m: &ModelSpec, s: &Scenario, rep: u64) -> Result<RepOutcome> {
    let cfg = SimConfig {
        n: s.n,
        h: s.h,
        refine: s.refine,
        x0: s.x0,
        theta: ThetaTrue {
            alpha0: s.alpha0.clone(),
            beta0: s.beta0.clone(),
        },
        fixed_jump_count: s.fixed_jump_count,
        seed: s.seed,
        stream: rep,
    };
    let path = simulate_path(m, &cfg)?;
    let all = all_intervals(s.n);
    let full = estimate_report(m, &path.x, s.h, &all)?;

    let opts = DetectOptions {
        batch: s.batch,
        ..DetectOptions::default()
    };
    let det = detect(m, &path.x, s.h, s.q, &opts)?;

    let no_jump_idx = path.no_jump_intervals();
    let nojump = estimate_report(m, &path.x, s.h, &no_jump_idx)?;

    let truth = path.jump_intervals();
    let recall = if truth.is_empty() {
        None
    } else {
        let hits = det
            .removed
            .iter()
            .filter(|j| truth.binary_search(j).is_ok())
            .count();
        Some(hits as f64 / truth.len() as f64)
    };

    Ok(RepOutcome {
        alpha_full: full.alpha_onestep,
        beta_full: full.beta,
        alpha_detect: det.final_report.alpha_onestep.clone(),
        beta_detect: det.final_report.beta.clone(),
        alpha_nojump: nojump.alpha_onestep,
        beta_nojump: nojump.beta,
        k_star: det.k_star,
        recall,
    })
}

fn column_stat(values: &[&Vec<f64>]) -> ColumnStat {
    let count = values.len();
    let dim = values.first().map_or(0, |v| v.len());
    let mut mean = vec![0.0; dim];
    for v in values {
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    let mut sd = vec![0.0; dim];
    if count > 1 {
        for v in values {
            for (s, (x, m)) in sd.iter_mut().zip(v.iter().zip(mean.iter())) {
                let d = x - m;
                *s += d * d;
            }
        }
        for s in sd.iter_mut() {
            *s = (*s / (count - 1) as f64).sqrt();
        }
    }
    ColumnStat { mean, sd }
}

/// Run all replications of a scenario. `jobs = 0` uses the current rayon
/// pool; otherwise a dedicated pool with that many workers is used.
pub fn run_scenario(s: &Scenario, jobs: usize) -> Result<McSummary> {
    if s.replications < 1 {
        return Err(Error::invalid("replications", "need at least one"));
    }
    if s.batch < 1 {
        return Err(Error::invalid("batch", "batch must be at least 1"));
    }
    let m = scenario_model(s)?;

    let run_all = || -> Vec<Result<RepOutcome>> {
        (0..s.replications as u64)
            .into_par_iter()
            .map(|rep| run_replication(&m, s, rep))
            .collect()
    };
    let outcomes: Vec<Result<RepOutcome>> = if jobs == 0 {
        run_all()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::invalid("jobs", e.to_string()))?;
        pool.install(run_all)
    };

    let ok: Vec<&RepOutcome> = outcomes.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failures = outcomes.len() - ok.len();
    if ok.is_empty() {
        let first_err = outcomes.into_iter().find_map(|r| r.err()).unwrap();
        return Err(first_err);
    }

    let alpha_full = column_stat(&ok.iter().map(|r| &r.alpha_full).collect::<Vec<_>>());
    let beta_full = column_stat(&ok.iter().map(|r| &r.beta_full).collect::<Vec<_>>());
    let alpha_detect = column_stat(&ok.iter().map(|r| &r.alpha_detect).collect::<Vec<_>>());
    let beta_detect = column_stat(&ok.iter().map(|r| &r.beta_detect).collect::<Vec<_>>());
    let alpha_nojump = column_stat(&ok.iter().map(|r| &r.alpha_nojump).collect::<Vec<_>>());
    let beta_nojump = column_stat(&ok.iter().map(|r| &r.beta_nojump).collect::<Vec<_>>());
    let mean_k_star = ok.iter().map(|r| r.k_star as f64).sum::<f64>() / ok.len() as f64;
    let recalls: Vec<f64> = ok.iter().filter_map(|r| r.recall).collect();
    let mean_recall = if recalls.is_empty() {
        None
    } else {
        Some(recalls.iter().sum::<f64>() / recalls.len() as f64)
    };

    Ok(McSummary {
        scenario: s.clone(),
        replications_ok: ok.len(),
        failures,
        alpha_full,
        beta_full,
        alpha_detect,
        beta_detect,
        alpha_nojump,
        beta_nojump,
        mean_k_star,
        mean_recall,
    })
}

/// Serialize a float with 17 significant digits so parsing recovers the
/// exact value.
pub fn fmt_full(x: f64) -> String {
    format!("{:.16e}", x)
}

fn component_headers(prefix: &str, dim: usize, out: &mut Vec<String>) {
    if dim == 1 {
        out.push(format!("{prefix}_mean"));
        out.push(format!("{prefix}_sd"));
    } else {
        for i in 1..=dim {
            out.push(format!("{prefix}{i}_mean"));
            out.push(format!("{prefix}{i}_sd"));
        }
    }
}

fn push_stat(stat: &ColumnStat, out: &mut Vec<String>) {
    for (m, s) in stat.mean.iter().zip(stat.sd.iter()) {
        out.push(fmt_full(*m));
        out.push(fmt_full(*s));
    }
}

/// Machine-readable CSV: one row per summary, stable column order,
/// full-precision numbers.
pub fn emit_csv(summaries: &[McSummary]) -> String {
    let mut lines = Vec::with_capacity(summaries.len() + 1);
    if let Some(first) = summaries.first() {
        let pa = first.alpha_full.mean.len();
        let pb = first.beta_full.mean.len();
        let mut head = vec![
            "name".to_string(),
            "model".to_string(),
            "n".to_string(),
            "h".to_string(),
            "t_end".to_string(),
            "k_fixed".to_string(),
            "q".to_string(),
            "replications_ok".to_string(),
            "failures".to_string(),
        ];
        component_headers("alpha_full", pa, &mut head);
        component_headers("beta_full", pb, &mut head);
        component_headers("alpha_detect", pa, &mut head);
        component_headers("beta_detect", pb, &mut head);
        component_headers("alpha_nojump", pa, &mut head);
        component_headers("beta_nojump", pb, &mut head);
        head.push("mean_k_star".to_string());
        head.push("mean_recall".to_string());
        lines.push(head.join(","));
    }
    for s in summaries {
        let sc = &s.scenario;
        let mut row = vec![
            sc.name.clone(),
            sc.model.clone(),
            sc.n.to_string(),
            fmt_full(sc.h),
            fmt_full(sc.n as f64 * sc.h),
            sc.fixed_jump_count
                .map(|k| k.to_string())
                .unwrap_or_default(),
            fmt_full(sc.q),
            s.replications_ok.to_string(),
            s.failures.to_string(),
        ];
        push_stat(&s.alpha_full, &mut row);
        push_stat(&s.beta_full, &mut row);
        push_stat(&s.alpha_detect, &mut row);
        push_stat(&s.beta_detect, &mut row);
        push_stat(&s.alpha_nojump, &mut row);
        push_stat(&s.beta_nojump, &mut row);
        row.push(fmt_full(s.mean_k_star));
        row.push(s.mean_recall.map(fmt_full).unwrap_or_default());
        lines.push(row.join(","));
    }
    lines.join("\n") + "\n"
}

fn fmt_pair(stat: &ColumnStat) -> String {
    stat.mean
        .iter()
        .zip(stat.sd.iter())
        .map(|(m, s)| format!("{m:.3} ({s:.3})"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Aligned text table, one row per scenario, means with standard deviations
/// in parentheses.
pub fn emit_table(summaries: &[McSummary]) -> String {
    let headers = [
        "name", "T", "n", "h", "k*", "a_full", "b_full", "a_detect", "b_detect", "a_nojump",
        "b_nojump", "mean_k", "recall", "fail",
    ];
    let mut rows: Vec<Vec<String>> = vec![headers.iter().map(|s| s.to_string()).collect()];
    for s in summaries {
        let sc = &s.scenario;
        rows.push(vec![
            sc.name.clone(),
            format!("{:.3}", sc.n as f64 * sc.h),
            sc.n.to_string(),
            format!("{}", sc.h),
            sc.fixed_jump_count
                .map(|k| k.to_string())
                .unwrap_or_else(|| "-".into()),
            fmt_pair(&s.alpha_full),
            fmt_pair(&s.beta_full),
            fmt_pair(&s.alpha_detect),
            fmt_pair(&s.beta_detect),
            fmt_pair(&s.alpha_nojump),
            fmt_pair(&s.beta_nojump),
            format!("{:.2}", s.mean_k_star),
            s.mean_recall
                .map(|r| format!("{r:.3}"))
                .unwrap_or_else(|| "-".into()),
            s.failures.to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap())
        .collect();
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}
