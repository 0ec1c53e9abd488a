//! Command-line interface: `simulate`, `jbtest`, `estimate`, `detect`, `mc`,
//! plus the CSV/JSON path formats they share.
//!
//! Path CSV layout: header `t,x[,x_cont,jump_count]`, strictly increasing
//! `t` on a uniform grid (relative spacing tolerance 1e-9), numbers with 17
//! significant digits so files round-trip exactly. Every JSON document
//! embeds the tool version, the resolved configuration, and the master
//! seed.
//!
//! Exit codes: 0 success, 1 runtime or statistical failure, 2 usage.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::design::all_intervals;
use crate::detect::{detect, DetectOptions};
use crate::error::{Error, Result};
use crate::estimators::{alpha_lse, estimate_report};
use crate::jbtest::{jb_statistic, jb_test, JbParts};
use crate::model::{builtin_model, registry_names, JumpKind, JumpLaw, ModelSpec, ThetaTrue};
use crate::montecarlo::{emit_csv, emit_table, fmt_full, run_scenario, Scenario};
use crate::simulate::{simulate_path, SamplePath, SimConfig};

#[derive(Parser, Debug)]
#[command(
    name = "jbsde",
    version,
    about = "Jump-diffusion simulation, jump detection, and drift/diffusion estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

fn parse_q(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` is outside the valid range (0, 1) exclusive"))
    }
}

fn parse_vec(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{p}` is not a number"))
        })
        .collect()
}

/// `gamma:shape,rate` or `big:d1,g1,d2,g2` or `none`.
fn parse_jump_kind(s: &str) -> std::result::Result<JumpKind, String> {
    if s == "none" {
        return Ok(JumpKind::None);
    }
    let (head, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("`{s}`: expected none, gamma:shape,rate or big:d1,g1,d2,g2"))?;
    let nums = parse_vec(rest)?;
    match (head, nums.as_slice()) {
        ("gamma", [shape, rate]) => Ok(JumpKind::Gamma {
            shape: *shape,
            rate: *rate,
        }),
        ("big", [d1, g1, d2, g2]) => Ok(JumpKind::BilateralIg {
            delta1: *d1,
            gamma1: *g1,
            delta2: *d2,
            gamma2: *g2,
        }),
        _ => Err(format!(
            "`{s}`: expected none, gamma:shape,rate or big:d1,g1,d2,g2"
        )),
    }
}

#[derive(Args, Debug)]
pub struct ModelArg {
    /// Registered model name.
    #[arg(long, value_parser = parse_model)]
    pub model: String,
}

fn parse_model(s: &str) -> std::result::Result<String, String> {
    builtin_model(s).map(|_| s.to_string()).map_err(|_| {
        format!(
            "unknown model `{s}`; registered: {}",
            registry_names().join(", ")
        )
    })
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a path and write it as CSV plus a JSON sidecar.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        h: f64,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        /// True diffusion parameter (comma-separated for vector models).
        #[arg(long, value_parser = parse_vec)]
        alpha0: std::vec::Vec<f64>,
        /// True drift parameter.
        #[arg(long, value_parser = parse_vec)]
        beta0: std::vec::Vec<f64>,
        /// Jump-size law: none, gamma:shape,rate or big:d1,g1,d2,g2.
        #[arg(long, value_parser = parse_jump_kind, default_value = "none")]
        jump: JumpKind,
        /// Poisson intensity per unit time.
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Condition on exactly this many jumps in (0, T].
        #[arg(long)]
        fixed_jumps: Option<u64>,
        #[arg(long, default_value_t = 10)]
        refine: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Output prefix; writes <out>.csv and <out>.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the Jarque-Bera statistic and decision for a path file.
    Jbtest {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        input: PathBuf,
        /// Diffusion parameter for the residuals; full-sample one-step
        /// estimate when omitted.
        #[arg(long, value_parser = parse_vec)]
        alpha: Option<std::vec::Vec<f64>>,
        #[arg(long, value_parser = parse_q, default_value = "1e-3")]
        q: f64,
        #[arg(long, default_value = "both")]
        parts: JbParts,
    },
    /// Closed-form estimates over a retained index set.
    Estimate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        input: PathBuf,
        /// `all`, or a file of whitespace-separated retained interval
        /// indices (1-based).
        #[arg(long, default_value = "all")]
        retained: String,
    },
    /// Iterative jump detection and final estimates.
    Detect {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_q, default_value = "1e-3")]
        q: f64,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value = "both")]
        parts: JbParts,
        /// Write the detection state JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo replication of a scenario file.
    Mc {
        /// Scenario JSON document.
        #[arg(long)]
        scenario: PathBuf,
        /// Worker threads (0 = rayon default).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output prefix; writes <out>.csv and <out>.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A parsed path file.
#[derive(Debug, Clone)]
pub struct PathCsv {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub x_cont: Option<Vec<f64>>,
    pub jump_count: Option<Vec<u32>>,
    /// Inferred uniform spacing.
    pub h: f64,
}

pub fn write_path_csv(path: &Path, sample: &SamplePath) -> Result<()> {
    let mut out = String::new();
    out.push_str("t,x,x_cont,jump_count\n");
    let h = sample.config.h;
    for j in 0..sample.x.len() {
        let t = j as f64 * h;
        let jc = if j == 0 {
            String::new()
        } else {
            sample.jump_counts[j - 1].to_string()
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_full(t),
            fmt_full(sample.x[j]),
            fmt_full(sample.x_cont[j]),
            jc
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_path_csv(path: &Path) -> Result<PathCsv> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::MalformedRow {
        line: 1,
        reason: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    let ok_header = matches!(
        cols.as_slice(),
        ["t", "x"] | ["t", "x", "x_cont"] | ["t", "x", "x_cont", "jump_count"]
    );
    if !ok_header {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("header `{header}` is not t,x[,x_cont[,jump_count]]"),
        });
    }
    let has_cont = cols.len() >= 3;
    let has_jc = cols.len() >= 4;

    let mut t = Vec::new();
    let mut x = Vec::new();
    let mut x_cont = Vec::new();
    let mut jump_count = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields.len() != cols.len() {
            return Err(Error::MalformedRow {
                line: lineno,
                reason: format!("expected {} fields, found {}", cols.len(), fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| Error::MalformedRow {
                line: lineno,
                reason: format!("bad {what} value `{s}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedRow {
                    line: lineno,
                    reason: format!("non-finite {what} value `{s}`"),
                });
            }
            Ok(v)
        };
        t.push(parse_f(fields[0], "t")?);
        x.push(parse_f(fields[1], "x")?);
        if has_cont {
            x_cont.push(parse_f(fields[2], "x_cont")?);
        }
        if has_jc {
            let f = fields[3];
            if f.is_empty() {
                if jump_count.is_empty() && t.len() == 1 {
                    // first row carries no interval count
                } else {
                    return Err(Error::MalformedRow {
                        line: lineno,
                        reason: "empty jump_count after the first row".into(),
                    });
                }
            } else {
                jump_count.push(f.parse().map_err(|_| Error::MalformedRow {
                    line: lineno,
                    reason: format!("bad jump_count value `{f}`"),
                })?);
            }
        }
    }
    if t.len() < 2 {
        return Err(Error::MalformedRow {
            line: t.len() + 1,
            reason: "need at least two data rows".into(),
        });
    }
    let n = t.len() - 1;
    let h = (t[n] - t[0]) / n as f64;
    if h.is_nan() || h <= 0.0 {
        return Err(Error::NonUniformGrid {
            row: 3,
            found: t[1] - t[0],
            expected: h,
        });
    }
    // rows are 1-based file lines; data row j sits on line j + 2
    for j in 1..=n {
        let spacing = t[j] - t[j - 1];
        if (spacing - h).abs() > 1e-9 * h.abs() {
            return Err(Error::NonUniformGrid {
                row: j + 2,
                found: spacing,
                expected: h,
            });
        }
    }
    Ok(PathCsv {
        t,
        x,
        x_cont: has_cont.then_some(x_cont),
        jump_count: has_jc.then_some(jump_count),
        h,
    })
}

fn read_retained(spec: &str, n: usize) -> Result<Vec<usize>> {
    if spec == "all" {
        return Ok(all_intervals(n));
    }
    let text = fs::read_to_string(spec)?;
    let mut idx = Vec::new();
    for tok in text.split_whitespace() {
        let j: usize = tok
            .parse()
            .map_err(|_| Error::invalid("retained", format!("`{tok}` is not an interval index")))?;
        idx.push(j);
    }
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

fn versioned<T: Serialize>(
    config: &T,
    seed: Option<u64>,
    payload: serde_json::Value,
) -> serde_json::Value {
    json!({
        "tool": "jbsde",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config,
        "result": payload,
    })
}

fn print_json(doc: &serde_json::Value) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, doc)?;
    stdout.write_all(b"\n")?;
    Ok(())
}

fn model_with_law(name: &str, kind: JumpKind, intensity: f64) -> Result<ModelSpec> {
    let mut m = builtin_model(name)?;
    m.jump_law = JumpLaw { kind, intensity };
    m.jump_law.validate()?;
    Ok(m)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            model,
            n,
            h,
            x0,
            alpha0,
            beta0,
            jump,
            lambda,
            fixed_jumps,
            refine,
            seed,
            stream,
            out,
        } => {
            let m = model_with_law(&model.model, jump, lambda)?;
            let cfg = SimConfig {
                n,
                h,
                refine,
                x0,
                theta: ThetaTrue { alpha0, beta0 },
                fixed_jump_count: fixed_jumps,
                seed,
                stream,
            };
            let path = simulate_path(&m, &cfg)?;
            let csv_path = out.with_extension("csv");
            let json_path = out.with_extension("json");
            write_path_csv(&csv_path, &path)?;
            let sidecar = json!({
                "tool": "jbsde",
                "version": env!("CARGO_PKG_VERSION"),
                "seed": cfg.seed,
                "model": m.name,
                "jump_law": m.jump_law,
                "config": cfg,
                "jump_marks": path.jump_marks,
            });
            fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)?;
            eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
            Ok(())
        }
        Command::Jbtest {
            model,
            input,
            alpha,
            q,
            parts,
        } => {
            let m = builtin_model(&model.model)?;
            let file = read_path_csv(&input)?;
            let n = file.x.len() - 1;
            let retained = all_intervals(n);
            let alpha_hat = match alpha {
                Some(a) => a,
                None => {
                    let lse = alpha_lse(&m, &file.x, file.h, &retained)?;
                    crate::estimators::alpha_onestep(&m, &file.x, file.h, &retained, &lse)?
                }
            };
            let stat = jb_statistic(&m, &file.x, file.h, &alpha_hat, &retained)?;
            let res = jb_test(stat, q, parts)?;
            let config = json!({
                "model": m.name,
                "input": input,
                "alpha": alpha_hat,
                "q": q,
                "parts": parts,
                "n": n,
                "h": file.h,
            });
            print_json(&versioned(&config, None, serde_json::to_value(res)?))
        }
        Command::Estimate {
            model,
            input,
            retained,
        } => {
            let m = builtin_model(&model.model)?;
            let file = read_path_csv(&input)?;
            let n = file.x.len() - 1;
            let idx = read_retained(&retained, n)?;
            let report = estimate_report(&m, &file.x, file.h, &idx)?;
            let config = json!({
                "model": m.name,
                "input": input,
                "retained": retained,
                "n": n,
                "h": file.h,
            });
            print_json(&versioned(&config, None, serde_json::to_value(report)?))
        }
        Command::Detect {
            model,
            input,
            q,
            batch,
            parts,
            out,
        } => {
            let m = builtin_model(&model.model)?;
            let file = read_path_csv(&input)?;
            let n = file.x.len() - 1;
            let opts = DetectOptions {
                batch,
                parts,
                ..DetectOptions::default()
            };
            let state = detect(&m, &file.x, file.h, q, &opts)?;
            let t_end = n as f64 * file.h;
            let config = json!({
                "model": m.name,
                "input": input,
                "q": q,
                "batch": batch,
                "parts": parts,
                "n": n,
                "h": file.h,
            });
            let mut payload = serde_json::to_value(&state)?;
            // descriptive removal rate, not an intensity estimate
            payload["k_per_time"] = json!(state.k_star as f64 / t_end);
            let doc = versioned(&config, None, payload);
            match out {
                Some(p) => {
                    fs::write(&p, serde_json::to_string_pretty(&doc)?)?;
                    eprintln!("wrote {}", p.display());
                    Ok(())
                }
                None => print_json(&doc),
            }
        }
        Command::Mc {
            scenario,
            jobs,
            out,
        } => {
            let text = fs::read_to_string(&scenario)?;
            let sc: Scenario = serde_json::from_str(&text)
                .map_err(|e| Error::invalid("scenario", format!("{}: {e}", scenario.display())))?;
            let summary = run_scenario(&sc, jobs)?;
            print!("{}", emit_table(std::slice::from_ref(&summary)));
            if let Some(prefix) = out {
                let csv_path = prefix.with_extension("csv");
                let json_path = prefix.with_extension("json");
                fs::write(&csv_path, emit_csv(std::slice::from_ref(&summary)))?;
                let doc = versioned(&sc, Some(sc.seed), serde_json::to_value(&summary)?);
                fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;
                eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
            }
            Ok(())
        }
    }
}
