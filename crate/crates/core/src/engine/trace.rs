//! Run traces and their CSV form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::delay::Verdict;
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "k,gamma,batch,grad_norm_sq,objective,lyapunov,max_delay,mean_delay,vtime,rejections";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    /// Step used for the update that produced `x_k`; NaN at `k = 0`.
    pub gamma: f64,
    /// Gradients consumed by that update.
    pub batch: u64,
    pub grad_norm_sq: f64,
    pub objective: f64,
    /// NaN when not recorded or unavailable.
    pub lyapunov: f64,
    pub max_delay: usize,
    pub mean_delay: f64,
    pub vtime: f64,
    /// Cumulative rejected proposals that left the feasible set.
    pub rejections: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub algorithm: String,
    pub seed: u64,
    pub iterations: usize,
    pub dim: usize,
    pub lipschitz: f64,
    pub sigma2: f64,
    pub constants_exact: bool,
    pub initial_grad_norm_sq: f64,
    pub final_grad_norm_sq: f64,
    pub final_objective: f64,
    pub final_vtime: f64,
    pub rejections: u64,
    pub history_overflows: u64,
    pub max_delay: usize,
    /// Absent for system delays, which have no closed-form analysis.
    pub admissibility: Option<Verdict>,
    /// `f(x*)` was unknown and estimated by the running minimum.
    pub lyapunov_caveat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub summary: RunSummary,
    pub final_point: Vec<f64>,
    /// `x_0..x_K` when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
    /// Per-update `(delay, count)` pairs, ascending in delay, when requested.
    pub delays: Option<Vec<Vec<(usize, u64)>>>,
}

impl RunTrace {
    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }

    pub fn column(&self, f: impl Fn(&TraceRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

/// Appends `v` in the trace number format.
pub fn push_float(out: &mut String, v: f64) {
    // 17 significant digits round-trip every finite double.
    if v.is_nan() {
        out.push_str("NaN");
    } else if v.is_infinite() {
        out.push_str(if v > 0.0 { "inf" } else { "-inf" });
    } else {
        write!(out, "{v:.16e}").unwrap();
    }
}

pub fn rows_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 200);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        write!(out, "{},", r.k).unwrap();
        push_float(&mut out, r.gamma);
        write!(out, ",{},", r.batch).unwrap();
        push_float(&mut out, r.grad_norm_sq);
        out.push(',');
        push_float(&mut out, r.objective);
        out.push(',');
        push_float(&mut out, r.lyapunov);
        write!(out, ",{},", r.max_delay).unwrap();
        push_float(&mut out, r.mean_delay);
        out.push(',');
        push_float(&mut out, r.vtime);
        writeln!(out, ",{}", r.rejections).unwrap();
    }
    out
}

pub fn rows_from_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => return Err(Error::invalid(format!("unexpected trace header: {h}"))),
        None => return Err(Error::InsufficientData("empty trace".into())),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(Error::invalid(format!(
                    "trace row {} has {} fields, expected 10",
                    i + 1,
                    f.len()
                )));
            }
            let bad = |name: &str| Error::invalid(format!("trace row {}: bad {name}", i + 1));
            let fl = |s: &str, name: &str| s.trim().parse::<f64>().map_err(|_| bad(name));
            Ok(TraceRow {
                k: f[0].trim().parse().map_err(|_| bad("k"))?,
                gamma: fl(f[1], "gamma")?,
                batch: f[2].trim().parse().map_err(|_| bad("batch"))?,
                grad_norm_sq: fl(f[3], "grad_norm_sq")?,
                objective: fl(f[4], "objective")?,
                lyapunov: fl(f[5], "lyapunov")?,
                max_delay: f[6].trim().parse().map_err(|_| bad("max_delay"))?,
                mean_delay: fl(f[7], "mean_delay")?,
                vtime: fl(f[8], "vtime")?,
                rejections: f[9].trim().parse().map_err(|_| bad("rejections"))?,
            })
        })
        .collect()
}
