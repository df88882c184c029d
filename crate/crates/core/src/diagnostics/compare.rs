//! Threshold-crossing comparisons between ensembles.

use serde::{Deserialize, Serialize};

/// An ensemble-mean curve to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub name: String,
    pub k: Vec<usize>,
    pub mean: Vec<f64>,
    pub vtime: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub name: String,
    /// First `k` with mean strictly below the threshold.
    pub iterations: Option<usize>,
    /// Mean virtual time at that row.
    pub vtime: Option<f64>,
    pub censored: bool,
    pub final_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub threshold: f64,
    pub entries: Vec<ComparisonEntry>,
    /// Fastest first by iterations; runs in one group tie.
    pub by_iterations: Vec<Vec<String>>,
    /// Fastest first by virtual time.
    pub by_vtime: Vec<Vec<String>>,
    /// Runs that never reached the threshold.
    pub censored: Vec<String>,
}

pub fn compare_runs(runs: &[RunSeries], threshold: f64) -> ComparisonReport {
    let entries: Vec<ComparisonEntry> = runs
        .iter()
        .map(|r| {
            let hit = r.mean.iter().position(|m| *m < threshold);
            ComparisonEntry {
                name: r.name.clone(),
                iterations: hit.map(|i| r.k[i]),
                vtime: hit.map(|i| r.vtime[i]),
                censored: hit.is_none(),
                final_mean: r.mean.last().copied().unwrap_or(f64::NAN),
            }
        })
        .collect();
    let by_iterations = group(&entries, |e| e.iterations.map(|i| i as f64));
    let by_vtime = group(&entries, |e| e.vtime);
    let censored = entries
        .iter()
        .filter(|e| e.censored)
        .map(|e| e.name.clone())
        .collect();
    ComparisonReport {
        threshold,
        entries,
        by_iterations,
        by_vtime,
        censored,
    }
}

fn group(entries: &[ComparisonEntry], key: impl Fn(&ComparisonEntry) -> Option<f64>) -> Vec<Vec<String>> {
    let mut reached: Vec<(f64, &str)> = entries
        .iter()
        .filter_map(|e| key(e).map(|v| (v, e.name.as_str())))
        .collect();
    reached.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, Vec<String>)> = Vec::new();
    for (v, name) in reached {
        match out.last_mut() {
            Some((last, names)) if *last == v => names.push(name.to_string()),
            _ => out.push((v, vec![name.to_string()])),
        }
    }
    out.into_iter().map(|(_, names)| names).collect()
}
