//! The four subcommands, as library functions returning their reports.

use std::fs;
use std::path::{Path, PathBuf};

use asgd_core::delay::Verdict;
use asgd_core::diagnostics::{
    compare_runs, ensemble_mean, rate_fit, ComparisonReport, Ensemble, RateFit, RunSeries,
};
use asgd_core::engine::{push_float, rows_from_csv, run, Algorithm, RunSummary, TraceRow};
use asgd_core::schedules::{validate_theorem1, validate_theorem2, Theorem1Report, Theorem2Report};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, Job};
use crate::error::{CliError, Result};

pub const DEFAULT_OUT_DIR: &str = "out";
pub const ENSEMBLE_HEADER: &str = "k,mean,stderr,vtime";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub algorithm: Option<Algorithm>,
    pub allow_inadmissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub dim: usize,
    pub lipschitz: f64,
    pub sigma2: f64,
    pub constants_exact: bool,
    pub jobs: Vec<JobReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    pub name: String,
    pub algorithm: String,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    /// `None` for system delays, which have no closed-form law.
    pub admissibility: Option<Verdict>,
    /// Trace files relative to the output directory, in seed order.
    pub traces: Vec<String>,
    pub ensemble: String,
    pub final_mean_grad_norm_sq: f64,
    pub final_mean_vtime: f64,
    pub history_overflows: u64,
}

/// Runs every job of a config over its seeds and writes traces, per-seed
/// summaries, ensemble means and `report.json` under the output directory.
pub fn cmd_run(opts: &RunOptions) -> Result<RunReport> {
    let cfg = config::load(&opts.config)?;
    let problem = cfg.build_problem()?;
    let constants = problem.constants();
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    let mut jobs = cfg.jobs(opts.algorithm);
    let mut verdicts = Vec::with_capacity(jobs.len());
    for job in &mut jobs {
        if let Some(seed) = opts.seed {
            job.seeds = vec![seed];
        }
        job.config.allow_inadmissible |= opts.allow_inadmissible;
        let verdict = job.config.admissibility(constants.lipschitz)?;
        if let Some(v) = &verdict {
            if !v.admissible && !job.config.allow_inadmissible {
                return Err(CliError::Inadmissible(format!(
                    "run `{}` is inadmissible: {} (pass --allow-inadmissible to run anyway)",
                    job.name, v.reason
                )));
            }
        }
        verdicts.push(verdict);
    }

    let mut reports = Vec::with_capacity(jobs.len());
    for (job, admissibility) in jobs.iter().zip(verdicts) {
        reports.push(run_job(problem.as_ref(), job, admissibility, &out_dir)?);
    }
    let report = RunReport {
        problem: problem.name().to_string(),
        dim: problem.dim(),
        lipschitz: constants.lipschitz,
        sigma2: constants.sigma2,
        constants_exact: constants.exact,
        jobs: reports,
    };
    write_json(&out_dir.join("report.json"), &report)?;
    Ok(report)
}

fn run_job(
    problem: &dyn asgd_core::problems::Problem,
    job: &Job,
    admissibility: Option<Verdict>,
    out_dir: &Path,
) -> Result<JobReport> {
    let dir = out_dir.join(&job.name);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let traces: Vec<_> = job
        .seeds
        .par_iter()
        .map(|&seed| run(problem, &job.for_seed(seed)))
        .collect::<std::result::Result<_, _>>()?;

    let mut files = Vec::with_capacity(traces.len());
    for (seed, trace) in job.seeds.iter().zip(&traces) {
        let name = format!("seed_{seed}.csv");
        write_text(&dir.join(&name), &trace.to_csv())?;
        write_json(&dir.join(format!("seed_{seed}.json")), &trace.summary)?;
        files.push(format!("{}/{name}", job.name));
    }
    let summaries: Vec<&RunSummary> = traces.iter().map(|t| &t.summary).collect();
    let k: Vec<usize> = traces[0].rows.iter().map(|r| r.k).collect();
    let values: Vec<Vec<f64>> = traces.iter().map(|t| t.column(|r| r.grad_norm_sq)).collect();
    let vtimes: Vec<Vec<f64>> = traces.iter().map(|t| t.column(|r| r.vtime)).collect();
    let ens = ensemble_mean(&k, &values, &vtimes)?;
    write_text(&dir.join("ensemble.csv"), &ensemble_to_csv(&ens))?;
    Ok(JobReport {
        name: job.name.clone(),
        algorithm: job.config.algorithm.name().to_string(),
        iterations: job.config.iterations,
        seeds: job.seeds.clone(),
        admissibility,
        traces: files,
        ensemble: format!("{}/ensemble.csv", job.name),
        final_mean_grad_norm_sq: *ens.mean.last().expect("non-empty trace"),
        final_mean_vtime: *ens.vtime.last().expect("non-empty trace"),
        history_overflows: summaries.iter().map(|s| s.history_overflows).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub problem: String,
    pub lipschitz: f64,
    pub jobs: Vec<DelayJobReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayJobReport {
    pub name: String,
    pub algorithm: String,
    /// Base batch size `M`.
    pub batch: usize,
    pub verdict: Option<Verdict>,
    pub theorem1: Option<Theorem1Report>,
    pub theorem2: Option<Theorem2Report>,
    pub note: Option<String>,
}

/// Admissibility of every job in a config.
pub fn cmd_check_delay(path: &Path, algorithm: Option<Algorithm>) -> Result<DelayReport> {
    let cfg = config::load(path)?;
    let problem = cfg.build_problem()?;
    let l = problem.constants().lipschitz;
    let mut jobs = Vec::new();
    for job in cfg.jobs(algorithm) {
        let c = &job.config;
        let m = c.batch.base();
        let verdict = c.admissibility(l)?;
        let (theorem1, theorem2, note) = match &verdict {
            None => (
                None,
                None,
                Some("system delays emerge from simulation; no closed-form delay law".to_string()),
            ),
            Some(v) => match c.algorithm {
                Algorithm::AsyncI => (
                    None,
                    Some(validate_theorem2(&c.batch, &c.effective_step(), v.c1, m, l)),
                    None,
                ),
                _ => (
                    Some(validate_theorem1(
                        &c.effective_step(),
                        v.c1,
                        m,
                        l,
                        c.iterations,
                    )),
                    None,
                    None,
                ),
            },
        };
        jobs.push(DelayJobReport {
            name: job.name,
            algorithm: c.algorithm.name().to_string(),
            batch: m,
            verdict,
            theorem1,
            theorem2,
            note,
        });
    }
    Ok(DelayReport {
        problem: problem.name().to_string(),
        lipschitz: l,
        jobs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitReport {
    pub pattern: String,
    pub files: Vec<String>,
    pub window: f64,
    pub fit: RateFit,
}

/// Log-log slope of the ensemble-mean `grad_norm_sq` over the traces matching `pattern`.
pub fn cmd_rate_fit(pattern: &str, window: f64, out_dir: Option<&Path>) -> Result<RateFitReport> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(CliError::Usage(format!("--window must be in (0, 1], got {window}")));
    }
    let (files, ens) = load_ensemble(pattern)?;
    let fit = rate_fit(&ens, window).map_err(|e| CliError::Data {
        path: PathBuf::from(pattern),
        message: e.to_string(),
    })?;
    let report = RateFitReport {
        pattern: pattern.to_string(),
        files,
        window,
        fit,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_text(&dir.join("ensemble.csv"), &ensemble_to_csv(&ens))?;
        write_json(&dir.join("rate_fit.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareGroup {
    pub name: String,
    pub pattern: String,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub groups: Vec<CompareGroup>,
    pub comparison: ComparisonReport,
}

/// Threshold-crossing ordering of several trace ensembles, one per pattern.
///
/// A group is named after the directory holding its traces when they share
/// one, otherwise after its pattern.
pub fn cmd_compare(patterns: &[String], threshold: f64, out_dir: Option<&Path>) -> Result<CompareReport> {
    if patterns.is_empty() {
        return Err(CliError::Usage("compare needs at least one trace pattern".into()));
    }
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(CliError::Usage(format!("--threshold must be positive, got {threshold}")));
    }
    let mut groups = Vec::with_capacity(patterns.len());
    let mut series = Vec::with_capacity(patterns.len());
    let mut ensembles = Vec::with_capacity(patterns.len());
    for pattern in patterns {
        let (files, ens) = load_ensemble(pattern)?;
        let mut name = group_name(pattern, &files);
        if groups.iter().any(|g: &CompareGroup| g.name == name) {
            name = pattern.clone();
        }
        series.push(RunSeries {
            name: name.clone(),
            k: ens.k.clone(),
            mean: ens.mean.clone(),
            vtime: ens.vtime.clone(),
        });
        groups.push(CompareGroup {
            name,
            pattern: pattern.clone(),
            files,
        });
        ensembles.push(ens);
    }
    let report = CompareReport {
        groups,
        comparison: compare_runs(&series, threshold),
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (i, ens) in ensembles.iter().enumerate() {
            write_text(&dir.join(format!("ensemble_{i}.csv")), &ensemble_to_csv(ens))?;
        }
        write_json(&dir.join("compare.json"), &report)?;
    }
    Ok(report)
}

fn group_name(pattern: &str, files: &[String]) -> String {
    let parent = |f: &String| {
        Path::new(f)
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
    };
    match parent(&files[0]) {
        Some(p) if files.iter().all(|f| parent(f).as_deref() == Some(p.as_str())) => p,
        _ => pattern.to_string(),
    }
}

/// Expands a glob in sorted order; an empty match is an error.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>> {
    let paths = glob::glob(pattern).map_err(|e| CliError::Usage(format!("bad pattern `{pattern}`: {e}")))?;
    let mut out = Vec::new();
    for p in paths {
        match p {
            Ok(path) if path.is_file() => out.push(path),
            Ok(_) => {}
            Err(e) => {
                let path = e.path().to_path_buf();
                return Err(CliError::io(&path, e.into()));
            }
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(CliError::EmptyGlob(pattern.to_string()));
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    rows_from_csv(&text).map_err(|e| CliError::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn load_ensemble(pattern: &str) -> Result<(Vec<String>, Ensemble)> {
    let paths = expand_glob(pattern)?;
    let mut k = Vec::new();
    let mut values = Vec::with_capacity(paths.len());
    let mut vtimes = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let rows = read_trace(path)?;
        let ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
        if i == 0 {
            k = ks;
        } else if ks != k {
            return Err(CliError::Data {
                path: path.clone(),
                message: "iteration grid differs from the first trace".into(),
            });
        }
        values.push(rows.iter().map(|r| r.grad_norm_sq).collect());
        vtimes.push(rows.iter().map(|r| r.vtime).collect());
    }
    let ens = ensemble_mean(&k, &values, &vtimes).map_err(|e| CliError::Data {
        path: PathBuf::from(pattern),
        message: e.to_string(),
    })?;
    let files = paths.iter().map(|p| p.to_string_lossy().into_owned()).collect();
    Ok((files, ens))
}

pub fn ensemble_to_csv(e: &Ensemble) -> String {
    let mut out = String::with_capacity(e.k.len() * 80);
    out.push_str(ENSEMBLE_HEADER);
    out.push('\n');
    for i in 0..e.k.len() {
        out.push_str(&e.k[i].to_string());
        for v in [e.mean[i], e.stderr[i], e.vtime[i]] {
            out.push(',');
            push_float(&mut out, v);
        }
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
