//! Sync-SGD, Async-SGD and Async-SGD with increasing batches, run in seeded
//! virtual time.
//!
//! Update `k` (numbered from 1) turns `x_{k-1}` into `x_k`:
//!
//! ```text
//! x_k = x_{k-1} - (gamma_k / n_k) * sum_{m=1}^{n_k M} G(x_{k-1-tau_{k,m}}; xi_{k,m})
//! ```
//!
//! with `n_k = 1` except for [`Algorithm::AsyncI`], and `tau = 0` for
//! [`Algorithm::Sync`]. The sum is not averaged unless `average` is set, in
//! which case it is additionally divided by `M`.
//!
//! Gradients that share a stale iterate are drawn as one aggregate via
//! [`Problem::stochastic_gradient_sum`], in increasing order of delay, so
//! large batches cost one oracle call per distinct delay.

mod history;
mod trace;
mod workers;

use serde::{Deserialize, Serialize};

pub use history::History;
pub use trace::{
    push_float, rows_from_csv, rows_to_csv, RunSummary, RunTrace, TraceRow, CSV_HEADER,
};
pub use workers::{Delivery, WorkerPool};

use crate::delay::{admissibility_check, compute_c_sequence, DelayModel, Verdict};
use crate::diagnostics::LyapunovTracker;
use crate::linalg::{axpy, dist_sq, norm_sq};
use crate::problems::Problem;
use crate::rng::{stream, streams};
use crate::schedules::{BatchSchedule, StepSchedule};
use crate::{Error, Result, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Fresh gradients at the current iterate.
    Sync,
    /// Stale gradients summed into each update.
    Async,
    /// Stale gradients with batch `n_k M` averaged over `n_k`.
    AsyncI,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sync => "sync",
            Algorithm::Async => "async",
            Algorithm::AsyncI => "async_i",
        }
    }
}

/// Halvings tried before an infeasible proposal is abandoned.
pub const MAX_SHRINKS: u32 = 20;

pub const DEFAULT_HISTORY_CAPACITY: usize = 4096;

pub const DEFAULT_ANALYSIS_HORIZON: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub delay: DelayModel,
    pub step: StepSchedule,
    /// Only [`Algorithm::AsyncI`] follows the growth rule; the others use the base size.
    pub batch: BatchSchedule,
    pub iterations: usize,
    pub seed: u64,
    /// Divide the gradient sum by `M`.
    pub average: bool,
    pub history_capacity: usize,
    pub allow_inadmissible: bool,
    pub record_lyapunov: bool,
    pub record_iterates: bool,
    pub record_delays: bool,
    /// Length of the weight sequence used for admissibility and the Lyapunov column.
    pub analysis_horizon: usize,
    /// Simulate every worker event even when an aggregated route exists.
    pub exact_events: bool,
}

impl RunConfig {
    pub fn new(
        algorithm: Algorithm,
        delay: DelayModel,
        step: StepSchedule,
        batch: BatchSchedule,
        iterations: usize,
        seed: u64,
    ) -> Self {
        Self {
            algorithm,
            delay,
            step,
            batch,
            iterations,
            seed,
            average: false,
            history_capacity: DEFAULT_HISTORY_CAPACITY,
            allow_inadmissible: false,
            record_lyapunov: true,
            record_iterates: false,
            record_delays: false,
            analysis_horizon: DEFAULT_ANALYSIS_HORIZON,
            exact_events: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.history_capacity == 0 {
            return Err(Error::invalid("history capacity must be at least 1"));
        }
        if self.analysis_horizon == 0 {
            return Err(Error::invalid("analysis horizon must be at least 1"));
        }
        self.delay.validate()?;
        self.step.validate()?;
        self.batch.validate()
    }

    /// `n_k` for this algorithm.
    pub fn multiplier(&self, k: usize) -> u64 {
        match self.algorithm {
            Algorithm::AsyncI => self.batch.multiplier(k),
            _ => 1,
        }
    }

    /// The step schedule in sum form: divided by `M` when averaging.
    pub fn effective_step(&self) -> StepSchedule {
        if self.average {
            self.step.scaled(1.0 / self.batch.base() as f64)
        } else {
            self.step.clone()
        }
    }

    /// Delay model the analysis applies to; synchronous runs see no delay.
    pub fn analysis_model(&self) -> DelayModel {
        match self.algorithm {
            Algorithm::Sync => DelayModel::Bounded {
                max_delay: 0,
                weights: None,
            },
            _ => self.delay.clone(),
        }
    }

    /// Admissibility of the configured schedule, or `None` when delays only
    /// emerge from simulation.
    pub fn admissibility(&self, lipschitz: f64) -> Result<Option<Verdict>> {
        let model = self.analysis_model();
        if model.is_system() {
            return Ok(None);
        }
        admissibility_check(
            &model,
            &self.effective_step(),
            self.batch.base(),
            lipschitz,
            self.analysis_horizon,
        )
        .map(Some)
    }
}

/// Sum of stochastic gradients for a delay histogram, drawing each group
/// `(tau, count)` at `lookup(tau)` in the order given.
pub fn aggregate_gradient<'a>(
    problem: &dyn Problem,
    hist: &[(usize, u64)],
    mut lookup: impl FnMut(usize) -> &'a [f64],
    noise: &mut SimRng,
) -> Result<Vec<f64>> {
    let mut g = vec![0.0; problem.dim()];
    for &(tau, count) in hist {
        let part = problem.stochastic_gradient_sum(lookup(tau), count, noise)?;
        axpy(1.0, &part, &mut g);
    }
    Ok(g)
}

/// `x - scale * g`, halved up to [`MAX_SHRINKS`] times while infeasible.
/// Returns the accepted point (possibly `x` itself) and the rejected proposals.
pub fn feasible_step(problem: &dyn Problem, x: &[f64], g: &[f64], scale: f64) -> (Vec<f64>, u64) {
    let mut s = scale;
    let mut rejected = 0;
    for _ in 0..=MAX_SHRINKS {
        let mut y = x.to_vec();
        axpy(-s, g, &mut y);
        if problem.is_feasible(&y) {
            return (y, rejected);
        }
        rejected += 1;
        s *= 0.5;
    }
    (x.to_vec(), rejected)
}

enum Clock {
    Counter(f64),
    Pool(WorkerPool),
}

/// Executes `config` on `problem`.
///
/// Unless `allow_inadmissible` is set, configurations whose step schedule
/// violates the cap implied by the delay model are refused with
/// [`Error::Inadmissible`]. System delays skip that check.
pub fn run(problem: &dyn Problem, config: &RunConfig) -> Result<RunTrace> {
    config.validate()?;
    let constants = problem.constants();
    let m = config.batch.base();
    let admissibility = config.admissibility(constants.lipschitz)?;
    if let Some(v) = &admissibility {
        if !v.admissible && !config.allow_inadmissible {
            return Err(Error::Inadmissible(v.reason.clone()));
        }
    }

    let analysis = config.analysis_model();
    let mut tracker = if config.record_lyapunov && !analysis.is_system() {
        let c = compute_c_sequence(
            &analysis,
            config.effective_step().sup(),
            m,
            constants.lipschitz,
            config.analysis_horizon,
        )?;
        c.c1_finite
            .then(|| LyapunovTracker::new(c, constants.optimum_value))
    } else {
        None
    };

    let mut delay_rng = stream(config.seed, streams::DELAYS);
    let mut noise_rng = stream(config.seed, streams::NOISE);
    let mut clock = match &config.delay {
        DelayModel::System { workers, service } => Clock::Pool(WorkerPool::new(
            *workers,
            service.clone(),
            stream(config.seed, streams::WORKERS),
            config.exact_events,
        )),
        _ => Clock::Counter(0.0),
    };

    let x0 = problem.start_point();
    let mut history = History::new(x0.clone(), config.history_capacity);
    let mut iterates = config.record_iterates.then(|| vec![x0.clone()]);
    let mut delay_log = config.record_delays.then(Vec::new);
    let mut rows = Vec::with_capacity(config.iterations + 1);
    let f0 = problem.objective(&x0)?;
    let g0 = norm_sq(&problem.gradient(&x0)?);
    rows.push(TraceRow {
        k: 0,
        gamma: f64::NAN,
        batch: 0,
        grad_norm_sq: g0,
        objective: f0,
        lyapunov: tracker.as_mut().map_or(f64::NAN, |t| t.start(f0).value),
        max_delay: 0,
        mean_delay: 0.0,
        vtime: 0.0,
        rejections: 0,
    });

    let mut rejections = 0u64;
    let mut overall_max_delay = 0usize;
    for k in 1..=config.iterations {
        let gamma = config.step.step_at(k);
        let n_k = config.multiplier(k);
        let count = n_k * m as u64;
        let divisor = n_k as f64 * if config.average { m as f64 } else { 1.0 };

        let (hist, vtime) = match (&mut clock, config.algorithm) {
            (Clock::Counter(t), Algorithm::Sync) => {
                *t += 1.0;
                (vec![(0, count)], *t)
            }
            (Clock::Counter(t), _) => {
                *t += n_k as f64;
                (
                    config.delay.sample_delay_histogram(k, count, &mut delay_rng)?,
                    *t,
                )
            }
            (Clock::Pool(pool), Algorithm::Sync) => {
                pool.sync_round(count);
                (vec![(0, count)], pool.clock())
            }
            (Clock::Pool(pool), _) => {
                let by_version = pool.collect(k - 1, count);
                let hist = by_version
                    .iter()
                    .rev()
                    .map(|(v, c)| (k - 1 - v, *c))
                    .collect::<Vec<_>>();
                (hist, pool.clock())
            }
        };

        let x_prev = history.latest().to_vec();
        let g = aggregate_gradient(problem, &hist, |tau| history.get(k - 1 - tau), &mut noise_rng)?;
        let (x_new, rejected) = feasible_step(problem, &x_prev, &g, gamma / divisor);
        rejections += rejected;
        if let Clock::Pool(pool) = &mut clock {
            if config.algorithm != Algorithm::Sync {
                pool.after_update(k);
            }
        }

        let objective = problem.objective(&x_new)?;
        let grad_norm_sq = norm_sq(&problem.gradient(&x_new)?);
        let lyapunov = tracker
            .as_mut()
            .map_or(f64::NAN, |t| t.push(dist_sq(&x_new, &x_prev), objective).value);
        let max_delay = hist.iter().map(|(d, _)| *d).max().unwrap_or(0);
        let mean_delay =
            hist.iter().map(|(d, c)| *d as f64 * *c as f64).sum::<f64>() / count as f64;
        overall_max_delay = overall_max_delay.max(max_delay);
        rows.push(TraceRow {
            k,
            gamma,
            batch: count,
            grad_norm_sq,
            objective,
            lyapunov,
            max_delay,
            mean_delay,
            vtime,
            rejections,
        });
        if let Some(it) = iterates.as_mut() {
            it.push(x_new.clone());
        }
        if let Some(log) = delay_log.as_mut() {
            log.push(hist);
        }
        history.push(x_new);
    }

    let last = rows.last().expect("at least one row");
    let summary = RunSummary {
        problem: problem.name().to_string(),
        algorithm: config.algorithm.name().to_string(),
        seed: config.seed,
        iterations: config.iterations,
        dim: problem.dim(),
        lipschitz: constants.lipschitz,
        sigma2: constants.sigma2,
        constants_exact: constants.exact,
        initial_grad_norm_sq: g0,
        final_grad_norm_sq: last.grad_norm_sq,
        final_objective: last.objective,
        final_vtime: last.vtime,
        rejections,
        history_overflows: history.overflows(),
        max_delay: overall_max_delay,
        admissibility,
        lyapunov_caveat: tracker.as_ref().is_some_and(|t| t.caveat()),
    };
    Ok(RunTrace {
        rows,
        summary,
        final_point: history.latest().to_vec(),
        iterates,
        delays: delay_log,
    })
}

/// Recomputes the iterates of a run from its recorded delay histograms and
/// the run's gradient-noise stream.
pub fn replay(
    problem: &dyn Problem,
    config: &RunConfig,
    delays: &[Vec<(usize, u64)>],
) -> Result<Vec<Vec<f64>>> {
    let m = config.batch.base();
    let mut noise_rng = stream(config.seed, streams::NOISE);
    let mut xs = vec![problem.start_point()];
    for (i, hist) in delays.iter().enumerate() {
        let k = i + 1;
        let n_k = config.multiplier(k);
        let divisor = n_k as f64 * if config.average { m as f64 } else { 1.0 };
        let g = aggregate_gradient(problem, hist, |tau| &xs[k - 1 - tau], &mut noise_rng)?;
        let (x, _) = feasible_step(problem, &xs[k - 1], &g, config.step.step_at(k) / divisor);
        xs.push(x);
    }
    Ok(xs)
}
