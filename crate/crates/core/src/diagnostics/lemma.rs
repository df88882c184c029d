//! Monte-Carlo check of the expected one-step Lyapunov decrease
//!
//! ```text
//! E[zeta^{k+1} | F_k] <= zeta^k - (gamma M / 2) ||grad f(x_k)||^2
//!                        + (c_1 gamma^2 M + L gamma^2 M / 2) sigma^2 / n_k
//! ```

use serde::{Deserialize, Serialize};

use super::lyapunov_value;
use crate::delay::{CSequence, DelayModel};
use crate::engine::{aggregate_gradient, feasible_step};
use crate::linalg::{dist_sq, norm_sq};
use crate::problems::Problem;
use crate::rng::{stream, streams};
use crate::{Error, Result};

/// Minimum number of replicas accepted by [`check_lemma1`].
pub const MIN_REPLICAS: usize = 100;

/// A trajectory prefix `x_0..x_k` to branch from.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenState {
    pub iterates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Config {
    pub delay: DelayModel,
    pub gamma: f64,
    /// Base batch `M`.
    pub m: usize,
    /// Batch multiplier `n_k`; 1 for plain Async-SGD.
    pub n_k: u64,
    pub n_mc: usize,
    pub seed: u64,
    pub c: CSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    /// Mean `zeta^{k+1}` plus `(gamma M / 2) ||grad f(x_k)||^2`.
    pub lhs: f64,
    /// `zeta^k` plus the noise term.
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    /// Monte-Carlo standard error of the mean `zeta^{k+1}`.
    pub std_error: f64,
    /// `lhs <= rhs + 3 * std_error`.
    pub holds: bool,
    pub zeta_k: f64,
    pub mean_zeta_next: f64,
    pub noise_term: f64,
}

/// Estimates both sides from `n_mc` independent one-step continuations of
/// `state`, each with fresh delays and gradient noise.
pub fn check_lemma1(
    problem: &dyn Problem,
    state: &FrozenState,
    config: &Lemma1Config,
) -> Result<Lemma1Report> {
    if config.n_mc < MIN_REPLICAS {
        return Err(Error::InsufficientData(format!(
            "n_mc = {} is below the minimum of {MIN_REPLICAS}",
            config.n_mc
        )));
    }
    if state.iterates.is_empty() {
        return Err(Error::InsufficientData("frozen state has no iterates".into()));
    }
    if config.n_k == 0 || config.m == 0 {
        return Err(Error::invalid("batch sizes must be positive"));
    }
    let constants = problem.constants();
    let f_star = constants.optimum_value.ok_or_else(|| {
        Error::invalid("the descent check needs a problem with known optimum value")
    })?;
    let xs = &state.iterates;
    let k = xs.len() - 1;
    let x_k = &xs[k];
    // ||x_{k+1-j} - x_{k-j}||^2 for j = 1..k
    let steps: Vec<f64> = (1..=k).map(|j| dist_sq(&xs[k + 1 - j], &xs[k - j])).collect();
    let zeta_k = lyapunov_value(problem.objective(x_k)?, f_star, &steps, k, &config.c).value;

    let mut delay_rng = stream(config.seed, streams::DELAYS);
    let mut noise_rng = stream(config.seed, streams::NOISE);
    let count = config.n_k * config.m as u64;
    let scale = config.gamma / config.n_k as f64;
    let mut next_steps = Vec::with_capacity(k + 1);
    let (mut mean, mut m2) = (0.0, 0.0);
    for r in 0..config.n_mc {
        let hist = config.delay.sample_delay_histogram(k + 1, count, &mut delay_rng)?;
        let g = aggregate_gradient(problem, &hist, |tau| &xs[k - tau], &mut noise_rng)?;
        let (x_next, _) = feasible_step(problem, x_k, &g, scale);
        next_steps.clear();
        next_steps.push(dist_sq(&x_next, x_k));
        next_steps.extend_from_slice(&steps);
        let z = lyapunov_value(problem.objective(&x_next)?, f_star, &next_steps, k + 1, &config.c)
            .value;
        // Welford update, fixed order.
        let delta = z - mean;
        mean += delta / (r + 1) as f64;
        m2 += delta * (z - mean);
    }
    let n = config.n_mc as f64;
    let std_error = (m2 / (n - 1.0)).sqrt() / n.sqrt();

    let gm = config.gamma * config.m as f64;
    let descent = gm / 2.0 * norm_sq(&problem.gradient(x_k)?);
    let noise_term = (config.c.c1() * config.gamma * gm + constants.lipschitz * config.gamma * gm / 2.0)
        * constants.sigma2
        / config.n_k as f64;
    let lhs = mean + descent;
    let rhs = zeta_k + noise_term;
    Ok(Lemma1Report {
        lhs,
        rhs,
        margin: rhs - lhs,
        std_error,
        holds: lhs <= rhs + 3.0 * std_error,
        zeta_k,
        mean_zeta_next: mean,
        noise_term,
    })
}
