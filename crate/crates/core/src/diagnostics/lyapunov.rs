//! `zeta^k = f(x_k) - f(x*) + sum_j c_j ||x_{k+1-j} - x_{k-j}||^2`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::delay::CSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovValue {
    pub value: f64,
    /// `f(x_k) - f(x*)`.
    pub optimality: f64,
    /// `sum_j c_j ||x_{k+1-j} - x_{k-j}||^2`.
    pub asynchronicity: f64,
    /// Some weighted terms were unavailable (evicted history or short horizon).
    pub truncated: bool,
}

/// `zeta^k` from squared step norms, most recent first:
/// `step_norms[j - 1] = ||x_{k+1-j} - x_{k-j}||^2`.
///
/// `steps_taken` is `k`; when it exceeds the supplied window or the horizon of
/// `c`, the missing terms are dropped and the result is flagged.
pub fn lyapunov_value(
    f_k: f64,
    f_star: f64,
    step_norms: &[f64],
    steps_taken: usize,
    c: &CSequence,
) -> LyapunovValue {
    let used = step_norms.len().min(c.horizon());
    let asynchronicity = step_norms[..used]
        .iter()
        .zip(&c.c)
        .map(|(s, cj)| if *cj == 0.0 { 0.0 } else { cj * s })
        .sum::<f64>();
    let optimality = f_k - f_star;
    LyapunovValue {
        value: optimality + asynchronicity,
        optimality,
        asynchronicity,
        truncated: steps_taken > used,
    }
}

/// Running `zeta^k` along a trajectory.
#[derive(Debug, Clone)]
pub struct LyapunovTracker {
    c: CSequence,
    f_star: Option<f64>,
    running_min: f64,
    window: VecDeque<f64>,
    steps: usize,
}

impl LyapunovTracker {
    /// With `f_star = None` the running minimum of observed objective values
    /// stands in for `f(x*)`; see [`caveat`](Self::caveat).
    pub fn new(c: CSequence, f_star: Option<f64>) -> Self {
        Self {
            c,
            f_star,
            running_min: f64::INFINITY,
            window: VecDeque::new(),
            steps: 0,
        }
    }

    /// True when `f(x*)` is estimated rather than known, so values may go negative.
    pub fn caveat(&self) -> bool {
        self.f_star.is_none()
    }

    /// Value at `x_0`.
    pub fn start(&mut self, f0: f64) -> LyapunovValue {
        self.running_min = self.running_min.min(f0);
        self.value(f0)
    }

    /// Records the step `||x_{k} - x_{k-1}||^2` and returns `zeta^k`.
    pub fn push(&mut self, step_norm_sq: f64, f_k: f64) -> LyapunovValue {
        self.window.push_front(step_norm_sq);
        self.window.truncate(self.c.horizon());
        self.steps += 1;
        self.running_min = self.running_min.min(f_k);
        self.value(f_k)
    }

    fn value(&self, f_k: f64) -> LyapunovValue {
        let f_star = self.f_star.unwrap_or(self.running_min);
        let (a, b) = self.window.as_slices();
        let norms: Vec<f64> = a.iter().chain(b).copied().collect();
        lyapunov_value(f_k, f_star, &norms, self.steps, &self.c)
    }
}
