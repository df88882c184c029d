//! Gradient staleness models.
//!
//! A model either prescribes a delay distribution per iteration (bounded,
//! Poisson, growing-uniform, series-bounded) or leaves delays to emerge from
//! a simulated worker pool (`System`). Distribution models clip mass beyond
//! the current iteration so a stale read never predates `x_0`.

mod cseq;
mod series;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Discrete, DiscreteCDF, Poisson as PoissonPmf};

pub use cseq::{
    admissibility_check, compute_c_sequence, max_admissible_constant_step, step_size_cap,
    CSequence, Verdict, TAIL_TOLERANCE,
};
pub use series::Series;

use crate::rng::binomial;
use crate::{Error, Result, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayModel {
    /// Delays on `0..=max_delay`, uniform unless `weights` (one per delay) is given.
    Bounded {
        max_delay: usize,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// i.i.d. `Poisson(rate)` delays.
    Poisson { rate: f64 },
    /// `P(tau_k = i) = 1/k` for `i` in `1..=k`.
    GrowingUniform,
    /// Delays whose probabilities are dominated by a fixed series.
    SeriesBounded { series: Series },
    /// Delays emerge from `workers` simulated workers.
    System {
        workers: usize,
        #[serde(default)]
        service: ServiceModel,
    },
}

/// Per-gradient compute time of a simulated worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceModel {
    /// `t ~ Exp(lambda_w)` with `lambda_w ~ Gamma(shape, rate)`.
    ///
    /// `lambda_w` is drawn once per worker unless `redraw` is set, in which
    /// case every task draws a fresh rate.
    GammaExp {
        #[serde(default = "default_shape")]
        shape: f64,
        #[serde(default = "default_rate")]
        rate: f64,
        #[serde(default)]
        redraw: bool,
    },
    /// Deterministic service time per worker.
    Fixed { times: Vec<f64> },
}

fn default_shape() -> f64 {
    2.0
}

fn default_rate() -> f64 {
    1.0
}

impl Default for ServiceModel {
    fn default() -> Self {
        ServiceModel::GammaExp {
            shape: 2.0,
            rate: 1.0,
            redraw: false,
        }
    }
}

/// Below this many draws per iteration, delays are sampled one by one.
const DIRECT_SAMPLING_LIMIT: u64 = 64;

impl DelayModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DelayModel::Bounded { max_delay, weights } => {
                if let Some(w) = weights {
                    if w.len() != max_delay + 1 {
                        return Err(Error::invalid(format!(
                            "bounded weights need {} entries, got {}",
                            max_delay + 1,
                            w.len()
                        )));
                    }
                    if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0
                    {
                        return Err(Error::invalid("bounded weights must be non-negative and not all zero"));
                    }
                }
                Ok(())
            }
            DelayModel::Poisson { rate } => {
                if rate.is_finite() && *rate > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("poisson rate must be positive, got {rate}")))
                }
            }
            DelayModel::GrowingUniform => Ok(()),
            DelayModel::SeriesBounded { series } => series.validate(),
            DelayModel::System { workers, service } => {
                if *workers == 0 {
                    return Err(Error::invalid("system delay needs at least one worker"));
                }
                match service {
                    ServiceModel::GammaExp { shape, rate, .. } => {
                        if !(*shape > 0.0 && *rate > 0.0) {
                            return Err(Error::invalid("gamma shape and rate must be positive"));
                        }
                    }
                    ServiceModel::Fixed { times } => {
                        if times.len() != *workers {
                            return Err(Error::invalid(format!(
                                "fixed service needs {workers} times, got {}",
                                times.len()
                            )));
                        }
                        if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                            return Err(Error::invalid("fixed service times must be positive"));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_system(&self) -> bool {
        matches!(self, DelayModel::System { .. })
    }

    /// Unclipped probability of delay `i` for models whose law does not depend on `k`.
    fn base_pmf(&self, i: usize) -> f64 {
        match self {
            DelayModel::Bounded { max_delay, weights } => {
                if i > *max_delay {
                    return 0.0;
                }
                match weights {
                    None => 1.0 / (*max_delay as f64 + 1.0),
                    Some(w) => w[i] / w.iter().sum::<f64>(),
                }
            }
            DelayModel::Poisson { rate } => poisson(*rate).pmf(i as u64),
            DelayModel::SeriesBounded { series } => series.sampling_pmf(i),
            DelayModel::GrowingUniform | DelayModel::System { .. } => {
                unreachable!("no k-independent law")
            }
        }
    }

    /// `P(tau >= i)` under the unclipped law.
    fn base_survival(&self, i: usize) -> f64 {
        if i == 0 {
            return 1.0;
        }
        match self {
            DelayModel::Poisson { rate } => poisson(*rate).sf(i as u64 - 1),
            _ => (1.0 - (0..i).map(|j| self.base_pmf(j)).sum::<f64>()).max(0.0),
        }
    }

    /// `P(tau_k = i)`, with the mass beyond `k` moved onto `k`.
    pub fn pmf(&self, k: usize, i: usize) -> Result<f64> {
        match self {
            DelayModel::System { .. } => Err(Error::AnalysisUnavailable),
            DelayModel::GrowingUniform => Ok(if k == 0 {
                if i == 0 {
                    1.0
                } else {
                    0.0
                }
            } else if (1..=k).contains(&i) {
                1.0 / k as f64
            } else {
                0.0
            }),
            _ => Ok(if i < k {
                self.base_pmf(i)
            } else if i == k {
                self.base_survival(k)
            } else {
                0.0
            }),
        }
    }

    /// One unclipped draw.
    fn draw(&self, k: usize, rng: &mut SimRng) -> usize {
        match self {
            DelayModel::Bounded { max_delay, weights } => match weights {
                None => rng.random_range(0..=*max_delay),
                Some(w) => {
                    let total: f64 = w.iter().sum();
                    let mut u = rng.random::<f64>() * total;
                    for (i, wi) in w.iter().enumerate() {
                        if u < *wi {
                            return i;
                        }
                        u -= wi;
                    }
                    w.iter().rposition(|v| *v > 0.0).unwrap_or(0)
                }
            },
            DelayModel::Poisson { rate } => {
                let y: f64 = Poisson::new(*rate).expect("validated").sample(rng);
                y as usize
            }
            DelayModel::GrowingUniform => rng.random_range(1..=k.max(1)),
            DelayModel::SeriesBounded { series } => series.sample(rng),
            DelayModel::System { .. } => unreachable!("checked by callers"),
        }
    }

    /// `m` delays for iteration `k`, each clipped to `k - 1`.
    ///
    /// Iteration 1 always sees zero delay.
    pub fn sample_delays(&self, k: usize, m: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
        if self.is_system() {
            return Err(Error::AnalysisUnavailable);
        }
        if k == 0 {
            return Err(Error::invalid("iterations are numbered from 1"));
        }
        let cap = k - 1;
        Ok((0..m)
            .map(|_| {
                if cap == 0 {
                    0
                } else {
                    self.draw(k, rng).min(cap)
                }
            })
            .collect())
    }

    /// Delay counts for `count` draws at iteration `k`, as `(delay, count)`
    /// pairs in increasing delay order with zero counts omitted.
    ///
    /// Equal in distribution to tallying [`sample_delays`](Self::sample_delays).
    /// Large batches go through a multinomial built from conditional binomials,
    /// which stops as soon as every draw is placed.
    pub fn sample_delay_histogram(
        &self,
        k: usize,
        count: u64,
        rng: &mut SimRng,
    ) -> Result<Vec<(usize, u64)>> {
        if self.is_system() {
            return Err(Error::AnalysisUnavailable);
        }
        if k == 0 {
            return Err(Error::invalid("iterations are numbered from 1"));
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        let cap = k - 1;
        if cap == 0 {
            return Ok(vec![(0, count)]);
        }
        if count <= DIRECT_SAMPLING_LIMIT {
            let mut delays = self.sample_delays(k, count as usize, rng)?;
            delays.sort_unstable();
            let mut out: Vec<(usize, u64)> = Vec::new();
            for d in delays {
                match out.last_mut() {
                    Some((last, c)) if *last == d => *c += 1,
                    _ => out.push((d, 1)),
                }
            }
            return Ok(out);
        }

        let mut out = Vec::new();
        let mut remaining = count;
        let mut mass_left = 1.0;
        for i in 0..=cap {
            if remaining == 0 {
                break;
            }
            let c = if i == cap || mass_left <= 0.0 {
                remaining
            } else {
                let p = match self {
                    DelayModel::GrowingUniform => {
                        if i == 0 {
                            0.0
                        } else {
                            1.0 / k as f64
                        }
                    }
                    _ => self.base_pmf(i),
                };
                let c = binomial(remaining, (p / mass_left).clamp(0.0, 1.0), rng);
                mass_left -= p;
                c
            };
            if c > 0 {
                out.push((i, c));
                remaining -= c;
            }
        }
        Ok(out)
    }

    /// Series `w_i`, `i >= 1`, whose weighted moments define the c-sequence.
    ///
    /// For i.i.d. models this is the delay law itself; for growing-uniform
    /// delays it is `1/i`, the pointwise supremum over `k`.
    pub(crate) fn dominating_weight(&self, i: usize) -> f64 {
        match self {
            DelayModel::GrowingUniform => 1.0 / i as f64,
            DelayModel::SeriesBounded { series } => series.weight(i),
            _ => self.base_pmf(i),
        }
    }
}

impl DelayModel {
    /// `w_0..=w_n` for [`dominating_weight`](Self::dominating_weight); `w_0` is unused and zero.
    pub(crate) fn dominating_weights(&self, n: usize) -> Vec<f64> {
        let mut w = match self {
            DelayModel::SeriesBounded { series } => series.weights(n),
            _ => (0..=n)
                .map(|i| if i == 0 { 0.0 } else { self.dominating_weight(i) })
                .collect(),
        };
        w[0] = 0.0;
        w
    }
}

fn poisson(rate: f64) -> PoissonPmf {
    PoissonPmf::new(rate).expect("validated rate")
}
