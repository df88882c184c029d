//! Dominating series `{a_i}` for series-bounded delays.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Weibull, Zeta};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma, gamma_ur};

use crate::{Error, Result, SimRng};

/// A non-negative series `a_i >= P(tau_k = i)` for every `k`.
///
/// Indexing starts at `i = 1`; mass at delay 0 never contributes to the
/// weight sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Series {
    /// `a_1, a_2, ...` listed explicitly; zero afterwards.
    Explicit { weights: Vec<f64> },
    /// `a_i = 1` for `1 <= i <= max_delay`.
    Indicator { max_delay: usize },
    /// `a_i = P(floor(Y) = i)` with `ln Y ~ N(mu, sigma^2)`.
    DiscreteLogNormal { mu: f64, sigma: f64 },
    /// `a_i = P(floor(Y) = i)` with `Y ~ Weibull(shape, scale)`.
    DiscreteWeibull { shape: f64, scale: f64 },
    /// `a_i = i^(-exponent) / zeta(exponent)` for `i >= 1`.
    PowerLaw { exponent: f64 },
}

/// Sums over `i > h` of `i a_i` and `i^2 a_i`, exact or upper bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Tails {
    pub first: f64,
    pub second: f64,
    pub exact: bool,
}

impl Tails {
    pub(crate) const ZERO: Tails = Tails {
        first: 0.0,
        second: 0.0,
        exact: true,
    };
}

impl Series {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Series::Explicit { weights } => {
                !weights.is_empty() && weights.iter().all(|w| w.is_finite() && *w >= 0.0)
            }
            Series::Indicator { .. } => true,
            Series::DiscreteLogNormal { mu, sigma } => mu.is_finite() && *sigma > 0.0,
            Series::DiscreteWeibull { shape, scale } => *shape > 0.0 && *scale > 0.0,
            Series::PowerLaw { exponent } => *exponent > 1.0 && exponent.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid series parameters: {self:?}")))
        }
    }

    /// Largest index with non-zero weight, if finite.
    pub fn support(&self) -> Option<usize> {
        match self {
            Series::Explicit { weights } => Some(
                weights
                    .iter()
                    .rposition(|w| *w > 0.0)
                    .map_or(0, |p| p + 1),
            ),
            Series::Indicator { max_delay } => Some(*max_delay),
            _ => None,
        }
    }

    /// Whether `sum_i i^2 a_i` converges.
    pub fn second_moment_finite(&self) -> bool {
        match self {
            Series::PowerLaw { exponent } => *exponent > 3.0,
            _ => true,
        }
    }

    /// `a_i`; for `i = 0` the mass the series leaves at zero delay.
    pub fn weight(&self, i: usize) -> f64 {
        match self {
            Series::Explicit { weights } => {
                if i == 0 {
                    0.0
                } else {
                    weights.get(i - 1).copied().unwrap_or(0.0)
                }
            }
            Series::Indicator { max_delay } => {
                if i >= 1 && i <= *max_delay {
                    1.0
                } else {
                    0.0
                }
            }
            Series::DiscreteLogNormal { mu, sigma } => {
                lognormal_survival(*mu, *sigma, i as f64)
                    - lognormal_survival(*mu, *sigma, (i + 1) as f64)
            }
            Series::DiscreteWeibull { shape, scale } => {
                weibull_survival(*shape, *scale, i as f64)
                    - weibull_survival(*shape, *scale, (i + 1) as f64)
            }
            Series::PowerLaw { exponent } => {
                if i == 0 {
                    0.0
                } else {
                    (i as f64).powf(-exponent) / zeta(*exponent)
                }
            }
        }
    }

    /// `a_0..=a_n` in one pass.
    pub(crate) fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Series::PowerLaw { exponent } => {
                let z = zeta(*exponent);
                (0..=n)
                    .map(|i| {
                        if i == 0 {
                            0.0
                        } else {
                            (i as f64).powf(-exponent) / z
                        }
                    })
                    .collect()
            }
            _ => (0..=n).map(|i| self.weight(i)).collect(),
        }
    }

    /// `sum_{i >= 1} a_i`.
    pub fn total_mass(&self) -> f64 {
        match self {
            Series::Explicit { weights } => weights.iter().sum(),
            Series::Indicator { max_delay } => *max_delay as f64,
            Series::DiscreteLogNormal { mu, sigma } => lognormal_survival(*mu, *sigma, 1.0),
            Series::DiscreteWeibull { shape, scale } => weibull_survival(*shape, *scale, 1.0),
            Series::PowerLaw { .. } => 1.0,
        }
    }

    /// Delay probability used for sampling: `a_i` normalised when the series
    /// over-counts, with any leftover mass placed at delay 0.
    pub fn sampling_pmf(&self, i: usize) -> f64 {
        let total = self.total_mass();
        let norm = total.max(1.0);
        if i == 0 {
            (1.0 - total / norm).max(0.0)
        } else {
            self.weight(i) / norm
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> usize {
        match self {
            Series::DiscreteLogNormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                to_index((mu + sigma * z).exp())
            }
            Series::DiscreteWeibull { shape, scale } => {
                to_index(Weibull::new(*scale, *shape).expect("validated").sample(rng))
            }
            Series::PowerLaw { exponent } => {
                to_index(Zeta::new(*exponent).expect("validated").sample(rng))
            }
            Series::Explicit { .. } | Series::Indicator { .. } => {
                let support = self.support().unwrap_or(0);
                let mut u: f64 = rng.random();
                for i in 1..=support {
                    let p = self.sampling_pmf(i);
                    if u < p {
                        return i;
                    }
                    u -= p;
                }
                // Leftover mass, or rounding at the top of the table.
                if self.sampling_pmf(0) > 0.0 {
                    0
                } else {
                    support
                }
            }
        }
    }

    /// Tail sums beyond `h`. Exact for finite support, upper bounds otherwise.
    pub(crate) fn tails(&self, h: usize) -> Tails {
        let t = (h + 1) as f64;
        match self {
            Series::Explicit { .. } | Series::Indicator { .. } => Tails::ZERO,
            // i^n a_i <= E[Y^n; i <= Y < i + 1], summed over i > h.
            Series::DiscreteLogNormal { mu, sigma } => Tails {
                first: lognormal_partial_moment(*mu, *sigma, 1.0, t),
                second: lognormal_partial_moment(*mu, *sigma, 2.0, t),
                exact: false,
            },
            Series::DiscreteWeibull { shape, scale } => Tails {
                first: weibull_partial_moment(*shape, *scale, 1.0, t),
                second: weibull_partial_moment(*shape, *scale, 2.0, t),
                exact: false,
            },
            // sum_{i > h} f(i) <= int_h^inf f for decreasing f.
            Series::PowerLaw { exponent } => {
                let a = *exponent;
                let z = zeta(a);
                let hf = (h.max(1)) as f64;
                let first = if a > 2.0 {
                    hf.powf(2.0 - a) / ((a - 2.0) * z)
                } else {
                    f64::INFINITY
                };
                let second = if a > 3.0 {
                    hf.powf(3.0 - a) / ((a - 3.0) * z)
                } else {
                    f64::INFINITY
                };
                Tails {
                    first,
                    second,
                    exact: false,
                }
            }
        }
    }
}

fn to_index(y: f64) -> usize {
    if y.is_finite() && y < usize::MAX as f64 {
        y.floor().max(0.0) as usize
    } else {
        usize::MAX
    }
}

fn lognormal_survival(mu: f64, sigma: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    0.5 * erfc((t.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
}

/// `E[Y^n; Y >= t]` for log-normal `Y`.
fn lognormal_partial_moment(mu: f64, sigma: f64, n: f64, t: f64) -> f64 {
    let scale = (n * mu + 0.5 * n * n * sigma * sigma).exp();
    let z = (mu + n * sigma * sigma - t.ln()) / sigma;
    scale * 0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn weibull_survival(shape: f64, scale: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    (-(t / scale).powf(shape)).exp()
}

/// `E[Y^n; Y >= t]` for Weibull `Y`.
fn weibull_partial_moment(shape: f64, scale: f64, n: f64, t: f64) -> f64 {
    let a = 1.0 + n / shape;
    let x = (t / scale).powf(shape);
    scale.powf(n) * gamma(a) * gamma_ur(a, x)
}

/// Riemann zeta for real `s > 1`, by direct summation plus an
/// Euler-Maclaurin remainder.
pub(crate) fn zeta(s: f64) -> f64 {
    const N: usize = 1000;
    let head: f64 = (1..N).map(|i| (i as f64).powf(-s)).sum();
    let n = N as f64;
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0
}
