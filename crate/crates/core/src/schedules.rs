//! Step-size and batch-size schedules, and the conditions under which the
//! convergence guarantees apply to them.
//!
//! Iterations are numbered from 1. Summability questions are answered from
//! the schedule's form rather than by summing numerically, because they are
//! statements about the infinite tail.

use serde::{Deserialize, Serialize};

use crate::delay::step_size_cap;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    Constant {
        gamma0: f64,
        #[serde(default)]
        cap: Option<f64>,
    },
    /// `gamma0 / j` with `j = ceil(k / decay_every)`.
    InvK {
        gamma0: f64,
        #[serde(default = "one")]
        decay_every: usize,
        #[serde(default)]
        cap: Option<f64>,
    },
    /// `gamma0 / (sqrt(j) ln j)`, held at `gamma0` while that factor exceeds 1
    /// (that is, for `j <= 2`).
    InvSqrtKLog {
        gamma0: f64,
        #[serde(default = "one")]
        decay_every: usize,
        #[serde(default)]
        cap: Option<f64>,
    },
    /// `gamma0 / (sqrt(j) ln(j + 1))`.
    InvSqrtKLog1p {
        gamma0: f64,
        #[serde(default = "one")]
        decay_every: usize,
        #[serde(default)]
        cap: Option<f64>,
    },
}

fn one() -> usize {
    1
}

impl StepSchedule {
    pub fn constant(gamma0: f64) -> Self {
        StepSchedule::Constant { gamma0, cap: None }
    }

    pub fn validate(&self) -> Result<()> {
        let (g, every, cap) = self.parts();
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::invalid(format!("gamma0 must be positive, got {g}")));
        }
        if every == 0 {
            return Err(Error::invalid("decay_every must be at least 1"));
        }
        if let Some(c) = cap {
            if !(c > 0.0) {
                return Err(Error::invalid(format!("cap must be positive, got {c}")));
            }
        }
        Ok(())
    }

    fn parts(&self) -> (f64, usize, Option<f64>) {
        match *self {
            StepSchedule::Constant { gamma0, cap } => (gamma0, 1, cap),
            StepSchedule::InvK {
                gamma0,
                decay_every,
                cap,
            }
            | StepSchedule::InvSqrtKLog {
                gamma0,
                decay_every,
                cap,
            }
            | StepSchedule::InvSqrtKLog1p {
                gamma0,
                decay_every,
                cap,
            } => (gamma0, decay_every, cap),
        }
    }

    fn parts_mut(&mut self) -> (&mut f64, &mut Option<f64>) {
        match self {
            StepSchedule::Constant { gamma0, cap }
            | StepSchedule::InvK { gamma0, cap, .. }
            | StepSchedule::InvSqrtKLog { gamma0, cap, .. }
            | StepSchedule::InvSqrtKLog1p { gamma0, cap, .. } => (gamma0, cap),
        }
    }

    pub fn cap(&self) -> Option<f64> {
        self.parts().2
    }

    /// `gamma_k` for `k >= 1` (`k = 0` is treated as 1).
    pub fn step_at(&self, k: usize) -> f64 {
        let (g, every, cap) = self.parts();
        let j = (k.max(1) + every - 1) / every;
        let jf = j as f64;
        let raw = match self {
            StepSchedule::Constant { .. } => g,
            StepSchedule::InvK { .. } => g / jf,
            StepSchedule::InvSqrtKLog { .. } => {
                let d = jf.sqrt() * jf.ln();
                if d > 1.0 {
                    g / d
                } else {
                    g
                }
            }
            StepSchedule::InvSqrtKLog1p { .. } => g / (jf.sqrt() * (jf + 1.0).ln()),
        };
        match cap {
            Some(c) => raw.min(c),
            None => raw,
        }
    }

    /// `sup_k gamma_k`, attained at `k = 1` since every schedule is non-increasing.
    pub fn sup(&self) -> f64 {
        self.step_at(1)
    }

    /// Same schedule clamped to at most `cap`; clamping twice equals clamping
    /// once with the smaller cap.
    pub fn clamped(&self, cap: f64) -> Self {
        let mut s = self.clone();
        let (_, c) = s.parts_mut();
        *c = Some(c.map_or(cap, |old| old.min(cap)));
        s
    }

    /// Every step multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        let (g, c) = s.parts_mut();
        *g *= factor;
        if let Some(c) = c {
            *c *= factor;
        }
        s
    }

    /// Whether `sum_k gamma_k` diverges.
    pub fn sum_diverges(&self) -> bool {
        true
    }

    /// Whether `sum_k gamma_k^2` converges.
    pub fn square_summable(&self) -> bool {
        // 1/k^2 and 1/(k log^2 k) are summable; constants are not.
        !matches!(self, StepSchedule::Constant { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BatchSchedule {
    /// `M` gradients per update.
    Fixed { size: usize },
    /// `n_k * base` gradients per update.
    Increasing { base: usize, growth: Growth },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Growth {
    /// `n_k = ceil(coefficient * j^exponent)` with `j = ceil(k / change_every)`.
    Power {
        #[serde(default = "unit_coefficient")]
        coefficient: f64,
        #[serde(default = "square")]
        exponent: f64,
        #[serde(default = "one")]
        change_every: usize,
    },
    /// `n_k = multipliers[k - 1]`, the last entry repeating.
    Explicit { multipliers: Vec<u64> },
}

fn unit_coefficient() -> f64 {
    1.0
}

fn square() -> f64 {
    2.0
}

impl BatchSchedule {
    pub fn fixed(size: usize) -> Self {
        BatchSchedule::Fixed { size }
    }

    /// `n_k = k^2` on top of `base`.
    pub fn quadratic(base: usize, change_every: usize) -> Self {
        BatchSchedule::Increasing {
            base,
            growth: Growth::Power {
                coefficient: 1.0,
                exponent: 2.0,
                change_every,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BatchSchedule::Fixed { size } => {
                if *size == 0 {
                    return Err(Error::invalid("batch size must be at least 1"));
                }
            }
            BatchSchedule::Increasing { base, growth } => {
                if *base == 0 {
                    return Err(Error::invalid("batch base must be at least 1"));
                }
                match growth {
                    Growth::Power {
                        coefficient,
                        exponent,
                        change_every,
                    } => {
                        if !(*coefficient > 0.0 && coefficient.is_finite()) {
                            return Err(Error::invalid("growth coefficient must be positive"));
                        }
                        if !(*exponent >= 0.0 && exponent.is_finite()) {
                            return Err(Error::invalid("growth exponent must be non-negative"));
                        }
                        if *change_every == 0 {
                            return Err(Error::invalid("change_every must be at least 1"));
                        }
                    }
                    Growth::Explicit { multipliers } => {
                        if multipliers.is_empty()
                            || multipliers[0] == 0
                            || multipliers.windows(2).any(|w| w[1] < w[0])
                        {
                            return Err(Error::invalid(
                                "multipliers must be non-empty, start at >= 1 and never decrease",
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `M`, the gradients per unit of batch.
    pub fn base(&self) -> usize {
        match self {
            BatchSchedule::Fixed { size } => *size,
            BatchSchedule::Increasing { base, .. } => *base,
        }
    }

    /// `n_k`.
    pub fn multiplier(&self, k: usize) -> u64 {
        let k = k.max(1);
        match self {
            BatchSchedule::Fixed { .. } => 1,
            BatchSchedule::Increasing { growth, .. } => match growth {
                Growth::Power {
                    coefficient,
                    exponent,
                    change_every,
                } => {
                    let j = ((k + change_every - 1) / change_every) as f64;
                    (coefficient * j.powf(*exponent)).ceil().max(1.0) as u64
                }
                Growth::Explicit { multipliers } => {
                    multipliers[(k - 1).min(multipliers.len() - 1)]
                }
            },
        }
    }

    /// `n_k * M`, the gradients collected at update `k`.
    pub fn batch_at(&self, k: usize) -> u64 {
        self.multiplier(k) * self.base() as u64
    }

    /// Whether `sum_k 1 / n_k` converges.
    pub fn reciprocal_summable(&self) -> bool {
        match self {
            BatchSchedule::Increasing {
                growth: Growth::Power { exponent, .. },
                ..
            } => *exponent > 1.0,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub cap: f64,
    /// `gamma_k <= cap` for every `k` in the horizon.
    pub within_cap: bool,
    /// First iteration violating the cap.
    pub first_violation: Option<usize>,
    pub sum_diverges: bool,
    pub square_summable: bool,
    pub passes: bool,
}

/// Step-size conditions for convergence of Async-SGD: cap compliance,
/// `sum gamma_k = inf` and `sum gamma_k^2 < inf`.
pub fn validate_theorem1(
    schedule: &StepSchedule,
    c1: f64,
    m: usize,
    l: f64,
    horizon: usize,
) -> Theorem1Report {
    let cap = step_size_cap(c1, m, l);
    let ok = |k: usize| schedule.step_at(k) <= cap * (1.0 + 1e-12);
    // Steps never increase, so a violation anywhere implies one at k = 1.
    let first_violation = if horizon >= 1 && !ok(1) { Some(1) } else { None };
    let within_cap = c1.is_finite() && first_violation.is_none();
    let sum_diverges = schedule.sum_diverges();
    let square_summable = schedule.square_summable();
    Theorem1Report {
        cap,
        within_cap,
        first_violation,
        sum_diverges,
        square_summable,
        passes: within_cap && sum_diverges && square_summable,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub cap: f64,
    pub reciprocal_summable: bool,
    pub constant_step: bool,
    pub within_cap: bool,
    pub passes: bool,
}

/// Conditions for Async-SGDI: `sum 1/n_k < inf` and a constant step within the cap.
pub fn validate_theorem2(
    batch: &BatchSchedule,
    schedule: &StepSchedule,
    c1: f64,
    m: usize,
    l: f64,
) -> Theorem2Report {
    let cap = step_size_cap(c1, m, l);
    let reciprocal_summable = batch.reciprocal_summable();
    let constant_step = matches!(schedule, StepSchedule::Constant { .. });
    let within_cap = c1.is_finite() && schedule.sup() <= cap * (1.0 + 1e-12);
    Theorem2Report {
        cap,
        reciprocal_summable,
        constant_step,
        within_cap,
        passes: reciprocal_summable && constant_step && within_cap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inv_k(g: f64, every: usize) -> StepSchedule {
        StepSchedule::InvK {
            gamma0: g,
            decay_every: every,
            cap: None,
        }
    }

    fn inv_sqrt_log(g: f64, every: usize) -> StepSchedule {
        StepSchedule::InvSqrtKLog {
            gamma0: g,
            decay_every: every,
            cap: None,
        }
    }

    #[test]
    fn step_values() {
        assert!((inv_k(1e-6, 10).step_at(15) - 0.5e-6).abs() < 1e-20);
        let expected = 1e-6 / (3f64.sqrt() * 3f64.ln());
        assert!((inv_sqrt_log(1e-6, 10).step_at(25) - expected).abs() < 1e-20);
        assert_eq!(StepSchedule::constant(1e-6).step_at(12345), 1e-6);
        assert_eq!(inv_sqrt_log(1e-6, 10).step_at(1), 1e-6);
        assert_eq!(inv_sqrt_log(1e-6, 10).step_at(20), 1e-6);
        let one_p = StepSchedule::InvSqrtKLog1p {
            gamma0: 0.1,
            decay_every: 1,
            cap: None,
        };
        assert!((one_p.step_at(4) - 0.1 / (2.0 * 5f64.ln())).abs() < 1e-16);
    }

    #[test]
    fn step_condition_checks() {
        let cap = step_size_cap(2.5, 100, 1.0);
        let r = validate_theorem1(&inv_sqrt_log(1.0, 1).clamped(cap), 2.5, 100, 1.0, 10_000);
        assert!(r.passes);
        let r = validate_theorem1(&StepSchedule::constant(cap / 2.0), 2.5, 100, 1.0, 10_000);
        assert!(r.within_cap && !r.square_summable && !r.passes);
        let r = validate_theorem1(&inv_k(2.0 * cap, 1), 2.5, 100, 1.0, 10_000);
        assert!(!r.within_cap && r.first_violation == Some(1) && !r.passes);
        let r = validate_theorem1(&inv_k(cap, 1), 2.5, 100, 1.0, 10_000);
        assert!(r.passes);
    }

    #[test]
    fn batch_condition_checks() {
        let gamma = StepSchedule::constant(1e-6);
        assert!(validate_theorem2(&BatchSchedule::quadratic(100, 100), &gamma, 2.5, 100, 1.0).passes);
        let linear = BatchSchedule::Increasing {
            base: 100,
            growth: Growth::Power {
                coefficient: 1.0,
                exponent: 1.0,
                change_every: 1,
            },
        };
        let r = validate_theorem2(&linear, &gamma, 2.5, 100, 1.0);
        assert!(!r.reciprocal_summable && !r.passes);
        assert!(!validate_theorem2(&BatchSchedule::fixed(100), &gamma, 2.5, 100, 1.0).passes);
        assert!(
            !validate_theorem2(&BatchSchedule::quadratic(100, 1), &inv_k(1e-6, 1), 2.5, 100, 1.0)
                .passes
        );
    }

    #[test]
    fn quadratic_batches() {
        let b = BatchSchedule::quadratic(100, 100);
        let sizes: Vec<u64> = [1, 100, 101, 200, 201, 301].iter().map(|k| b.batch_at(*k)).collect();
        assert_eq!(sizes, vec![100, 100, 400, 400, 900, 1600]);
        let e = BatchSchedule::Increasing {
            base: 2,
            growth: Growth::Explicit {
                multipliers: vec![1, 3],
            },
        };
        assert_eq!([e.batch_at(1), e.batch_at(2), e.batch_at(9)], [2, 6, 6]);
    }

    #[test]
    fn batch_validation() {
        assert!(BatchSchedule::fixed(0).validate().is_err());
        let bad = BatchSchedule::Increasing {
            base: 1,
            growth: Growth::Explicit {
                multipliers: vec![2, 1],
            },
        };
        assert!(bad.validate().is_err());
    }

    fn arb_schedule() -> impl Strategy<Value = StepSchedule> {
        (0u8..4, 1e-8f64..10.0, 1usize..60, proptest::option::of(1e-8f64..10.0)).prop_map(
            |(tag, gamma0, decay_every, cap)| match tag {
                0 => StepSchedule::Constant { gamma0, cap },
                1 => StepSchedule::InvK {
                    gamma0,
                    decay_every,
                    cap,
                },
                2 => StepSchedule::InvSqrtKLog {
                    gamma0,
                    decay_every,
                    cap,
                },
                _ => StepSchedule::InvSqrtKLog1p {
                    gamma0,
                    decay_every,
                    cap,
                },
            },
        )
    }

    proptest! {
        #[test]
        fn steps_positive_and_non_increasing(s in arb_schedule(), k in 1usize..100_000) {
            let a = s.step_at(k);
            let b = s.step_at(k + 1);
            prop_assert!(a > 0.0 && b > 0.0);
            prop_assert!(b <= a);
            if let Some(c) = s.cap() {
                prop_assert!(a <= c);
            }
        }

        #[test]
        fn clamping_is_idempotent(s in arb_schedule(), cap in 1e-8f64..10.0, k in 1usize..10_000) {
            let once = s.clamped(cap);
            let twice = once.clamped(cap);
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.step_at(k) <= cap);
        }

        #[test]
        fn multipliers_non_decreasing(p in 0.0f64..3.0, every in 1usize..50, c in 0.1f64..5.0, k in 1usize..5000) {
            let b = BatchSchedule::Increasing {
                base: 3,
                growth: Growth::Power { coefficient: c, exponent: p, change_every: every },
            };
            prop_assert!(b.multiplier(1) >= 1);
            prop_assert!(b.multiplier(k + 1) >= b.multiplier(k));
        }
    }
}
