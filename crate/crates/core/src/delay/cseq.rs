//! The weight sequence `{c_i}` coupling delay probabilities to the Lyapunov
//! function, and the step-size admissibility it implies.
//!
//! With `beta = gamma * M * L^2 / 2` and dominating series `w_i`, the
//! sequence is the equality solution of
//!
//! ```text
//! c_{j+1} + beta * sum_{i >= j} i * w_i = c_j,
//! ```
//!
//! i.e. `c_j = beta * sum_{i >= j} i (i - j + 1) w_i`. It is accumulated
//! backwards in one pass from a closed-form or bounded tail.

use serde::{Deserialize, Serialize};

use super::series::Tails;
use super::{DelayModel, Series};
use crate::schedules::StepSchedule;
use crate::{Error, Result};

/// Relative size of the dropped tail `sum_{i > H} i^2 w_i` against the head.
pub const TAIL_TOLERANCE: f64 = 1e-8;

const MAX_INTERNAL_HORIZON: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CSequence {
    /// `c_1..c_H`; `c[0]` is `c_1`.
    pub c: Vec<f64>,
    pub c1_finite: bool,
    pub gamma_used: f64,
    /// Upper bound on how far any `c_i` may sit above its exact value
    /// because of the tail treatment. Zero when tails are exact.
    pub truncation_error_bound: f64,
    /// Index up to which weights were summed term by term.
    pub internal_horizon: usize,
    /// `sum_{i >= 1} i^2 w_i`, the quantity whose finiteness decides `c_1`.
    pub second_moment: f64,
}

impl CSequence {
    pub fn c1(&self) -> f64 {
        self.c[0]
    }

    pub fn horizon(&self) -> usize {
        self.c.len()
    }

    /// `c_i` for `i >= 1`; zero past the horizon for finite sequences.
    pub fn get(&self, i: usize) -> f64 {
        assert!(i >= 1, "c is indexed from 1");
        self.c.get(i - 1).copied().unwrap_or(if self.c1_finite {
            0.0
        } else {
            f64::INFINITY
        })
    }
}

fn series_tails(model: &DelayModel, h: usize) -> Tails {
    match model {
        DelayModel::Bounded { max_delay, .. } => {
            if h >= *max_delay {
                Tails::ZERO
            } else {
                finite_tails(model, h, *max_delay)
            }
        }
        DelayModel::Poisson { rate } => {
            // i p_i = rate p_{i-1} gives both tails from survival functions.
            let lam = *rate;
            let at_least = |n: usize| model.base_survival(n);
            let first = lam * at_least(h);
            let second = lam * lam * at_least(h.saturating_sub(1)) + first;
            let second = if h == 0 { lam * lam + lam } else { second };
            Tails {
                first,
                second,
                exact: true,
            }
        }
        DelayModel::SeriesBounded { series } => match series.support() {
            Some(s) if h >= s => Tails::ZERO,
            Some(s) => finite_tails(model, h, s),
            None => series.tails(h),
        },
        DelayModel::GrowingUniform | DelayModel::System { .. } => unreachable!(),
    }
}

fn finite_tails(model: &DelayModel, h: usize, support: usize) -> Tails {
    let (first, second) = (h + 1..=support).fold((0.0, 0.0), |(a, b), i| {
        let w = model.dominating_weight(i);
        (a + i as f64 * w, b + (i * i) as f64 * w)
    });
    Tails {
        first,
        second,
        exact: true,
    }
}

fn finite_support(model: &DelayModel) -> Option<usize> {
    match model {
        DelayModel::Bounded { max_delay, .. } => Some(*max_delay),
        DelayModel::SeriesBounded { series } => series.support(),
        _ => None,
    }
}

fn second_moment_diverges(model: &DelayModel) -> bool {
    match model {
        DelayModel::GrowingUniform => true,
        DelayModel::SeriesBounded { series } => !series.second_moment_finite(),
        _ => false,
    }
}

/// Smallest `H` whose tail bound is within [`TAIL_TOLERANCE`] of the head sum.
fn tail_cutoff(model: &DelayModel) -> usize {
    let head_sums = |n: usize| {
        let mut acc = 0.0;
        model
            .dominating_weights(n)
            .iter()
            .enumerate()
            .map(|(i, w)| {
                acc += (i * i) as f64 * w;
                acc
            })
            .collect::<Vec<f64>>()
    };
    let ok = |head: &[f64], h: usize| {
        let t2 = series_tails(model, h).second;
        t2 <= TAIL_TOLERANCE * head[h] || t2 < 1e-300
    };
    let mut hi = 1;
    let mut head = head_sums(hi);
    while !ok(&head, hi) && hi < MAX_INTERNAL_HORIZON {
        hi = (hi * 2).min(MAX_INTERNAL_HORIZON);
        head = head_sums(hi);
    }
    let mut lo = hi / 2;
    if lo == 0 || !ok(&head, hi) {
        return hi;
    }
    // ok(hi) holds and ok(lo) fails.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(&head, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Builds `c_1..c_horizon` for step bound `gamma`, batch `m` and smoothness `l`.
pub fn compute_c_sequence(
    model: &DelayModel,
    gamma: f64,
    m: usize,
    l: f64,
    horizon: usize,
) -> Result<CSequence> {
    model.validate()?;
    if model.is_system() {
        return Err(Error::AnalysisUnavailable);
    }
    if horizon < 1 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if !(gamma > 0.0 && gamma.is_finite() && l > 0.0 && l.is_finite() && m >= 1) {
        return Err(Error::invalid(format!(
            "need gamma > 0, L > 0, M >= 1 (got gamma={gamma}, L={l}, M={m})"
        )));
    }
    if second_moment_diverges(model) {
        return Ok(CSequence {
            c: vec![f64::INFINITY; horizon],
            c1_finite: false,
            gamma_used: gamma,
            truncation_error_bound: f64::INFINITY,
            internal_horizon: horizon,
            second_moment: f64::INFINITY,
        });
    }

    let beta = gamma * m as f64 * l * l / 2.0;
    let h_int = match finite_support(model) {
        Some(s) => horizon.max(s),
        None => horizon.max(tail_cutoff(model)),
    };
    let tails = series_tails(model, h_int);

    // c_{H+1} = beta * sum_{i > H} i (i - H) w_i; bounded by the plain second
    // tail when only bounds are available.
    let tail_c = if tails.exact {
        (tails.second - h_int as f64 * tails.first).max(0.0)
    } else {
        tails.second
    };
    let mut c = vec![0.0; h_int + 1];
    let mut next = beta * tail_c;
    let mut s1 = tails.first;
    let mut head2 = 0.0;
    let weights = model.dominating_weights(h_int);
    for j in (1..=h_int).rev() {
        let w = weights[j];
        s1 += j as f64 * w;
        head2 += (j * j) as f64 * w;
        next += beta * s1;
        c[j] = next;
    }
    c.truncate(horizon + 1);
    c.remove(0);

    Ok(CSequence {
        c,
        c1_finite: true,
        gamma_used: gamma,
        truncation_error_bound: if tails.exact {
            0.0
        } else {
            2.0 * beta * tails.second
        },
        internal_horizon: h_int,
        second_moment: head2 + tails.second,
    })
}

/// `1 / (2 M c_1 + M L)`; zero when `c_1` is infinite.
pub fn step_size_cap(c1: f64, m: usize, l: f64) -> f64 {
    if !c1.is_finite() {
        return 0.0;
    }
    let m = m as f64;
    1.0 / (2.0 * m * c1 + m * l)
}

/// Largest constant step `gamma` with `gamma <= step_size_cap(c_1(gamma))`.
///
/// Since `c_1 = gamma M L^2 E / 2` with `E = sum i^2 w_i`, the condition is
/// `gamma (gamma M^2 L^2 E + M L) <= 1`.
pub fn max_admissible_constant_step(second_moment: f64, m: usize, l: f64) -> f64 {
    if !second_moment.is_finite() {
        return 0.0;
    }
    let ml = m as f64 * l;
    2.0 / (ml + (ml * ml + 4.0 * ml * ml * second_moment).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub admissible: bool,
    pub c1: f64,
    pub c1_finite: bool,
    /// Largest step of the schedule, used to build the sequence.
    pub gamma: f64,
    pub gamma_cap: f64,
    /// Largest constant step that would be admissible under this model.
    pub gamma_max: f64,
    pub truncation_error_bound: f64,
    /// `c_1..c_20` (fewer if the horizon is shorter).
    pub c_head: Vec<f64>,
    pub reason: String,
}

/// Decides whether `schedule` is admissible under `model` with batch `m`.
///
/// Schedules are non-increasing, so the cap only needs checking at `k = 1`.
pub fn admissibility_check(
    model: &DelayModel,
    schedule: &StepSchedule,
    m: usize,
    l: f64,
    horizon: usize,
) -> Result<Verdict> {
    let gamma = schedule.sup();
    let seq = compute_c_sequence(model, gamma, m, l, horizon)?;
    let c1 = seq.c1();
    let cap = step_size_cap(c1, m, l);
    let gamma_max = max_admissible_constant_step(seq.second_moment, m, l);
    let c_head = seq.c.iter().take(20).copied().collect();

    let (admissible, reason) = if !seq.c1_finite {
        let reason = match model {
            DelayModel::GrowingUniform => {
                let k = horizon as f64;
                let bound = gamma * m as f64 * l * l / 2.0 * (k + 1.0) * (2.0 * k + 1.0) / 6.0;
                format!(
                    "growing-uniform delays force c_1 >= (gamma*M*L^2/2)(k+1)(2k+1)/6, \
                     which is unbounded in k (already {bound:.6e} at k = {horizon}); \
                     c_1 is infinite and the iterates need not converge"
                )
            }
            DelayModel::SeriesBounded {
                series: Series::PowerLaw { exponent },
            } => format!(
                "sum of i^2 a_i diverges for power-law exponent {exponent} <= 3, so c_1 is infinite"
            ),
            _ => "sum of i^2 a_i diverges, so c_1 is infinite".to_string(),
        };
        (false, reason)
    } else if gamma > cap * (1.0 + 1e-12) {
        (
            false,
            format!(
                "step {gamma:.6e} exceeds the cap 1/(2*M*c_1 + M*L) = {cap:.6e} \
                 (largest admissible constant step {gamma_max:.6e})"
            ),
        )
    } else {
        (true, "c_1 is finite and every step is within the cap".to_string())
    };

    Ok(Verdict {
        admissible,
        c1,
        c1_finite: seq.c1_finite,
        gamma,
        gamma_cap: cap,
        gamma_max,
        truncation_error_bound: seq.truncation_error_bound,
        c_head,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::ServiceModel;
    use proptest::prelude::*;

    fn indicator(t: usize) -> DelayModel {
        DelayModel::SeriesBounded {
            series: Series::Indicator { max_delay: t },
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn two_point_series() {
        let m = DelayModel::SeriesBounded {
            series: Series::Explicit {
                weights: vec![1.0, 1.0],
            },
        };
        let s = compute_c_sequence(&m, 1.0, 1, 1.0, 5).unwrap();
        assert!((s.c1() - 2.5).abs() < 1e-15);
        // c_2 = (1/2) * 2 * 1 = 1
        assert!((s.get(2) - 1.0).abs() < 1e-15);
        assert_eq!(s.get(3), 0.0);
        assert_eq!(s.truncation_error_bound, 0.0);
    }

    #[test]
    fn poisson_second_moment() {
        let s = compute_c_sequence(&DelayModel::Poisson { rate: 10.0 }, 1.0, 1, 1.0, 20).unwrap();
        assert!(rel(s.c1(), 55.0) < 1e-9, "{}", s.c1());
    }

    #[test]
    fn closed_forms_for_indicator_and_poisson() {
        for t in [2usize, 5, 20] {
            let s = compute_c_sequence(&indicator(t), 0.3, 7, 1.7, 10).unwrap();
            let e2: f64 = (1..=t).map(|i| (i * i) as f64).sum();
            assert!(rel(s.c1(), 0.3 * 7.0 * 1.7 * 1.7 / 2.0 * e2) < 1e-9);
        }
        for lam in [3.0, 10.0, 30.0] {
            let s = compute_c_sequence(&DelayModel::Poisson { rate: lam }, 0.3, 7, 1.7, 10)
                .unwrap();
            assert!(rel(s.c1(), 0.3 * 7.0 * 1.7 * 1.7 / 2.0 * (lam + lam * lam)) < 1e-9);
        }
    }

    #[test]
    fn zero_delay_gives_zero_sequence() {
        let m = DelayModel::Bounded {
            max_delay: 0,
            weights: None,
        };
        let s = compute_c_sequence(&m, 1.0, 3, 2.0, 20).unwrap();
        assert!(s.c1_finite);
        assert!(s.c.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn horizon_must_be_positive() {
        assert!(compute_c_sequence(&indicator(2), 1.0, 1, 1.0, 0).is_err());
        let sys = DelayModel::System {
            workers: 2,
            service: ServiceModel::default(),
        };
        assert_eq!(
            compute_c_sequence(&sys, 1.0, 1, 1.0, 5).unwrap_err(),
            Error::AnalysisUnavailable
        );
    }

    #[test]
    fn caps() {
        assert!((step_size_cap(2.5, 100, 1.0) - 1.0 / 600.0).abs() < 1e-18);
        assert_eq!(step_size_cap(0.0, 1, 1.0), 1.0);
        assert!((step_size_cap(55.0, 1, 1.0) - 1.0 / 111.0).abs() < 1e-18);
        assert_eq!(step_size_cap(f64::INFINITY, 1, 1.0), 0.0);
    }

    #[test]
    fn self_consistent_step_sits_on_the_cap() {
        let model = DelayModel::Poisson { rate: 3.0 };
        let g = max_admissible_constant_step(12.0, 4, 2.0);
        let s = compute_c_sequence(&model, g, 4, 2.0, 10).unwrap();
        assert!(rel(g, step_size_cap(s.c1(), 4, 2.0)) < 1e-10);
    }

    #[test]
    fn growing_uniform_is_inadmissible() {
        let v = admissibility_check(
            &DelayModel::GrowingUniform,
            &StepSchedule::constant(1e-3),
            1,
            1.0,
            100,
        )
        .unwrap();
        assert!(!v.admissible);
        assert!(!v.c1_finite);
        assert_eq!(v.gamma_cap, 0.0);
        assert!(v.reason.contains("(k+1)(2k+1)/6"), "{}", v.reason);
    }

    #[test]
    fn bounded_within_cap_is_admissible() {
        let model = DelayModel::Bounded {
            max_delay: 20,
            weights: None,
        };
        let s = StepSchedule::constant(1e-5);
        let v = admissibility_check(&model, &s, 100, 1.0, 50).unwrap();
        assert!(v.admissible, "{}", v.reason);
        let g = v.gamma_max;
        let v = admissibility_check(&model, &StepSchedule::constant(g), 100, 1.0, 50).unwrap();
        assert!(v.admissible, "{}", v.reason);
        let v =
            admissibility_check(&model, &StepSchedule::constant(g * 1.01), 100, 1.0, 50).unwrap();
        assert!(!v.admissible);
    }

    #[test]
    fn heavy_tailed_series_are_admissible() {
        for series in [
            Series::DiscreteLogNormal { mu: 1.0, sigma: 1.0 },
            Series::DiscreteWeibull { shape: 0.5, scale: 2.0 },
            Series::PowerLaw { exponent: 5.0 },
        ] {
            let model = DelayModel::SeriesBounded { series };
            let v = admissibility_check(&model, &StepSchedule::constant(1e-6), 10, 1.0, 30)
                .unwrap();
            assert!(v.admissible, "{model:?}: {}", v.reason);
            assert!(v.truncation_error_bound <= 2e-8 * v.c1, "{model:?}");
        }
        let model = DelayModel::SeriesBounded {
            series: Series::PowerLaw { exponent: 2.5 },
        };
        let v = admissibility_check(&model, &StepSchedule::constant(1e-6), 10, 1.0, 30).unwrap();
        assert!(!v.admissible);
    }

    #[test]
    fn lognormal_matches_moment_closed_form() {
        // sum i^2 P(floor(Y) = i) <= E[Y^2] = exp(2 mu + 2 sigma^2)
        let (mu, sigma) = (1.0f64, 0.6f64);
        let model = DelayModel::SeriesBounded {
            series: Series::DiscreteLogNormal { mu, sigma },
        };
        let s = compute_c_sequence(&model, 2.0, 1, 1.0, 10).unwrap();
        assert!(s.c1() <= (2.0 * mu + 2.0 * sigma * sigma).exp() * (1.0 + 1e-9));
        let direct: f64 = (1..100_000)
            .map(|i| (i * i) as f64 * model.dominating_weight(i))
            .sum();
        assert!(rel(s.c1(), direct) < 1e-7);
    }

    #[test]
    fn series_generalises_bounded_and_iid() {
        let t = 7;
        let iid = DelayModel::Poisson { rate: 4.0 };
        let as_series = DelayModel::SeriesBounded {
            series: Series::Explicit {
                weights: (1..200).map(|i| iid.dominating_weight(i)).collect(),
            },
        };
        let s = StepSchedule::constant(1e-4);
        for (a, b) in [(indicator(t), indicator(t)), (iid, as_series)] {
            let va = admissibility_check(&a, &s, 10, 1.0, 30).unwrap();
            let vb = admissibility_check(&b, &s, 10, 1.0, 30).unwrap();
            assert!(va.admissible && vb.admissible);
            assert!(rel(va.c1, vb.c1) < 1e-9);
        }
    }

    fn arb_model() -> impl Strategy<Value = DelayModel> {
        prop_oneof![
            (0usize..40).prop_map(|t| DelayModel::Bounded {
                max_delay: t,
                weights: None
            }),
            proptest::collection::vec(0.0f64..1.0, 1..30).prop_map(|weights| {
                DelayModel::SeriesBounded {
                    series: Series::Explicit { weights },
                }
            }),
            (0.1f64..30.0).prop_map(|rate| DelayModel::Poisson { rate }),
            (0.0f64..1.5, 0.2f64..1.0).prop_map(|(mu, sigma)| DelayModel::SeriesBounded {
                series: Series::DiscreteLogNormal { mu, sigma }
            }),
            (0.5f64..3.0, 0.5f64..6.0).prop_map(|(shape, scale)| DelayModel::SeriesBounded {
                series: Series::DiscreteWeibull { shape, scale }
            }),
            (3.5f64..8.0).prop_map(|exponent| DelayModel::SeriesBounded {
                series: Series::PowerLaw { exponent }
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn recursion_holds_with_equality(
            model in arb_model(),
            gamma in 1e-4f64..1.0,
            m in 1usize..50,
            l in 0.1f64..5.0,
            horizon in 1usize..60,
        ) {
            let s = compute_c_sequence(&model, gamma, m, l, horizon).unwrap();
            let beta = gamma * m as f64 * l * l / 2.0;
            let h = s.internal_horizon;
            let tail = series_tails(&model, h).first;
            let w = model.dominating_weights(h);
            // c_j - c_{j+1} = beta * (sum_{i=j..H} i w_i + tail), summed small terms first
            for j in 1..=horizon {
                let sum: f64 = (j..=h).rev().map(|i| i as f64 * w[i]).sum();
                let lhs = s.get(j) - s.get(j + 1);
                let rhs = beta * (sum + tail);
                if j < horizon {
                    prop_assert!((lhs - rhs).abs() <= 1e-12 * s.c1().max(1.0), "j={} {} {}", j, lhs, rhs);
                }
                prop_assert!(s.get(j) >= s.get(j + 1) || j == horizon);
                prop_assert!(s.get(j) >= 0.0);
            }
        }
    }
}
