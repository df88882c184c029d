mod common;

use asgd_core::delay::{compute_c_sequence, max_admissible_constant_step, DelayModel};
use asgd_core::diagnostics::{check_lemma1, FrozenState, Lemma1Config};
use asgd_core::engine::{run, Algorithm, RunConfig};
use asgd_core::problems::{Problem, QuadraticProblem};
use asgd_core::rng::stream;
use asgd_core::schedules::{BatchSchedule, StepSchedule};
use rand::Rng;

fn frozen_states(p: &dyn Problem, delay: &DelayModel, gamma: f64, m: usize, count: usize) -> Vec<FrozenState> {
    let mut rng = stream(2024, 0);
    (0..count)
        .map(|i| {
            let k = rng.random_range(1..=60);
            let mut c = RunConfig::new(
                Algorithm::Async,
                delay.clone(),
                StepSchedule::constant(gamma),
                BatchSchedule::fixed(m),
                k,
                i as u64,
            );
            c.record_iterates = true;
            let xs = run(p, &c).unwrap().iterates.unwrap();
            FrozenState { iterates: xs }
        })
        .collect()
}

#[test]
fn descent_inequality_holds_at_the_cap() {
    let p = common::quadratic();
    let delay = DelayModel::Poisson { rate: 3.0 };
    let (m, l) = (4, p.constants().lipschitz);
    let gamma = max_admissible_constant_step(12.0, m, l);
    let c = compute_c_sequence(&delay, gamma, m, l, 256).unwrap();
    let states = frozen_states(&p, &delay, gamma, m, 10);
    let mut held = 0;
    for (i, s) in states.iter().enumerate() {
        let cfg = Lemma1Config {
            delay: delay.clone(),
            gamma,
            m,
            n_k: 1,
            n_mc: 2000,
            seed: 100 + i as u64,
            c: c.clone(),
        };
        if check_lemma1(&p, s, &cfg).unwrap().holds {
            held += 1;
        }
    }
    assert!(held >= 9, "held in {held}/10 states");
}

#[test]
fn noise_term_scales_inversely_with_batch_multiplier() {
    let p = QuadraticProblem::isotropic(3, 0.5).unwrap();
    let delay = DelayModel::Poisson { rate: 2.0 };
    let (gamma, m) = (0.05, 2);
    let c = compute_c_sequence(&delay, gamma, m, 1.0, 64).unwrap();
    // At the optimum with a flat history the whole next-step value is noise.
    let state = FrozenState {
        iterates: vec![vec![0.0; 3]; 6],
    };
    let measure = |n_k: u64| {
        let cfg = Lemma1Config {
            delay: delay.clone(),
            gamma,
            m,
            n_k,
            n_mc: 20_000,
            seed: 9,
            c: c.clone(),
        };
        check_lemma1(&p, &state, &cfg).unwrap()
    };
    let one = measure(1);
    let two = measure(2);
    assert_eq!(one.zeta_k, 0.0);
    assert!((one.noise_term / two.noise_term - 2.0).abs() < 1e-12);
    let ratio = one.mean_zeta_next / two.mean_zeta_next;
    let rel_se = (one.std_error / one.mean_zeta_next).hypot(two.std_error / two.mean_zeta_next);
    assert!((ratio - 2.0).abs() <= 3.0 * 2.0 * rel_se, "ratio {ratio}");
    assert!(one.holds && two.holds);
}
