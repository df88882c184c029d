//! Sampling-based estimates of the smoothness constant and gradient noise.

use rand::Rng;

use super::Problem;
use crate::linalg::dist_sq;
use crate::{Error, Result, SimRng};

/// Uniform sampler over an axis-aligned box around a center point.
///
/// With `symmetric_side = Some(n)` the center is an `n x n` row-major matrix
/// and perturbations are mirrored so samples stay symmetric.
#[derive(Debug, Clone)]
pub struct BoxSampler {
    center: Vec<f64>,
    half_width: f64,
    symmetric_side: Option<usize>,
}

impl BoxSampler {
    pub fn around(center: &[f64], half_width: f64) -> Self {
        Self {
            center: center.to_vec(),
            half_width,
            symmetric_side: None,
        }
    }

    pub fn symmetric(center: &[f64], side: usize, half_width: f64) -> Self {
        assert_eq!(center.len(), side * side);
        Self {
            center: center.to_vec(),
            half_width,
            symmetric_side: Some(side),
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> Vec<f64> {
        let h = self.half_width;
        match self.symmetric_side {
            None => self
                .center
                .iter()
                .map(|c| c + rng.random_range(-h..=h))
                .collect(),
            Some(n) => {
                let mut x = self.center.clone();
                for i in 0..n {
                    for j in i..n {
                        let delta = rng.random_range(-h..=h);
                        x[i * n + j] += delta;
                        if i != j {
                            x[j * n + i] += delta;
                        }
                    }
                }
                x
            }
        }
    }
}

pub fn sample_in_box(sampler: &BoxSampler, rng: &mut SimRng) -> Vec<f64> {
    sampler.sample(rng)
}

/// Largest secant ratio `||grad f(x) - grad f(y)|| / ||x - y||` over random pairs.
pub fn estimate_lipschitz<P: Problem + ?Sized>(
    problem: &P,
    sampler: &BoxSampler,
    pairs: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let x = sampler.sample(rng);
        let y = sampler.sample(rng);
        let dx = dist_sq(&x, &y).sqrt();
        if dx == 0.0 {
            continue;
        }
        let gx = problem.gradient(&x)?;
        let gy = problem.gradient(&y)?;
        best = best.max(dist_sq(&gx, &gy).sqrt() / dx);
    }
    if best <= 0.0 || !best.is_finite() {
        return Err(Error::InsufficientData(
            "could not estimate a positive Lipschitz constant".into(),
        ));
    }
    Ok(best)
}

/// Mean squared deviation of single stochastic gradients from the full gradient at `x`.
pub fn estimate_sigma2<P: Problem + ?Sized>(
    problem: &P,
    x: &[f64],
    draws: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::InsufficientData("need at least one draw".into()));
    }
    let g = problem.gradient(x)?;
    let mut acc = 0.0;
    for _ in 0..draws {
        let s = problem.stochastic_gradient(x, rng)?;
        acc += dist_sq(&s, &g);
    }
    Ok(acc / draws as f64)
}
