use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::estimate::{estimate_lipschitz, estimate_sigma2, BoxSampler};
use super::{Constants, Problem};
use crate::linalg::{check_len, is_spd, matrix_from_row_major, matrix_to_row_major, symmetrize};
use crate::rng::{binomial, stream, streams};
use crate::{Error, Result, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct MvnMleParams {
    pub covariance: DMatrix<f64>,
    pub mean: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

/// Maximum-likelihood covariance estimation for a multivariate normal with
/// known mean:
///
/// `f(S) = ln|S| + (1/n) sum_i (x_i - mu)^T S^{-1} (x_i - mu)`, subject to `S` SPD.
///
/// The parameter is the full `p x p` matrix flattened row-major. A stochastic
/// gradient picks one sample uniformly: `S^{-1} - S^{-1} s s^T S^{-1}`.
#[derive(Debug, Clone)]
pub struct MvnMleProblem {
    p: usize,
    /// Centered samples `x_i - mu`.
    centered: Vec<DVector<f64>>,
    scatter: DMatrix<f64>,
    optimum: f64,
    constants: Constants,
}

const ESTIMATION_PAIRS: usize = 1000;
const ESTIMATION_DRAWS: usize = 1000;
const SAFETY: f64 = 1.5;

impl MvnMleProblem {
    pub fn new(params: MvnMleParams) -> Result<Self> {
        let MvnMleParams {
            covariance,
            mean,
            samples,
            seed,
        } = params;
        let p = covariance.nrows();
        if !is_spd(&covariance) {
            return Err(Error::NotPositiveDefinite);
        }
        if mean.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: mean.len(),
            });
        }
        if samples <= p {
            return Err(Error::invalid(format!(
                "need more samples than dimensions (samples={samples}, p={p})"
            )));
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .l();
        let mut rng = stream(seed, streams::PROBLEM);
        let centered: Vec<DVector<f64>> = (0..samples)
            .map(|_| {
                let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
                &chol * z
            })
            .collect();
        let mut scatter = DMatrix::zeros(p, p);
        for s in &centered {
            scatter += s * s.transpose();
        }
        scatter /= samples as f64;
        symmetrize(&mut scatter);
        let det = scatter.determinant();
        if !(det > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }

        let mut problem = Self {
            p,
            centered,
            optimum: det.ln() + p as f64,
            scatter,
            constants: Constants {
                lipschitz: f64::NAN,
                sigma2: f64::NAN,
                optimum_value: None,
                exact: false,
            },
        };
        problem.constants.optimum_value = Some(problem.optimum);
        let start = problem.start_point();
        let mut est_rng = stream(seed, streams::ESTIMATION);
        // Box half-width 0.5/p keeps every sample diagonally dominant, hence SPD.
        let sampler = BoxSampler::symmetric(&start, p, 0.5 / p as f64);
        let l = estimate_lipschitz(&problem, &sampler, ESTIMATION_PAIRS, &mut est_rng)?;
        let s2 = estimate_sigma2(&problem, &start, ESTIMATION_DRAWS, &mut est_rng)?;
        problem.constants.lipschitz = SAFETY * l;
        problem.constants.sigma2 = SAFETY * s2;
        Ok(problem)
    }

    pub fn side(&self) -> usize {
        self.p
    }

    /// Sample scatter matrix `(1/n) sum_i (x_i - mu)(x_i - mu)^T`, the unconstrained MLE.
    pub fn scatter(&self) -> &DMatrix<f64> {
        &self.scatter
    }

    pub fn scatter_flat(&self) -> Vec<f64> {
        matrix_to_row_major(&self.scatter)
    }

    fn decode(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_len(x, self.p * self.p)?;
        Ok(matrix_from_row_major(self.p, self.p, x))
    }

    /// Inverse of a decoded iterate, rejecting anything whose symmetric part is not SPD.
    fn checked_inverse(&self, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let sym = (sigma + sigma.transpose()) * 0.5;
        if sym.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        sigma.clone().try_inverse().ok_or(Error::NotPositiveDefinite)
    }

    fn sampled_scatter(&self, count: u64, rng: &mut SimRng) -> DMatrix<f64> {
        let n = self.centered.len();
        let mut w = DMatrix::zeros(self.p, self.p);
        if count < n as u64 {
            for _ in 0..count {
                let s = &self.centered[rng.random_range(0..n)];
                w += s * s.transpose();
            }
        } else {
            // Multinomial sample counts via sequential conditional binomials.
            let mut remaining = count;
            for (i, s) in self.centered.iter().enumerate() {
                if remaining == 0 {
                    break;
                }
                let c = if i + 1 == n {
                    remaining
                } else {
                    binomial(remaining, 1.0 / (n - i) as f64, rng)
                };
                if c > 0 {
                    w += (s * s.transpose()) * c as f64;
                    remaining -= c;
                }
            }
        }
        w
    }
}

impl Problem for MvnMleProblem {
    fn name(&self) -> &'static str {
        "mvn_mle"
    }

    fn dim(&self) -> usize {
        self.p * self.p
    }

    fn objective(&self, x: &[f64]) -> Result<f64> {
        let sigma = self.decode(x)?;
        let inv = self.checked_inverse(&sigma)?;
        let det = sigma.determinant();
        if !(det > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(det.ln() + (inv * &self.scatter).trace())
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let sigma = self.decode(x)?;
        let inv_t = self.checked_inverse(&sigma)?.transpose();
        let mut g = &inv_t - &inv_t * self.scatter.transpose() * &inv_t;
        symmetrize(&mut g);
        Ok(matrix_to_row_major(&g))
    }

    fn stochastic_gradient(&self, x: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        self.stochastic_gradient_sum(x, 1, rng)
    }

    fn stochastic_gradient_sum(
        &self,
        x: &[f64],
        count: u64,
        rng: &mut SimRng,
    ) -> Result<Vec<f64>> {
        let sigma = self.decode(x)?;
        let inv = self.checked_inverse(&sigma)?;
        if count == 0 {
            return Ok(vec![0.0; self.dim()]);
        }
        let w = self.sampled_scatter(count, rng);
        let mut g = &inv * count as f64 - &inv * w * &inv;
        symmetrize(&mut g);
        Ok(matrix_to_row_major(&g))
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    /// `Sigma_0 = I`.
    fn start_point(&self) -> Vec<f64> {
        matrix_to_row_major(&DMatrix::identity(self.p, self.p))
    }

    fn is_feasible(&self, x: &[f64]) -> bool {
        match self.decode(x) {
            Ok(sigma) => is_spd(&sigma),
            Err(_) => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_five_by_five() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            5,
            5,
            &[
                12.46, 3.99, 5.48, 2.71, 2.95, //
                3.99, 14.99, 4.74, 2.42, 4.64, //
                5.48, 4.74, 12.72, 1.68, 2.80, //
                2.71, 2.42, 1.68, 16.15, 3.82, //
                2.95, 4.64, 2.80, 3.82, 19.38,
            ],
        )
    }

    fn build(cov: DMatrix<f64>, samples: usize) -> Result<MvnMleProblem> {
        let p = cov.nrows();
        MvnMleProblem::new(MvnMleParams {
            covariance: cov,
            mean: vec![0.0; p],
            samples,
            seed: 11,
        })
    }

    #[test]
    fn five_by_five_has_twenty_five_parameters() {
        let p = build(reference_five_by_five(), 500).unwrap();
        assert_eq!(p.dim(), 25);
    }

    #[test]
    fn objective_at_scatter_is_log_det_plus_p() {
        let p = build(reference_five_by_five(), 500).unwrap();
        let s = p.scatter_flat();
        let expected = p.scatter().determinant().ln() + 5.0;
        assert!((p.objective(&s).unwrap() - expected).abs() < 1e-10);
        assert_eq!(p.constants().optimum_value, Some(expected));
    }

    #[test]
    fn gradient_vanishes_at_scatter() {
        let p = build(reference_five_by_five(), 500).unwrap();
        let g = p.gradient(&p.scatter_flat()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-10), "{g:?}");
    }

    #[test]
    fn rejects_non_spd_truth_and_too_few_samples() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(build(bad, 10).unwrap_err(), Error::NotPositiveDefinite);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.4]));
        assert!(matches!(build(diag, 2), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn infeasible_iterate_is_signalled() {
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.4]));
        let p = build(diag, 100).unwrap();
        let x = [1.0, 0.0, 0.0, -1.0];
        assert!(!p.is_feasible(&x));
        assert_eq!(p.objective(&x).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn large_batch_uses_counts_with_same_mean() {
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.4]));
        let p = build(diag, 50).unwrap();
        let x = p.start_point();
        let g = p.gradient(&x).unwrap();
        let mut rng = stream(5, 0);
        let count = 200_000u64;
        let s = p.stochastic_gradient_sum(&x, count, &mut rng).unwrap();
        for (si, gi) in s.iter().zip(&g) {
            assert!((si / count as f64 - gi).abs() < 5e-3, "{si} {gi}");
        }
    }
}
