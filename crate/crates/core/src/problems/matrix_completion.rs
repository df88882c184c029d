use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::estimate::{estimate_lipschitz, estimate_sigma2, BoxSampler};
use super::{Constants, Problem};
use crate::linalg::{check_len, matrix_from_row_major, matrix_to_row_major};
use crate::rng::{stream, streams};
use crate::{Error, Result, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCompletionParams {
    /// Side length of the observed symmetric matrix.
    pub n: usize,
    /// Factor rank `p`; the parameter is `Y` in `R^{n x p}`.
    pub rank: usize,
    /// Standard deviation of the symmetric observation noise.
    pub noise_std: f64,
    /// Standard deviation of the ground-truth factor entries.
    pub truth_scale: f64,
    pub seed: u64,
}

/// Symmetric low-rank recovery: minimize `E ||A - Y Y^T||_F^2` where each
/// observation is `A = Y* Y*^T + eps` with symmetric Gaussian `eps`.
///
/// The objective is reported against `E[A]`, so it vanishes at `Y = Y*`.
/// Parameters are `Y` flattened row-major (`d = n * p`).
#[derive(Debug, Clone)]
pub struct MatrixCompletionProblem {
    n: usize,
    rank: usize,
    noise_std: f64,
    truth: DMatrix<f64>,
    mean_obs: DMatrix<f64>,
    start: Vec<f64>,
    constants: Constants,
}

/// Half-width of the box around the start point used for constant estimation.
const ESTIMATION_BOX: f64 = 1.0;
const ESTIMATION_PAIRS: usize = 1000;
const ESTIMATION_DRAWS: usize = 1000;
const SAFETY: f64 = 1.5;

impl MatrixCompletionProblem {
    pub fn new(params: MatrixCompletionParams) -> Result<Self> {
        let MatrixCompletionParams {
            n,
            rank,
            noise_std,
            truth_scale,
            seed,
        } = params;
        if rank < 1 || n < rank {
            return Err(Error::invalid(format!(
                "need n >= rank >= 1, got n={n}, rank={rank}"
            )));
        }
        if !(noise_std > 0.0 && noise_std.is_finite()) {
            return Err(Error::invalid("noise_std must be positive"));
        }
        if !(truth_scale > 0.0 && truth_scale.is_finite()) {
            return Err(Error::invalid("truth_scale must be positive"));
        }
        let mut rng = stream(seed, streams::PROBLEM);
        let truth_dist = Normal::new(0.0, truth_scale).expect("positive scale");
        let truth = DMatrix::from_fn(n, rank, |_, _| truth_dist.sample(&mut rng));
        let mean_obs = &truth * truth.transpose();
        let start_dist = Normal::new(0.0, 1.0 / (n as f64).sqrt()).expect("positive scale");
        let start: Vec<f64> = (0..n * rank).map(|_| start_dist.sample(&mut rng)).collect();

        let mut problem = Self {
            n,
            rank,
            noise_std,
            truth,
            mean_obs,
            start,
            constants: Constants {
                lipschitz: f64::NAN,
                sigma2: f64::NAN,
                optimum_value: Some(0.0),
                exact: false,
            },
        };
        let mut est_rng = stream(seed, streams::ESTIMATION);
        let sampler = BoxSampler::around(&problem.start, ESTIMATION_BOX);
        let l = estimate_lipschitz(&problem, &sampler, ESTIMATION_PAIRS, &mut est_rng)?;
        let s2 = estimate_sigma2(&problem, &problem.start, ESTIMATION_DRAWS, &mut est_rng)?;
        problem.constants.lipschitz = SAFETY * l;
        problem.constants.sigma2 = SAFETY * s2;
        Ok(problem)
    }

    pub fn truth(&self) -> &DMatrix<f64> {
        &self.truth
    }

    pub fn truth_flat(&self) -> Vec<f64> {
        matrix_to_row_major(&self.truth)
    }

    pub fn mean_observation(&self) -> &DMatrix<f64> {
        &self.mean_obs
    }

    fn factor(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_len(x, self.n * self.rank)?;
        Ok(matrix_from_row_major(self.n, self.rank, x))
    }

    fn residual(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        y * y.transpose() - &self.mean_obs
    }

    fn symmetric_noise(&self, rng: &mut SimRng) -> DMatrix<f64> {
        let mut eps = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let z: f64 = StandardNormal.sample(rng);
                eps[(i, j)] = z;
                eps[(j, i)] = z;
            }
        }
        eps
    }
}

impl Problem for MatrixCompletionProblem {
    fn name(&self) -> &'static str {
        "matrix_completion"
    }

    fn dim(&self) -> usize {
        self.n * self.rank
    }

    fn objective(&self, x: &[f64]) -> Result<f64> {
        let y = self.factor(x)?;
        Ok(self.residual(&y).norm_squared())
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.factor(x)?;
        let g = 4.0 * self.residual(&y) * &y;
        Ok(matrix_to_row_major(&g))
    }

    fn stochastic_gradient(&self, x: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        self.stochastic_gradient_sum(x, 1, rng)
    }

    /// `sum_b 4 (Y Y^T - E[A] - eps_b) Y = count * grad - 4 (sum_b eps_b) Y`, and
    /// the sum of `count` symmetric Gaussian matrices is `sqrt(count)` times one.
    fn stochastic_gradient_sum(
        &self,
        x: &[f64],
        count: u64,
        rng: &mut SimRng,
    ) -> Result<Vec<f64>> {
        let y = self.factor(x)?;
        if count == 0 {
            return Ok(vec![0.0; self.dim()]);
        }
        let c = count as f64;
        let eps = self.symmetric_noise(rng) * (self.noise_std * c.sqrt());
        let g = (self.residual(&y) * c - eps) * &y * 4.0;
        Ok(matrix_to_row_major(&g))
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    fn start_point(&self) -> Vec<f64> {
        self.start.clone()
    }
}
