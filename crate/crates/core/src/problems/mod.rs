//! Objectives, exact gradients and stochastic gradient oracles.
//!
//! Every problem exposes its smoothness constant `L` and gradient-noise bound
//! `sigma2`, either exactly (quadratic) or estimated once at construction.

mod estimate;
mod matrix_completion;
mod mvn;
mod quadratic;

use serde::{Deserialize, Serialize};

use crate::{Result, SimRng};

pub use estimate::{estimate_lipschitz, estimate_sigma2, sample_in_box, BoxSampler};
pub use matrix_completion::{MatrixCompletionParams, MatrixCompletionProblem};
pub use mvn::{MvnMleParams, MvnMleProblem};
pub use quadratic::QuadraticProblem;

/// Smoothness and noise constants used by the step-size theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lipschitz: f64,
    pub sigma2: f64,
    /// `f(x*)` when known.
    pub optimum_value: Option<f64>,
    /// False when `lipschitz`/`sigma2` come from sampling rather than closed form.
    pub exact: bool,
}

/// An optimization problem `min f(x) = E[F(x; xi)]` over a flat parameter vector.
///
/// Implementations are immutable after construction; all randomness comes
/// from the caller-owned stream passed to the sampling methods.
pub trait Problem: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn objective(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// One draw of `G(x; xi)`.
    fn stochastic_gradient(&self, x: &[f64], rng: &mut SimRng) -> Result<Vec<f64>>;

    /// Sum of `count` independent draws of `G(x; xi)` at the same point.
    ///
    /// The default loops over single draws. Problems with Gaussian noise
    /// override it with an exact-in-distribution aggregate so that very large
    /// batches stay cheap.
    fn stochastic_gradient_sum(
        &self,
        x: &[f64],
        count: u64,
        rng: &mut SimRng,
    ) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.dim()];
        for _ in 0..count {
            let g = self.stochastic_gradient(x, rng)?;
            crate::linalg::axpy(1.0, &g, &mut acc);
        }
        Ok(acc)
    }

    fn constants(&self) -> Constants;

    fn start_point(&self) -> Vec<f64>;

    /// Whether `x` lies in the feasible set. Unconstrained problems accept everything.
    fn is_feasible(&self, _x: &[f64]) -> bool {
        true
    }
}

/// Declarative problem description, as read from a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        /// Full curvature matrix, rows of equal length.
        #[serde(default)]
        curvature: Option<Vec<Vec<f64>>>,
        /// Shorthand for a diagonal curvature matrix.
        #[serde(default)]
        diagonal: Option<Vec<f64>>,
        noise_std: f64,
        #[serde(default)]
        start: Option<Vec<f64>>,
    },
    MatrixCompletion {
        n: usize,
        rank: usize,
        noise_std: f64,
        #[serde(default = "default_truth_scale")]
        truth_scale: f64,
        seed: u64,
    },
    MvnMle {
        covariance: Vec<Vec<f64>>,
        #[serde(default)]
        mean: Option<Vec<f64>>,
        samples: usize,
        seed: u64,
    },
}

fn default_truth_scale() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Box<dyn Problem>> {
        match self {
            ProblemSpec::Quadratic {
                curvature,
                diagonal,
                noise_std,
                start,
            } => {
                let h = match (curvature, diagonal) {
                    (Some(rows), None) => square_from_rows(rows)?,
                    (None, Some(diag)) => nalgebra::DMatrix::from_diagonal(
                        &nalgebra::DVector::from_column_slice(diag),
                    ),
                    _ => {
                        return Err(crate::Error::invalid(
                            "quadratic needs exactly one of `curvature` or `diagonal`",
                        ))
                    }
                };
                let mut p = QuadraticProblem::new(h, *noise_std)?;
                if let Some(s) = start {
                    p = p.with_start(s.clone())?;
                }
                Ok(Box::new(p))
            }
            ProblemSpec::MatrixCompletion {
                n,
                rank,
                noise_std,
                truth_scale,
                seed,
            } => Ok(Box::new(MatrixCompletionProblem::new(
                MatrixCompletionParams {
                    n: *n,
                    rank: *rank,
                    noise_std: *noise_std,
                    truth_scale: *truth_scale,
                    seed: *seed,
                },
            )?)),
            ProblemSpec::MvnMle {
                covariance,
                mean,
                samples,
                seed,
            } => {
                let sigma = square_from_rows(covariance)?;
                let p = sigma.nrows();
                let mu = mean.clone().unwrap_or_else(|| vec![0.0; p]);
                Ok(Box::new(MvnMleProblem::new(MvnMleParams {
                    covariance: sigma,
                    mean: mu,
                    samples: *samples,
                    seed: *seed,
                })?))
            }
        }
    }
}

pub(crate) fn square_from_rows(rows: &[Vec<f64>]) -> Result<nalgebra::DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(crate::Error::invalid("matrix must be square and non-empty"));
    }
    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
    Ok(nalgebra::DMatrix::from_row_slice(n, n, &flat))
}
