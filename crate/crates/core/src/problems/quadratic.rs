use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::{Constants, Problem};
use crate::linalg::{check_len, is_spd, max_eigenvalue};
use crate::{Error, Result, SimRng};

/// `f(x) = x^T H x / 2` with additive isotropic Gaussian gradient noise.
///
/// All constants are exact: `L = lambda_max(H)`, `sigma2 = d * noise_std^2`,
/// `x* = 0` and `f(x*) = 0`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    h: DMatrix<f64>,
    noise_std: f64,
    lipschitz: f64,
    start: Vec<f64>,
}

impl QuadraticProblem {
    pub fn new(h: DMatrix<f64>, noise_std: f64) -> Result<Self> {
        if !is_spd(&h) {
            return Err(Error::NotPositiveDefinite);
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::invalid(format!(
                "noise_std must be finite and >= 0, got {noise_std}"
            )));
        }
        let d = h.nrows();
        Ok(Self {
            lipschitz: max_eigenvalue(&h),
            h,
            noise_std,
            start: vec![1.0; d],
        })
    }

    pub fn isotropic(d: usize, noise_std: f64) -> Result<Self> {
        Self::new(DMatrix::identity(d, d), noise_std)
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Result<Self> {
        check_len(&start, self.h.nrows())?;
        self.start = start;
        Ok(self)
    }

    pub fn curvature(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    fn hx(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.h * DVector::from_column_slice(x);
        v.as_slice().to_vec()
    }
}

impl Problem for QuadraticProblem {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn objective(&self, x: &[f64]) -> Result<f64> {
        check_len(x, self.dim())?;
        Ok(0.5 * crate::linalg::dot(x, &self.hx(x)))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.dim())?;
        Ok(self.hx(x))
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
        check_len(x, self.dim())?;
        let mut g = self.hx(x);
        if count == 0 {
            return Ok(vec![0.0; self.dim()]);
        }
        let c = count as f64;
        // A sum of `count` i.i.d. N(0, s^2) draws is N(0, count * s^2).
        let noise_scale = self.noise_std * c.sqrt();
        for gi in g.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *gi = c * *gi + noise_scale * z;
        }
        Ok(g)
    }

    fn constants(&self) -> Constants {
        Constants {
            lipschitz: self.lipschitz,
            sigma2: self.dim() as f64 * self.noise_std * self.noise_std,
            optimum_value: Some(0.0),
            exact: true,
        }
    }

    fn start_point(&self) -> Vec<f64> {
        self.start.clone()
    }
}
