#![allow(dead_code)]

use asgd_core::problems::{
    MatrixCompletionParams, MatrixCompletionProblem, MvnMleParams, MvnMleProblem, Problem,
    QuadraticProblem,
};
use nalgebra::{DMatrix, DVector};

pub fn reference_covariance() -> DMatrix<f64> {
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

pub fn quadratic() -> QuadraticProblem {
    let h = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 0.5]);
    QuadraticProblem::new(h, 0.3).unwrap()
}

pub fn matrix_completion() -> MatrixCompletionProblem {
    MatrixCompletionProblem::new(MatrixCompletionParams {
        n: 20,
        rank: 1,
        noise_std: 1.0,
        truth_scale: 1.0,
        seed: 7,
    })
    .unwrap()
}

pub fn mvn_five() -> MvnMleProblem {
    MvnMleProblem::new(MvnMleParams {
        covariance: reference_covariance(),
        mean: vec![0.0; 5],
        samples: 1000,
        seed: 11,
    })
    .unwrap()
}

pub fn mvn_two() -> MvnMleProblem {
    MvnMleProblem::new(MvnMleParams {
        covariance: DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.4])),
        mean: vec![0.0; 2],
        samples: 1000,
        seed: 5,
    })
    .unwrap()
}

pub fn all_problems() -> Vec<Box<dyn Problem>> {
    vec![
        Box::new(quadratic()),
        Box::new(matrix_completion()),
        Box::new(mvn_five()),
    ]
}
