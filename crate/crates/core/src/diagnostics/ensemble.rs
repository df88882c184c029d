use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-iteration mean and standard error across independent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub k: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Mean virtual time at each row.
    pub vtime: Vec<f64>,
    pub runs: usize,
}

/// Reduces equally long runs in the order given. `stderr` is NaN for a single run.
pub fn ensemble_mean(k: &[usize], values: &[Vec<f64>], vtimes: &[Vec<f64>]) -> Result<Ensemble> {
    if values.is_empty() {
        return Err(Error::InsufficientData("no runs to average".into()));
    }
    if values.len() != vtimes.len()
        || values
            .iter()
            .chain(vtimes)
            .any(|v| v.len() != k.len())
    {
        return Err(Error::invalid("runs must share the same iteration grid"));
    }
    let n = values.len() as f64;
    let mut mean = Vec::with_capacity(k.len());
    let mut stderr = Vec::with_capacity(k.len());
    let mut vtime = Vec::with_capacity(k.len());
    for row in 0..k.len() {
        let m = values.iter().map(|v| v[row]).sum::<f64>() / n;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v[row] - m).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            f64::NAN
        };
        mean.push(m);
        stderr.push(se);
        vtime.push(vtimes.iter().map(|v| v[row]).sum::<f64>() / n);
    }
    Ok(Ensemble {
        k: k.to_vec(),
        mean,
        stderr,
        vtime,
        runs: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let e = ensemble_mean(
            &[0, 1],
            &[vec![1.0, 2.0], vec![3.0, 2.0]],
            &[vec![0.0, 1.0], vec![0.0, 3.0]],
        )
        .unwrap();
        assert_eq!(e.mean, vec![2.0, 2.0]);
        assert_eq!(e.stderr, vec![1.0, 0.0]);
        assert_eq!(e.vtime, vec![0.0, 2.0]);
    }

    #[test]
    fn rejects_ragged_runs() {
        assert!(ensemble_mean(&[0, 1], &[vec![1.0]], &[vec![0.0]]).is_err());
        assert!(ensemble_mean(&[0], &[], &[]).is_err());
    }
}
