//! Least-squares slopes on log-log axes.

use serde::{Deserialize, Serialize};

use super::Ensemble;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window_start: usize,
    pub window_end: usize,
    pub points: usize,
    /// Rows in the window dropped for being zero, negative or non-finite.
    pub excluded_nonpositive: usize,
    pub runs: usize,
}

/// Fits `ln y = intercept + slope * ln k` over rows with
/// `k >= (1 - window_fraction) * k_max`, skipping `k = 0`.
pub fn rate_fit_series(k: &[usize], y: &[f64], window_fraction: f64) -> Result<RateFit> {
    if k.len() != y.len() {
        return Err(Error::invalid("k and y must have equal length"));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "window fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    let k_max = *k.iter().max().ok_or_else(|| Error::InsufficientData("empty series".into()))?;
    let start = ((1.0 - window_fraction) * k_max as f64).ceil() as usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    let (mut lo, mut hi) = (usize::MAX, 0);
    for (&ki, &yi) in k.iter().zip(y) {
        if ki == 0 || ki < start {
            continue;
        }
        if !(yi > 0.0 && yi.is_finite()) {
            excluded += 1;
            continue;
        }
        lo = lo.min(ki);
        hi = hi.max(ki);
        xs.push((ki as f64).ln());
        ys.push(yi.ln());
    }
    let n = xs.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 10 positive points in the window, found {n}"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        1.0 - ss_res / syy
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        window_start: lo,
        window_end: hi,
        points: n,
        excluded_nonpositive: excluded,
        runs: 1,
    })
}

/// Rate fit of an ensemble mean.
pub fn rate_fit(ensemble: &Ensemble, window_fraction: f64) -> Result<RateFit> {
    let mut fit = rate_fit_series(&ensemble.k, &ensemble.mean, window_fraction)?;
    fit.runs = ensemble.runs;
    Ok(fit)
}
