//! Lyapunov values, Monte-Carlo checks of the one-step descent inequality,
//! rate fits and run comparisons.

mod compare;
mod ensemble;
mod lemma;
mod lyapunov;
mod rate;

pub use compare::{compare_runs, ComparisonEntry, ComparisonReport, RunSeries};
pub use ensemble::{ensemble_mean, Ensemble};
pub use lemma::{check_lemma1, FrozenState, Lemma1Config, Lemma1Report};
pub use lyapunov::{lyapunov_value, LyapunovTracker, LyapunovValue};
pub use rate::{rate_fit, rate_fit_series, RateFit};
