//! Detection of periodic signals in noise using Ramanujan periodicity
//! transform (RPT) dictionaries.
//!
//! The crate builds nested periodic dictionaries from Ramanujan sums,
//! derives GLRT detectors for binary and M-ary multi-electrode settings
//! with spatial noise correlation, and provides the analytic performance
//! machinery (exact test-statistic distributions, Gaussian approximations,
//! ROC curves, perfect-measurement bound, error-exponent/discrimination-rate
//! tradeoff) together with Monte Carlo harnesses and CCA/PSDA baselines.
//!
//! Modules:
//! - [`ramanujan`]: integer-exact Ramanujan sums, periodic submatrices,
//!   dictionaries and period support sets.
//! - [`detector`]: projection operators, restricted-ML estimation and the
//!   GLRT decision rules.
//! - [`analysis`]: test-statistic distributions, detection probabilities,
//!   bounds and rate metrics.
//! - [`simulate`]: synthetic trial generation and experiment harnesses.
//! - [`baselines`]: standard CCA and PSDA reference classifiers.

pub mod analysis;
pub mod baselines;
pub mod detector;
mod error;
pub mod ramanujan;
pub mod simulate;

pub use error::{Error, Result};

/// Binary hypothesis label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Null hypothesis (class 0).
    H0,
    /// Alternative hypothesis (class 1).
    H1,
}
