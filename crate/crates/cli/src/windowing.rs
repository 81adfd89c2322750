//! Sample-exact trial windowing and period rounding.

use anyhow::{bail, Result};
use nalgebra::DMatrix;

/// Extract the analysis window: rows
/// `[round(wait * f_s), round(wait * f_s) + round(window * f_s))`.
/// No resampling or interpolation ever happens.
pub fn window_trial(
    trial: &DMatrix<f64>,
    f_s: f64,
    wait_s: f64,
    window_s: f64,
) -> Result<DMatrix<f64>> {
    if f_s <= 0.0 {
        bail!("sampling rate must be positive");
    }
    if wait_s < 0.0 || window_s <= 0.0 {
        bail!("wait must be nonnegative and window positive");
    }
    let start = (wait_s * f_s).round() as usize;
    let len = (window_s * f_s).round() as usize;
    if len == 0 {
        bail!("window of {window_s} s holds no samples at {f_s} Hz");
    }
    if start + len > trial.nrows() {
        bail!(
            "window [{start}, {}) exceeds trial length {}",
            start + len,
            trial.nrows()
        );
    }
    Ok(trial.rows(start, len).into_owned())
}

/// Integer period for a goal frequency: `round(f_s / f_m)` (half up), plus
/// the frequency error the rounding introduces in Hz.
pub fn period_from_frequency(f_m: f64, f_s: f64) -> Result<(usize, f64)> {
    if f_m <= 0.0 || f_s <= 0.0 {
        bail!("frequencies must be positive");
    }
    if f_m >= f_s {
        bail!("goal frequency {f_m} Hz is not below the sampling rate {f_s} Hz");
    }
    let period = (f_s / f_m).round() as usize;
    if period == 0 {
        bail!("goal frequency {f_m} Hz rounds to period zero");
    }
    let error_hz = f_m - f_s / period as f64;
    Ok((period, error_hz))
}
