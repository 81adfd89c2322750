//! Standard CCA and PSDA reference classifiers.
//!
//! Standard CCA (Lin et al. 2006) scores each candidate stimulus frequency
//! by the maximum canonical correlation between the multichannel data and a
//! sinusoidal reference matrix holding the frequency and its harmonics; the
//! class with the largest correlation wins. PSDA scores each frequency by
//! the periodogram power in the bins nearest to it. Both serve as baselines
//! for the dictionary detector.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::{Error, Result};

/// Sinusoidal reference matrix: `2 N_h x L`, rows alternating
/// `sin(h w_m l / f_s)`, `cos(h w_m l / f_s)` for harmonics `h = 1..N_h`
/// and sample index `l = 1..L`, with `w_m = 2 pi f_m`.
#[derive(Debug, Clone)]
pub struct ReferenceMatrix {
    f_m: f64,
    n_h: usize,
    f_s: f64,
    q: DMatrix<f64>,
}

impl ReferenceMatrix {
    pub fn frequency(&self) -> f64 {
        self.f_m
    }

    pub fn harmonics(&self) -> usize {
        self.n_h
    }

    pub fn sample_rate(&self) -> f64 {
        self.f_s
    }

    /// The `2 N_h x L` matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.q.ncols() == 0
    }
}

/// Build the reference matrix for goal frequency `f_m` at sampling rate
/// `f_s` with `n_h` harmonics over `l` samples.
pub fn reference_matrix(f_m: f64, n_h: usize, f_s: f64, l: usize) -> Result<ReferenceMatrix> {
    if f_m <= 0.0 || f_s <= 0.0 {
        return Err(Error::invalid("frequencies must be positive"));
    }
    if n_h == 0 {
        return Err(Error::invalid("need at least one harmonic"));
    }
    if l == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let w_m = 2.0 * std::f64::consts::PI * f_m;
    let q = DMatrix::from_fn(2 * n_h, l, |row, col| {
        let h = (row / 2 + 1) as f64;
        let l_idx = (col + 1) as f64;
        let phase = h * w_m * l_idx / f_s;
        if row % 2 == 0 {
            phase.sin()
        } else {
            phase.cos()
        }
    });
    Ok(ReferenceMatrix { f_m, n_h, f_s, q })
}

fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for c in 0..out.ncols() {
        let mean = out.column(c).mean();
        for r in 0..out.nrows() {
            out[(r, c)] -= mean;
        }
    }
    out
}

/// Maximum canonical correlation between a multichannel observation
/// (`L x N_c`) and a reference matrix.
///
/// Both variates are column-centered; the auto-covariances get a
/// `1e-8 * trace / dim` ridge before whitening, and the correlation is the
/// largest singular value of the whitened cross-covariance.
pub fn cca_rho(y: &DMatrix<f64>, reference: &ReferenceMatrix) -> Result<f64> {
    let l = y.nrows();
    if reference.len() != l {
        return Err(Error::dims(format!(
            "observation has {l} samples, reference has {}",
            reference.len()
        )));
    }
    let n_c = y.ncols();
    let n_r = reference.matrix().nrows();
    if l <= n_c.max(n_r) {
        return Err(Error::invalid(format!(
            "need more samples than variates (L={l}, N_c={n_c}, 2N_h={n_r})"
        )));
    }

    let yc = center_columns(y);
    let rc = center_columns(&reference.matrix().transpose());

    let syy = yc.transpose() * &yc;
    let srr = rc.transpose() * &rc;
    let syr = yc.transpose() * &rc;

    let ridge = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let n = m.nrows();
        let trace = m.trace();
        if trace.is_nan() || trace <= 0.0 {
            return Err(Error::Numeric("zero-variance input to CCA".into()));
        }
        let mut out = m.clone();
        let eps = 1e-8 * trace / n as f64;
        for i in 0..n {
            out[(i, i)] += eps;
        }
        Ok(out)
    };

    let cy = Cholesky::new(ridge(&syy)?)
        .ok_or_else(|| Error::Numeric("CCA signal covariance not positive definite".into()))?;
    let cr = Cholesky::new(ridge(&srr)?)
        .ok_or_else(|| Error::Numeric("CCA reference covariance not positive definite".into()))?;

    // M = Ly^{-1} Syr Lr^{-T}; rho = sigma_max(M).
    let m1 = cy
        .l()
        .solve_lower_triangular(&syr)
        .ok_or_else(|| Error::Numeric("CCA whitening failed".into()))?;
    let m2 = cr
        .l()
        .solve_lower_triangular(&m1.transpose())
        .ok_or_else(|| Error::Numeric("CCA whitening failed".into()))?;
    let rho = m2.svd(false, false).singular_values.max();
    Ok(rho.clamp(0.0, 1.0))
}

/// Argmax of the canonical correlations over the class references; ties
/// break toward the smallest index.
pub fn cca_decide(y: &DMatrix<f64>, references: &[ReferenceMatrix]) -> Result<usize> {
    if references.is_empty() {
        return Err(Error::invalid("no reference matrices supplied"));
    }
    let mut best = 0usize;
    let mut best_rho = cca_rho(y, &references[0])?;
    for (m, reference) in references.iter().enumerate().skip(1) {
        let rho = cca_rho(y, reference)?;
        if rho > best_rho {
            best = m;
            best_rho = rho;
        }
    }
    Ok(best)
}

/// Periodogram power of the demeaned signal at DFT bin `k`.
fn periodogram_bin(y: &[f64], mean: f64, k: usize) -> f64 {
    let l = y.len() as f64;
    let w = -2.0 * std::f64::consts::PI * k as f64 / l;
    let mut re = 0.0;
    let mut im = 0.0;
    for (n, &v) in y.iter().enumerate() {
        let phase = w * n as f64;
        let x = v - mean;
        re += x * phase.cos();
        im += x * phase.sin();
    }
    (re * re + im * im) / l
}

/// Single-channel PSDA: score each goal frequency by the periodogram power
/// in the DFT bin nearest `f_m` plus its immediate neighbors, then take the
/// argmax (ties toward the smallest index).
pub fn psda_decide(y: &DVector<f64>, goal_frequencies: &[f64], f_s: f64) -> Result<usize> {
    if goal_frequencies.is_empty() {
        return Err(Error::invalid("no goal frequencies supplied"));
    }
    if f_s <= 0.0 {
        return Err(Error::invalid("sampling rate must be positive"));
    }
    let l = y.len();
    if l < 4 {
        return Err(Error::invalid("signal too short for a periodogram"));
    }
    let mean = y.mean();
    let data = y.as_slice();
    let half = l / 2;
    let mut best = 0usize;
    let mut best_power = f64::NEG_INFINITY;
    for (m, &f_m) in goal_frequencies.iter().enumerate() {
        if f_m <= 0.0 {
            return Err(Error::invalid("goal frequencies must be positive"));
        }
        let k = (f_m * l as f64 / f_s).round() as isize;
        let mut power = 0.0;
        for dk in -1..=1isize {
            let bin = k + dk;
            if bin >= 1 && bin as usize <= half {
                power += periodogram_bin(data, mean, bin as usize);
            }
        }
        if power > best_power {
            best = m;
            best_power = power;
        }
    }
    Ok(best)
}
