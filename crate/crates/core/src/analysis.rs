//! Analytic performance of the projection-energy test statistic.
//!
//! Under each hypothesis the two quadratic forms in the statistic are
//! (non)central chi-squared variables. When the observation length is the
//! lcm of the two periods the forms are independent and the statistic has an
//! exact density expressible through the Tricomi confluent hypergeometric
//! function (Press 1966); for arbitrary lengths the forms are correlated and
//! a moment-matched Gaussian model is used instead, with the cross
//! covariance of the forms available in closed form. On top of these
//! distributions sit the detection/false-alarm probabilities, the
//! Neyman-Pearson curve, the perfect measurement bound and its gap
//! approximation, and the error-exponent / discrimination-rate metrics.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::detector::ProjectionOperator;
use crate::{Error, Hypothesis, Result};

const LN_2PI: f64 = 1.8378770664093453;

// ---------------------------------------------------------------------------
// Gaussian tail helpers
// ---------------------------------------------------------------------------

/// Exact Q-function (standard normal tail) via the complementary error
/// function.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of the Q-function, polished to machine precision with Newton
/// steps on top of the library quantile.
pub fn q_inverse(alpha: f64) -> f64 {
    assert!(
        alpha > 0.0 && alpha < 1.0,
        "q_inverse requires alpha in (0, 1)"
    );
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut z = -normal.inverse_cdf(alpha);
    for _ in 0..3 {
        let err = q_function(z) - alpha;
        if err == 0.0 {
            break;
        }
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf <= f64::MIN_POSITIVE {
            break;
        }
        z += err / pdf;
    }
    z
}

/// Q-function approximation `exp(-x^2/2) / (sqrt(2 pi) sqrt(1 + x^2))`
/// (Borjesson & Sundberg 1979), used only inside the gap and error-exponent
/// derivations; everything else uses the exact [`q_function`].
pub fn q_approx(x: f64) -> f64 {
    assert!(x > 0.0, "q_approx requires x > 0");
    (-0.5 * x * x).exp() / ((2.0 * std::f64::consts::PI).sqrt() * (1.0 + x * x).sqrt())
}

// ---------------------------------------------------------------------------
// Signal-to-noise ratio and chi-squared parameters
// ---------------------------------------------------------------------------

/// Per-sample signal-to-noise ratio `||K_S x_S||^2 / (sigma^2 L)`.
pub fn snr(x_s: &DVector<f64>, k_s: &DMatrix<f64>, sigma2: f64, l: usize) -> Result<f64> {
    if sigma2 <= 0.0 {
        return Err(Error::invalid("snr requires sigma2 > 0"));
    }
    if l == 0 {
        return Err(Error::invalid("snr requires L > 0"));
    }
    if k_s.ncols() != x_s.len() {
        return Err(Error::dims(format!(
            "coefficient length {} does not match dictionary width {}",
            x_s.len(),
            k_s.ncols()
        )));
    }
    Ok((k_s * x_s).norm_squared() / (sigma2 * l as f64))
}

/// Degrees of freedom, non-centrality parameters and the cross-covariance
/// base term of the two quadratic forms.
///
/// `cross_cov_base` is `sum_ij c_ij` for `C = A .* B` (element-wise
/// product), computed as `||U_A' U_B||_F^2` from the operator bases.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareParams {
    pub r_a: usize,
    pub r_b: usize,
    pub lambda2_0a: f64,
    pub lambda2_0b: f64,
    pub lambda2_1a: f64,
    pub lambda2_1b: f64,
    pub cross_cov_base: f64,
}

impl ChiSquareParams {
    /// Non-centrality of the A form (`operator_b = false`) or B form under
    /// the given hypothesis.
    pub fn lambda2(&self, hyp: Hypothesis, operator_b: bool) -> f64 {
        match (hyp, operator_b) {
            (Hypothesis::H0, false) => self.lambda2_0a,
            (Hypothesis::H0, true) => self.lambda2_0b,
            (Hypothesis::H1, false) => self.lambda2_1a,
            (Hypothesis::H1, true) => self.lambda2_1b,
        }
    }

    /// True when the cross non-centralities vanish, i.e. the parameters
    /// describe the orthogonal (difference-set) configuration.
    pub fn is_orthogonal(&self) -> bool {
        let scale = 1.0 + self.lambda2_0a.max(self.lambda2_1b);
        self.lambda2_1a.abs() <= 1e-8 * scale && self.lambda2_0b.abs() <= 1e-8 * scale
    }
}

/// Compute the chi-squared parameters of `y' A y` and `y' B y` for the two
/// hypothesis means `K_S0 x_0` and `K_S1 x_1`.
pub fn chi_params(
    x_s0: &DVector<f64>,
    x_s1: &DVector<f64>,
    k_s0: &DMatrix<f64>,
    k_s1: &DMatrix<f64>,
    a: &ProjectionOperator,
    b: &ProjectionOperator,
) -> Result<ChiSquareParams> {
    if k_s0.ncols() != x_s0.len() || k_s1.ncols() != x_s1.len() {
        return Err(Error::dims(
            "coefficients do not match restricted dictionaries",
        ));
    }
    if k_s0.nrows() != a.dim() || k_s1.nrows() != a.dim() || a.dim() != b.dim() {
        return Err(Error::dims("operator and dictionary lengths differ"));
    }
    let mu0 = k_s0 * x_s0;
    let mu1 = k_s1 * x_s1;
    let cross = (a.basis().transpose() * b.basis()).norm_squared();
    Ok(ChiSquareParams {
        r_a: a.rank(),
        r_b: b.rank(),
        lambda2_0a: a.energy(&mu0)?,
        lambda2_0b: b.energy(&mu0)?,
        lambda2_1a: a.energy(&mu1)?,
        lambda2_1b: b.energy(&mu1)?,
        cross_cov_base: cross,
    })
}

// ---------------------------------------------------------------------------
// Confluent hypergeometric function (Tricomi integral form)
// ---------------------------------------------------------------------------

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    let scale = whole.abs().max(1e-300);
    recurse(f, a, b, fa, fm, fb, whole, tol * scale, 18)
}

/// `ln(1 + e^v)`, stable for large `v`.
fn ln1p_exp(v: f64) -> f64 {
    if v > 34.0 {
        v + (-v).exp()
    } else {
        v.exp().ln_1p()
    }
}

/// Natural log of the Tricomi-type integral
/// `psi(a, b; x) = Gamma(a)^{-1} int_0^inf e^{-xt} t^{a-1} (1+t)^{b-a-1} dt`.
///
/// Substituting `t = e^v` maps the head `(0, 1]` to `v <= 0` and the tail
/// `(1, inf)` to `v > 0`; the transformed integrand `exp(g(v))` with
/// `g(v) = -x e^v + a v + (b-a-1) ln(1+e^v)` absorbs the `t^{a-1}` endpoint
/// singularity into exponential decay and is unimodal in `v`. The quadrature
/// locates the mode, walks outward until the integrand has dropped 75 nats,
/// and integrates segment-by-segment in shifted log space, so neither sharp
/// peaks nor extreme parameter magnitudes can defeat it.
pub fn ln_confluent_psi(a: f64, b: f64, x: f64) -> Result<f64> {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(a) || !positive(x) || !b.is_finite() {
        return Err(Error::invalid(format!(
            "psi requires a > 0 and x > 0 (got a={a}, b={b}, x={x})"
        )));
    }
    let pow = b - a - 1.0;
    let g = |v: f64| -x * v.exp() + a * v + pow * ln1p_exp(v);
    // g'(v) = a + pow * sigmoid(v) - x e^v, positive at -inf, one root.
    let dg = |v: f64| {
        let sig = 1.0 / (1.0 + (-v).exp());
        a + pow * sig - x * v.exp()
    };

    // Bracket and bisect the mode.
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    if dg(0.0) > 0.0 {
        hi = 1.0;
        while dg(hi) > 0.0 && hi < 800.0 {
            lo = hi;
            hi *= 2.0;
        }
    } else {
        lo = -1.0;
        while dg(lo) <= 0.0 && lo > -800.0 {
            hi = lo;
            lo *= 2.0;
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if dg(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v_peak = 0.5 * (lo + hi);
    let g_peak = g(v_peak);

    // Walk outward until the integrand is negligible relative to the peak.
    let drop = 75.0;
    let step = 0.5;
    let mut v_lo = v_peak;
    while g(v_lo) > g_peak - drop && v_lo > v_peak - 2000.0 {
        v_lo -= step;
    }
    let mut v_hi = v_peak;
    while g(v_hi) > g_peak - drop && v_hi < v_peak + 2000.0 {
        v_hi += step;
    }

    // Composite adaptive integration of exp(g - g_peak) over the bracket;
    // per-segment relative tolerances keep narrow peaks resolved.
    let segments = (((v_hi - v_lo) / step).ceil() as usize).max(2);
    let h = (v_hi - v_lo) / segments as f64;
    let mut total = 0.0;
    for k in 0..segments {
        let s0 = v_lo + h * k as f64;
        let s1 = s0 + h;
        total += adaptive_simpson(&|v: f64| (g(v) - g_peak).exp(), s0, s1, 1e-11);
    }
    if total.is_nan() || total <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(g_peak + total.ln() - ln_gamma(a))
}

/// The Tricomi-type integral itself, to a relative accuracy of about 1e-8.
pub fn confluent_psi(a: f64, b: f64, x: f64) -> Result<f64> {
    Ok(ln_confluent_psi(a, b, x)?.exp())
}

// ---------------------------------------------------------------------------
// Exact series density of the statistic (orthogonal case)
// ---------------------------------------------------------------------------

/// Log density of the difference of two independent central chi-squared
/// variables with `a` (positive part) and `b` (negative part) degrees of
/// freedom, evaluated at `t`.
fn ln_p_ab(a: f64, b: f64, t: f64) -> Result<f64> {
    let half_sum = 0.5 * (a + b);
    if t >= 0.0 {
        let psi = ln_confluent_psi(0.5 * b, half_sum, t)?;
        Ok(
            -half_sum * std::f64::consts::LN_2 - ln_gamma(0.5 * a) + (half_sum - 1.0) * t.ln()
                - 0.5 * t
                + psi,
        )
    } else {
        let psi = ln_confluent_psi(0.5 * a, half_sum, -t)?;
        Ok(-half_sum * std::f64::consts::LN_2 - ln_gamma(0.5 * b)
            + (half_sum - 1.0) * (-t).ln()
            + 0.5 * t
            + psi)
    }
}

/// Exact density of the statistic under the orthogonal configuration: a
/// Poisson-weighted mixture of central-difference densities, truncated when
/// the accumulated Poisson mass exceeds `1 - tol`.
///
/// Requires orthogonal-case parameters (`lambda2_1a = lambda2_0b = 0`); the
/// ranks in `params` are then the difference-set ranks.
pub fn exact_pdf(t: f64, params: &ChiSquareParams, hyp: Hypothesis, tol: f64) -> Result<f64> {
    if !params.is_orthogonal() {
        return Err(Error::invalid(
            "exact_pdf requires orthogonal-case parameters (zero cross non-centralities)",
        ));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid("series tolerance must lie in (0, 1)"));
    }
    // The density is continuous away from 0 and the branches agree in the
    // limit; evaluate just off the origin to keep the psi argument positive.
    let t = if t.abs() < 1e-6 {
        if t >= 0.0 {
            1e-6
        } else {
            -1e-6
        }
    } else {
        t
    };
    let (lambda2, r_a, r_b) = match hyp {
        Hypothesis::H0 => (params.lambda2_0a, params.r_a as f64, params.r_b as f64),
        Hypothesis::H1 => (params.lambda2_1b, params.r_a as f64, params.r_b as f64),
    };
    let rate = 0.5 * lambda2;
    let mut weight = (-rate).exp();
    let mut cum = 0.0;
    let mut density = 0.0;
    let mut i = 0usize;
    loop {
        if weight > 0.0 {
            let ln_p = match hyp {
                Hypothesis::H1 => ln_p_ab(r_b + 2.0 * i as f64, r_a, t)?,
                Hypothesis::H0 => ln_p_ab(r_b, r_a + 2.0 * i as f64, t)?,
            };
            if ln_p > f64::NEG_INFINITY {
                density += weight * ln_p.exp();
            }
        }
        cum += weight;
        if cum >= 1.0 - tol || i > 100_000 {
            break;
        }
        i += 1;
        weight *= rate / i as f64;
    }
    Ok(density.max(0.0))
}

/// Tabulated CDF of the exact series density, built by composite Simpson
/// integration over a span wide enough to hold all practical mass.
#[derive(Debug, Clone)]
pub struct ExactCdfTable {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    total: f64,
}

impl ExactCdfTable {
    /// Integrate the exact pdf for the hypothesis over twelve Gaussian
    /// standard deviations either side of the surrogate mean, on `panels`
    /// Simpson panels.
    pub fn build(
        params: &ChiSquareParams,
        hyp: Hypothesis,
        tol: f64,
        panels: usize,
    ) -> Result<Self> {
        let (h0, h1) = gaussian_orthogonal(params)?;
        let (mean, var) = match hyp {
            Hypothesis::H0 => h0.gaussian_moments()?,
            Hypothesis::H1 => h1.gaussian_moments()?,
        };
        let sd = var.sqrt();
        let lo = mean - 12.0 * sd;
        let hi = mean + 12.0 * sd;
        let n = panels.max(64);
        let h = (hi - lo) / n as f64;

        use rayon::prelude::*;
        let pdf_at: Vec<f64> = (0..=2 * n)
            .into_par_iter()
            .map(|k| exact_pdf(lo + 0.5 * h * k as f64, params, hyp, tol).unwrap_or(0.0))
            .collect();

        let mut grid = Vec::with_capacity(n + 1);
        let mut cdf = Vec::with_capacity(n + 1);
        grid.push(lo);
        cdf.push(0.0);
        let mut acc = 0.0;
        for p in 0..n {
            let fa = pdf_at[2 * p];
            let fm = pdf_at[2 * p + 1];
            let fb = pdf_at[2 * p + 2];
            acc += h / 6.0 * (fa + 4.0 * fm + fb);
            grid.push(lo + h * (p + 1) as f64);
            cdf.push(acc);
        }
        Ok(ExactCdfTable {
            grid,
            cdf,
            total: acc,
        })
    }

    /// Total integrated mass (1 within the series/quadrature tolerance).
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// CDF value by linear interpolation on the table.
    pub fn cdf(&self, t: f64) -> f64 {
        let n = self.grid.len();
        if t <= self.grid[0] {
            return 0.0;
        }
        if t >= self.grid[n - 1] {
            return self.total;
        }
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.grid[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = (t - self.grid[lo]) / (self.grid[hi] - self.grid[lo]);
        self.cdf[lo] + w * (self.cdf[hi] - self.cdf[lo])
    }

    /// Tail probability `P(statistic > t)`.
    pub fn tail(&self, t: f64) -> f64 {
        (self.total - self.cdf(t)).clamp(0.0, 1.0)
    }
}

// ---------------------------------------------------------------------------
// Gaussian models of the statistic
// ---------------------------------------------------------------------------

/// Distribution model of the test statistic under one hypothesis.
#[derive(Debug, Clone)]
pub enum StatisticDistribution {
    Gaussian {
        mean: f64,
        variance: f64,
    },
    ExactSeries {
        params: ChiSquareParams,
        hypothesis: Hypothesis,
        tol: f64,
    },
}

impl StatisticDistribution {
    pub fn gaussian_moments(&self) -> Result<(f64, f64)> {
        match self {
            StatisticDistribution::Gaussian { mean, variance } => Ok((*mean, *variance)),
            _ => Err(Error::invalid("not a Gaussian distribution")),
        }
    }

    /// Density at `t`.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        match self {
            StatisticDistribution::Gaussian { mean, variance } => {
                let z = (t - mean) / variance.sqrt();
                Ok((-0.5 * z * z - 0.5 * (variance.ln() + LN_2PI)).exp())
            }
            StatisticDistribution::ExactSeries {
                params,
                hypothesis,
                tol,
            } => exact_pdf(t, params, *hypothesis, *tol),
        }
    }

    /// Tail probability `P(statistic > gamma)`. The exact-series branch
    /// integrates the density numerically.
    pub fn tail(&self, gamma: f64) -> Result<f64> {
        match self {
            StatisticDistribution::Gaussian { mean, variance } => {
                Ok(q_function((gamma - mean) / variance.sqrt()))
            }
            StatisticDistribution::ExactSeries {
                params,
                hypothesis,
                tol,
            } => {
                let table = ExactCdfTable::build(params, *hypothesis, *tol, 1024)?;
                Ok(table.tail(gamma))
            }
        }
    }

    /// Quantile of a Gaussian model at upper-tail probability `p`, i.e. the
    /// `gamma` with `tail(gamma) = p`.
    pub fn tail_quantile(&self, p: f64) -> Result<f64> {
        let (mean, variance) = self.gaussian_moments()?;
        Ok(mean + q_inverse(p) * variance.sqrt())
    }
}

/// Gaussian approximations for the orthogonal configuration: moment-matched
/// to the (non)central chi-squared difference under each hypothesis.
pub fn gaussian_orthogonal(
    params: &ChiSquareParams,
) -> Result<(StatisticDistribution, StatisticDistribution)> {
    if !params.is_orthogonal() {
        return Err(Error::invalid(
            "gaussian_orthogonal requires orthogonal-case parameters",
        ));
    }
    let base = (params.r_b as f64) - (params.r_a as f64);
    let spread = 2.0 * (params.r_b + params.r_a) as f64;
    let h0 = StatisticDistribution::Gaussian {
        mean: base - params.lambda2_0a,
        variance: spread + 4.0 * params.lambda2_0a,
    };
    let h1 = StatisticDistribution::Gaussian {
        mean: base + params.lambda2_1b,
        variance: spread + 4.0 * params.lambda2_1b,
    };
    Ok((h0, h1))
}

/// Covariance of the two quadratic forms under the given hypothesis:
/// `4 lambda2_{0,B} + 2 sum c_ij` under H0 and `4 lambda2_{1,A} + 2 sum c_ij`
/// under H1, with `C = A .* B`.
pub fn cross_covariance(params: &ChiSquareParams, hyp: Hypothesis) -> f64 {
    let base = 2.0 * params.cross_cov_base;
    match hyp {
        Hypothesis::H0 => 4.0 * params.lambda2_0b + base,
        Hypothesis::H1 => 4.0 * params.lambda2_1a + base,
    }
}

/// Moment-matched Gaussian model for arbitrary observation length, with the
/// cross covariance of the correlated quadratic forms folded into the
/// variances.
pub fn gaussian_general(
    params: &ChiSquareParams,
) -> Result<(StatisticDistribution, StatisticDistribution)> {
    let base = (params.r_b as f64) - (params.r_a as f64);
    let mean0 = base + params.lambda2_0b - params.lambda2_0a;
    let mean1 = base + params.lambda2_1b - params.lambda2_1a;
    let var0 = 2.0 * (params.r_b as f64 + 2.0 * params.lambda2_0b)
        + 2.0 * (params.r_a as f64 + 2.0 * params.lambda2_0a)
        - 2.0 * cross_covariance(params, Hypothesis::H0);
    let var1 = 2.0 * (params.r_b as f64 + 2.0 * params.lambda2_1b)
        + 2.0 * (params.r_a as f64 + 2.0 * params.lambda2_1a)
        - 2.0 * cross_covariance(params, Hypothesis::H1);
    if var0 <= 0.0 || var1 <= 0.0 {
        return Err(Error::Numeric(format!(
            "degenerate geometry: nonpositive variance ({var0}, {var1})"
        )));
    }
    Ok((
        StatisticDistribution::Gaussian {
            mean: mean0,
            variance: var0,
        },
        StatisticDistribution::Gaussian {
            mean: mean1,
            variance: var1,
        },
    ))
}

// ---------------------------------------------------------------------------
// Detection probabilities and bounds
// ---------------------------------------------------------------------------

/// `(P_D, P_F)` at threshold `gamma` for a pair of hypothesis distributions.
pub fn pd_pf(
    gamma: f64,
    h0: &StatisticDistribution,
    h1: &StatisticDistribution,
) -> Result<(f64, f64)> {
    Ok((h1.tail(gamma)?, h0.tail(gamma)?))
}

/// Neyman-Pearson detection probability at false-alarm level `alpha` under
/// the general Gaussian model: the threshold comes from the inverse Q under
/// H0, the detection probability from the H1 tail.
pub fn np_pd(alpha: f64, params: &ChiSquareParams) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let sum_r = 2.0 * (params.r_b + params.r_a) as f64;
    let four_c = 4.0 * params.cross_cov_base;
    let var0 = sum_r + 4.0 * (params.lambda2_0a - params.lambda2_0b) - four_c;
    let var1 = sum_r + 4.0 * (params.lambda2_1b - params.lambda2_1a) - four_c;
    if var0 <= 0.0 || var1 <= 0.0 {
        return Err(Error::Numeric("nonpositive variance in np_pd".into()));
    }
    let numer = q_inverse(alpha) * var0.sqrt() + params.lambda2_0b + params.lambda2_1a
        - params.lambda2_0a
        - params.lambda2_1b;
    Ok(q_function(numer / var1.sqrt()))
}

/// Squared deflection of the known-signal (perfect measurement) test:
/// `||K_S1 x_1 - K_S0 x_0||^2` expanded through its four quadratic terms.
pub fn pmb_deflection_squared(
    x_s0: &DVector<f64>,
    x_s1: &DVector<f64>,
    k_s0: &DMatrix<f64>,
    k_s1: &DMatrix<f64>,
) -> Result<f64> {
    if k_s0.ncols() != x_s0.len() || k_s1.ncols() != x_s1.len() {
        return Err(Error::dims("coefficient/dictionary mismatch"));
    }
    if k_s0.nrows() != k_s1.nrows() {
        return Err(Error::dims("dictionaries have different lengths"));
    }
    let mu0 = k_s0 * x_s0;
    let mu1 = k_s1 * x_s1;
    let d2 = mu1.dot(&mu1) + mu0.dot(&mu0) - mu1.dot(&mu0) - mu0.dot(&mu1);
    Ok(d2.max(0.0))
}

/// Perfect measurement bound: the detection probability of the hypothetical
/// detector that knows both signal representations, at false-alarm `alpha`.
pub fn pmb_pd(
    alpha: f64,
    x_s0: &DVector<f64>,
    x_s1: &DVector<f64>,
    k_s0: &DMatrix<f64>,
    k_s1: &DMatrix<f64>,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let d2 = pmb_deflection_squared(x_s0, x_s1, k_s0, k_s1)?;
    Ok(q_function(q_inverse(alpha) - d2.sqrt()))
}

/// Closed-form large-`L SNR` approximation of the gap between the perfect
/// measurement bound and the detector's detection probability.
pub fn gap(l: usize, snr: f64) -> f64 {
    let ls = l as f64 * snr;
    assert!(ls > 0.0, "gap requires L * SNR > 0");
    let e = (-0.5 * ls).exp();
    e * (std::f64::consts::SQRT_2 - e) / (2.0 * std::f64::consts::PI.sqrt() * ls.sqrt())
}

/// `|log gap| / (L SNR)`, whose limit is the gap's exponential decay rate.
pub fn gap_log_ratio(l: usize, snr: f64) -> f64 {
    let ls = l as f64 * snr;
    gap(l, snr).ln().abs() / ls
}

/// High-SNR closed form of the binary error probability at the maximum-
/// likelihood threshold.
pub fn p_e_binary(l: usize, snr: f64) -> f64 {
    let ls = l as f64 * snr;
    assert!(ls > 0.0, "p_e_binary requires L * SNR > 0");
    (-ls / 8.0).exp() / ((2.0 * std::f64::consts::PI).sqrt() * (ls / 4.0).sqrt())
}

// ---------------------------------------------------------------------------
// Empirical error accounting
// ---------------------------------------------------------------------------

/// Square count matrix of (true class, decided class) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    m: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(m: usize) -> Self {
        ConfusionMatrix {
            m,
            counts: vec![0; m * m],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.m
    }

    pub fn record(&mut self, true_class: usize, decided: usize) {
        self.counts[true_class * self.m + decided] += 1;
    }

    pub fn count(&self, true_class: usize, decided: usize) -> u64 {
        self.counts[true_class * self.m + decided]
    }

    pub fn row_total(&self, true_class: usize) -> u64 {
        (0..self.m).map(|j| self.count(true_class, j)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn errors(&self) -> u64 {
        self.total() - (0..self.m).map(|i| self.count(i, i)).sum::<u64>()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return f64::NAN;
        }
        1.0 - self.errors() as f64 / total as f64
    }
}

/// Average error probability: the mean over classes of the per-class
/// misclassification fraction. Errors on classes with no recorded trials.
pub fn p_e_average(confusion: &ConfusionMatrix) -> Result<f64> {
    let m = confusion.n_classes();
    if m == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let mut sum = 0.0;
    for i in 0..m {
        let total = confusion.row_total(i);
        if total == 0 {
            return Err(Error::invalid(format!("class {i} has no recorded trials")));
        }
        sum += 1.0 - confusion.count(i, i) as f64 / total as f64;
    }
    Ok(sum / m as f64)
}

/// Empirical error probability with the zero-error floor `1 / (2 trials)`:
/// a finite experiment cannot certify a zero error rate, and the floor keeps
/// the error exponent finite.
pub fn empirical_error_probability(errors: u64, trials: u64) -> f64 {
    assert!(trials > 0, "empirical error probability needs trials > 0");
    if errors == 0 {
        1.0 / (2.0 * trials as f64)
    } else {
        errors as f64 / trials as f64
    }
}

/// Error exponent `-log(P_e) / (L SNR)`.
pub fn error_exponent(p_e: f64, l: usize, snr: f64) -> f64 {
    assert!(
        p_e > 0.0 && p_e <= 1.0,
        "error exponent requires P_e in (0, 1]"
    );
    let ls = l as f64 * snr;
    assert!(ls > 0.0, "error exponent requires L * SNR > 0");
    -p_e.ln() / ls
}

/// Information transfer rate in bits per minute for `m` classes, accuracy
/// `a` and decision window `t_secs` seconds, with the `0 log 0 = 0`
/// convention at the accuracy endpoints.
pub fn itr(m: usize, a: f64, t_secs: f64) -> f64 {
    assert!(m >= 2, "itr requires at least two classes");
    assert!((0.0..=1.0).contains(&a), "accuracy must lie in [0, 1]");
    assert!(t_secs > 0.0, "window must be positive");
    let m_f = m as f64;
    let mut bits = m_f.log2();
    if a > 0.0 {
        bits += a * a.log2();
    }
    if a < 1.0 {
        bits += (1.0 - a) * ((1.0 - a) / (m_f - 1.0)).log2();
    }
    bits * 60.0 / t_secs
}

// ---------------------------------------------------------------------------
// ROC curves
// ---------------------------------------------------------------------------

/// Where a ROC curve's probabilities came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RocSource {
    Exact,
    Gaussian,
    Empirical,
}

/// One operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub gamma: f64,
    pub p_f: f64,
    pub p_d: f64,
}

/// An ordered ROC curve (`p_f` nondecreasing along the list).
#[derive(Debug, Clone)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub source: RocSource,
}

impl RocCurve {
    /// Threshold grid from the union of upper-tail quantiles of the two
    /// Gaussian models; resolves both tails better than a linear grid.
    pub fn quantile_gamma_grid(
        h0: &StatisticDistribution,
        h1: &StatisticDistribution,
        n: usize,
    ) -> Result<Vec<f64>> {
        let per = n / 2 + 1;
        let mut gammas = Vec::with_capacity(2 * per);
        for i in 0..per {
            let p = (i as f64 + 0.5) / per as f64;
            gammas.push(h0.tail_quantile(p)?);
            gammas.push(h1.tail_quantile(p)?);
        }
        gammas.sort_by(|a, b| a.partial_cmp(b).expect("finite gammas"));
        gammas.dedup();
        while gammas.len() > n {
            // Trim alternately from the ends to hit the requested count.
            if gammas.len() % 2 == 0 {
                gammas.pop();
            } else {
                gammas.remove(0);
            }
        }
        Ok(gammas)
    }

    /// Analytic ROC from a pair of Gaussian models.
    pub fn from_gaussian(
        h0: &StatisticDistribution,
        h1: &StatisticDistribution,
        n: usize,
    ) -> Result<Self> {
        let gammas = Self::quantile_gamma_grid(h0, h1, n)?;
        let mut points = Vec::with_capacity(gammas.len());
        for &gamma in gammas.iter().rev() {
            let (p_d, p_f) = pd_pf(gamma, h0, h1)?;
            points.push(RocPoint { gamma, p_f, p_d });
        }
        Ok(RocCurve {
            points,
            source: RocSource::Gaussian,
        })
    }

    /// Analytic ROC by numerical integration of the exact series densities.
    pub fn from_exact(params: &ChiSquareParams, tol: f64, n: usize) -> Result<Self> {
        let (g0, g1) = gaussian_orthogonal(params)?;
        let gammas = Self::quantile_gamma_grid(&g0, &g1, n)?;
        let t0 = ExactCdfTable::build(params, Hypothesis::H0, tol, 1024)?;
        let t1 = ExactCdfTable::build(params, Hypothesis::H1, tol, 1024)?;
        let mut points = Vec::with_capacity(gammas.len());
        for &gamma in gammas.iter().rev() {
            points.push(RocPoint {
                gamma,
                p_f: t0.tail(gamma),
                p_d: t1.tail(gamma),
            });
        }
        Ok(RocCurve {
            points,
            source: RocSource::Exact,
        })
    }

    /// True when both coordinates are nondecreasing along the curve.
    pub fn is_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].p_f >= w[0].p_f - 1e-12 && w[1].p_d >= w[0].p_d - 1e-12)
    }

    /// Interpolated detection probability at false-alarm level `p_f`.
    pub fn pd_at_pf(&self, p_f: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return f64::NAN;
        }
        if p_f <= pts[0].p_f {
            return pts[0].p_d;
        }
        if p_f >= pts[pts.len() - 1].p_f {
            return pts[pts.len() - 1].p_d;
        }
        for w in pts.windows(2) {
            if p_f >= w[0].p_f && p_f <= w[1].p_f {
                let span = w[1].p_f - w[0].p_f;
                if span <= 0.0 {
                    return 0.5 * (w[0].p_d + w[1].p_d);
                }
                let t = (p_f - w[0].p_f) / span;
                return w[0].p_d + t * (w[1].p_d - w[0].p_d);
            }
        }
        f64::NAN
    }
}

// ---------------------------------------------------------------------------
// Small statistics utilities shared by the harnesses and tests
// ---------------------------------------------------------------------------

/// Sample mean and unbiased variance.
pub fn sample_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One-sided two-proportion z statistic for `p1 > p2` (pooled variance).
pub fn two_proportion_z(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let p1 = x1 as f64 / n1 as f64;
    let p2 = x2 as f64 / n2 as f64;
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (p1 - p2) / se
}

/// Ordinary least squares line fit; returns `(slope, intercept, r_squared)`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{orthogonal_operators, ProjectionOperator};
    use crate::ramanujan::DictionaryMatrix;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn snr_definition() {
        let dict = DictionaryMatrix::build(4, 16).unwrap();
        let s = dict.support_set(4).unwrap();
        let k_s = dict.restrict(&s).unwrap();
        let zero = DVector::zeros(4);
        assert_abs_diff_eq!(snr(&zero, &k_s, 1.0, 16).unwrap(), 0.0);

        // Rescale a coefficient vector so the signal energy equals L.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = randn_vec(4, &mut rng);
        let energy = (&k_s * &x).norm_squared();
        let x = x * (16.0 / energy).sqrt();
        assert_abs_diff_eq!(snr(&x, &k_s, 1.0, 16).unwrap(), 1.0, epsilon = 1e-12);

        // Quadratic in the coefficient scale.
        let s1 = snr(&x, &k_s, 1.0, 16).unwrap();
        let s3 = snr(&(x * 3.0), &k_s, 1.0, 16).unwrap();
        assert_abs_diff_eq!(s3, 9.0 * s1, epsilon = 1e-9);

        assert!(snr(&zero, &k_s, 0.0, 16).is_err());
    }

    #[test]
    fn psi_closed_form_and_quadrature() {
        // psi(a, a+1; x) = x^{-a}; the (1, 2; 2) case gives 1/2.
        assert_abs_diff_eq!(confluent_psi(1.0, 2.0, 2.0).unwrap(), 0.5, epsilon = 1e-8);
        for &(a, x) in &[(0.5f64, 1.5f64), (2.0, 3.0), (5.0, 0.7)] {
            let expected = x.powf(-a);
            let got = confluent_psi(a, a + 1.0, x).unwrap();
            assert_abs_diff_eq!(got, expected, epsilon = 1e-7 * expected);
        }

        // Independent quadrature oracle for psi(1, 1; 1): trapezoid on a
        // fine fixed grid of e^{-t} / (1 + t).
        let mut acc = 0.0f64;
        let h = 1e-4f64;
        let mut t = 0.0f64;
        while t < 60.0 {
            let f0 = (-t).exp() / (1.0 + t);
            let f1 = (-(t + h)).exp() / (1.0 + t + h);
            acc += 0.5 * h * (f0 + f1);
            t += h;
        }
        assert_abs_diff_eq!(confluent_psi(1.0, 1.0, 1.0).unwrap(), acc, epsilon = 1e-6);
        assert_abs_diff_eq!(
            confluent_psi(1.0, 1.0, 1.0).unwrap(),
            0.596_347_4,
            epsilon = 1e-6
        );

        // Decreasing in x for fixed (a, b).
        let xs = [0.5, 1.0, 2.0, 4.0, 8.0];
        for w in xs.windows(2) {
            assert!(
                confluent_psi(1.5, 3.0, w[0]).unwrap() > confluent_psi(1.5, 3.0, w[1]).unwrap()
            );
        }

        assert!(confluent_psi(-1.0, 1.0, 1.0).is_err());
        assert!(confluent_psi(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn p_ab_matches_laplace_special_case() {
        // a = b = 2: difference of two Exp(1/2) variables is Laplace with
        // scale 2, density e^{-|t|/2} / 4.
        for &t in &[-3.0f64, -1.0, 0.5, 2.0, 5.0] {
            let expected = (-0.5 * t.abs()).exp() / 4.0;
            let got = ln_p_ab(2.0, 2.0, t).unwrap().exp();
            assert_abs_diff_eq!(got, expected, epsilon = 1e-8 * expected);
        }
    }

    fn lcm_params(t0: usize, t1: usize, snr_target: f64, seed: u64) -> ChiSquareParams {
        let l = crate::ramanujan::lcm(t0, t1);
        let dict = DictionaryMatrix::build(t0.max(t1), l).unwrap();
        let k0 = dict.restrict(&dict.support_set(t0).unwrap()).unwrap();
        let k1 = dict.restrict(&dict.support_set(t1).unwrap()).unwrap();
        let (a, b) = orthogonal_operators(&dict, t0, t1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x0 = randn_vec(k0.ncols(), &mut rng);
        let mut x1 = randn_vec(k1.ncols(), &mut rng);
        x0 *= (snr_target * l as f64 / (&k0 * &x0).norm_squared()).sqrt();
        x1 *= (snr_target * l as f64 / (&k1 * &x1).norm_squared()).sqrt();
        chi_params(&x0, &x1, &k0, &k1, &a, &b).unwrap()
    }

    #[test]
    fn chi_params_rank_and_noncentrality() {
        // Zero signals: ranks only.
        let dict = DictionaryMatrix::build(10, 40).unwrap();
        let k0 = dict.restrict(&dict.support_set(10).unwrap()).unwrap();
        let k1 = dict.restrict(&dict.support_set(8).unwrap()).unwrap();
        let a = ProjectionOperator::from_matrix(&k0).unwrap();
        let b = ProjectionOperator::from_matrix(&k1).unwrap();
        let p = chi_params(&DVector::zeros(10), &DVector::zeros(8), &k0, &k1, &a, &b).unwrap();
        assert_eq!((p.r_a, p.r_b), (10, 8));
        assert_eq!(p.lambda2_0a, 0.0);
        assert_eq!(p.lambda2_1b, 0.0);

        // lambda2_{0,A} = L * SNR_0 at sigma^2 = 1 (full-support operators).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x0 = randn_vec(10, &mut rng);
        let l = 40.0;
        let target = 0.05;
        x0 *= (target * l / (&k0 * &x0).norm_squared()).sqrt();
        let p = chi_params(&x0, &DVector::zeros(8), &k0, &k1, &a, &b).unwrap();
        assert_abs_diff_eq!(p.lambda2_0a, l * target, epsilon = 1e-9);

        // Orthogonal configuration: cross non-centralities vanish.
        let p = lcm_params(10, 8, 0.05, 3);
        assert!(p.is_orthogonal());
        assert_eq!((p.r_a, p.r_b), (8, 6));
        assert!(p.lambda2_1a.abs() < 1e-9);
        assert!(p.lambda2_0b.abs() < 1e-9);
    }

    #[test]
    fn exact_pdf_symmetry_and_normalization() {
        // Central case with equal ranks: even density.
        let params = ChiSquareParams {
            r_a: 6,
            r_b: 6,
            lambda2_0a: 0.0,
            lambda2_0b: 0.0,
            lambda2_1a: 0.0,
            lambda2_1b: 0.0,
            cross_cov_base: 0.0,
        };
        for &t in &[0.5, 1.5, 4.0, 9.0] {
            let f_pos = exact_pdf(t, &params, Hypothesis::H0, 1e-10).unwrap();
            let f_neg = exact_pdf(-t, &params, Hypothesis::H0, 1e-10).unwrap();
            assert_abs_diff_eq!(f_pos, f_neg, epsilon = 1e-8);
        }

        // Normalization for a non-central configuration.
        let params = lcm_params(10, 8, 0.05, 4);
        for hyp in [Hypothesis::H0, Hypothesis::H1] {
            let table = ExactCdfTable::build(&params, hyp, 1e-10, 1024).unwrap();
            assert!(
                (table.total_mass() - 1.0).abs() < 1e-3,
                "mass {}",
                table.total_mass()
            );
        }

        // Non-orthogonal parameters are rejected.
        let mut bad = params.clone();
        bad.lambda2_1a = 1.0;
        assert!(exact_pdf(0.0, &bad, Hypothesis::H0, 1e-10).is_err());
    }

    #[test]
    fn gaussian_orthogonal_moments() {
        let params = ChiSquareParams {
            r_a: 5,
            r_b: 5,
            lambda2_0a: 0.0,
            lambda2_0b: 0.0,
            lambda2_1a: 0.0,
            lambda2_1b: 0.0,
            cross_cov_base: 0.0,
        };
        let (h0, h1) = gaussian_orthogonal(&params).unwrap();
        assert_eq!(h0.gaussian_moments().unwrap(), (0.0, 20.0));
        assert_eq!(h1.gaussian_moments().unwrap(), (0.0, 20.0));

        let params = lcm_params(10, 8, 0.05, 5);
        let (h0, h1) = gaussian_orthogonal(&params).unwrap();
        let (m0, _) = h0.gaussian_moments().unwrap();
        let (m1, _) = h1.gaussian_moments().unwrap();
        assert_abs_diff_eq!(
            m1 - m0,
            params.lambda2_0a + params.lambda2_1b,
            epsilon = 1e-9
        );
    }

    #[test]
    fn cross_covariance_identities() {
        // A = B: the formula must reduce to the variance of y' A y.
        let dict = DictionaryMatrix::build(8, 32).unwrap();
        let k = dict.restrict(&dict.support_set(8).unwrap()).unwrap();
        let a = ProjectionOperator::from_matrix(&k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = randn_vec(8, &mut rng);
        x *= (0.1f64 * 32.0 / (&k * &x).norm_squared()).sqrt();
        let p = chi_params(&x, &x, &k, &k, &a, &a).unwrap();
        // sum c_ij = trace(A) when A = B.
        assert_abs_diff_eq!(p.cross_cov_base, 8.0, epsilon = 1e-9);
        let cov = cross_covariance(&p, Hypothesis::H0);
        let var = 2.0 * (p.r_a as f64 + 2.0 * p.lambda2_0a);
        assert_abs_diff_eq!(cov, var, epsilon = 1e-8);

        // Zero signal: covariance reduces to the operator term.
        let p0 = chi_params(&DVector::zeros(8), &DVector::zeros(8), &k, &k, &a, &a).unwrap();
        assert_abs_diff_eq!(
            cross_covariance(&p0, Hypothesis::H0),
            2.0 * p0.cross_cov_base,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gaussian_general_reductions() {
        // Disjoint supports at L = lcm: the general model built from the
        // difference operators coincides with the orthogonal one.
        let params = lcm_params(2, 3, 0.2, 7);
        let (g0, g1) = gaussian_general(&params).unwrap();
        let (o0, o1) = gaussian_orthogonal(&params).unwrap();
        let (gm0, gv0) = g0.gaussian_moments().unwrap();
        let (om0, ov0) = o0.gaussian_moments().unwrap();
        assert_abs_diff_eq!(gm0, om0, epsilon = 1e-9);
        assert_abs_diff_eq!(gv0, ov0, epsilon = 1e-6);
        let (gm1, gv1) = g1.gaussian_moments().unwrap();
        let (om1, ov1) = o1.gaussian_moments().unwrap();
        assert_abs_diff_eq!(gm1, om1, epsilon = 1e-9);
        assert_abs_diff_eq!(gv1, ov1, epsilon = 1e-6);

        // Zero signal: identical distributions under both hypotheses.
        let dict = DictionaryMatrix::build(9, 30).unwrap();
        let k0 = dict.restrict(&dict.support_set(6).unwrap()).unwrap();
        let k1 = dict.restrict(&dict.support_set(9).unwrap()).unwrap();
        let a = ProjectionOperator::from_matrix(&k0).unwrap();
        let b = ProjectionOperator::from_matrix(&k1).unwrap();
        let p = chi_params(&DVector::zeros(6), &DVector::zeros(9), &k0, &k1, &a, &b).unwrap();
        let (g0, g1) = gaussian_general(&p).unwrap();
        assert_eq!(
            g0.gaussian_moments().unwrap(),
            g1.gaussian_moments().unwrap()
        );
    }

    #[test]
    fn pd_pf_limits() {
        let h0 = StatisticDistribution::Gaussian {
            mean: 0.0,
            variance: 4.0,
        };
        let h1 = StatisticDistribution::Gaussian {
            mean: 3.0,
            variance: 4.0,
        };
        let (pd, pf) = pd_pf(-1e9, &h0, &h1).unwrap();
        assert_abs_diff_eq!(pd, 1.0);
        assert_abs_diff_eq!(pf, 1.0);
        let (pd, pf) = pd_pf(1e9, &h0, &h1).unwrap();
        assert_abs_diff_eq!(pd, 0.0);
        assert_abs_diff_eq!(pf, 0.0);
        let (_, pf) = pd_pf(0.0, &h0, &h1).unwrap();
        assert_abs_diff_eq!(pf, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn np_pd_properties() {
        let params = lcm_params(10, 8, 0.1, 8);

        // Consistency with threshold inversion of the Gaussian pair.
        let (g0, g1) = gaussian_general(&params).unwrap();
        for &alpha in &[0.05, 0.2, 0.5, 0.8] {
            let gamma = g0.tail_quantile(alpha).unwrap();
            let (pd, pf) = pd_pf(gamma, &g0, &g1).unwrap();
            assert_abs_diff_eq!(pf, alpha, epsilon = 1e-12);
            assert_abs_diff_eq!(np_pd(alpha, &params).unwrap(), pd, epsilon = 1e-9);
        }

        // Separated means: better than chance at alpha = 1/2.
        assert!(np_pd(0.5, &params).unwrap() > 0.5);

        // Zero signal: P_D = alpha.
        let dict = DictionaryMatrix::build(10, 40).unwrap();
        let k0 = dict.restrict(&dict.support_set(10).unwrap()).unwrap();
        let k1 = dict.restrict(&dict.support_set(8).unwrap()).unwrap();
        let a = ProjectionOperator::from_matrix(&k0).unwrap();
        let b = ProjectionOperator::from_matrix(&k1).unwrap();
        let p0 = chi_params(&DVector::zeros(10), &DVector::zeros(8), &k0, &k1, &a, &b).unwrap();
        for &alpha in &[0.1, 0.37, 0.9] {
            assert_abs_diff_eq!(np_pd(alpha, &p0).unwrap(), alpha, epsilon = 1e-9);
        }
    }

    #[test]
    fn pmb_bounds_detector() {
        // Identical signals: P_D = alpha.
        let dict = DictionaryMatrix::build(8, 32).unwrap();
        let k = dict.restrict(&dict.support_set(8).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = randn_vec(8, &mut rng);
        for &alpha in &[0.1, 0.5, 0.8] {
            assert_abs_diff_eq!(
                pmb_pd(alpha, &x, &x, &k, &k).unwrap(),
                alpha,
                epsilon = 1e-12
            );
        }

        // Dominance over the GLRT curve on random instances.
        for seed in 0..5u64 {
            let l = crate::ramanujan::lcm(10, 8);
            let dict = DictionaryMatrix::build(10, l).unwrap();
            let k0 = dict.restrict(&dict.support_set(10).unwrap()).unwrap();
            let k1 = dict.restrict(&dict.support_set(8).unwrap()).unwrap();
            let (a, b) = orthogonal_operators(&dict, 10, 8).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut x0 = randn_vec(10, &mut rng);
            let mut x1 = randn_vec(8, &mut rng);
            let target = 0.15;
            x0 *= (target * l as f64 / (&k0 * &x0).norm_squared()).sqrt();
            x1 *= (target * l as f64 / (&k1 * &x1).norm_squared()).sqrt();
            let params = chi_params(&x0, &x1, &k0, &k1, &a, &b).unwrap();
            for &alpha in &[0.01, 0.1, 0.3, 0.6, 0.9] {
                let bound = pmb_pd(alpha, &x0, &x1, &k0, &k1).unwrap();
                let glrt = np_pd(alpha, &params).unwrap();
                assert!(
                    bound >= glrt - 1e-9,
                    "alpha={alpha}: bound {bound} < glrt {glrt}"
                );
            }
        }

        // Orthogonal equal-energy signals: d^2 = 2 L SNR.
        let l = crate::ramanujan::lcm(2, 3);
        let dict = DictionaryMatrix::build(3, l).unwrap();
        let s0 = dict.support_set(2).unwrap();
        let s1 = dict.support_set(3).unwrap();
        let d0 = crate::ramanujan::difference_support(&s0, &s1);
        let d1 = crate::ramanujan::difference_support(&s1, &s0);
        let k0 = dict.restrict_indices(&d0).unwrap();
        let k1 = dict.restrict_indices(&d1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut x0 = randn_vec(k0.ncols(), &mut rng);
        let mut x1 = randn_vec(k1.ncols(), &mut rng);
        let target = 0.5;
        x0 *= (target * l as f64 / (&k0 * &x0).norm_squared()).sqrt();
        x1 *= (target * l as f64 / (&k1 * &x1).norm_squared()).sqrt();
        let d2 = pmb_deflection_squared(&x0, &x1, &k0, &k1).unwrap();
        assert_abs_diff_eq!(d2, 2.0 * l as f64 * target, epsilon = 1e-9);
    }

    #[test]
    fn gap_closed_form() {
        // L * SNR = 10 with L = 100, SNR = 0.1.
        let g = gap(100, 0.1);
        assert!((g - 8.5e-4).abs() < 0.1e-4, "gap {g}");

        // Strictly decreasing on a grid of L SNR in [1, 100].
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let g = gap(i, 1.0);
            assert!(g < prev);
            prev = g;
        }

        // |log gap| linear in L SNR: R^2 > 0.999 over [10, 60].
        let xs: Vec<f64> = (10..=60).map(|i| i as f64).collect();
        let ys: Vec<f64> = (10..=60).map(|i| gap(i, 1.0).ln().abs()).collect();
        let (_, _, r2) = linear_regression(&xs, &ys);
        assert!(r2 > 0.999, "r2 = {r2}");
    }

    #[test]
    fn q_approx_accuracy() {
        let exact3 = q_function(3.0);
        assert!((q_approx(3.0) - exact3).abs() / exact3 < 0.15);
        let exact8 = q_function(8.0);
        assert!((q_approx(8.0) / exact8 - 1.0).abs() < 0.02);
        for &x in &[0.1, 1.0, 5.0, 20.0] {
            assert!(q_approx(x) > 0.0);
        }
    }

    #[test]
    fn error_probability_and_exponent() {
        // e^{-2} / (sqrt(2 pi) * 2) at L SNR = 16.
        let pe = p_e_binary(16, 1.0);
        assert_abs_diff_eq!(pe, 0.026_995_5, epsilon = 1e-6);

        let mut conf = ConfusionMatrix::new(3);
        for i in 0..3 {
            for _ in 0..10 {
                conf.record(i, i);
            }
        }
        assert_abs_diff_eq!(p_e_average(&conf).unwrap(), 0.0);

        let mut conf = ConfusionMatrix::new(2);
        for i in 0..2 {
            for j in 0..2 {
                for _ in 0..25 {
                    conf.record(i, j);
                }
            }
        }
        assert_abs_diff_eq!(p_e_average(&conf).unwrap(), 0.5);

        assert_abs_diff_eq!(error_exponent(1.0, 10, 1.0), 0.0);
        assert_abs_diff_eq!(
            error_exponent((-12.0f64).exp(), 12, 1.0),
            1.0,
            epsilon = 1e-12
        );

        // Plugging the closed-form P_e in approaches 1/8 from above.
        let e_small = error_exponent(p_e_binary(40, 1.0), 40, 1.0);
        let e_large = error_exponent(p_e_binary(4000, 1.0), 4000, 1.0);
        assert!(e_small > 0.125 && e_large > 0.125);
        assert!((e_large - 0.125).abs() < (e_small - 0.125).abs());
        assert!((e_large - 0.125).abs() < 2e-3);

        // Zero-error floor.
        assert_abs_diff_eq!(empirical_error_probability(0, 500), 1.0 / 1000.0);
        assert_abs_diff_eq!(empirical_error_probability(5, 500), 0.01);
    }

    #[test]
    fn itr_values() {
        assert_abs_diff_eq!(itr(9, 1.0, 1.0), 60.0 * 9.0f64.log2(), epsilon = 1e-9);
        assert!((itr(9, 1.0, 1.0) - 190.2).abs() < 0.1);
        for m in 2..=9usize {
            assert_abs_diff_eq!(itr(m, 1.0 / m as f64, 2.0), 0.0, epsilon = 1e-9);
        }
        let base = itr(4, 0.8, 2.0);
        assert_abs_diff_eq!(itr(4, 0.8, 1.0), 2.0 * base, epsilon = 1e-9);
    }

    #[test]
    fn roc_curves_are_monotone() {
        let params = lcm_params(10, 8, 0.1, 11);
        let (g0, g1) = gaussian_general(&params).unwrap();
        let roc = RocCurve::from_gaussian(&g0, &g1, 201).unwrap();
        assert_eq!(roc.points.len(), 201);
        assert!(roc.is_monotone());
        assert!(roc
            .points
            .iter()
            .all(|p| (0.0..=1.0).contains(&p.p_f) && (0.0..=1.0).contains(&p.p_d)));
        // The detector beats chance: P_D above the diagonal in the interior.
        let mid = roc.pd_at_pf(0.3);
        assert!(mid > 0.3);
    }

    #[test]
    fn wilson_and_regression_utilities() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5);
        assert!(hi - lo < 0.25);

        let z = two_proportion_z(90, 100, 60, 100);
        assert!(z > 2.326, "z = {z}");

        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        let (slope, intercept, r2) = linear_regression(&xs, &ys);
        assert_abs_diff_eq!(slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(intercept, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-12);
    }
}
