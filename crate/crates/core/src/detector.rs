//! Restricted-ML estimation, projection operators and GLRT decision rules.
//!
//! The detector projects measurements onto the dictionary subspaces spanned
//! by the candidate periods. For the binary test the sufficient statistic is
//! the difference of the two projection energies `y' B y - y' A y`; for the
//! M-ary multi-electrode test with spatial noise covariance `Sigma_w` the
//! score of class m is `tr(Y Sigma_w^{-1} Y' A_m)` and the detector picks the
//! argmax. Projectors are computed from an orthogonal factorization of the
//! restricted dictionary, never by explicit Gram-matrix inversion: the
//! restricted dictionaries become badly conditioned as the periods grow.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::ramanujan::{difference_support, lcm, DictionaryMatrix, SupportSet};
use crate::{Error, Hypothesis, Result};

/// Relative threshold on the column-pivoted QR diagonal below which a
/// restricted dictionary is reported as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Orthogonal projector onto the column space of a restricted dictionary.
///
/// Stored as an `L x rank` orthonormal basis; the explicit `L x L` matrix is
/// formed on demand. `trace(P) = rank`, and for a full divisor support of
/// period `T` the rank equals `T`.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    basis: DMatrix<f64>,
    indices: Vec<usize>,
    rank: usize,
}

impl ProjectionOperator {
    /// Build the projector from an explicit restricted dictionary `K_S`.
    pub fn from_matrix(k_s: &DMatrix<f64>) -> Result<Self> {
        Self::build(k_s, Vec::new())
    }

    /// Build the projector for the full divisor support of a period.
    pub fn from_support(dict: &DictionaryMatrix, support: &SupportSet) -> Result<Self> {
        let k_s = dict.restrict(support)?;
        Self::build(&k_s, support.indices().to_vec())
    }

    /// Build the projector for an arbitrary set of dictionary columns.
    pub fn from_indices(dict: &DictionaryMatrix, indices: &[usize]) -> Result<Self> {
        let k_s = dict.restrict_indices(indices)?;
        Self::build(&k_s, indices.to_vec())
    }

    fn build(k_s: &DMatrix<f64>, indices: Vec<usize>) -> Result<Self> {
        let (l, c) = k_s.shape();
        if c == 0 || l < c {
            return Err(Error::invalid(format!(
                "projector needs a tall nonempty matrix, got {l} x {c}"
            )));
        }
        let qr = k_s.clone().col_piv_qr();
        let r = qr.r();
        let lead = r[(0, 0)].abs();
        if lead == 0.0 {
            return Err(Error::SingularSupport(
                "all-zero restricted dictionary".into(),
            ));
        }
        for i in 0..c {
            if r[(i, i)].abs() < RANK_TOL * lead {
                return Err(Error::SingularSupport(format!(
                    "restricted dictionary is rank deficient: |R[{i},{i}]| = {:.3e}",
                    r[(i, i)].abs()
                )));
            }
        }
        Ok(ProjectionOperator {
            basis: qr.q(),
            indices,
            rank: c,
        })
    }

    /// Ambient dimension `L`.
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Rank of the projector (= trace of the explicit matrix).
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Dictionary column indices this projector was built from (empty when
    /// constructed from a raw matrix).
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Orthonormal basis of the projected subspace.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// The explicit symmetric idempotent matrix `U U'`.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Projection of `y` onto the subspace.
    pub fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(y.len())?;
        Ok(&self.basis * (self.basis.transpose() * y))
    }

    /// Projection energy `y' P y = ||U' y||^2`.
    pub fn energy(&self, y: &DVector<f64>) -> Result<f64> {
        self.check_dim(y.len())?;
        Ok((self.basis.transpose() * y).norm_squared())
    }

    /// Subspace coordinates `U' Y` of a multichannel observation.
    pub fn coordinates(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(y.nrows())?;
        Ok(self.basis.transpose() * y)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::dims(format!(
                "observation length {n} does not match projector dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Projector onto the column space of `K_S` (named constructor form).
pub fn projection_operator(k_s: &DMatrix<f64>) -> Result<ProjectionOperator> {
    ProjectionOperator::from_matrix(k_s)
}

fn least_squares(k_s: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (l, c) = k_s.shape();
    if rhs.nrows() != l {
        return Err(Error::dims(format!(
            "observation has {} rows, dictionary has {l}",
            rhs.nrows()
        )));
    }
    let qr = k_s.clone().col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    if lead == 0.0 || (0..c).any(|i| r[(i, i)].abs() < RANK_TOL * lead) {
        return Err(Error::SingularSupport(
            "restricted dictionary is rank deficient".into(),
        ));
    }
    // K_S P = Q R  =>  argmin ||K_S x - y|| solves R w = Q' y, x = P w.
    let mut z = qr.q().transpose() * rhs;
    if !r.view((0, 0), (c, c)).solve_upper_triangular_mut(&mut z) {
        return Err(Error::SingularSupport("triangular solve failed".into()));
    }
    qr.p().inv_permute_rows(&mut z);
    Ok(z)
}

/// Restricted maximum-likelihood estimate for a single channel: the least
/// squares solution of `min ||y - K_S x||^2`.
pub fn restricted_ml_binary(y: &DVector<f64>, k_s: &DMatrix<f64>) -> Result<DVector<f64>> {
    let rhs = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    let x = least_squares(k_s, &rhs)?;
    Ok(DVector::from_column_slice(x.column(0).as_slice()))
}

/// Restricted ML estimate for a multichannel observation, solved per column.
/// The solution does not depend on the spatial covariance, so none is taken.
pub fn restricted_ml_mary(y: &DMatrix<f64>, k_s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    least_squares(k_s, y)
}

/// Binary GLRT detector: projectors for the two hypothesis supports and the
/// decision threshold `gamma`.
#[derive(Debug, Clone)]
pub struct BinaryDetector {
    a: ProjectionOperator,
    b: ProjectionOperator,
    gamma: f64,
}

impl BinaryDetector {
    pub fn new(a: ProjectionOperator, b: ProjectionOperator, gamma: f64) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::dims(format!(
                "operators have different lengths: {} vs {}",
                a.dim(),
                b.dim()
            )));
        }
        Ok(BinaryDetector { a, b, gamma })
    }

    /// Detector with the full divisor supports of `t0` (H0) and `t1` (H1).
    pub fn from_dictionary(
        dict: &DictionaryMatrix,
        t0: usize,
        t1: usize,
        gamma: f64,
    ) -> Result<Self> {
        let a = ProjectionOperator::from_support(dict, &dict.support_set(t0)?)?;
        let b = ProjectionOperator::from_support(dict, &dict.support_set(t1)?)?;
        Self::new(a, b, gamma)
    }

    /// Detector built from the difference-set projectors; requires
    /// `dict.len() == lcm(t0, t1)`.
    pub fn orthogonal(dict: &DictionaryMatrix, t0: usize, t1: usize, gamma: f64) -> Result<Self> {
        let (a, b) = orthogonal_operators(dict, t0, t1)?;
        Self::new(a, b, gamma)
    }

    pub fn operator_a(&self) -> &ProjectionOperator {
        &self.a
    }

    pub fn operator_b(&self) -> &ProjectionOperator {
        &self.b
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Sufficient statistic `y' B y - y' A y`.
    pub fn statistic(&self, y: &DVector<f64>) -> Result<f64> {
        Ok(self.b.energy(y)? - self.a.energy(y)?)
    }

    /// Apply the threshold to an observation.
    pub fn decide(&self, y: &DVector<f64>) -> Result<Hypothesis> {
        Ok(binary_decide(self.statistic(y)?, self.gamma))
    }
}

/// Threshold rule: `H1` iff the statistic strictly exceeds `gamma`; ties
/// resolve to `H0`.
pub fn binary_decide(stat: f64, gamma: f64) -> Hypothesis {
    if stat > gamma {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

/// Difference-set projectors `(A_perp, B_perp)` for the orthogonal case.
///
/// `A_perp` projects onto the columns of the divisors of `t0` that do not
/// divide `t1` and vice versa. Requires `dict.len() == lcm(t0, t1)`, which
/// guarantees `A_perp B_perp = 0`.
pub fn orthogonal_operators(
    dict: &DictionaryMatrix,
    t0: usize,
    t1: usize,
) -> Result<(ProjectionOperator, ProjectionOperator)> {
    if t0 == t1 {
        return Err(Error::invalid("orthogonal_operators requires T0 != T1"));
    }
    let need = lcm(t0, t1);
    if dict.len() != need {
        return Err(Error::invalid(format!(
            "orthogonal operators require L = lcm(T0, T1) = {need}, got L = {}",
            dict.len()
        )));
    }
    let s0 = dict.support_set(t0)?;
    let s1 = dict.support_set(t1)?;
    let a = ProjectionOperator::from_indices(dict, &difference_support(&s0, &s1))?;
    let b = ProjectionOperator::from_indices(dict, &difference_support(&s1, &s0))?;
    Ok((a, b))
}

/// Spatial noise covariance across electrodes with cached inverse and
/// whitening factor.
#[derive(Debug, Clone)]
pub struct SpatialCovariance {
    sigma: DMatrix<f64>,
    inverse: DMatrix<f64>,
    // Transpose of the inverse lower Cholesky factor of sigma, so that
    // tr(Z sigma^{-1} Z') = ||Z * inv_factor_t||_F^2.
    inv_factor_t: DMatrix<f64>,
    n_c: usize,
}

impl SpatialCovariance {
    /// White noise across `n_c` electrodes.
    pub fn identity(n_c: usize) -> Self {
        let eye = DMatrix::identity(n_c, n_c);
        SpatialCovariance {
            sigma: eye.clone(),
            inverse: eye.clone(),
            inv_factor_t: eye,
            n_c,
        }
    }

    /// Wrap an explicit symmetric positive-definite matrix.
    pub fn from_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        let n_c = sigma.nrows();
        if n_c == 0 || !sigma.is_square() {
            return Err(Error::invalid("covariance must be square and nonempty"));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance has non-finite entries"));
        }
        let asym = (&sigma - sigma.transpose()).abs().max();
        if asym > 1e-8 * sigma.abs().max().max(1.0) {
            return Err(Error::invalid("covariance is not symmetric"));
        }
        let trace = sigma.trace();
        let eigmin = SymmetricEigen::new(sigma.clone()).eigenvalues.min();
        if eigmin.is_nan() || eigmin <= 1e-8 * trace / n_c as f64 {
            return Err(Error::invalid(format!(
                "covariance is not positive definite (min eigenvalue {eigmin:.3e})"
            )));
        }
        Self::finish(sigma, n_c)
    }

    /// Covariance `Sigma_{ij} = rho^{d_ij}` with the given electrode
    /// distances, or unit-spaced linear distances `|i - j|` by default.
    pub fn rho_distance(n_c: usize, rho: f64, distances: Option<&DMatrix<f64>>) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")));
        }
        if rho == 0.0 {
            return Ok(Self::identity(n_c));
        }
        let sigma = match distances {
            Some(d) => {
                if d.shape() != (n_c, n_c) {
                    return Err(Error::dims("distance matrix shape"));
                }
                d.map(|dij| rho.powf(dij))
            }
            None => DMatrix::from_fn(n_c, n_c, |i, j| rho.powi((i as i32 - j as i32).abs())),
        };
        Self::from_matrix(sigma)
    }

    fn finish(sigma: DMatrix<f64>, n_c: usize) -> Result<Self> {
        let chol = Cholesky::new(sigma.clone())
            .ok_or_else(|| Error::Numeric("Cholesky of covariance failed".into()))?;
        let inverse = chol.inverse();
        let eye = DMatrix::identity(n_c, n_c);
        let l_inv = chol
            .l()
            .solve_lower_triangular(&eye)
            .ok_or_else(|| Error::Numeric("triangular inversion failed".into()))?;
        Ok(SpatialCovariance {
            sigma,
            inverse,
            inv_factor_t: l_inv.transpose(),
            n_c,
        })
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// `tr(Z Sigma^{-1} Z')` for subspace coordinates `Z` (rank x N_c).
    pub fn quad_trace(&self, z: &DMatrix<f64>) -> Result<f64> {
        if z.ncols() != self.n_c {
            return Err(Error::dims(format!(
                "coordinates have {} channels, covariance expects {}",
                z.ncols(),
                self.n_c
            )));
        }
        Ok((z * &self.inv_factor_t).norm_squared())
    }
}

/// Pooled sample covariance from pre-stimulus segments.
///
/// Each trial is mean-removed before pooling (the noise model is zero mean;
/// real segments drift). The pooled estimate is shrunk toward a scaled
/// identity with weight `delta = 1e-3`, escalating until the smallest
/// eigenvalue clears `1e-8 * trace / N_c`.
pub fn estimate_spatial_covariance(prestim: &[DMatrix<f64>]) -> Result<SpatialCovariance> {
    if prestim.is_empty() {
        return Err(Error::Estimation(
            "no pre-stimulus segments supplied".into(),
        ));
    }
    let n_c = prestim[0].ncols();
    if n_c == 0 {
        return Err(Error::invalid("pre-stimulus segments have no channels"));
    }
    let mut pooled = DMatrix::<f64>::zeros(n_c, n_c);
    let mut rows = 0usize;
    for seg in prestim {
        if seg.ncols() != n_c {
            return Err(Error::dims("pre-stimulus channel counts differ"));
        }
        if seg.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "pre-stimulus segment has non-finite entries",
            ));
        }
        let mut centered = seg.clone();
        for c in 0..n_c {
            let mean = centered.column(c).mean();
            for r in 0..centered.nrows() {
                centered[(r, c)] -= mean;
            }
        }
        pooled += centered.transpose() * &centered;
        rows += seg.nrows();
    }
    if rows <= n_c {
        return Err(Error::Estimation(format!(
            "need more than {n_c} pooled rows, got {rows}"
        )));
    }
    let dof = rows.saturating_sub(prestim.len()) as f64;
    if dof <= 0.0 {
        return Err(Error::Estimation(
            "no degrees of freedom after centering".into(),
        ));
    }
    let mut sigma = pooled / dof;
    let trace = sigma.trace();
    if trace.is_nan() || trace <= 0.0 {
        return Err(Error::Estimation(
            "pre-stimulus data has zero variance".into(),
        ));
    }

    let target = trace / n_c as f64;
    let floor = 1e-8 * target;
    let mut delta = 1e-3;
    loop {
        let mut shrunk = sigma.clone() * (1.0 - delta);
        for i in 0..n_c {
            shrunk[(i, i)] += delta * target;
        }
        let eigmin = SymmetricEigen::new(shrunk.clone()).eigenvalues.min();
        if eigmin > floor {
            sigma = shrunk;
            break;
        }
        delta *= 10.0;
        if delta > 1.0 {
            return Err(Error::Estimation(
                "covariance could not be conditioned to positive definite".into(),
            ));
        }
    }
    SpatialCovariance::finish(sigma, n_c)
}

/// M-ary multi-electrode GLRT detector.
///
/// Holds one projector per class and the spatial covariance; both are built
/// once and reused across trials, since the trace statistic is the hot loop.
#[derive(Debug, Clone)]
pub struct MaryDetector {
    operators: Vec<ProjectionOperator>,
    sigma: SpatialCovariance,
    class_periods: Vec<usize>,
}

impl MaryDetector {
    pub fn new(
        dict: &DictionaryMatrix,
        class_periods: &[usize],
        sigma: SpatialCovariance,
    ) -> Result<Self> {
        if class_periods.len() < 2 {
            return Err(Error::invalid("M-ary detector requires M >= 2 classes"));
        }
        let mut sorted = class_periods.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != class_periods.len() {
            return Err(Error::invalid("class periods must be distinct"));
        }
        let operators = class_periods
            .iter()
            .map(|&t| ProjectionOperator::from_support(dict, &dict.support_set(t)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(MaryDetector {
            operators,
            sigma,
            class_periods: class_periods.to_vec(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.operators.len()
    }

    pub fn class_periods(&self) -> &[usize] {
        &self.class_periods
    }

    pub fn sigma(&self) -> &SpatialCovariance {
        &self.sigma
    }

    pub fn operator(&self, m: usize) -> &ProjectionOperator {
        &self.operators[m]
    }

    /// Class-m score `tr(Y Sigma_w^{-1} Y' A_m)`; always nonnegative.
    pub fn statistic(&self, y: &DMatrix<f64>, m: usize) -> Result<f64> {
        if m >= self.operators.len() {
            return Err(Error::invalid(format!("class index {m} out of range")));
        }
        let z = self.operators[m].coordinates(y)?;
        self.sigma.quad_trace(&z)
    }

    /// All class scores in order.
    pub fn scores(&self, y: &DMatrix<f64>) -> Result<Vec<f64>> {
        (0..self.operators.len())
            .map(|m| self.statistic(y, m))
            .collect()
    }

    /// Argmax decision; ties break toward the smallest class index.
    pub fn decide(&self, y: &DMatrix<f64>) -> Result<usize> {
        let scores = self.scores(y)?;
        let mut best = 0usize;
        for (m, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = m;
            }
        }
        Ok(best)
    }
}
