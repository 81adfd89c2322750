//! Ramanujan sums and nested periodic dictionaries.
//!
//! A Ramanujan sum `c_q(n)` is the sum of the q-th primitive roots of unity
//! raised to the power `n`; it is an integer-valued, symmetric sequence with
//! period `q` (Ramanujan 1918). Stacking circular downshifts of one period of
//! `c_q` and extending them periodically yields a submatrix whose phi(q)
//! columns span the subspace of "new" period-q signals; concatenating the
//! submatrices for q = 1..P_max gives a nested periodic dictionary that spans
//! every integer-periodic signal with period up to P_max (Tenneti &
//! Vaidyanathan 2015).
//!
//! Everything in this module is generated from exact integer arithmetic; the
//! dictionary matrix itself is stored in floating point for the benefit of
//! downstream linear algebra.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Residue tolerance for the complex-exponential evaluation of `c_q(n)`.
/// Both the imaginary part and the distance of the real part from the
/// nearest integer must stay below this before rounding.
const INTEGER_RESIDUE_TOL: f64 = 1e-9;

/// Euler's totient: the number of integers in `[1, p]` coprime to `p`,
/// with `phi(1) = 1` by convention.
pub fn euler_totient(p: u64) -> Result<u64> {
    if p == 0 {
        return Err(Error::invalid("euler_totient requires p >= 1"));
    }
    let mut n = p;
    let mut phi = p;
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            phi -= phi / d;
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        phi -= phi / n;
    }
    Ok(phi)
}

/// Sorted list of the positive divisors of `n`.
pub fn divisors(n: usize) -> Vec<usize> {
    let mut divs = Vec::new();
    let mut d = 1usize;
    while d * d <= n {
        if n.is_multiple_of(d) {
            divs.push(d);
            if d != n / d {
                divs.push(n / d);
            }
        }
        d += 1;
    }
    divs.sort_unstable();
    divs
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// One full period of a Ramanujan sum `c_q(n)`, `n = 0..q-1`.
///
/// The values are integer-exact: `c_q(0) = phi(q)`, the sequence is
/// symmetric (`c_q(n) = c_q(q-n)`) and sums to zero over a period for
/// `q > 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RamanujanSequence {
    q: usize,
    values: Vec<i64>,
}

impl RamanujanSequence {
    /// Period of the sequence.
    pub fn q(&self) -> usize {
        self.q
    }

    /// The stored period `c_q(0..q-1)`.
    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Periodic evaluation at any (possibly negative) index.
    pub fn value(&self, n: i64) -> i64 {
        let idx = n.rem_euclid(self.q as i64) as usize;
        self.values[idx]
    }
}

/// Compute one period of `c_q` by evaluating the primitive-root exponential
/// sum and rounding the provably-integer real part. The imaginary part and
/// the rounding residue are checked against [`INTEGER_RESIDUE_TOL`].
pub fn ramanujan_sum(q: usize) -> Result<RamanujanSequence> {
    if q == 0 {
        return Err(Error::invalid("ramanujan_sum requires q >= 1"));
    }
    let coprime: Vec<usize> = (1..=q).filter(|&k| gcd(k as u64, q as u64) == 1).collect();
    let mut values = Vec::with_capacity(q);
    for n in 0..q {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for &k in &coprime {
            // e^{j 2 pi k n / q}; reduce k*n mod q first so the angle stays small.
            let angle = TAU * ((k * n) % q) as f64 / q as f64;
            re += angle.cos();
            im += angle.sin();
        }
        let rounded = re.round();
        if im.abs() > INTEGER_RESIDUE_TOL || (re - rounded).abs() > INTEGER_RESIDUE_TOL {
            return Err(Error::Numeric(format!(
                "ramanujan_sum({q}) residue too large at n={n}: re={re}, im={im}"
            )));
        }
        values.push(rounded as i64);
    }
    Ok(RamanujanSequence { q, values })
}

/// Period-`L` extension of the circular downshifts of `c_q`: an `L x phi(q)`
/// integer matrix whose column `j` holds `c_q((i - j) mod q)` at row `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicSubmatrix {
    q: usize,
    rows: usize,
    columns: DMatrix<i64>,
}

impl PeriodicSubmatrix {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns, `phi(q)`.
    pub fn width(&self) -> usize {
        self.columns.ncols()
    }

    /// The integer matrix itself.
    pub fn columns(&self) -> &DMatrix<i64> {
        &self.columns
    }

    /// Copy into floating point for linear algebra.
    pub fn to_f64(&self) -> DMatrix<f64> {
        self.columns.map(|v| v as f64)
    }
}

/// Build the period-q submatrix extended to `L` rows.
///
/// Requires `L >= q`: a period longer than the observation window is
/// unobservable.
pub fn build_submatrix(q: usize, l: usize) -> Result<PeriodicSubmatrix> {
    if q == 0 {
        return Err(Error::invalid("build_submatrix requires q >= 1"));
    }
    if l < q {
        return Err(Error::invalid(format!(
            "build_submatrix requires L >= q (got L={l}, q={q})"
        )));
    }
    let seq = ramanujan_sum(q)?;
    let phi = euler_totient(q as u64)? as usize;
    let columns = DMatrix::from_fn(l, phi, |i, j| seq.value(i as i64 - j as i64));
    Ok(PeriodicSubmatrix {
        q,
        rows: l,
        columns,
    })
}

/// Dictionary columns spanning the subspace of period-`T` signals: the
/// columns of every submatrix whose period divides `T`. By Gauss'
/// divisor-sum identity the support has exactly `T` columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    t: usize,
    indices: Vec<usize>,
    divisors: Vec<usize>,
}

impl SupportSet {
    /// The target period.
    pub fn period(&self) -> usize {
        self.t
    }

    /// Sorted dictionary column indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Sorted divisors of the target period.
    pub fn divisors(&self) -> &[usize] {
        &self.divisors
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Column indices in `S_a` but not in `S_b` (equivalently the columns of the
/// divisors of `T_a` that do not divide `T_b`). Both supports must come from
/// the same dictionary for the result to be meaningful.
pub fn difference_support(s_a: &SupportSet, s_b: &SupportSet) -> Vec<usize> {
    s_a.indices
        .iter()
        .copied()
        .filter(|i| s_b.indices.binary_search(i).is_err())
        .collect()
}

/// The RPT dictionary: the concatenation `[R_1 R_2 ... R_Pmax]` extended to
/// `L` rows, together with a period -> column-range index.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryMatrix {
    p_max: usize,
    l: usize,
    k: DMatrix<f64>,
    index: Vec<std::ops::Range<usize>>,
}

impl DictionaryMatrix {
    /// Build the dictionary for all periods `1..=p_max` at length `l`.
    pub fn build(p_max: usize, l: usize) -> Result<Self> {
        if p_max == 0 {
            return Err(Error::invalid("dictionary requires P_max >= 1"));
        }
        if l < p_max {
            return Err(Error::invalid(format!(
                "dictionary requires L >= P_max (got L={l}, P_max={p_max})"
            )));
        }
        let mut index = Vec::with_capacity(p_max);
        let mut width = 0usize;
        for p in 1..=p_max {
            let phi = euler_totient(p as u64)? as usize;
            index.push(width..width + phi);
            width += phi;
        }
        let mut k = DMatrix::<f64>::zeros(l, width);
        for p in 1..=p_max {
            let sub = build_submatrix(p, l)?;
            let range = index[p - 1].clone();
            for (offset, col) in range.enumerate() {
                for row in 0..l {
                    k[(row, col)] = sub.columns()[(row, offset)] as f64;
                }
            }
        }
        Ok(DictionaryMatrix { p_max, l, k, index })
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    /// Number of rows (samples).
    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    /// Total number of columns, `sum of phi(p) for p = 1..P_max`.
    pub fn width(&self) -> usize {
        self.k.ncols()
    }

    /// The dictionary matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// Contiguous column range holding the period-`p` submatrix.
    pub fn column_range(&self, p: usize) -> Result<std::ops::Range<usize>> {
        if p == 0 || p > self.p_max {
            return Err(Error::invalid(format!(
                "period {p} outside dictionary range 1..={}",
                self.p_max
            )));
        }
        Ok(self.index[p - 1].clone())
    }

    /// Support set of period `T`: columns of all divisors of `T`.
    ///
    /// Requires `T <= P_max`; truncating the divisor list would break the
    /// `|S| = T` identity and every trace formula downstream.
    pub fn support_set(&self, t: usize) -> Result<SupportSet> {
        if t == 0 || t > self.p_max {
            return Err(Error::invalid(format!(
                "support_set requires 1 <= T <= P_max (got T={t}, P_max={})",
                self.p_max
            )));
        }
        let divs = divisors(t);
        let mut indices = Vec::with_capacity(t);
        for &d in &divs {
            indices.extend(self.index[d - 1].clone());
        }
        indices.sort_unstable();
        Ok(SupportSet {
            t,
            indices,
            divisors: divs,
        })
    }

    /// Restriction `K_S`: the selected columns in order.
    pub fn restrict(&self, support: &SupportSet) -> Result<DMatrix<f64>> {
        self.restrict_indices(support.indices())
    }

    /// Restriction to an arbitrary sorted index set.
    pub fn restrict_indices(&self, indices: &[usize]) -> Result<DMatrix<f64>> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.width()) {
            return Err(Error::invalid(format!(
                "column index {bad} out of range for dictionary width {}",
                self.width()
            )));
        }
        Ok(self.k.select_columns(indices.iter()))
    }

    /// Single dictionary column as a vector.
    pub fn column(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.k.column(i).as_slice())
    }

    /// Plain-text dump: one header line `P_max L` followed by the rows of
    /// the dictionary as whitespace-separated integers.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.p_max, self.l)?;
        for row in 0..self.l {
            let mut line = String::new();
            for col in 0..self.width() {
                if col > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{}", self.k[(row, col)] as i64));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Least common multiple.
pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a as u64, b as u64) as usize * b
}
