//! Synthetic periodic-signal-plus-noise trials and experiment harnesses.
//!
//! A generator fixes one deterministic representation per class (drawn once
//! from the run seed, rescaled to the target SNR) and adds fresh noise per
//! trial. Every trial derives its own RNG stream from the run seed and a
//! global trial index, so batches are bitwise reproducible at any worker
//! count; harness aggregation walks the trials in index order.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analysis::{
    self, chi_params, gaussian_general, np_pd, p_e_average, pmb_pd, q_function, q_inverse,
    sample_moments, wilson_interval, ConfusionMatrix, StatisticDistribution,
};
use crate::baselines::{cca_decide, psda_decide, reference_matrix, ReferenceMatrix};
use crate::detector::{
    estimate_spatial_covariance, BinaryDetector, MaryDetector, SpatialCovariance,
};
use crate::ramanujan::DictionaryMatrix;
use crate::{Error, Result};

/// RNG stream offsets; per-trial streams use the plain trial index.
const STREAM_REPRESENTATION: u64 = 1 << 40;
const STREAM_PRESTIM: u64 = 1 << 41;

/// Independent ChaCha stream for (seed, stream index).
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Spatial correlation model for the electrode noise.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialModel {
    /// White across electrodes.
    Identity,
    /// `Sigma_{ij} = rho^{|i-j|}` with unit-spaced linear electrode
    /// positions.
    RhoDistance { rho: f64 },
    /// Explicit SPD covariance.
    Explicit(DMatrix<f64>),
}

impl SpatialModel {
    /// Materialize the covariance for `n_c` electrodes.
    pub fn covariance(&self, n_c: usize) -> Result<SpatialCovariance> {
        match self {
            SpatialModel::Identity => Ok(SpatialCovariance::identity(n_c)),
            SpatialModel::RhoDistance { rho } => SpatialCovariance::rho_distance(n_c, *rho, None),
            SpatialModel::Explicit(sigma) => {
                if sigma.nrows() != n_c {
                    return Err(Error::dims(format!(
                        "explicit covariance is {}x{}, expected {n_c}x{n_c}",
                        sigma.nrows(),
                        sigma.ncols()
                    )));
                }
                SpatialCovariance::from_matrix(sigma.clone())
            }
        }
    }
}

/// Configuration of a synthetic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Class periods in samples.
    pub periods: Vec<usize>,
    /// Trial length in samples.
    pub l: usize,
    /// Electrode count.
    pub n_c: usize,
    /// Target per-channel SNR in dB (noise variance is 1).
    pub snr_db: f64,
    /// Spatial correlation of the noise.
    pub spatial: SpatialModel,
    /// Run seed.
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::invalid("need at least one class period"));
        }
        if self.n_c == 0 {
            return Err(Error::invalid("need at least one electrode"));
        }
        let max_period = *self.periods.iter().max().expect("nonempty");
        if max_period > self.l {
            return Err(Error::invalid(format!(
                "max period {max_period} exceeds trial length {}",
                self.l
            )));
        }
        if let SpatialModel::RhoDistance { rho } = self.spatial {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::invalid("rho must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// Copy with a different trial length.
    pub fn with_length(&self, l: usize) -> Self {
        let mut out = self.clone();
        out.l = l;
        out
    }
}

/// A generated set of labeled trials.
#[derive(Debug, Clone)]
pub struct TrialBatch {
    pub trials: Vec<DMatrix<f64>>,
    pub labels: Vec<usize>,
    pub spec: SyntheticSpec,
}

/// Draw standard-normal coefficients on the support of `t` and rescale so
/// the per-sample SNR at unit noise variance is exactly `target_snr`.
pub fn sample_representation(
    t: usize,
    dict: &DictionaryMatrix,
    target_snr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    let support = dict.support_set(t)?;
    let k_s = dict.restrict(&support)?;
    if target_snr == 0.0 {
        return Ok(DVector::zeros(support.len()));
    }
    if target_snr < 0.0 {
        return Err(Error::invalid("target SNR must be nonnegative"));
    }
    loop {
        let x = DVector::from_fn(support.len(), |_, _| rng.sample(StandardNormal));
        let energy = (&k_s * &x).norm_squared();
        if energy > 0.0 {
            let scale = (target_snr * dict.len() as f64 / energy).sqrt();
            return Ok(x * scale);
        }
    }
}

/// Fixed per-class representations plus a per-trial noise sampler.
#[derive(Debug, Clone)]
pub struct TrialGenerator {
    spec: SyntheticSpec,
    dict: DictionaryMatrix,
    restricted: Vec<DMatrix<f64>>,
    representations: Vec<DMatrix<f64>>,
    signals: Vec<DMatrix<f64>>,
    noise_factor_t: DMatrix<f64>,
    sigma: SpatialCovariance,
}

impl TrialGenerator {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let p_max = *spec.periods.iter().max().expect("nonempty");
        let dict = DictionaryMatrix::build(p_max, spec.l)?;
        let snr = spec.snr_linear();

        let mut restricted = Vec::with_capacity(spec.periods.len());
        let mut representations = Vec::with_capacity(spec.periods.len());
        let mut signals = Vec::with_capacity(spec.periods.len());
        for (m, &t) in spec.periods.iter().enumerate() {
            let support = dict.support_set(t)?;
            let k_s = dict.restrict(&support)?;
            let mut rng = trial_rng(spec.seed, STREAM_REPRESENTATION + m as u64);
            let mut x = DMatrix::zeros(support.len(), spec.n_c);
            for c in 0..spec.n_c {
                let col = sample_representation(t, &dict, snr, &mut rng)?;
                x.set_column(c, &col);
            }
            signals.push(&k_s * &x);
            restricted.push(k_s);
            representations.push(x);
        }

        let sigma = spec.spatial.covariance(spec.n_c)?;
        let chol = Cholesky::new(sigma.sigma().clone())
            .ok_or_else(|| Error::Numeric("noise covariance is not positive definite".into()))?;
        let noise_factor_t = chol.l().transpose();

        Ok(TrialGenerator {
            spec: spec.clone(),
            dict,
            restricted,
            representations,
            signals,
            noise_factor_t,
            sigma,
        })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn dictionary(&self) -> &DictionaryMatrix {
        &self.dict
    }

    /// True noise covariance used by the generator.
    pub fn sigma(&self) -> &SpatialCovariance {
        &self.sigma
    }

    /// Restricted dictionary of class `m`.
    pub fn restricted(&self, m: usize) -> &DMatrix<f64> {
        &self.restricted[m]
    }

    /// Fixed representation of class `m` (support width x N_c).
    pub fn representation(&self, m: usize) -> &DMatrix<f64> {
        &self.representations[m]
    }

    /// Noise-free class signal `K_S X_m` (L x N_c).
    pub fn signal(&self, m: usize) -> &DMatrix<f64> {
        &self.signals[m]
    }

    /// Noise matrix with i.i.d. `N(0, Sigma_w)` rows.
    pub fn noise(&self, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let z = DMatrix::from_fn(self.spec.l, self.spec.n_c, |_, _| {
            rng.sample(StandardNormal)
        });
        z * &self.noise_factor_t
    }

    /// One trial of class `m`.
    pub fn trial(&self, m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        self.signal(m) + self.noise(rng)
    }

    /// Noise-only pre-stimulus segment with the generator's covariance.
    pub fn prestim(&self, rows: usize) -> DMatrix<f64> {
        let mut rng = trial_rng(self.spec.seed, STREAM_PRESTIM);
        let z = DMatrix::from_fn(rows, self.spec.n_c, |_, _| rng.sample(StandardNormal));
        z * &self.noise_factor_t
    }

    /// Blocked batch: `n_per_class` trials per class, labels in class
    /// order, trial `m * n_per_class + i` on its own RNG stream.
    pub fn batch(&self, n_per_class: usize) -> TrialBatch {
        let m_classes = self.spec.periods.len();
        let total = m_classes * n_per_class;
        let trials: Vec<DMatrix<f64>> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let mut rng = trial_rng(self.spec.seed, idx as u64);
                self.trial(idx / n_per_class, &mut rng)
            })
            .collect();
        let labels = (0..total).map(|idx| idx / n_per_class).collect();
        TrialBatch {
            trials,
            labels,
            spec: self.spec.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Classifier dispatch shared by the harnesses
// ---------------------------------------------------------------------------

/// Detection method under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rpt,
    /// Standard CCA with the given harmonic count.
    Cca {
        harmonics: usize,
    },
    /// Single-channel periodogram scoring (uses channel 0).
    Psda,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Rpt => "rpt".to_string(),
            Method::Cca { harmonics } => format!("cca_nh{harmonics}"),
            Method::Psda => "psda".to_string(),
        }
    }
}

/// A classifier prepared for one (length, period set, covariance) setup.
enum Prepared {
    Rpt(MaryDetector),
    Cca(Vec<ReferenceMatrix>),
    Psda(Vec<f64>),
}

impl Prepared {
    /// Synthetic sampling runs at unit rate, so period T maps to frequency
    /// 1/T cycles per sample.
    fn build(
        dict: &DictionaryMatrix,
        periods: &[usize],
        sigma: &SpatialCovariance,
        method: Method,
    ) -> Result<Self> {
        match method {
            Method::Rpt => Ok(Prepared::Rpt(MaryDetector::new(
                dict,
                periods,
                sigma.clone(),
            )?)),
            Method::Cca { harmonics } => {
                let refs = periods
                    .iter()
                    .map(|&t| reference_matrix(1.0 / t as f64, harmonics, 1.0, dict.len()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Prepared::Cca(refs))
            }
            Method::Psda => Ok(Prepared::Psda(
                periods.iter().map(|&t| 1.0 / t as f64).collect(),
            )),
        }
    }

    fn classify(&self, y: &DMatrix<f64>) -> Result<usize> {
        match self {
            Prepared::Rpt(det) => det.decide(y),
            Prepared::Cca(refs) => cca_decide(y, refs),
            Prepared::Psda(freqs) => {
                let y0 = DVector::from_column_slice(y.column(0).as_slice());
                psda_decide(&y0, freqs, 1.0)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Binary statistic sampling shared by the ROC and gap harnesses
// ---------------------------------------------------------------------------

struct BinarySetup {
    generator: TrialGenerator,
    detector: BinaryDetector,
    params: analysis::ChiSquareParams,
}

fn binary_setup(spec: &SyntheticSpec) -> Result<BinarySetup> {
    if spec.periods.len() != 2 {
        return Err(Error::invalid("binary harness needs exactly two periods"));
    }
    if spec.n_c != 1 {
        return Err(Error::invalid("binary harness is single-channel"));
    }
    if spec.spatial != SpatialModel::Identity {
        return Err(Error::invalid("binary harness assumes white noise"));
    }
    let generator = TrialGenerator::new(spec)?;
    let dict = generator.dictionary();
    let detector = BinaryDetector::from_dictionary(dict, spec.periods[0], spec.periods[1], 0.0)?;
    let x0 = DVector::from_column_slice(generator.representation(0).column(0).as_slice());
    let x1 = DVector::from_column_slice(generator.representation(1).column(0).as_slice());
    let params = chi_params(
        &x0,
        &x1,
        generator.restricted(0),
        generator.restricted(1),
        detector.operator_a(),
        detector.operator_b(),
    )?;
    Ok(BinarySetup {
        generator,
        detector,
        params,
    })
}

/// Sampled sufficient statistics under both hypotheses, in trial order.
fn binary_statistics(setup: &BinarySetup, n_trials: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let sample = |class: usize, offset: usize| -> Result<Vec<f64>> {
        (0..n_trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(setup.generator.spec().seed, (offset + i) as u64);
                let y = setup.generator.trial(class, &mut rng);
                let yv = DVector::from_column_slice(y.column(0).as_slice());
                setup.detector.statistic(&yv)
            })
            .collect()
    };
    Ok((sample(0, 0)?, sample(1, n_trials)?))
}

// ---------------------------------------------------------------------------
// ROC harness
// ---------------------------------------------------------------------------

/// One threshold row of the empirical/analytic ROC comparison.
#[derive(Debug, Clone, Copy)]
pub struct RocRow {
    pub gamma: f64,
    pub pf_emp: f64,
    pub pd_emp: f64,
    pub pf_theory: f64,
    pub pd_theory: f64,
    pub pf_lo: f64,
    pub pf_hi: f64,
    pub pd_lo: f64,
    pub pd_hi: f64,
}

fn exceed_fraction(sorted: &[f64], gamma: f64) -> (u64, f64) {
    let idx = sorted.partition_point(|&s| s <= gamma);
    let count = (sorted.len() - idx) as u64;
    (count, count as f64 / sorted.len() as f64)
}

/// Empirical ROC with Wilson intervals plus the Gaussian-model overlay.
/// `gamma_grid` defaults to the 201-point analytic quantile grid.
pub fn run_roc(
    spec: &SyntheticSpec,
    n_trials: usize,
    gamma_grid: Option<Vec<f64>>,
) -> Result<Vec<RocRow>> {
    let setup = binary_setup(spec)?;
    let (mut stats0, mut stats1) = binary_statistics(&setup, n_trials)?;
    stats0.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    stats1.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));

    let (g0, g1) = gaussian_general(&setup.params)?;
    let gammas = match gamma_grid {
        Some(g) => {
            let mut g = g;
            g.sort_by(|a, b| a.partial_cmp(b).expect("finite gammas"));
            g
        }
        None => analysis::RocCurve::quantile_gamma_grid(&g0, &g1, 201)?,
    };

    let mut rows = Vec::with_capacity(gammas.len());
    for &gamma in gammas.iter().rev() {
        let (n0, pf_emp) = exceed_fraction(&stats0, gamma);
        let (n1, pd_emp) = exceed_fraction(&stats1, gamma);
        let (pd_theory, pf_theory) = analysis::pd_pf(gamma, &g0, &g1)?;
        let (pf_lo, pf_hi) = wilson_interval(n0, n_trials as u64, 1.96);
        let (pd_lo, pd_hi) = wilson_interval(n1, n_trials as u64, 1.96);
        rows.push(RocRow {
            gamma,
            pf_emp,
            pd_emp,
            pf_theory,
            pd_theory,
            pf_lo,
            pf_hi,
            pd_lo,
            pd_hi,
        });
    }
    Ok(rows)
}

/// The Gaussian-model distributions backing a binary spec, for callers that
/// overlay analytic curves.
pub fn binary_theory(
    spec: &SyntheticSpec,
) -> Result<(StatisticDistribution, StatisticDistribution)> {
    let setup = binary_setup(spec)?;
    gaussian_general(&setup.params)
}

/// The empirical operating points of a ROC table as a curve.
pub fn empirical_roc_curve(rows: &[RocRow]) -> analysis::RocCurve {
    analysis::RocCurve {
        points: rows
            .iter()
            .map(|r| analysis::RocPoint {
                gamma: r.gamma,
                p_f: r.pf_emp,
                p_d: r.pd_emp,
            })
            .collect(),
        source: analysis::RocSource::Empirical,
    }
}

// ---------------------------------------------------------------------------
// Accuracy-versus-length harness
// ---------------------------------------------------------------------------

/// One length row of an accuracy sweep.
#[derive(Debug, Clone, Copy)]
pub struct AccuracyRow {
    pub l: usize,
    pub accuracy: f64,
    pub acc_lo: f64,
    pub acc_hi: f64,
    pub pe_emp: f64,
    /// Gaussian-model error probability; NaN for non-RPT methods.
    pub pe_theory: f64,
}

/// Classification accuracy versus trial length for one method. Trials are
/// balanced across classes; the analytic overlay applies to the
/// single-channel binary RPT configuration and is NaN otherwise.
pub fn run_accuracy_vs_length(
    spec: &SyntheticSpec,
    lengths: &[usize],
    n_trials_per_class: usize,
    method: Method,
) -> Result<Vec<AccuracyRow>> {
    let mut rows = Vec::with_capacity(lengths.len());
    for &l in lengths {
        let spec_l = spec.with_length(l);
        spec_l.validate()?;
        let generator = TrialGenerator::new(&spec_l)?;
        let sigma = generator.sigma().clone();
        let prepared = Prepared::build(generator.dictionary(), &spec_l.periods, &sigma, method)?;

        let m_classes = spec_l.periods.len();
        let total = m_classes * n_trials_per_class;
        let decisions: Vec<(usize, usize)> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let class = idx / n_trials_per_class;
                let mut rng = trial_rng(spec_l.seed, idx as u64);
                let y = generator.trial(class, &mut rng);
                prepared.classify(&y).map(|d| (class, d))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut confusion = ConfusionMatrix::new(m_classes);
        for (class, decided) in decisions {
            confusion.record(class, decided);
        }
        let correct = confusion.total() - confusion.errors();
        let (acc_lo, acc_hi) = wilson_interval(correct, confusion.total(), 1.96);

        let pe_theory = if method == Method::Rpt
            && m_classes == 2
            && spec_l.n_c == 1
            && spec_l.spatial == SpatialModel::Identity
        {
            let setup = binary_setup(&spec_l)?;
            let (g0, g1) = gaussian_general(&setup.params)?;
            let (pd, pf) = analysis::pd_pf(0.0, &g0, &g1)?;
            0.5 * (1.0 - pd + pf)
        } else {
            f64::NAN
        };

        rows.push(AccuracyRow {
            l,
            accuracy: confusion.accuracy(),
            acc_lo,
            acc_hi,
            pe_emp: p_e_average(&confusion)?,
            pe_theory,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Gap-to-bound harness
// ---------------------------------------------------------------------------

/// One length row of the gap experiment.
#[derive(Debug, Clone, Copy)]
pub struct GapRow {
    pub l: usize,
    pub l_snr: f64,
    /// Exceedance-fraction detection probability at the empirical H0
    /// quantile threshold.
    pub pd_raw: f64,
    /// Moment-fitted Monte Carlo detection probability (Gaussian tail of
    /// the sampled statistics); resolves gaps far below 1/n_trials.
    pub pd_fitted: f64,
    /// Analytic perfect measurement bound.
    pub pmb: f64,
    pub gap_raw: f64,
    pub gap_fitted: f64,
    /// Gaussian-model gap at the same false-alarm level.
    pub gap_theory: f64,
    /// Closed-form large-L approximation.
    pub gap_lemma: f64,
}

/// Gap between the perfect measurement bound and the detector at fixed
/// false-alarm level `alpha`, swept over trial lengths.
///
/// Both hypothesis SNRs equal the spec target by construction. The fitted
/// detection probability uses the sample moments of the statistic (the
/// statistic is Gaussian to good approximation), which keeps the gap
/// resolvable once it falls below the raw Monte Carlo resolution.
pub fn run_gap_experiment(
    spec: &SyntheticSpec,
    lengths: &[usize],
    n_trials: usize,
    alpha: f64,
) -> Result<Vec<GapRow>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let snr = spec.snr_linear();
    let mut rows = Vec::with_capacity(lengths.len());
    for &l in lengths {
        let spec_l = spec.with_length(l);
        let setup = binary_setup(&spec_l)?;
        let (stats0, stats1) = binary_statistics(&setup, n_trials)?;

        // Raw route: threshold at the empirical (1 - alpha) H0 quantile.
        let mut sorted0 = stats0.clone();
        sorted0.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
        let mut sorted1 = stats1.clone();
        sorted1.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
        let q_idx = (((1.0 - alpha) * n_trials as f64).ceil() as usize).clamp(1, n_trials) - 1;
        let gamma_raw = sorted0[q_idx];
        let (_, pd_raw) = exceed_fraction(&sorted1, gamma_raw);

        // Fitted route: Gaussian tails of the sampled statistics.
        let (m0, v0) = sample_moments(&stats0);
        let (m1, v1) = sample_moments(&stats1);
        let gamma_fit = m0 + q_inverse(alpha) * v0.sqrt();
        let pd_fitted = q_function((gamma_fit - m1) / v1.sqrt());

        let x0 = DVector::from_column_slice(setup.generator.representation(0).column(0).as_slice());
        let x1 = DVector::from_column_slice(setup.generator.representation(1).column(0).as_slice());
        let pmb = pmb_pd(
            alpha,
            &x0,
            &x1,
            setup.generator.restricted(0),
            setup.generator.restricted(1),
        )?;
        let gap_theory = pmb - np_pd(alpha, &setup.params)?;
        let gap_lemma = analysis::gap(l, snr);

        rows.push(GapRow {
            l,
            l_snr: l as f64 * snr,
            pd_raw,
            pd_fitted,
            pmb,
            gap_raw: pmb - pd_raw,
            gap_fitted: pmb - pd_fitted,
            gap_theory,
            gap_lemma,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Error-exponent / discrimination-rate harness
// ---------------------------------------------------------------------------

/// One (method, electrode count, class count) row of the tradeoff sweep.
#[derive(Debug, Clone)]
pub struct TradeoffRow {
    pub method: Method,
    pub n_c: usize,
    pub m: usize,
    pub log2_m: f64,
    pub errors: u64,
    pub trials: u64,
    pub p_e: f64,
    pub exponent: f64,
    pub exponent_lo: f64,
    pub exponent_hi: f64,
}

/// Error exponent versus discrimination rate: for each electrode count and
/// each `M` in `m_range`, classify `n_trials_per_class` trials of the first
/// `M` periods with every method and convert the average error probability
/// into an exponent. The RPT detector uses the true spatial covariance.
pub fn run_tradeoff(
    spec: &SyntheticSpec,
    m_range: std::ops::RangeInclusive<usize>,
    n_c_list: &[usize],
    n_trials_per_class: usize,
    methods: &[Method],
) -> Result<Vec<TradeoffRow>> {
    let m_max = *m_range.end();
    if spec.periods.len() < m_max {
        return Err(Error::invalid(format!(
            "spec lists {} periods but M ranges to {m_max}",
            spec.periods.len()
        )));
    }
    let snr = spec.snr_linear();
    let mut rows = Vec::new();
    for &n_c in n_c_list {
        for m in m_range.clone() {
            let spec_m = SyntheticSpec {
                periods: spec.periods[..m].to_vec(),
                n_c,
                ..spec.clone()
            };
            spec_m.validate()?;
            let generator = TrialGenerator::new(&spec_m)?;
            let sigma = generator.sigma().clone();
            let prepared: Vec<Prepared> = methods
                .iter()
                .map(|&meth| Prepared::build(generator.dictionary(), &spec_m.periods, &sigma, meth))
                .collect::<Result<Vec<_>>>()?;

            let total = m * n_trials_per_class;
            let decisions: Vec<(usize, Vec<usize>)> = (0..total)
                .into_par_iter()
                .map(|idx| {
                    let class = idx / n_trials_per_class;
                    let mut rng = trial_rng(spec_m.seed, idx as u64);
                    let y = generator.trial(class, &mut rng);
                    let per_method = prepared
                        .iter()
                        .map(|p| p.classify(&y))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((class, per_method))
                })
                .collect::<Result<Vec<_>>>()?;

            for (k, &method) in methods.iter().enumerate() {
                let mut confusion = ConfusionMatrix::new(m);
                for (class, per_method) in &decisions {
                    confusion.record(*class, per_method[k]);
                }
                let errors = confusion.errors();
                let trials = confusion.total();
                let p_e = analysis::empirical_error_probability(errors, trials);
                let exponent = analysis::error_exponent(p_e, spec.l, snr);
                // Exponent interval from the Wilson interval on the error
                // fraction, with the same zero-error floor.
                let (pe_lo, pe_hi) = wilson_interval(errors, trials, 1.96);
                let pe_lo = pe_lo.max(1.0 / (2.0 * trials as f64));
                let pe_hi = pe_hi.max(pe_lo);
                rows.push(TradeoffRow {
                    method,
                    n_c,
                    m,
                    log2_m: (m as f64).log2(),
                    errors,
                    trials,
                    p_e,
                    exponent,
                    exponent_lo: analysis::error_exponent(pe_hi.min(1.0), spec.l, snr),
                    exponent_hi: analysis::error_exponent(pe_lo, spec.l, snr),
                });
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Covariance-mismatch harness
// ---------------------------------------------------------------------------

/// Accuracy of one covariance-knowledge variant at one length.
#[derive(Debug, Clone, Copy)]
pub struct VariantAccuracy {
    pub correct: u64,
    pub trials: u64,
    pub accuracy: f64,
    pub lo: f64,
    pub hi: f64,
}

/// One length row of the covariance-mismatch comparison.
#[derive(Debug, Clone, Copy)]
pub struct MismatchRow {
    pub l: usize,
    pub known: VariantAccuracy,
    pub estimated: VariantAccuracy,
    pub mismatch: VariantAccuracy,
}

/// Compare the detector with the true covariance, a pre-stimulus estimate
/// (from `prestim_rows` noise-only rows) and an identity-mismatch variant
/// on the same trials.
pub fn run_mismatch_experiment(
    spec: &SyntheticSpec,
    lengths: &[usize],
    n_trials_per_class: usize,
    prestim_rows: usize,
) -> Result<Vec<MismatchRow>> {
    if spec.n_c < 2 {
        return Err(Error::invalid(
            "mismatch experiment needs several electrodes",
        ));
    }
    let mut rows = Vec::with_capacity(lengths.len());
    for &l in lengths {
        let spec_l = spec.with_length(l);
        spec_l.validate()?;
        let generator = TrialGenerator::new(&spec_l)?;
        let truth = generator.sigma().clone();
        let estimated = estimate_spatial_covariance(&[generator.prestim(prestim_rows)])?;
        let identity = SpatialCovariance::identity(spec_l.n_c);

        let dict = generator.dictionary();
        let detectors = [
            MaryDetector::new(dict, &spec_l.periods, truth)?,
            MaryDetector::new(dict, &spec_l.periods, estimated)?,
            MaryDetector::new(dict, &spec_l.periods, identity)?,
        ];

        let m_classes = spec_l.periods.len();
        let total = m_classes * n_trials_per_class;
        let outcome: Vec<[bool; 3]> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let class = idx / n_trials_per_class;
                let mut rng = trial_rng(spec_l.seed, idx as u64);
                let y = generator.trial(class, &mut rng);
                let mut hits = [false; 3];
                for (k, det) in detectors.iter().enumerate() {
                    hits[k] = det.decide(&y)? == class;
                }
                Ok(hits)
            })
            .collect::<Result<Vec<_>>>()?;

        let variant = |k: usize| -> VariantAccuracy {
            let correct = outcome.iter().filter(|hits| hits[k]).count() as u64;
            let trials = total as u64;
            let (lo, hi) = wilson_interval(correct, trials, 1.96);
            VariantAccuracy {
                correct,
                trials,
                accuracy: correct as f64 / trials as f64,
                lo,
                hi,
            }
        };
        rows.push(MismatchRow {
            l,
            known: variant(0),
            estimated: variant(1),
            mismatch: variant(2),
        });
    }
    Ok(rows)
}
