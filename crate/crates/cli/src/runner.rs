//! Mode dispatch: build the experiment, run it in a bounded worker pool,
//! and emit the CSV table plus a metadata record.
//!
//! All file I/O happens here on the coordinating thread; the harnesses
//! below only parallelize trial evaluation, and their outputs do not depend
//! on the worker count.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};

use rpt_core::analysis::{itr, p_e_average, ConfusionMatrix};
use rpt_core::baselines::{cca_decide, psda_decide, reference_matrix, ReferenceMatrix};
use rpt_core::detector::{estimate_spatial_covariance, MaryDetector, SpatialCovariance};
use rpt_core::ramanujan::DictionaryMatrix;
use rpt_core::simulate::{
    run_accuracy_vs_length, run_gap_experiment, run_mismatch_experiment, run_roc, run_tradeoff,
    Method, SpatialModel, SyntheticSpec,
};

use crate::config::{
    AccuracyArgs, ClassifyArgs, Cli, Command, DictArgs, GapArgs, MismatchArgs, RocArgs, SharedArgs,
    TradeoffArgs,
};
use crate::io::{fmt_f64, write_csv, write_metadata, RunMetadata};
use crate::manifest::DatasetManifest;
use crate::windowing::{period_from_frequency, window_trial};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dict(args) => run_in_pool(&args.shared.clone(), move || dict_mode(&args)),
        Command::Roc(args) => run_in_pool(&args.shared.clone(), move || roc_mode(&args)),
        Command::Accuracy(args) => run_in_pool(&args.shared.clone(), move || accuracy_mode(&args)),
        Command::Gap(args) => run_in_pool(&args.shared.clone(), move || gap_mode(&args)),
        Command::Tradeoff(args) => run_in_pool(&args.shared.clone(), move || tradeoff_mode(&args)),
        Command::Mismatch(args) => run_in_pool(&args.shared.clone(), move || mismatch_mode(&args)),
        Command::Classify(args) => run_in_pool(&args.shared.clone(), move || classify_mode(&args)),
    }
}

fn run_in_pool<F: FnOnce() -> Result<()> + Send>(shared: &SharedArgs, body: F) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if shared.threads > 0 {
        builder = builder.num_threads(shared.threads);
    }
    let pool = builder.build().context("building worker pool")?;
    pool.install(body)
}

fn parse_method(name: &str, harmonics: usize) -> Result<Method> {
    match name {
        "rpt" => Ok(Method::Rpt),
        "cca" => Ok(Method::Cca { harmonics }),
        "psda" => Ok(Method::Psda),
        other => bail!("unknown method {other:?} (expected rpt | cca | psda)"),
    }
}

fn spatial_model(rho: f64) -> SpatialModel {
    if rho == 0.0 {
        SpatialModel::Identity
    } else {
        SpatialModel::RhoDistance { rho }
    }
}

fn shared_config(shared: &SharedArgs) -> Vec<(String, String)> {
    vec![
        ("trials".into(), shared.trials.to_string()),
        ("snr_db".into(), shared.snr_db.to_string()),
        ("length".into(), shared.length.to_string()),
        ("channels".into(), shared.channels.to_string()),
        ("rho".into(), shared.rho.to_string()),
        ("method".into(), shared.method.clone()),
        ("harmonics".into(), shared.harmonics.to_string()),
        ("wait".into(), shared.wait.to_string()),
        ("window".into(), shared.window.to_string()),
        ("fs".into(), shared.fs.to_string()),
        ("out".into(), shared.out.display().to_string()),
    ]
}

fn finish(
    out: &Path,
    mode: &str,
    shared: &SharedArgs,
    extra: Vec<(String, String)>,
    started: Instant,
) -> Result<()> {
    let mut config = shared_config(shared);
    config.extend(extra);
    write_metadata(
        out,
        &RunMetadata {
            mode: mode.to_string(),
            seed: shared.seed,
            config,
            wall_secs: started.elapsed().as_secs_f64(),
        },
    )
}

// ---------------------------------------------------------------------------

fn dict_mode(args: &DictArgs) -> Result<()> {
    let started = Instant::now();
    let dict = DictionaryMatrix::build(args.p_max, args.shared.length)?;
    let mut text = Vec::new();
    dict.write_dump(&mut text)?;
    std::fs::write(&args.shared.out, text)
        .with_context(|| format!("writing {}", args.shared.out.display()))?;

    println!(
        "dictionary: P_max={} L={} columns={}",
        dict.p_max(),
        dict.len(),
        dict.width()
    );
    let widths: Vec<String> = (1..=dict.p_max())
        .map(|p| format!("{p}:{}", dict.column_range(p).map(|r| r.len()).unwrap_or(0)))
        .collect();
    println!("column widths per period: {}", widths.join(" "));

    finish(
        &args.shared.out,
        "dict",
        &args.shared,
        vec![("p_max".into(), args.p_max.to_string())],
        started,
    )
}

fn roc_mode(args: &RocArgs) -> Result<()> {
    let started = Instant::now();
    let spec = SyntheticSpec {
        periods: vec![args.t0, args.t1],
        l: args.shared.length,
        n_c: 1,
        snr_db: args.shared.snr_db,
        spatial: SpatialModel::Identity,
        seed: args.shared.seed,
    };
    let rows = run_roc(&spec, args.shared.trials, None)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.gamma),
                fmt_f64(r.pf_emp),
                fmt_f64(r.pd_emp),
                fmt_f64(r.pf_theory),
                fmt_f64(r.pd_theory),
            ]
        })
        .collect();
    write_csv(
        &args.shared.out,
        &["gamma", "pf_emp", "pd_emp", "pf_theory", "pd_theory"],
        &table,
    )?;
    finish(
        &args.shared.out,
        "roc",
        &args.shared,
        vec![
            ("t0".into(), args.t0.to_string()),
            ("t1".into(), args.t1.to_string()),
        ],
        started,
    )
}

fn accuracy_mode(args: &AccuracyArgs) -> Result<()> {
    let started = Instant::now();
    let method = parse_method(&args.shared.method, args.shared.harmonics)?;
    let spec = SyntheticSpec {
        periods: vec![args.t0, args.t1],
        l: *args.lengths.iter().max().context("no lengths")?,
        n_c: args.shared.channels,
        snr_db: args.shared.snr_db,
        spatial: spatial_model(args.shared.rho),
        seed: args.shared.seed,
    };
    let rows = run_accuracy_vs_length(&spec, &args.lengths, args.shared.trials, method)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.l.to_string(),
                fmt_f64(r.accuracy),
                fmt_f64(r.acc_lo),
                fmt_f64(r.acc_hi),
                fmt_f64(r.pe_emp),
                fmt_f64(r.pe_theory),
            ]
        })
        .collect();
    write_csv(
        &args.shared.out,
        &[
            "length",
            "accuracy",
            "acc_lo",
            "acc_hi",
            "pe_emp",
            "pe_theory",
        ],
        &table,
    )?;
    finish(
        &args.shared.out,
        "accuracy",
        &args.shared,
        vec![
            ("t0".into(), args.t0.to_string()),
            ("t1".into(), args.t1.to_string()),
            ("lengths".into(), join_usizes(&args.lengths)),
        ],
        started,
    )
}

fn gap_mode(args: &GapArgs) -> Result<()> {
    let started = Instant::now();
    let spec = SyntheticSpec {
        periods: vec![args.t0, args.t1],
        l: *args.lengths.iter().max().context("no lengths")?,
        n_c: 1,
        snr_db: args.shared.snr_db,
        spatial: SpatialModel::Identity,
        seed: args.shared.seed,
    };
    let rows = run_gap_experiment(&spec, &args.lengths, args.shared.trials, args.alpha)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.l.to_string(),
                fmt_f64(r.l_snr),
                fmt_f64(r.pd_raw),
                fmt_f64(r.pd_fitted),
                fmt_f64(r.pmb),
                fmt_f64(r.gap_raw),
                fmt_f64(r.gap_fitted),
                fmt_f64(r.gap_theory),
                fmt_f64(r.gap_lemma),
            ]
        })
        .collect();
    write_csv(
        &args.shared.out,
        &[
            "l",
            "l_snr",
            "pd_raw",
            "pd_fitted",
            "pmb",
            "gap_raw",
            "gap_fitted",
            "gap_theory",
            "gap_lemma",
        ],
        &table,
    )?;
    finish(
        &args.shared.out,
        "gap",
        &args.shared,
        vec![
            ("t0".into(), args.t0.to_string()),
            ("t1".into(), args.t1.to_string()),
            ("alpha".into(), args.alpha.to_string()),
            ("lengths".into(), join_usizes(&args.lengths)),
        ],
        started,
    )
}

fn tradeoff_mode(args: &TradeoffArgs) -> Result<()> {
    let started = Instant::now();
    if args.m_max < 2 {
        bail!("tradeoff needs M >= 2");
    }
    let periods: Vec<usize> = (0..args.m_max).map(|m| args.t0 + m * args.dt).collect();
    let methods = args
        .methods
        .iter()
        .map(|name| parse_method(name, args.shared.harmonics))
        .collect::<Result<Vec<_>>>()?;
    let spec = SyntheticSpec {
        periods,
        l: args.shared.length,
        n_c: *args.channel_set.iter().max().context("no channels")?,
        snr_db: args.shared.snr_db,
        spatial: spatial_model(args.shared.rho),
        seed: args.shared.seed,
    };
    let rows = run_tradeoff(
        &spec,
        2..=args.m_max,
        &args.channel_set,
        args.shared.trials,
        &methods,
    )?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.label(),
                r.n_c.to_string(),
                r.m.to_string(),
                fmt_f64(r.log2_m),
                r.errors.to_string(),
                r.trials.to_string(),
                fmt_f64(r.p_e),
                fmt_f64(r.exponent),
                fmt_f64(r.exponent_lo),
                fmt_f64(r.exponent_hi),
            ]
        })
        .collect();
    write_csv(
        &args.shared.out,
        &[
            "method",
            "n_c",
            "m",
            "log2_m",
            "errors",
            "trials",
            "p_e",
            "exponent",
            "exponent_lo",
            "exponent_hi",
        ],
        &table,
    )?;
    finish(
        &args.shared.out,
        "tradeoff",
        &args.shared,
        vec![
            ("t0".into(), args.t0.to_string()),
            ("dt".into(), args.dt.to_string()),
            ("m_max".into(), args.m_max.to_string()),
            ("channel_set".into(), join_usizes(&args.channel_set)),
            ("methods".into(), args.methods.join(",")),
        ],
        started,
    )
}

fn mismatch_mode(args: &MismatchArgs) -> Result<()> {
    let started = Instant::now();
    if args.shared.rho <= 0.0 {
        bail!("mismatch mode needs --rho > 0: without correlation there is nothing to exploit");
    }
    let spec = SyntheticSpec {
        periods: args.periods.clone(),
        l: *args.lengths.iter().max().context("no lengths")?,
        n_c: args.shared.channels,
        snr_db: args.shared.snr_db,
        spatial: spatial_model(args.shared.rho),
        seed: args.shared.seed,
    };
    let rows =
        run_mismatch_experiment(&spec, &args.lengths, args.shared.trials, args.prestim_rows)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.l.to_string(),
                fmt_f64(r.known.accuracy),
                fmt_f64(r.known.lo),
                fmt_f64(r.known.hi),
                fmt_f64(r.estimated.accuracy),
                fmt_f64(r.estimated.lo),
                fmt_f64(r.estimated.hi),
                fmt_f64(r.mismatch.accuracy),
                fmt_f64(r.mismatch.lo),
                fmt_f64(r.mismatch.hi),
            ]
        })
        .collect();
    write_csv(
        &args.shared.out,
        &[
            "l",
            "acc_known",
            "known_lo",
            "known_hi",
            "acc_estimated",
            "est_lo",
            "est_hi",
            "acc_mismatch",
            "mis_lo",
            "mis_hi",
        ],
        &table,
    )?;
    finish(
        &args.shared.out,
        "mismatch",
        &args.shared,
        vec![
            ("periods".into(), join_usizes(&args.periods)),
            ("lengths".into(), join_usizes(&args.lengths)),
            ("prestim_rows".into(), args.prestim_rows.to_string()),
        ],
        started,
    )
}

fn classify_mode(args: &ClassifyArgs) -> Result<()> {
    let started = Instant::now();
    let manifest = DatasetManifest::load(&args.manifest)?;
    let method = parse_method(&args.shared.method, args.shared.harmonics)?;

    // Round each goal frequency to an integer period and keep the error.
    let mut periods = Vec::with_capacity(manifest.classes.len());
    let mut rounding = Vec::new();
    for class in &manifest.classes {
        let (t, err_hz) = period_from_frequency(class.frequency, manifest.fs)?;
        rounding.push((class.label.clone(), t, err_hz));
        periods.push(t);
    }
    {
        let mut sorted = periods.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != periods.len() {
            bail!(
                "distinct goal frequencies round to the same integer period; \
                 lengthen the window or drop one of the colliding classes"
            );
        }
    }

    // Load, window and check every trial.
    let mut trials: Vec<(usize, DMatrix<f64>)> = Vec::with_capacity(manifest.trials.len());
    let mut window_len: Option<usize> = None;
    for entry in &manifest.trials {
        let raw = crate::io::load_trial(&entry.path)?;
        if raw.ncols() != manifest.channels {
            bail!(
                "{}: {} channels, manifest says {}",
                entry.path.display(),
                raw.ncols(),
                manifest.channels
            );
        }
        let window_s = if args.shared.window > 0.0 {
            args.shared.window
        } else {
            raw.nrows() as f64 / manifest.fs - args.shared.wait
        };
        let windowed = window_trial(&raw, manifest.fs, args.shared.wait, window_s)?;
        match window_len {
            None => window_len = Some(windowed.nrows()),
            Some(l) if l != windowed.nrows() => {
                bail!(
                    "trials produce different window lengths ({l} vs {})",
                    windowed.nrows()
                )
            }
            _ => {}
        }
        trials.push((entry.class, windowed));
    }
    let l = window_len.context("no trials")?;
    let window_secs = l as f64 / manifest.fs;
    let p_max = *periods.iter().max().expect("classes present");
    if l < p_max {
        bail!("window of {l} samples is shorter than the largest period {p_max}");
    }

    // Per-method preparation.
    enum Scorer {
        Rpt(MaryDetector),
        Cca(Vec<ReferenceMatrix>),
        Psda(Vec<f64>),
    }
    let scorer = match method {
        Method::Rpt => {
            let dict = DictionaryMatrix::build(p_max, l)?;
            let sigma = if manifest.prestim.is_empty() {
                SpatialCovariance::identity(manifest.channels)
            } else {
                let segments = manifest
                    .prestim
                    .iter()
                    .map(|p| crate::io::load_trial(p))
                    .collect::<Result<Vec<_>>>()?;
                estimate_spatial_covariance(&segments)?
            };
            Scorer::Rpt(MaryDetector::new(&dict, &periods, sigma)?)
        }
        Method::Cca { harmonics } => Scorer::Cca(
            manifest
                .classes
                .iter()
                .map(|c| reference_matrix(c.frequency, harmonics, manifest.fs, l))
                .collect::<rpt_core::Result<Vec<_>>>()?,
        ),
        Method::Psda => Scorer::Psda(manifest.classes.iter().map(|c| c.frequency).collect()),
    };

    let mut confusion = ConfusionMatrix::new(manifest.classes.len());
    for (class, y) in &trials {
        let decided = match &scorer {
            Scorer::Rpt(det) => det.decide(y)?,
            Scorer::Cca(refs) => cca_decide(y, refs)?,
            Scorer::Psda(freqs) => {
                let y0 = DVector::from_column_slice(y.column(0).as_slice());
                psda_decide(&y0, freqs, manifest.fs)?
            }
        };
        confusion.record(*class, decided);
    }

    // Confusion matrix CSV: one row per true class.
    let mut header: Vec<String> = vec!["label".into()];
    header.extend(manifest.classes.iter().map(|c| c.label.clone()));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let table: Vec<Vec<String>> = manifest
        .classes
        .iter()
        .enumerate()
        .map(|(i, class)| {
            let mut row = vec![class.label.clone()];
            row.extend((0..manifest.classes.len()).map(|j| confusion.count(i, j).to_string()));
            row
        })
        .collect();
    write_csv(&args.shared.out, &header_refs, &table)?;

    // Accuracy / ITR summary next to the confusion matrix.
    let accuracy = confusion.accuracy();
    let summary_path = summary_path(&args.shared.out);
    write_csv(
        &summary_path,
        &[
            "classes",
            "trials",
            "accuracy",
            "p_e_average",
            "itr_bits_per_min",
            "window_secs",
        ],
        &[vec![
            manifest.classes.len().to_string(),
            confusion.total().to_string(),
            fmt_f64(accuracy),
            fmt_f64(p_e_average(&confusion)?),
            fmt_f64(itr(manifest.classes.len(), accuracy, window_secs)),
            fmt_f64(window_secs),
        ]],
    )?;

    let mut extra = vec![
        ("manifest".into(), args.manifest.display().to_string()),
        ("window_secs".into(), window_secs.to_string()),
        ("summary".into(), summary_path.display().to_string()),
    ];
    for (label, t, err_hz) in rounding {
        extra.push((
            format!("period[{label}]"),
            format!("{t} (err {err_hz:.4} Hz)"),
        ));
    }
    finish(&args.shared.out, "classify", &args.shared, extra, started)
}

fn summary_path(out: &Path) -> std::path::PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}_summary.csv"))
}

fn join_usizes(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
