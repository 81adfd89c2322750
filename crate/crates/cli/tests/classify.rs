//! End-to-end classify-mode test on a synthetic dataset written to disk.

use std::fmt::Write as _;
use std::path::PathBuf;

use rpt_cli::config::{ClassifyArgs, Cli, Command, SharedArgs};
use rpt_cli::io::{load_trial, meta_path, write_trial};
use rpt_core::simulate::{SpatialModel, SyntheticSpec, TrialGenerator};

const FS: f64 = 240.0;
// 10, 12 and 15 Hz divide the sampling rate exactly, so the integer
// periods are 24, 20 and 16 samples with zero rounding error.
const FREQS: [f64; 3] = [10.0, 12.0, 15.0];

fn shared(out: PathBuf, method: &str) -> SharedArgs {
    SharedArgs {
        seed: 5,
        trials: 0,
        snr_db: 0.0,
        length: 0,
        channels: 2,
        rho: 0.0,
        out,
        method: method.into(),
        harmonics: 2,
        wait: 0.25,
        window: 1.0,
        fs: FS,
        threads: 1,
    }
}

/// Write trials, pre-stimulus noise and the manifest; returns the manifest
/// path and the number of trials per class.
fn build_dataset(dir: &std::path::Path) -> (PathBuf, usize) {
    let spec = SyntheticSpec {
        periods: vec![24, 20, 16],
        l: 360, // 1.5 s at 240 Hz; the window keeps rows 60..300
        n_c: 2,
        snr_db: 0.0,
        spatial: SpatialModel::RhoDistance { rho: 0.5 },
        seed: 99,
    };
    let generator = TrialGenerator::new(&spec).unwrap();
    let per_class = 6usize;
    let batch = generator.batch(per_class);

    let mut manifest = String::new();
    let _ = writeln!(manifest, "fs = {FS}");
    let _ = writeln!(manifest, "channels = 2");
    let _ = writeln!(manifest, "prestim = [\"prestim.csv\"]");
    for (m, f) in FREQS.iter().enumerate() {
        let _ = writeln!(manifest, "\n[[classes]]\nlabel = \"f{m}\"\nfrequency = {f}");
    }
    for (idx, (trial, label)) in batch.trials.iter().zip(&batch.labels).enumerate() {
        let name = format!("trial_{idx}.csv");
        write_trial(&dir.join(&name), trial).unwrap();
        let _ = writeln!(
            manifest,
            "\n[[trials]]\npath = \"{name}\"\nclass = {label}\nsubject = \"s1\""
        );
    }
    write_trial(&dir.join("prestim.csv"), &generator.prestim(5000)).unwrap();

    let path = dir.join("dataset.toml");
    std::fs::write(&path, manifest).unwrap();
    (path, per_class)
}

fn run_classify(manifest: &std::path::Path, out: PathBuf, method: &str) {
    rpt_cli::runner::run(Cli {
        command: Command::Classify(ClassifyArgs {
            shared: shared(out, method),
            manifest: manifest.to_path_buf(),
        }),
    })
    .unwrap();
}

#[test]
fn classify_each_method_on_strong_signals() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, per_class) = build_dataset(dir.path());

    for method in ["rpt", "cca", "psda"] {
        let out = dir.path().join(format!("{method}.csv"));
        run_classify(&manifest, out.clone(), method);

        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "label,f0,f1,f2");
        let mut diagonal = 0u64;
        let mut total = 0u64;
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), 4);
            for (j, cell) in cells[1..].iter().enumerate() {
                let count: u64 = cell.parse().unwrap();
                total += count;
                if i == j {
                    diagonal += count;
                }
            }
        }
        assert_eq!(total, 3 * per_class as u64);
        // 0 dB per-channel SNR over a 240-sample window: every method
        // should be nearly perfect on this easy set.
        assert!(
            diagonal as f64 / total as f64 > 0.9,
            "{method}: {diagonal}/{total}"
        );

        // Summary and metadata records land next to the confusion matrix.
        let summary = dir.path().join(format!("{method}_summary.csv"));
        let summary_text = std::fs::read_to_string(&summary).unwrap();
        assert!(summary_text
            .starts_with("classes,trials,accuracy,p_e_average,itr_bits_per_min,window_secs"));
        assert!(meta_path(&out).exists());
    }
}

#[test]
fn classify_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = build_dataset(dir.path());
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    run_classify(&manifest, out_a.clone(), "rpt");
    run_classify(&manifest, out_b.clone(), "rpt");
    assert_eq!(std::fs::read(out_a).unwrap(), std::fs::read(out_b).unwrap());
}

#[test]
fn classify_reports_parse_failures() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = build_dataset(dir.path());
    // Corrupt one trial file.
    std::fs::write(dir.path().join("trial_0.csv"), "1.0,2.0\n3.0,bad\n").unwrap();
    let out = dir.path().join("broken.csv");
    let err = rpt_cli::runner::run(Cli {
        command: Command::Classify(ClassifyArgs {
            shared: shared(out, "rpt"),
            manifest,
        }),
    })
    .unwrap_err()
    .to_string();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn windowed_trials_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let trial = randn_matrix(37, 3);
    let path = dir.path().join("t.csv");
    write_trial(&path, &trial).unwrap();
    assert_eq!(load_trial(&path).unwrap(), trial);
}

fn randn_matrix(rows: usize, cols: usize) -> nalgebra::DMatrix<f64> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    nalgebra::DMatrix::from_fn(rows, cols, |_, _| rng.sample(rand_distr::StandardNormal))
}
