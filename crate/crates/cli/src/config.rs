//! Experiment configuration via clap.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Periodicity-transform detection experiments.
#[derive(Debug, Parser)]
#[command(name = "rpt", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dictionary statistics and a plain-text integer dump.
    Dict(DictArgs),
    /// Empirical vs analytic ROC for the binary detector.
    Roc(RocArgs),
    /// Classification accuracy versus trial length (binary, one method).
    Accuracy(AccuracyArgs),
    /// Gap between the detector and the perfect measurement bound.
    Gap(GapArgs),
    /// Error exponent versus discrimination rate over classes/electrodes.
    Tradeoff(TradeoffArgs),
    /// Covariance knowledge comparison: known vs estimated vs ignored.
    Mismatch(MismatchArgs),
    /// Classify recorded trials listed in a dataset manifest.
    Classify(ClassifyArgs),
}

/// Flags shared across subcommands. Commands ignore the ones that do not
/// apply to them; the metadata record echoes the values actually used.
#[derive(Debug, Clone, Args)]
pub struct SharedArgs {
    /// Run seed; identical seeds reproduce identical outputs.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Monte Carlo trials (per hypothesis or per class, mode dependent).
    #[arg(long, default_value_t = 2500)]
    pub trials: usize,

    /// Target per-channel SNR in dB.
    #[arg(long = "snr-db", default_value_t = -15.0, allow_negative_numbers = true)]
    pub snr_db: f64,

    /// Trial length in samples (single-length modes).
    #[arg(long, default_value_t = 128)]
    pub length: usize,

    /// Electrode count.
    #[arg(long, default_value_t = 1)]
    pub channels: usize,

    /// Spatial correlation decay (0 = white noise).
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,

    /// Output CSV path; the metadata record lands next to it.
    #[arg(long)]
    pub out: PathBuf,

    /// Detection method: rpt | cca | psda.
    #[arg(long, default_value = "rpt")]
    pub method: String,

    /// Harmonic count for the CCA reference matrices.
    #[arg(long, default_value_t = 2)]
    pub harmonics: usize,

    /// Wait time in seconds between stimulus onset and the window start.
    #[arg(long, default_value_t = 0.0)]
    pub wait: f64,

    /// Analysis window in seconds (0 = rest of the trial).
    #[arg(long, default_value_t = 0.0)]
    pub window: f64,

    /// Sampling rate in Hz for recorded data.
    #[arg(long, default_value_t = 256.0)]
    pub fs: f64,

    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct DictArgs {
    #[command(flatten)]
    pub shared: SharedArgs,

    /// Largest period in the dictionary.
    #[arg(long = "p-max", default_value_t = 32)]
    pub p_max: usize,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[command(flatten)]
    pub shared: SharedArgs,

    /// Period under the null hypothesis.
    #[arg(long, default_value_t = 25)]
    pub t0: usize,

    /// Period under the alternative hypothesis.
    #[arg(long, default_value_t = 15)]
    pub t1: usize,
}

#[derive(Debug, Args)]
pub struct AccuracyArgs {
    #[command(flatten)]
    pub shared: SharedArgs,

    #[arg(long, default_value_t = 32)]
    pub t0: usize,

    #[arg(long, default_value_t = 18)]
    pub t1: usize,

    /// Comma-separated trial lengths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "36,64,96,128,192,288")]
    pub lengths: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[command(flatten)]
    pub shared: SharedArgs,

    #[arg(long, default_value_t = 32)]
    pub t0: usize,

    #[arg(long, default_value_t = 18)]
    pub t1: usize,

    /// Comma-separated trial lengths to sweep.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "40,80,160,320,420,520,640,760,900,1060,1264,1600,2000"
    )]
    pub lengths: Vec<usize>,

    /// False-alarm level at which the gap is measured.
    #[arg(long, default_value_t = 0.92)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    #[command(flatten)]
    pub shared: SharedArgs,

    /// Smallest class period; class m uses t0 + (m-1) * dt.
    #[arg(long, default_value_t = 10)]
    pub t0: usize,

    /// Period increment between classes.
    #[arg(long, default_value_t = 1)]
    pub dt: usize,

    /// Largest class count M.
    #[arg(long = "m-max", default_value_t = 11)]
    pub m_max: usize,

    /// Comma-separated electrode counts to sweep.
    #[arg(long = "channel-set", value_delimiter = ',', default_value = "1,2,4,8")]
    pub channel_set: Vec<usize>,

    /// Comma-separated methods to compare.
    #[arg(long, value_delimiter = ',', default_value = "rpt,cca")]
    pub methods: Vec<String>,
}

#[derive(Debug, Args)]
pub struct MismatchArgs {
    #[command(flatten)]
    pub shared: SharedArgs,

    /// Comma-separated class periods.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "28,26,25,24,23,22,21,20,18"
    )]
    pub periods: Vec<usize>,

    /// Comma-separated trial lengths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "32,48,64,96,128")]
    pub lengths: Vec<usize>,

    /// Pre-stimulus rows available to the covariance estimator.
    #[arg(long = "prestim-rows", default_value_t = 12000)]
    pub prestim_rows: usize,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub shared: SharedArgs,

    /// Dataset manifest (TOML).
    #[arg(long)]
    pub manifest: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_subcommand() {
        let cli = Cli::try_parse_from([
            "rpt", "roc", "--t0", "25", "--t1", "15", "--length", "100", "--snr-db", "-15",
            "--trials", "2500", "--seed", "3", "--out", "roc.csv",
        ])
        .unwrap();
        match cli.command {
            Command::Roc(args) => {
                assert_eq!((args.t0, args.t1), (25, 15));
                assert_eq!(args.shared.snr_db, -15.0);
                assert_eq!(args.shared.trials, 2500);
            }
            other => panic!("unexpected {other:?}"),
        }

        let cli = Cli::try_parse_from([
            "rpt",
            "tradeoff",
            "--channel-set",
            "1,2,4,8",
            "--m-max",
            "11",
            "--length",
            "50",
            "--methods",
            "rpt,cca",
            "--out",
            "t.csv",
        ])
        .unwrap();
        match cli.command {
            Command::Tradeoff(args) => {
                assert_eq!(args.channel_set, vec![1, 2, 4, 8]);
                assert_eq!(args.m_max, 11);
                assert_eq!(args.methods, vec!["rpt", "cca"]);
            }
            other => panic!("unexpected {other:?}"),
        }

        let cli = Cli::try_parse_from([
            "rpt",
            "gap",
            "--lengths",
            "40,80,160",
            "--alpha",
            "0.92",
            "--out",
            "g.csv",
        ])
        .unwrap();
        match cli.command {
            Command::Gap(args) => {
                assert_eq!(args.lengths, vec![40, 80, 160]);
                assert_eq!(args.alpha, 0.92);
            }
            other => panic!("unexpected {other:?}"),
        }

        for cmd in ["dict", "accuracy", "mismatch"] {
            Cli::try_parse_from(["rpt", cmd, "--out", "x.csv"]).unwrap();
        }
        Cli::try_parse_from(["rpt", "classify", "--manifest", "m.toml", "--out", "x.csv"]).unwrap();

        // Shared flags are available on every subcommand.
        Cli::try_parse_from([
            "rpt",
            "classify",
            "--manifest",
            "m.toml",
            "--out",
            "x.csv",
            "--method",
            "cca",
            "--harmonics",
            "3",
            "--wait",
            "0.25",
            "--window",
            "1.0",
            "--fs",
            "256",
            "--channels",
            "8",
            "--rho",
            "0.7",
            "--seed",
            "11",
            "--trials",
            "10",
            "--snr-db",
            "-10",
            "--length",
            "64",
            "--threads",
            "2",
        ])
        .unwrap();
    }
}
