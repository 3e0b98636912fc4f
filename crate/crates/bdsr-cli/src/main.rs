use std::path::PathBuf;
use std::process::ExitCode;

use bdsr_cli::commands::{self, default_path, Overrides};
use bdsr_cli::config::SolverConfig;
use bdsr_cli::diagnostic::theorem1_diagnostic;
use bdsr_cli::sweep::SweepConfig;
use bdsr_cli::{Result, EXIT_ERROR};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bdsr", version, about = "Blind two-dimensional super-resolution with unknown waveforms")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Out {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Knobs {
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation grid side G.
    #[arg(long)]
    grid: Option<usize>,
    /// Peak threshold on ‖f‖₂.
    #[arg(long)]
    threshold: Option<f64>,
    /// Noise bound; switches to the penalised program.
    #[arg(long)]
    zeta: Option<f64>,
}

impl From<Knobs> for Overrides {
    fn from(k: Knobs) -> Self {
        Overrides { seed: k.seed, grid: k.grid, threshold: k.threshold, zeta: k.zeta }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate subspace, scene and observation into document.json.
    Synth {
        /// Preset name (exp1..exp4) or config path.
        spec: String,
        #[command(flatten)]
        knobs: Knobs,
        #[command(flatten)]
        out: Out,
    },
    /// Solve the dual program for a document.
    Solve {
        /// Defaults to OUT/document.json.
        #[arg(long)]
        doc: Option<PathBuf>,
        #[arg(long)]
        zeta: Option<f64>,
        #[command(flatten)]
        out: Out,
    },
    /// Evaluate the dual polynomial on a grid and extract peaks.
    Localize {
        #[arg(long)]
        doc: Option<PathBuf>,
        #[arg(long)]
        dual: Option<PathBuf>,
        #[arg(long, default_value_t = bdsr::localize::DEFAULT_GRID)]
        grid: usize,
        #[arg(long, default_value_t = bdsr::localize::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Least-squares recovery of gains and waveforms at the located peaks.
    Recover {
        #[arg(long)]
        doc: Option<PathBuf>,
        #[arg(long)]
        peaks: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Build the interpolating certificate for the true scene of a document.
    Certify {
        #[arg(long)]
        doc: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[command(flatten)]
        out: Out,
    },
    /// Run the full pipeline for a preset or config.
    Experiment {
        spec: String,
        #[command(flatten)]
        knobs: Knobs,
        #[command(flatten)]
        out: Out,
    },
    /// Success rates over (L, K, R) cells.
    Sweep {
        /// Sweep config; without one the built-in L=19, K=2, R∈{1,2,3} sweep runs.
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        ls: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        rs: Option<Vec<usize>>,
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        out: Out,
    },
    /// Print the sample-complexity shape with unit constants.
    Bound {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        k_tilde: f64,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
    },
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Synth { spec, knobs, out } => commands::synth(&spec, knobs.into(), &out.out),
        Cmd::Experiment { spec, knobs, out } => commands::experiment(&spec, knobs.into(), &out.out),
        Cmd::Solve { doc, zeta, out } => {
            commands::solve(&default_path(&out.out, doc, "document.json"), zeta, &SolverConfig::default(), &out.out)
        }
        Cmd::Localize { doc, dual, grid, threshold, out } => commands::localize(
            &default_path(&out.out, doc, "document.json"),
            &default_path(&out.out, dual, "dual.json"),
            grid,
            threshold,
            &out.out,
        ),
        Cmd::Recover { doc, peaks, out } => commands::recover(
            &default_path(&out.out, doc, "document.json"),
            &default_path(&out.out, peaks, "peaks.json"),
            &out.out,
        ),
        Cmd::Certify { doc, grid, out } => commands::certify(&default_path(&out.out, doc, "document.json"), grid, &out.out),
        Cmd::Sweep { config, seed, trials, ls, ks, rs, threads, out } => {
            let mut cfg = match config {
                Some(p) => SweepConfig::from_json(&std::fs::read(p)?)?,
                None => commands::default_sweep(0),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.trials = trials.unwrap_or(cfg.trials);
            cfg.ls = ls.unwrap_or(cfg.ls);
            cfg.ks = ks.unwrap_or(cfg.ks);
            cfg.rs = rs.unwrap_or(cfg.rs);
            cfg.threads = threads.or(cfg.threads);
            commands::sweep(&cfg, &out.out)
        }
        Cmd::Bound { l, r, k, k_tilde, delta } => {
            println!("{}", serde_json::to_string_pretty(&theorem1_diagnostic(l, r, k, k_tilde, delta)?)?);
            Ok(bdsr_cli::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
