//! `pica` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use pica_core::netsim::{run_scenario, Method};

use crate::config::{ExperimentConfig, Overrides, THREADS_ENV};
use crate::figures::emit_figures;
use crate::results::{write_results, ResultRow};
use crate::summary::summary_table;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Experiment could not run (bad data directory, numeric failure, ...).
    pub const RUN: i32 = 1;
    /// Unknown flag or malformed flag value.
    pub const USAGE: i32 = 2;
    /// Config file unreadable or settings invalid.
    pub const CONFIG: i32 = 3;
    /// Output location not writable.
    pub const OUTPUT: i32 = 4;
    /// Results CSV unreadable or empty when deriving figures.
    pub const RESULTS: i32 = 5;
}

#[derive(Debug, Parser)]
#[command(name = "pica", version, about = "Progressive ICA over a simulated forwarding chain")]
pub struct Cli {
    /// Methods to run, comma separated.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    /// Intermediate node counts k, comma separated.
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<usize>>,
    /// Initial sampling steps, comma separated.
    #[arg(long, value_delimiter = ',')]
    mu0: Option<Vec<f64>>,
    #[arg(long)]
    alpha0: Option<f64>,
    /// Convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Slow-gradient threshold in (0, 1).
    #[arg(long)]
    p_break: Option<f64>,
    /// Per-node iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use generated sources (default).
    #[arg(long, conflicts_with = "wav_dir")]
    synthetic: bool,
    /// Use the mono WAV files in this directory as sources.
    #[arg(long)]
    wav_dir: Option<PathBuf>,
    /// Samples per generated source.
    #[arg(long)]
    samples: Option<usize>,
    /// Seconds added per forwarding hop.
    #[arg(long)]
    link_delay: Option<f64>,
    /// Results CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with defaults for any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write plot data files next to the results CSV.
    #[arg(long)]
    emit_figures: bool,
    /// Skip the sweep; derive plot data from an existing results CSV.
    #[arg(long, value_name = "CSV")]
    figures_from: Option<PathBuf>,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            method: self.method.clone(),
            nodes: self.nodes.clone(),
            mu0: self.mu0.clone(),
            alpha0: self.alpha0,
            tol: self.tol,
            p_break: self.p_break,
            max_iter: self.max_iter,
            trials: self.trials,
            seed: self.seed,
            synthetic: self.synthetic.then_some(true),
            wav_dir: self.wav_dir.clone(),
            samples: self.samples,
            link_delay: self.link_delay,
            out: self.out.clone(),
            emit_figures: self.emit_figures.then_some(true),
        }
    }
}

fn output_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Fails early, before any compute, if `out` cannot be created.
fn check_writable(out: &Path) -> std::io::Result<()> {
    tempfile::NamedTempFile::new_in(output_dir(out)).map(drop)
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };

    if let Some(csv) = &cli.figures_from {
        return figures(csv, output_dir(csv));
    }

    let file = match &cli.config {
        Some(path) => match Overrides::from_file(path) {
            Ok(o) => o,
            Err(e) => return fail(exit::CONFIG, &e),
        },
        None => Overrides::default(),
    };
    let threads = std::env::var(THREADS_ENV).ok();
    let cfg = match ExperimentConfig::resolve(cli.overrides().over(file), threads.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => return fail(exit::CONFIG, &e),
    };
    if let Err(e) = check_writable(&cfg.out) {
        return fail(exit::OUTPUT, &format!("cannot write {}: {e}", cfg.out.display()));
    }

    let dataset = match cfg.dataset() {
        Ok(d) => d,
        Err(e) => return fail(exit::RUN, &e),
    };
    let entries = match run_scenario(&cfg.methods, &dataset, &cfg.grid(), cfg.trials, cfg.threads) {
        Ok(entries) => entries,
        Err(e) => return fail(exit::RUN, &e),
    };
    let rows: Vec<ResultRow> = entries.iter().map(ResultRow::from_entry).collect();
    if let Err(e) = write_results(&cfg.out, &rows) {
        return fail(exit::OUTPUT, &e);
    }
    print!("{}", summary_table(&rows));
    println!("wrote {} rows to {}", rows.len(), cfg.out.display());

    if cfg.emit_figures {
        return figures(&cfg.out, output_dir(&cfg.out));
    }
    exit::OK
}

fn figures(csv: &Path, dir: &Path) -> i32 {
    match emit_figures(csv, dir) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            exit::OK
        }
        Err(e @ crate::results::ResultsError::Io { .. }) if csv.exists() => fail(exit::OUTPUT, &e),
        Err(e) => fail(exit::RESULTS, &e),
    }
}

fn fail(code: i32, err: &dyn std::fmt::Display) -> i32 {
    eprintln!("error: {err}");
    code
}

