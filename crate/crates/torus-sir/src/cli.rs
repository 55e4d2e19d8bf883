//! Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 bad
//! configuration or arguments; failures print a JSON error record on stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{HarnessError, Result};
use crate::formats::OutputDir;
use crate::manifest::{compare, hash_outputs, Manifest, MANIFEST_FILE};
use crate::pipelines::{diag, execute, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "torus-sir", version, about = "Spatial SIR epidemic on the unit torus: simulation, limit system, fluctuation checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of replicates, overriding the config.
    #[arg(long)]
    replicates: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the particle system and write events, snapshots and summaries.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Leave positions out of the snapshot files.
        #[arg(long)]
        no_positions: bool,
    },
    /// Solve the deterministic limit system.
    Pde {
        #[command(flatten)]
        common: Common,
        /// Also write every field as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Distances between particle measures and the limit across population sizes.
    LlnCompare {
        #[command(flatten)]
        common: Common,
    },
    /// Initial covariance functionals against Monte Carlo.
    CltInitial {
        #[command(flatten)]
        common: Common,
    },
    /// Fluctuation variance along the dynamics against the linearized system.
    CltDynamic {
        #[command(flatten)]
        common: Common,
    },
    /// Martingale squares against their predicted quadratic variations.
    QvCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Partial sums of the basis series at doubled cutoffs.
    SpectralDiag {
        /// Sobolev index; repeat for several.
        #[arg(long = "s")]
        s: Vec<f64>,
        /// Comma-separated cutoffs, each double the previous.
        #[arg(long, value_delimiter = ',')]
        cutoffs: Vec<u32>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Without it the table goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a recorded manifest and compare output hashes.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Where to write the reproduced outputs.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            let err = HarnessError::Config(e.kind().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            if let Some(s) = summary {
                println!("{s}");
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn out_dir(flag: Option<PathBuf>, config: &ExperimentConfig) -> Result<PathBuf> {
    flag.or_else(|| config.output_dir.clone())
        .ok_or_else(|| HarnessError::Config("no output directory: pass `--out` or set `output_dir`".into()))
}

/// Runs `mode` into `dir` and writes the manifest; returns the summary.
pub fn run_mode(mode: Mode, config: &ExperimentConfig, options: &RunOptions, dir: &Path) -> Result<serde_json::Value> {
    let mut out = OutputDir::create(dir)?;
    let summary = execute(mode, config, options, &mut out)?;
    let manifest = Manifest::build(mode, options, config, &out)?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Runtime(e.to_string()))? + "\n";
    std::fs::write(&path, text).map_err(crate::error::io_err(&path))?;
    Ok(summary)
}

/// Re-executes a manifest into `dir` and compares the output hashes.
pub fn replay(manifest_path: &Path, dir: &Path) -> Result<crate::manifest::ReplayReport> {
    let manifest = Manifest::load(manifest_path)?;
    let mut out = OutputDir::create(dir)?;
    execute(manifest.command, &manifest.config, &manifest.options, &mut out)?;
    Ok(compare(&manifest.outputs, &hash_outputs(&out)?))
}

fn dispatch(command: Command) -> Result<Option<serde_json::Value>> {
    let (mode, common, options) = match command {
        Command::Simulate { common, no_positions } => (Mode::Simulate, common, RunOptions { no_positions, ..Default::default() }),
        Command::Pde { common, csv } => (Mode::Pde, common, RunOptions { field_csv: csv, ..Default::default() }),
        Command::LlnCompare { common } => (Mode::LlnCompare, common, RunOptions::default()),
        Command::CltInitial { common } => (Mode::CltInitial, common, RunOptions::default()),
        Command::CltDynamic { common } => (Mode::CltDynamic, common, RunOptions::default()),
        Command::QvCheck { common } => (Mode::QvCheck, common, RunOptions::default()),
        Command::SpectralDiag { s, cutoffs, config, out } => {
            let config = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::from_json("{}")?,
            };
            let options = RunOptions { s_values: s, cutoffs, ..Default::default() };
            let dir = out.or_else(|| config.output_dir.clone());
            return match dir {
                Some(dir) => run_mode(Mode::SpectralDiag, &config, &options, &dir).map(Some),
                None => {
                    config.validate(Mode::SpectralDiag)?;
                    print!("{}", diag::table(&diag::diagnose(&config, &options)?));
                    Ok(None)
                }
            };
        }
        Command::Replay { manifest, out } => {
            let report = replay(&manifest, &out)?;
            let value = serde_json::to_value(&report).map_err(|e| HarnessError::Runtime(e.to_string()))?;
            if !report.identical {
                return Err(HarnessError::Runtime(format!("replay differs from the recorded run: {value}")));
            }
            return Ok(Some(value));
        }
    };
    let config = ExperimentConfig::load(&common.config)?;
    let options = RunOptions { replicates: common.replicates, ..options };
    let dir = out_dir(common.out, &config)?;
    run_mode(mode, &config, &options, &dir).map(Some)
}
