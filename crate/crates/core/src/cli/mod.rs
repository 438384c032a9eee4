//! Command-line frontend.
//!
//! Every command that writes a file also writes `<file>.manifest.json`
//! recording the arguments, the resolved configuration and SHA-256 digests
//! of inputs and outputs; `replay` reruns a manifest and compares digests.
//! A path of `-` reads stdin or writes stdout, and no manifest is written
//! for stdout.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod analyze;
mod generate;
mod pipeline;

use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::correlator::{CorrelationError, CorrelationMode};
use crate::fitting::{FitError, ModelId};
use crate::io::{manifest_path, sha256_file, IoError, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "antibunch", version, about = "Photon-correlation simulation, histogramming and fitting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a timestamp stream from a config file.
    Simulate(SimulateArgs),
    /// Histogram pair delays between two channels of a timestamp stream.
    Correlate(CorrelateArgs),
    /// Poisson-normalise a raw histogram.
    Normalize(NormalizeArgs),
    /// Fit a model to a histogram or an x,y[,sigma] table.
    Fit(FitArgs),
    /// Tabulate a laser-detuning scan across the emitter line.
    Scan(GenerateArgs),
    /// Tabulate intensity and linewidth against drive power.
    Saturation(GenerateArgs),
    /// Tabulate an IRF-convolved lifetime decay.
    Tcspc(GenerateArgs),
    /// Rerun the command recorded in a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: String,
    /// Output format; inferred from the extension when absent.
    #[arg(long, value_parser = ["binary", "csv"])]
    pub format: Option<String>,
}

#[derive(Debug, clap::Args)]
pub struct CorrelateArgs {
    #[arg(long = "in", default_value = "-")]
    pub input: String,
    #[arg(long)]
    pub start_ch: u8,
    #[arg(long)]
    pub stop_ch: u8,
    #[arg(long)]
    pub bin_ps: u64,
    /// Largest |τ| of the histogram window.
    #[arg(long)]
    pub window_ps: u64,
    #[arg(long, default_value = "all_pairs")]
    pub mode: CorrelationMode,
    /// Delay on the stop line in start_stop mode.
    #[arg(long, default_value_t = 0)]
    pub stop_delay_ps: u64,
    /// Write raw counts without normalisation.
    #[arg(long)]
    pub raw: bool,
    /// Integration time; taken from the input's manifest, else from the span
    /// of the stream.
    #[arg(long)]
    pub duration_ps: Option<u64>,
    /// Number of time slices correlated in parallel; does not affect the result.
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, clap::Args)]
pub struct NormalizeArgs {
    #[arg(long = "in", default_value = "-")]
    pub input: String,
    /// Start and stop rates [counts/s] replacing counts / integration time.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub rates_per_s: Option<Vec<f64>>,
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    #[arg(long = "in", default_value = "-")]
    pub input: String,
    #[arg(long)]
    pub model: ModelId,
    /// Starting values overriding the heuristic guess, as name=value.
    #[arg(long, value_delimiter = ',')]
    pub init: Vec<String>,
    /// Parameters held at their starting value.
    #[arg(long, value_delimiter = ',')]
    pub fix: Vec<String>,
    /// IRF width, held fixed; required for the g² models.
    #[arg(long)]
    pub irf_fwhm_ps: Option<f64>,
    /// Fit only histogram bins with |τ| at most this value.
    #[arg(long)]
    pub tau_max_ps: Option<f64>,
    /// Also refit g² with the IRF width scaled by 0.9 and 1.1.
    #[arg(long)]
    pub irf_sensitivity: bool,
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, clap::Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `rng_seed` for the measurement noise.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Fit report path; defaults to `<out>.fit.json`.
    #[arg(long)]
    pub report: Option<String>,
    /// Resolution-limited display spectra of a scan.
    #[arg(long)]
    pub spectra: Option<String>,
}

#[derive(Debug, clap::Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Directory receiving the regenerated outputs; a temporary one by default.
    #[arg(long)]
    pub into: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration: exit code 2.
    Usage(String),
    /// Failure while running: exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<CorrelationError> for CliError {
    fn from(e: CorrelationError) -> Self {
        match e {
            CorrelationError::InvalidRequest(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::UnknownParameter(_) | FitError::InitialOutOfBounds { .. } | FitError::NotAG2Model(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub(crate) type CliResult<T> = Result<T, CliError>;

/// Parses `args` (without the program name), runs the command and returns
/// the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(std::iter::once("antibunch".to_string()).chain(args.iter().cloned())) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command, &args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command, args: &[String]) -> CliResult<()> {
    match cmd {
        Command::Simulate(a) => pipeline::simulate(&a, args),
        Command::Correlate(a) => pipeline::correlate(&a, args),
        Command::Normalize(a) => pipeline::normalize(&a, args),
        Command::Fit(a) => analyze::fit(&a, args),
        Command::Scan(a) => generate::scan(&a, args),
        Command::Saturation(a) => generate::saturation(&a, args),
        Command::Tcspc(a) => generate::tcspc(&a, args),
        Command::Replay(a) => replay(&a),
    }
}

pub(crate) fn read_input(path: &str) -> CliResult<Vec<u8>> {
    let mut bytes = Vec::new();
    if path == "-" {
        std::io::stdin().lock().read_to_end(&mut bytes)?;
    } else {
        bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("{path}: {e}")))?;
    }
    Ok(bytes)
}

/// Writes `bytes` to `path` or stdout.
pub(crate) fn write_output(path: &str, bytes: &[u8]) -> CliResult<()> {
    if path == "-" {
        let mut out = BufWriter::new(std::io::stdout().lock());
        out.write_all(bytes)?;
        out.flush()?;
    } else {
        std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("{path}: {e}")))?;
    }
    Ok(())
}

/// Collects manifest fields while a command runs.
pub(crate) struct Recorder {
    manifest: RunManifest,
    started: Instant,
    primary: Option<String>,
}

impl Recorder {
    pub(crate) fn new(command: &str, args: &[String]) -> Self {
        Recorder {
            manifest: RunManifest::new(command, args.to_vec()),
            started: Instant::now(),
            primary: None,
        }
    }

    pub(crate) fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }

    pub(crate) fn input(&mut self, path: &str) -> CliResult<()> {
        if path != "-" {
            self.manifest.add_input(Path::new(path))?;
        }
        Ok(())
    }

    /// Records a written output; the first one names the manifest file.
    pub(crate) fn output(&mut self, path: &str) -> CliResult<()> {
        if path != "-" {
            self.manifest.add_output(Path::new(path))?;
            self.primary.get_or_insert_with(|| path.to_string());
        }
        Ok(())
    }

    pub(crate) fn finish(mut self) -> CliResult<()> {
        self.manifest.wall_clock_s = self.started.elapsed().as_secs_f64();
        self.manifest.working_dir = std::env::current_dir()?.display().to_string();
        if let Some(p) = &self.primary {
            self.manifest.write(&manifest_path(Path::new(p)))?;
        }
        Ok(())
    }
}

/// Flags whose values are output paths and get redirected on replay.
const OUTPUT_FLAGS: [&str; 3] = ["--out", "--report", "--spectra"];

fn redirect(path: &str, dir: &Path) -> PathBuf {
    dir.join(Path::new(path).file_name().unwrap_or(path.as_ref()))
}

fn replay(a: &ReplayArgs) -> CliResult<()> {
    let m = RunManifest::load(&a.manifest)?;
    if m.command == "replay" {
        return Err(CliError::Usage("cannot replay a replay".into()));
    }
    let tmp = tempfile::tempdir()?;
    let into = match &a.into {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            std::path::absolute(d)?
        }
        None => tmp.path().to_path_buf(),
    };
    let previous = std::env::current_dir()?;
    std::env::set_current_dir(&m.working_dir)
        .map_err(|e| CliError::Runtime(format!("working directory {}: {e}", m.working_dir)))?;
    let result = replay_in_place(&m, &into);
    std::env::set_current_dir(previous)?;
    result
}

fn replay_in_place(m: &RunManifest, into: &Path) -> CliResult<()> {
    for (path, digest) in &m.inputs {
        let now = sha256_file(Path::new(path)).map_err(|e| CliError::Runtime(format!("input {path}: {e}")))?;
        if &now != digest {
            return Err(CliError::Runtime(format!("input {path} changed since the recorded run")));
        }
    }
    let mut args = m.args.clone();
    let mut i = 0;
    while i < args.len() {
        if OUTPUT_FLAGS.contains(&args[i].as_str()) && i + 1 < args.len() && args[i + 1] != "-" {
            args[i + 1] = redirect(&args[i + 1], into).display().to_string();
            i += 1;
        } else if let Some((flag, value)) = args[i].split_once('=') {
            if OUTPUT_FLAGS.contains(&flag) && value != "-" {
                args[i] = format!("{flag}={}", redirect(value, into).display());
            }
        }
        i += 1;
    }
    let code = run(args);
    if code != 0 {
        return Err(CliError::Runtime(format!("replayed command exited with {code}")));
    }
    let mut differ = 0;
    for (path, digest) in &m.outputs {
        let again = redirect(path, into);
        let now = sha256_file(&again).map_err(|e| CliError::Runtime(format!("{}: {e}", again.display())))?;
        if &now == digest {
            eprintln!("identical  {path}");
        } else {
            eprintln!("DIFFERENT  {path}");
            differ += 1;
        }
    }
    if differ > 0 {
        return Err(CliError::Runtime(format!("{differ} output(s) differ from the manifest")));
    }
    Ok(())
}
