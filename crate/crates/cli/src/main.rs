//! `gawqed` — command-line front end for the waveguide-QED toolkit.
//!
//! Every subcommand reads a JSON config (`--config`), writes one artifact
//! (`--out`, CSV or JSON depending on the command), and prints a one-line
//! summary to stdout. Errors are emitted as JSON on stderr; the exit code is
//! 0 on success, 2 on validation errors, and 3 on numerical failures.
//! Outputs are byte-identical for identical configs and seeds.

mod commands;
mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(
    name = "gawqed",
    version,
    about = "Waveguide-QED simulator and parameter-estimation toolkit for giant atoms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decay/exchange/collective spectra on a frequency grid (CSV).
    Spectra(CommonArgs),
    /// Decoherence-free frequency search for one atom (JSON).
    Df(CommonArgs),
    /// Relaxation experiment at one qubit frequency (CSV trajectory).
    T1(CommonArgs),
    /// Swap-chevron population map over detuning and time (long-form CSV).
    Chevron(CommonArgs),
    /// Avoided-crossing branch frequencies versus qubit detuning (CSV).
    Crossing(CommonArgs),
    /// Run a pulse schedule; per-segment populations (CSV).
    Sequence(CommonArgs),
    /// Entangling protocol with state tomography (CSV of Pauli expectations).
    Tomography(CommonArgs),
    /// Flux-crosstalk calibration: voltages realizing target frequencies (JSON).
    Calibrate(CommonArgs),
    /// Least-squares spectrum fit on a dataset CSV (JSON report).
    Fit(CommonArgs),
    /// Synthesize a spectrum dataset from a model (CSV).
    Synth(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file for this subcommand.
    #[arg(long)]
    config: PathBuf,
    /// Output artifact path (required unless --dry-run).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the config (synth, fit, tomography shots).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps; falls back to the GAWQED_THREADS env var.
    #[arg(long)]
    threads: Option<usize>,
    /// Validate the config and grids without computing or writing anything.
    #[arg(long)]
    dry_run: bool,
}

/// Validation (exit 2) vs numerical (exit 3) failure.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<gawqed::Error> for CliError {
    fn from(e: gawqed::Error) -> Self {
        match e {
            gawqed::Error::Numerical(m) => CliError::Numerical(format!("numerical failure: {m}")),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Shared per-invocation state handed to each command.
pub struct Ctx {
    pub config: PathBuf,
    out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dry_run: bool,
}

impl Ctx {
    pub fn parse_config<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        let text = std::fs::read_to_string(&self.config).map_err(|e| {
            CliError::validation(format!("cannot read config {:?}: {e}", self.config))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::validation(format!("invalid config {:?}: {e}", self.config))
        })
    }

    pub fn out(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::validation("--out is required (unless --dry-run)"))
    }
}

fn resolve_threads(args: &CommonArgs) -> Result<Option<usize>, CliError> {
    if let Some(n) = args.threads {
        return Ok(Some(n));
    }
    match std::env::var("GAWQED_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::validation(format!("GAWQED_THREADS is not a number: {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let args = match &cli.command {
        Command::Spectra(a)
        | Command::Df(a)
        | Command::T1(a)
        | Command::Chevron(a)
        | Command::Crossing(a)
        | Command::Sequence(a)
        | Command::Tomography(a)
        | Command::Calibrate(a)
        | Command::Fit(a)
        | Command::Synth(a) => a,
    };
    if let Some(n) = resolve_threads(args)? {
        if n == 0 {
            return Err(CliError::validation("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot configure thread pool: {e}")))?;
    }
    let ctx = Ctx {
        config: args.config.clone(),
        out: args.out.clone(),
        seed: args.seed,
        dry_run: args.dry_run,
    };
    match &cli.command {
        Command::Spectra(_) => commands::spectra_cmd(&ctx),
        Command::Df(_) => commands::df_cmd(&ctx),
        Command::T1(_) => commands::t1_cmd(&ctx),
        Command::Chevron(_) => commands::chevron_cmd(&ctx),
        Command::Crossing(_) => commands::crossing_cmd(&ctx),
        Command::Sequence(_) => commands::sequence_cmd(&ctx),
        Command::Tomography(_) => commands::tomography_cmd(&ctx),
        Command::Calibrate(_) => commands::calibrate_cmd(&ctx),
        Command::Fit(_) => commands::fit_cmd(&ctx),
        Command::Synth(_) => commands::synth_cmd(&ctx),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            if e.use_stderr() {
                let err = serde_json::json!({
                    "error": {"kind": "validation", "message": e.to_string()}
                });
                eprintln!("{err}");
                std::process::exit(2);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    match run(&cli) {
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            let err = serde_json::json!({
                "error": {"kind": e.kind(), "message": e.message()}
            });
            eprintln!("{err}");
            std::process::exit(e.exit_code());
        }
    }
}
