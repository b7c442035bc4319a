//! `lfx`: render, train, evaluate and inspect light fields.
//!
//! Errors are reported as one line on stderr, `error[<kind>]: <message>`,
//! with exit code 2 for configuration/usage problems, 3 for IO and file
//! formats, 4 for everything else.

mod commands;
mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lfx_core::LfError;

#[derive(Parser)]
#[command(name = "lfx", version, about = "Light-field subspace toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// JSON config for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Dotted-key override applied on top of the config (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a layered scene; `--out x.lf4d` or a PNG grid directory.
    Render { scene: PathBuf, optics: PathBuf },
    /// Render random layered scenes and a manifest into `--out`.
    MakeDataset,
    /// Train a network; logs and checkpoints go to `--out`.
    Train,
    /// Score a checkpoint (or `bicubic[:scale]`) on a dataset manifest.
    Eval { model: String, dataset: PathBuf },
    /// Super-resolve one light field.
    Sr { checkpoint: PathBuf, input: PathBuf },
    /// Write SAI grid, MacPI, EPI and VSI panels.
    Inspect {
        input: PathBuf,
        #[arg(long)]
        u: Option<usize>,
        #[arg(long)]
        v: Option<usize>,
        #[arg(long)]
        y: Option<usize>,
        #[arg(long)]
        x: Option<usize>,
    },
    /// Finite-difference check of every operator and a toy network.
    Gradcheck,
    /// Dump the X-shaped attention mask as PNG and CSV.
    Maskdump {
        s: usize,
        l: usize,
        /// Number or `inf`.
        d_max: String,
    },
}

#[derive(Debug)]
pub enum CliError {
    Lf(LfError),
    Usage(String),
    /// A check ran to completion and failed.
    Check(String),
}

impl From<LfError> for CliError {
    fn from(e: LfError) -> Self {
        CliError::Lf(e)
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Lf(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::Check(_) => "check",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Lf(LfError::Config(_)) => 2,
            CliError::Lf(LfError::Io { .. } | LfError::Format { .. }) => 3,
            _ => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Lf(e) => e.to_string(),
            CliError::Usage(m) | CliError::Check(m) => m.clone(),
        }
    }
}

fn setup_threads() -> Result<(), CliError> {
    lfx_core::par::retain_freed_memory();
    let Ok(v) = std::env::var("LFX_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("LFX_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    setup_threads()?;
    let c = &cli.common;
    match cli.cmd {
        Cmd::Render { scene, optics } => commands::render(c, &scene, &optics),
        Cmd::MakeDataset => commands::make_dataset(c),
        Cmd::Train => commands::train_cmd(c),
        Cmd::Eval { model, dataset } => commands::eval(c, &model, &dataset),
        Cmd::Sr { checkpoint, input } => commands::sr(c, &checkpoint, &input),
        Cmd::Inspect { input, u, v, y, x } => commands::inspect(c, &input, [u, v, y, x]),
        Cmd::Gradcheck => commands::gradcheck(c),
        Cmd::Maskdump { s, l, d_max } => commands::maskdump(c, s, l, &d_max),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return report(&CliError::Usage(first.to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    let msg = e.message().replace(['\n', '\r'], " ");
    eprintln!("error[{}]: {msg}", e.kind());
    ExitCode::from(e.code())
}
