use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radwave::report::{self, Command};
use radwave::Error;

#[derive(Parser, Debug)]
#[command(name = "radwave", version, about = "Radial wave experiments: solver runs, estimate checks, Picard iteration, lifespan and decay")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug, Clone)]
enum Cmd {
    /// One semilinear run with norm logging.
    Simulate(Flags),
    /// Ratio battery for the linear estimates.
    VerifyEstimates(Flags),
    /// Picard iteration with contraction diagnostics.
    Picard(Flags),
    /// Blow-up time sweep and the ln T against 1/eps fit.
    Lifespan(Flags),
    /// Local energy decay outside the ball.
    Decay(Flags),
}

#[derive(clap::Args, Debug, Clone)]
struct Flags {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    dr: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    /// Worker threads for batch runs.
    #[arg(long)]
    threads: Option<usize>,
}

impl Cmd {
    fn split(&self) -> (Command, &Flags) {
        match self {
            Cmd::Simulate(f) => (Command::Simulate, f),
            Cmd::VerifyEstimates(f) => (Command::VerifyEstimates, f),
            Cmd::Picard(f) => (Command::Picard, f),
            Cmd::Lifespan(f) => (Command::Lifespan, f),
            Cmd::Decay(f) => (Command::Decay, f),
        }
    }
}

fn execute(cmd: Command, flags: &Flags) -> radwave::Result<report::Artifacts> {
    let mut cfg = report::load(cmd, flags.config.as_deref())?;
    if let Some(s) = flags.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(x) = flags.dr {
        cfg.set("dr", &x.to_string())?;
    }
    if let Some(x) = flags.eps {
        cfg.set("eps", &x.to_string())?;
    }
    if let Some(n) = flags.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        radwave::par::init_threads(n);
    }
    let out = report::run(&cfg)?;
    out.write_to(&flags.out)?;
    Ok(out)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::UnsupportedProfile(_) | Error::ResourceLimit(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, flags) = cli.command.split();
    match execute(cmd, flags) {
        Ok(out) => {
            for f in &out.flags {
                eprintln!("flag: {f}");
            }
            println!("{cmd}: wrote {} files to {}", out.files.len(), flags.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
