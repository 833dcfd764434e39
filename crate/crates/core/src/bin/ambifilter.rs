use std::path::PathBuf;
use std::process::ExitCode;

use ambifilter::cli::{run_cli, Command};
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, ValueEnum)]
enum Sub {
    Simulate,
    Filter,
    WorstCase,
    Picard,
    MinimaxGap,
    OracleCheck,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Filter => Command::Filter,
            Sub::WorstCase => Command::WorstCase,
            Sub::Picard => Command::Picard,
            Sub::MinimaxGap => Command::MinimaxGap,
            Sub::OracleCheck => Command::OracleCheck,
        }
    }
}

/// Robust filtering and control experiments under drift ambiguity.
#[derive(Parser)]
#[command(name = "ambifilter", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Sub,
    /// Path to a `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Ambiguity radius, overrides `model.k`.
    #[arg(long, allow_negative_numbers = true)]
    k: Option<String>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    n_particles: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut overrides = Vec::new();
    if let Some(s) = args.seed {
        overrides.push(("mc.seed".to_string(), s.to_string()));
    }
    if let Some(k) = args.k {
        overrides.push(("model.k".to_string(), k));
    }
    if let Some(n) = args.n_paths {
        overrides.push(("mc.n_paths".to_string(), n.to_string()));
    }
    if let Some(n) = args.n_particles {
        overrides.push(("mc.n_particles".to_string(), n.to_string()));
    }
    if let Some(d) = args.out_dir {
        overrides.push(("output.dir".to_string(), d.display().to_string()));
    }
    let outcome = run_cli(args.subcommand.into(), &args.config, &overrides);
    for e in &outcome.errors {
        eprintln!("error: {e}");
    }
    if let Some(m) = &outcome.manifest {
        eprintln!("{}: {} ({:.2}s)", m.command, m.status, m.wall_clock_seconds);
    }
    ExitCode::from(outcome.exit_code as u8)
}
