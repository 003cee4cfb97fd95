use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use quasilinear_cli::{run, Command, Options, Scenario};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Validate,
    Simulate,
    Invariant,
    Moments,
    Filter,
}

/// Moment dynamics, invariant states and observer design for quasilinear
/// quantum stochastic systems.
#[derive(Debug, Parser)]
#[command(name = "quasilinear", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the scenario's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Steady-state observer design (filter only).
    #[arg(long)]
    steady: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::Validate => Command::Validate,
        Sub::Simulate => Command::Simulate,
        Sub::Invariant => Command::Invariant,
        Sub::Moments => Command::Moments,
        Sub::Filter => Command::Filter,
    };
    let result = Scenario::load(&cli.config).and_then(|scenario| {
        let dir = match (&cli.out, &scenario.out) {
            (Some(d), _) => d.clone(),
            (None, Some(d)) => cli.config.parent().unwrap_or(std::path::Path::new(".")).join(d),
            (None, None) => PathBuf::from("out"),
        };
        let opts = Options {
            seed: cli.seed,
            steady: cli.steady,
        };
        let artifacts = run(&scenario, command, opts)?;
        for p in artifacts.write(&dir)? {
            println!("wrote {}", p.display());
        }
        artifacts.failure.map_or(Ok(()), Err)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: code={} msg={}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
