use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use kerrmod::cli::{error_record, load_spec, run};
use kerrmod::config::Command;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Ensemble,
    Wigner,
    Analytic,
    Poincare,
    Sweep,
    OracleCheck,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Ensemble => Command::Ensemble,
            Cmd::Wigner => Command::Wigner,
            Cmd::Analytic => Command::Analytic,
            Cmd::Poincare => Command::Poincare,
            Cmd::Sweep => Command::Sweep,
            Cmd::OracleCheck => Command::OracleCheck,
        }
    }
}

/// Driven, dissipative, time-modulated Kerr oscillator toolkit.
#[derive(Debug, Parser)]
#[command(name = "kerrmod", version)]
struct Args {
    command: Cmd,
    /// Run specification (TOML, or a manifest.json from an earlier run).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads. Results do not depend on this value.
    #[arg(long, env = "KERRMOD_WORKERS")]
    workers: Option<usize>,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = (|| {
        let mut spec = load_spec(&args.config, Some(args.command.into()))?;
        if let Some(seed) = args.seed {
            spec.set_seed(seed);
        }
        if let Some(out) = &args.out {
            spec.output_dir = out.clone();
        }
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = args.workers {
            pool = pool.num_threads(n.max(1));
        }
        let pool = pool
            .build()
            .map_err(|e| kerrmod::Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
        pool.install(|| run(&spec))
    })();
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            match outcome.passed {
                Some(false) => ExitCode::from(3),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            match e.kind() {
                "config" | "invalid-parameter" => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
