use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use grpdal_kit::runner::{compute_references, load_config, run_experiment, RunOptions};

#[derive(Parser)]
#[command(name = "grpdal-kit", version, about = "Run golden-ratio primal-dual solver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver on every seed and write CSV, JSON and PGM outputs.
    Run {
        config: PathBuf,
        /// Run a single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave the wall_time column empty so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Compute (or find cached) reference solutions.
    Ref { config: PathBuf },
    /// Run the quick invariant suite.
    Check,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Check => {
            return if grpdal_kit::check::run_checks() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            };
        }
        Command::Run {
            config,
            seed,
            out,
            no_timing,
        } => load_config(&config).and_then(|cfg| {
            let summary = run_experiment(
                &cfg,
                &RunOptions {
                    seed,
                    output: out,
                    timing: !no_timing,
                },
            )?;
            for a in &summary.aggregates {
                println!(
                    "{:<18} converged {}/{}  iterations {:.1} ± {:.1}",
                    a.solver, a.converged, a.runs, a.iterations.mean, a.iterations.std
                );
            }
            Ok(())
        }),
        Command::Ref { config } => load_config(&config).and_then(|cfg| {
            for (seed, r) in compute_references(&cfg, &RunOptions::default())? {
                println!("seed {seed}: objective {:.17e} ({})", r.objective, r.source);
            }
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == 1 {
                eprintln!();
                eprintln!("{}", Cli::command().render_usage());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
