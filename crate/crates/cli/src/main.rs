use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qchannel_cli::{format_diagnostics, read_config, run, validate, CliError, Overrides, OUTPUT_ROOT_ENV};

#[derive(Parser)]
#[command(name = "qchannel", version, about = "Simulate and characterize depolarizing qubit channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Replace the seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        flux: Option<f64>,
        #[arg(long)]
        accidentals: Option<f64>,
        #[arg(long)]
        noiseless: bool,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check a config and list problems by JSON path.
    Validate { config: PathBuf },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Validate { config } => match validate(&config) {
            Ok(ds) if ds.is_empty() => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Ok(ds) => {
                eprintln!("{}:\n{}", config.display(), format_diagnostics(&ds));
                ExitCode::from(1)
            }
            Err(e) => fail(e),
        },
        Command::Run { config, seed, flux, accidentals, noiseless, output_dir } => {
            let mut cfg = match read_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            Overrides { seed, flux, accidentals, noiseless, output_dir }.apply(&mut cfg);
            let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
            match run(&cfg, root.as_deref()) {
                Ok(m) => {
                    let unconverged = m.runs.iter().filter(|r| !r.converged).count();
                    println!(
                        "{} artifacts in {} ({:.2} s)",
                        m.artifacts.len() + 1,
                        m.output_dir.display(),
                        m.wall_clock_seconds
                    );
                    if unconverged > 0 {
                        eprintln!("warning: {unconverged} of {} fits did not reach the gradient tolerance", m.runs.len());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
