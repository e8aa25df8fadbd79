use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pfpwm::{run, RunOptions};

/// Runs a PF-device PWM neuron experiment described by a config file.
#[derive(Debug, Parser)]
#[command(name = "pfpwm", version)]
struct Cli {
    /// Experiment config (key = value text).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// RNG seed, overriding the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps [default: number of processors].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let opts = RunOptions {
        config: cli.config,
        out: cli.out.clone(),
        seed: cli.seed,
        workers: cli.workers.map(|w| w as usize),
    };
    match run(&opts) {
        Ok(report) => {
            if !cli.quiet {
                println!(
                    "{}: wrote {} files to {}",
                    report.kind,
                    report.files.len(),
                    cli.out.display()
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pfpwm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
