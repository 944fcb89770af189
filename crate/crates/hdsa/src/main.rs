use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hdsa_cli::{cmd_report, cmd_run, cmd_verify, CliError};

#[derive(Parser)]
#[command(name = "hdsa", version, about = "Hyper-differential sensitivity analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the global analysis and write a result bundle.
    Run {
        config: PathBuf,
        /// Replace an existing bundle in the output directory.
        #[arg(long)]
        force: bool,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory, overriding `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derivative checks and oracle cross-validation for a small problem.
    Verify {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the tables of an existing bundle.
    Report { bundle: PathBuf },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::Run {
            config,
            force,
            workers,
            out,
        } => match cmd_run(&config, out.as_deref(), force, workers) {
            Ok(o) => {
                print!("{}", o.summary);
                println!("\nbundle written to {}", o.dir.display());
                if o.failed() {
                    for f in &o.report.failures {
                        eprintln!("sample {} failed: {}", f.j, f.error);
                    }
                    return ExitCode::from(1);
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Verify { config, workers } => match cmd_verify(&config, workers) {
            Ok(o) => {
                print!("{}", o.render());
                if o.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => fail(e),
        },
        Command::Report { bundle } => match cmd_report(&bundle) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
