use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use krigsearch::experiments::{load_config, run_config, RunError};

#[derive(Parser)]
#[command(name = "krigsearch", version, about = "Kriging design and sequential search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` (and the KRIGSEARCH_OUTPUT_DIR variable).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Print the tool version.
    Version,
}

fn read(path: &PathBuf) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(RunError::Io)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Version => {
            println!("krigsearch {}", krigsearch::VERSION);
            Ok(())
        }
        Command::Validate { config } => read(&config)
            .and_then(|t| load_config(&t, None))
            .map(|v| {
                println!("ok: {} ({})", config.display(), v.config.experiment.as_str());
            }),
        Command::Run { config, output } => read(&config)
            .and_then(|t| load_config(&t, output.as_deref()))
            .and_then(|v| run_config(&v))
            .map(|outcome| {
                for line in &outcome.summary {
                    println!("{line}");
                }
                println!(
                    "wrote {} files to {}",
                    outcome.files.len(),
                    outcome.output_dir.display()
                );
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
