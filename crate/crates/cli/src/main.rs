use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orbitfix::{cmd_chi, cmd_run, cmd_validate, CliError, RunConfig, EXIT_DIVERGED, EXIT_OK};
use orbitfix_core::engine::StopReason;

#[derive(Parser)]
#[command(name = "orbitfix", version, about = "Mean-value and inertial fixed-point iterations")]
struct Cli {
    /// Directory for relative output paths.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured solver and write the trace and report.
    Run { config: PathBuf },
    /// Check a configuration without iterating.
    Validate { config: PathBuf },
    /// Tabulate chi_n for a weight family.
    Chi {
        /// memoryless, cesaro, window:<w>, constant:<eta> or nesterov:<tau>
        #[arg(long)]
        family: String,
        #[arg(long = "N", default_value_t = 20)]
        n: usize,
        #[arg(long = "K", default_value_t = orbitfix_core::schedules::DEFAULT_CHI_TRUNCATION)]
        k: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("orbitfix: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    let out_dir = cli.out_dir.as_deref();
    match &cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(config)?;
            let outcome = cmd_run(&cfg, out_dir, cli.seed)?;
            println!("{}", serde_json::to_string_pretty(&outcome.report).expect("json value"));
            Ok(match outcome.stop {
                StopReason::Diverged { .. } => EXIT_DIVERGED,
                _ => EXIT_OK,
            })
        }
        Command::Validate { config } => {
            let cfg = RunConfig::load(config)?;
            let report = cmd_validate(&cfg, cli.seed)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("json value"));
            Ok(EXIT_OK)
        }
        Command::Chi { family, n, k } => {
            let csv = cmd_chi(family, *n, *k)?;
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                let path = dir.join("chi.csv");
                std::fs::write(&path, &csv).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            print!("{csv}");
            Ok(EXIT_OK)
        }
    }
}
