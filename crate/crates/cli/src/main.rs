use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weaknull_cli::config::load_config;
use weaknull_cli::{run_config, Overrides};

#[derive(Parser)]
#[command(name = "weaknull", version, about = "Asymptotic-system and wave-equation scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json and CSV files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the scenario.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the example catalogue.
    List,
    /// Parse and check a scenario without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            output,
            seed,
            threads,
        } => load_config(&config)
            .and_then(|cfg| {
                run_config(
                    cfg,
                    &Overrides {
                        output_dir: output,
                        seed,
                        threads,
                    },
                )
            })
            .map(|o| {
                println!("{}", o.output_dir.join("report.json").display());
                o.exit_code
            }),
        Command::List => {
            print!("{}", weaknull::list_catalogue());
            Ok(0)
        }
        Command::ValidateConfig { config } => load_config(&config)
            .and_then(|cfg| cfg.validate().map(|sys| (cfg, sys)))
            .map(|(cfg, sys)| {
                println!("ok: {} on {}", cfg.action.name(), sys.label);
                0
            }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
