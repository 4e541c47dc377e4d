use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use compliance_cli::{list_experiments, run, RunOptions};

#[derive(Parser)]
#[command(name = "compliance", version, about = "Tunable-compliance experiments: springs, hoppers, oscillators, modes and legged dead reckoning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the experiments and the figure each one reproduces.
    List,
    /// Run one experiment.
    Run {
        /// Experiment name; optional when --config names it.
        experiment: Option<String>,
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output root; artifacts go to <out>/<experiment>/.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for grids and Monte-Carlo seeds.
        #[arg(long)]
        jobs: Option<usize>,
        /// Set a config value, e.g. `hopper-sweep.sweep.dwell_cycles=12`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", list_experiments());
            ExitCode::SUCCESS
        }
        Command::Run {
            experiment,
            config,
            out,
            seed,
            jobs,
            overrides,
        } => {
            if let Some(n) = jobs {
                if n == 0 {
                    eprintln!("config error: --jobs must be at least 1");
                    return ExitCode::from(2);
                }
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            let opts = RunOptions {
                config,
                experiment,
                out,
                seed,
                overrides,
            };
            match run(&opts) {
                Ok(manifest) => {
                    println!("{}", manifest.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
