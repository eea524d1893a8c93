use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fieldmapper_cli::commands::{self, HoughTestArgs, Overrides};
use fieldmapper_cli::config::CliError;

#[derive(Parser)]
#[command(name = "fieldmapper", version, about = "Multi-agent GP field mapping with hazard avoidance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mission and write metrics, circles, plans and heatmaps.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        /// Disable relocation (plain GP baseline).
        #[arg(long)]
        no_avoidance: bool,
    },
    /// Run baseline and avoidance arms over consecutive seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect circles in a PGM image and print them as CSV.
    HoughTest {
        image: PathBuf,
        #[arg(long)]
        r_min: f64,
        #[arg(long)]
        r_max: f64,
        #[arg(long, default_value_t = 1.0)]
        sensitivity: f64,
        /// Also dump one PGM per accumulator radius here.
        #[arg(long)]
        accumulator_dir: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FIELDMAPPER_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("FIELDMAPPER_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            agents,
            steps,
            no_avoidance,
        } => {
            let overrides = Overrides {
                seed,
                agents,
                steps,
                no_avoidance,
            };
            commands::cmd_run(&config, &overrides, &out)
        }
        Command::Compare { config, seeds, out } => commands::cmd_compare(&config, seeds, &out),
        Command::HoughTest {
            image,
            r_min,
            r_max,
            sensitivity,
            accumulator_dir,
        } => commands::cmd_hough_test(&HoughTestArgs {
            image,
            r_min,
            r_max,
            sensitivity,
            accumulator_dir,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fieldmapper: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
