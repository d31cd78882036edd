//! `polyfilt`: simulate, filter, verify, plot and report set-membership runs.

mod plot;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use run::{CliError, Overrides};

#[derive(Parser)]
#[command(
    name = "polyfilt",
    version,
    about = "Guaranteed set-membership filtering for polynomial systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the scenario and write the trajectory and measurements.
    Simulate(RunArgs),
    /// Run the filter over the horizon and write one record per step.
    Filter(RunArgs),
    /// Re-check every certificate saved by `filter`.
    Verify(DirArgs),
    /// Draw boxes, polytopes and the true trajectory as SVG (2-D only).
    Plot(DirArgs),
    /// Tabulate box widths and polytope volumes per step.
    Report(DirArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
    /// Output directory (default: the scenario's `output_dir`, else `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for both the simulated noise and the filter's sample points.
    #[arg(long)]
    seed: Option<u64>,
    /// SOS half-degree.
    #[arg(long = "sos-degree")]
    sos_degree: Option<u32>,
    /// Half-spaces allowed beyond the box faces.
    #[arg(long = "max-halfspaces")]
    max_halfspaces: Option<usize>,
    /// Sample points per step.
    #[arg(long)]
    points: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Record wall-clock times in the step records.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct DirArgs {
    /// Directory written by `filter`.
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            sos_degree: self.sos_degree,
            max_halfspaces: self.max_halfspaces,
            points: self.points,
            timings: self.timings,
        }
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let scenario = run::load_scenario(&a.scenario, &a.overrides())?;
            let out = run::output_dir(&scenario, a.out.as_deref());
            run::simulate(&scenario, &out)
        }
        Command::Filter(a) => {
            init_threads(a.threads)?;
            let scenario = run::load_scenario(&a.scenario, &a.overrides())?;
            let out = run::output_dir(&scenario, a.out.as_deref());
            run::filter(&scenario, &out)
        }
        Command::Verify(a) => run::verify(&a.out),
        Command::Plot(a) => plot::plot(&a.out),
        Command::Report(a) => report::report(&a.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POLYFILT_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
