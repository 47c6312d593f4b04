//! `chemoblow` command-line scenario runner.
//!
//! Exit codes: 0 on success (including detected blow-up), 1 for invalid
//! arguments or configuration, 2 for I/O failures, 3 when a run aborts
//! without an outcome or sweep points fail.

use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chemoblow::output::write_run;
use chemoblow::presets::{preset_text, PRESETS};
use chemoblow::scenario::{Scenario, ScenarioError};
use chemoblow::sweep::run_sweep;
use clap::{Args, Parser, Subcommand};

/// Radially symmetric attraction-repulsion chemotaxis simulator.
#[derive(Debug, Parser)]
#[command(name = "chemoblow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write diagnostics, summary and profiles.
    Run(RunArgs),
    /// Run the [sweep] of a scenario in parallel and write an index.
    Sweep(RunArgs),
    /// Inspect the bundled presets.
    Presets {
        #[command(subcommand)]
        command: PresetCommand,
    },
}

#[derive(Debug, Subcommand)]
enum PresetCommand {
    /// List preset names and descriptions.
    List,
    /// Print the configuration file of a preset.
    Show { name: String },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file, or the name of a bundled preset.
    config: String,
    /// Worker threads for sweeps [default: available parallelism].
    #[arg(long)]
    workers: Option<NonZeroUsize>,
    /// Root directory for artifacts.
    #[arg(long, env = "CHEMOBLOW_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn scenario(&self) -> Result<Scenario, ScenarioError> {
        let path = Path::new(&self.config);
        let mut scenario = match preset_text(&self.config) {
            Some(text) if !path.exists() => Scenario::from_toml_str(text)?,
            _ => Scenario::load(path)?,
        };
        if let Some(seed) = self.seed {
            scenario.seed = seed;
        }
        Ok(scenario)
    }

    fn workers(&self) -> usize {
        self.workers
            .or_else(|| std::thread::available_parallelism().ok())
            .map_or(1, NonZeroUsize::get)
    }
}

fn run(args: &RunArgs) -> Result<ExitCode, ScenarioError> {
    let scenario = args.scenario()?;
    if scenario.sweep.is_some() {
        log::info!("`{}` has a [sweep] table; running the base scenario only", scenario.name);
    }
    let run = scenario.execute()?;
    let dir = args.out_dir.join(&scenario.name);
    let artifacts = write_run(&dir, &run)?;
    let s = &run.summary;
    println!(
        "{}: {:?} at t = {:e} (sup w = {:e}, {} steps)",
        s.name, s.status, s.t_final, s.supnorm_final, s.steps
    );
    println!("summary: {}", artifacts.summary.display());
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: &RunArgs) -> Result<ExitCode, ScenarioError> {
    let scenario = args.scenario()?;
    let index = run_sweep(&scenario, &args.out_dir, args.workers())?;
    let failed = index.failed();
    println!(
        "{}: {} sweep, {} points, {} failed",
        index.name,
        index.mode,
        index.points.len(),
        failed
    );
    println!("index: {}", args.out_dir.join(&index.name).join("index.json").display());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn presets(command: &PresetCommand) -> Result<ExitCode, ScenarioError> {
    match command {
        PresetCommand::List => {
            for (name, text) in PRESETS {
                let scenario = Scenario::from_toml_str(text)?;
                println!("{name:<20} {}", scenario.description);
            }
        }
        PresetCommand::Show { name } => {
            let text = preset_text(name)
                .ok_or_else(|| ScenarioError::Config(format!("unknown preset `{name}`")))?;
            print!("{text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Presets { command } => presets(command),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code() as u8)
    })
}
