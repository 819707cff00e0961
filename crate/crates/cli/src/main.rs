#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fecap_cli::config::{parse_config, RunConfig};
use fecap_cli::run::{execute, Command, FitInput, PolUnit, RunError, RunRequest};

#[derive(Parser)]
#[command(name = "fecap", version, about = "Ferroelectric capacitor retention and switching simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Configuration file; defaults apply to every key it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of the domain ensemble (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: runs/<subcommand>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (default: number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Upper bound on the simulation time step, seconds.
    #[arg(long, global = true)]
    dt: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Units {
    #[value(name = "C/m2")]
    CPerM2,
    #[value(name = "uC/cm2")]
    UcPerCm2,
}

#[derive(Subcommand)]
enum Cmd {
    /// Free-energy curves of the three reference stacks.
    Landscape,
    /// PUND loop of a pristine device.
    Pund,
    /// Switched fraction over a pulse amplitude and width grid.
    Kinetics,
    /// Retention after one program pulse, with exponential fit.
    Retention,
    /// Bipolar cycling with PUND checkpoints.
    Endurance,
    /// Retention time constants over a width and amplitude grid.
    Sweep,
    /// Exponential fit of an external retention CSV.
    Fit {
        /// CSV with a t_s column and P_C_per_m2, P_uC_per_cm2 or P.
        input: PathBuf,
        /// Unit of a plain `P` column.
        #[arg(long)]
        units: Option<Units>,
    },
}

fn load(cli: &Cli) -> Result<RunConfig, RunError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = cli.dt {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(RunError::Config(format!("--dt must be a positive number of seconds, got {dt}")));
        }
        cfg.max_dt = Some(dt);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), RunError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(RunError::Config("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| RunError::Config(e.to_string()))?;
    }
    let config = load(&cli)?;
    let (command, fit_input) = match &cli.command {
        Cmd::Landscape => (Command::Landscape, None),
        Cmd::Pund => (Command::Pund, None),
        Cmd::Kinetics => (Command::Kinetics, None),
        Cmd::Retention => (Command::Retention, None),
        Cmd::Endurance => (Command::Endurance, None),
        Cmd::Sweep => (Command::Sweep, None),
        Cmd::Fit { input, units } => (
            Command::Fit,
            Some(FitInput {
                path: input.clone(),
                unit: units.map(|u| match u {
                    Units::CPerM2 => PolUnit::CPerM2,
                    Units::UcPerCm2 => PolUnit::UcPerCm2,
                }),
            }),
        ),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(command.name()));
    let report = execute(&RunRequest { command, config, out, force: cli.force, fit_input })?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", report.directory.display());
    for f in &report.files {
        println!("  {f}");
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with 2 on bad arguments, which is reserved for numerical failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
