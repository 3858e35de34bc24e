use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glvortex::harness::{run_experiment, ExperimentKind, RunConfig};
use glvortex::harness::run::output_dir;

#[derive(Parser)]
#[command(name = "glv", version, about = "Ginzburg-Landau vortex dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the PDE and track vortices.
    Simulate(Common),
    /// Integrate the effective vortex law.
    Ode(Common),
    /// Run both and compare the trajectories.
    Compare(Common),
    /// Run the configured experiment over a list of ε.
    Sweep(Common),
    /// Run the PDE and emit the diagnostic bundle.
    Diagnose(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent sweep members.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Ode(a) => (ExperimentKind::Ode, a),
        Command::Compare(a) => (ExperimentKind::Compare, a),
        Command::Sweep(a) => (ExperimentKind::Sweep, a),
        Command::Diagnose(a) => (ExperimentKind::Diagnose, a),
    };
    let level = if args.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = RunConfig::load(&args.config).and_then(|mut rc| {
        // The subcommand decides what runs; the file's `kind` is a default.
        rc.kind = kind;
        rc.validate()?;
        let dir = output_dir(args.out.clone(), &rc);
        log::info!("running {kind:?} into {}", dir.display());
        run_experiment(&rc, &dir, args.workers).map(|_| dir)
    });
    match result {
        Ok(dir) => {
            log::info!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
