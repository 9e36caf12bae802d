//! Command-line front end for the hopping-robot toolkit.
//!
//! Exit codes: 0 success, 2 configuration/input problem, 3 simulation
//! fault, 4 calibration failure.

mod analysis;
mod common;
mod hop;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "hsa-hopper", version, about = "Spring-brake hopping robot simulator and design tools")]
struct Cli {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/TOML artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hopping sweep over added masses, with and without the spring.
    Hop,
    /// Sweep brake holding power over blocked force and fit both trends.
    Brake,
    /// Size a spring from mass, hop height, and working compression.
    Design {
        /// Supported mass, kg.
        mass: f64,
        /// Target hop height, m.
        height: f64,
        /// Working compression, m.
        compression: f64,
    },
    /// Validate the published comparison-platform table and fit COT vs height.
    Spear {
        /// CSV of rows to validate instead of the bundled table.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Hop height at which to evaluate the fitted COT, m.
        #[arg(long, default_value_t = 0.158)]
        height: f64,
    },
    /// Tune push-off torque and spring damping to hit apex and efficiency targets.
    Calibrate {
        /// Mean apex height target, m.
        #[arg(long, default_value_t = common::DEFAULT_TARGET_APEX)]
        target_apex: f64,
        /// Mean spring-cycle efficiency target.
        #[arg(long, default_value_t = common::DEFAULT_TARGET_ETA)]
        target_eta: f64,
    },
    /// Dump the active stiffness surface as a loadable table.
    Characterize,
}

fn main() {
    // Die quietly when a downstream pipe closes; the runtime ignores
    // SIGPIPE, which would turn `hsa-hopper ... | head` into a panic.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let loaded = common::load_config(cli.config.as_deref(), cli.seed);
    let (cfg, config_path) = match loaded {
        Ok(v) => v,
        Err(e) => fail(&e),
    };
    let base_dir = config_path.as_deref().and_then(|p| p.parent().map(PathBuf::from));

    let result = match &cli.command {
        Command::Hop => hop::cmd_hop(&cfg, base_dir.as_deref(), &cli.out, cli.json),
        Command::Brake => analysis::cmd_brake(&cfg, &cli.out, cli.json),
        Command::Design { mass, height, compression } => {
            analysis::cmd_design(&cfg, *mass, *height, *compression, cli.json)
        }
        Command::Spear { data, height } => {
            analysis::cmd_spear(&cfg, data.as_deref(), *height, cli.json)
        }
        Command::Calibrate { target_apex, target_eta } => hop::cmd_calibrate(
            &cfg,
            base_dir.as_deref(),
            &cli.out,
            *target_apex,
            *target_eta,
            cli.json,
        ),
        Command::Characterize => analysis::cmd_characterize(&cfg, base_dir.as_deref(), &cli.out, cli.json),
    };

    if let Err(e) = result {
        fail(&e);
    }
}

fn fail(e: &hopper_core::Error) -> ! {
    eprintln!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
    std::process::exit(common::exit_code_for(e) as i32);
}
