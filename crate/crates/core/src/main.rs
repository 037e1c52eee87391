use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use npns::scenario::cli;

#[derive(Parser)]
#[command(name = "npns", version, about = "Nernst-Planck-Navier-Stokes and Poisson-Boltzmann solver")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (a TOML file or a preset name).
    Run {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        check_properties: bool,
    },
    /// Solve only the Poisson-Boltzmann steady state of a scenario.
    Pb {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Semi-analytic 1D Poisson-Boltzmann profile, printed as CSV.
    Pb1d {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        height: f64,
        #[arg(long)]
        w: f64,
        /// Comma-separated z:Z pairs, e.g. 1:1,-1:1.
        #[arg(long, allow_hyphen_values = true)]
        species: String,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Run a scenario and its property suite.
    Verify { config: String },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("NPNS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let args = Args::parse();
    let result = match args.command {
        Command::Run {
            config,
            out,
            check_properties,
        } => cli::run_command(&config, out.as_deref(), check_properties),
        Command::Pb { config, out } => cli::pb_command(&config, out.as_deref()),
        Command::Pb1d {
            eps,
            height,
            w,
            species,
            samples,
        } => cli::pb1d_command(eps, height, w, &species, samples),
        Command::Verify { config } => cli::verify_command(&config),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
