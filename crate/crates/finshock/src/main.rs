use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use finshock::lp::HacRule;
use finshock::pipeline::config::InterpChoice;
use finshock::pipeline::{
    cmd_estimate, cmd_lp, cmd_measures, cmd_report, cmd_simulate, PipelineError, RunConfig,
};

/// Panel financial-shock toolkit: inequality measures from survey microdata,
/// sign-identified structural shocks from a pooled Bayesian VAR, and local
/// projections of the distributional response.
#[derive(Parser)]
#[command(name = "finshock", version)]
struct Cli {
    /// Run configuration JSON; built-in defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for posterior sampling and the rotation search
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts and the run manifest
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the identification search
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute inequality measures and carry them to quarterly frequency
    Measures {
        /// Interpolation method for annual measures
        #[arg(long, value_enum)]
        interp: Option<InterpChoice>,
    },
    /// Estimate the pooled VAR and extract sign-identified shocks
    Estimate {
        /// Built-in scheme name or path to a scheme JSON file
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Project outcomes on extracted shocks with Driscoll-Kraay bands
    Lp {
        /// Drop the uncertainty controls from the projection
        #[arg(long)]
        no_uncertainty: bool,
        /// Bandwidth rule for the Bartlett kernel
        #[arg(long, value_enum)]
        hac: Option<HacRule>,
        /// Split the shock into censored positive and negative halves
        #[arg(long)]
        signed: bool,
    },
    /// Summarize a finished run directory
    Report,
    /// Simulate a ground-truth panel, shocks, outcome, and microdata
    Simulate,
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| PipelineError::Config(format!("cannot set thread count: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    if let Some(out) = cli.out {
        config.paths.out_dir = out;
    }
    match cli.command {
        Command::Measures { interp } => {
            if let Some(choice) = interp {
                config.measures.interp = choice;
            }
            cmd_measures(&config)
        }
        Command::Estimate { scheme } => {
            if let Some(name) = scheme {
                config.scheme = name;
            }
            cmd_estimate(&config)
        }
        Command::Lp { no_uncertainty, hac, signed } => {
            if no_uncertainty {
                config.lp.include_uncertainty = false;
            }
            if let Some(rule) = hac {
                config.lp.hac_rule = rule;
            }
            if signed {
                config.lp.signed = true;
            }
            cmd_lp(&config)
        }
        Command::Report => cmd_report(&config),
        Command::Simulate => cmd_simulate(&config),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
