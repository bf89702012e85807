use std::path::PathBuf;
use std::process::ExitCode;

use actuopt_cli::{parse_values, run, sweep, CliError, ExperimentConfig, Pipeline};
use clap::{Args, Parser, Subcommand};

/// Optimal control, actuator design and worst initial conditions for
/// semilinear parabolic models.
#[derive(Parser)]
#[command(name = "actuopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve with the configured input and design.
    Simulate(Common),
    /// Optimize the input and the actuator design.
    Optimize(Common),
    /// Worst initial condition for the configured input and design.
    WorstIc(Common),
    /// Compare the optimizer with the Riccati feedback on the linearized model.
    RiccatiValidate(Common),
    /// Check adjoint gradients against finite differences.
    Gradcheck(Common),
    /// Run a pipeline over values of one numeric config field.
    Sweep {
        #[arg(value_enum)]
        pipeline: Pipeline,
        #[command(flatten)]
        common: Common,
        /// Dotted config path, e.g. `weights.r_scale` or `actuator.location`.
        #[arg(long)]
        param: String,
        /// `v1,v2,...` or `start:stop:count`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| config.output_dir.clone());
    Ok((config, out))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (pipeline, common) = match &cli.command {
        Command::Simulate(c) => (Pipeline::Simulate, c),
        Command::Optimize(c) => (Pipeline::Optimize, c),
        Command::WorstIc(c) => (Pipeline::WorstIc, c),
        Command::RiccatiValidate(c) => (Pipeline::RiccatiValidate, c),
        Command::Gradcheck(c) => (Pipeline::Gradcheck, c),
        Command::Sweep {
            pipeline,
            common,
            param,
            values,
        } => {
            let (config, out) = load(common)?;
            let values = parse_values(values)?;
            let outcome = sweep(*pipeline, &config, param, &values, &out)?;
            println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
            return Ok(());
        }
    };
    let (config, out) = load(common)?;
    let outcome = run(pipeline, &config, &out)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary["results"])?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ACTUOPT_LOG", "warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("actuopt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
