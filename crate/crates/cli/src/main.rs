use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use valleyscan::config::RunConfig;
use valleyscan_cli::{
    build_config, cmd_characterize, cmd_compare, cmd_demo, cmd_oracle, cmd_sample, cmd_search, cmd_train, Context,
    Failure, StageResult, DEMO_CONFIG,
};

#[derive(Parser)]
#[command(name = "valleyscan", version, about = "Find, characterize and compare local valleys of Ising/RBM energy landscapes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file; see the defaults below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for concurrent chains; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Continue the search campaign from its checkpoint.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Train an RBM with contrastive divergence and write epoch snapshots.
    Train,
    /// Run the simulated-annealing campaign and write the valley registry.
    Search,
    /// Characterize every registered valley and write the valley report.
    Characterize,
    /// Produce sample sets from the configured samplers.
    Sample,
    /// Compare two samplers' valleys and write the report bundle.
    Compare,
    /// Enumerate a small landscape exactly.
    Oracle,
    /// Run the whole pipeline (bundled n=12 instance unless --config is given).
    Demo,
}

fn run(cli: &Cli) -> StageResult {
    let default_text = matches!(cli.command, Command::Demo).then_some(DEMO_CONFIG);
    let cfg = build_config(cli.config.as_deref(), default_text, cli.seed, cli.out.as_deref())?;
    let ctx = Context::new(cfg, cli.resume)?;
    let stage = || match cli.command {
        Command::Train => cmd_train(&ctx),
        Command::Search => cmd_search(&ctx),
        Command::Characterize => cmd_characterize(&ctx),
        Command::Sample => cmd_sample(&ctx),
        Command::Compare => cmd_compare(&ctx),
        Command::Oracle => cmd_oracle(&ctx),
        Command::Demo => cmd_demo(&ctx),
    };
    match cli.workers {
        Some(0) => Err(Failure::Core(valleyscan::Error::Config("--workers must be >= 1".into()))),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Core(valleyscan::Error::Config(format!("thread pool: {e}"))))?
            .install(stage),
        None => stage(),
    }
}

fn main() -> ExitCode {
    let defaults = format!("Config keys and their defaults:\n\n{}", RunConfig::default().to_text());
    let matches = Cli::command().after_long_help(defaults).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("valleyscan: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
