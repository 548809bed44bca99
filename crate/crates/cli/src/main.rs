mod args;
mod commands;
mod failure;
mod manifest;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Context;
use failure::Failure;
use settings::Settings;

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(Failure::invalid("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::invalid(e.to_string()))?;
    let mut ctx = Context {
        seed: cli.seed,
        threads,
        settings: Settings::load(cli.config.as_deref())?,
    };
    match &cli.command {
        Command::Mine(a) => commands::mine(a, &mut ctx),
        Command::BuildVocab(a) => commands::build_vocab(a, &mut ctx),
        Command::Pretrain(a) => commands::pretrain(a, &mut ctx),
        Command::Finetune(a) => commands::finetune_cmd(a, &mut ctx),
        Command::Generate(a) => commands::generate(a, &mut ctx),
        Command::Evaluate(a) => commands::evaluate(a, &mut ctx),
        Command::Sweep(a) => commands::sweep(a, &mut ctx),
        Command::Bws(a) => commands::bws(a, &mut ctx),
        Command::Significance(a) => commands::significance(a, &mut ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}
