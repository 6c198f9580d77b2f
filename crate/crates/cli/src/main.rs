mod args;
mod commands;
mod manifest;
mod sequence;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Outcome;

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::Fuse(c) => commands::fuse_cmd(cli, c),
        Command::Voxelize(c) => commands::voxelize_cmd(cli, c),
        Command::Eval(c) => commands::eval_cmd(cli, c),
        Command::Synth(c) => commands::synth_cmd(cli, c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();

    let result = match cli.threads {
        Some(0) => Err(anyhow::anyhow!("--threads must be at least 1")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| run(&cli))),
        None => run(&cli),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&outcome.summary).expect("summary is valid JSON"));
    } else if let Some(report) = &outcome.report {
        print!("{report}");
    }
    if outcome.checks_passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: a built-in invariant check failed");
        ExitCode::from(2)
    }
}
