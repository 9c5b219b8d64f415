use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use getok_cli::commands::{build_offset, decode, encode, score, synth};
use getok_cli::{CliError, Overrides, RunConfig, CONFIG_ENV};

/// Grid/offset spatial token toolkit.
#[derive(Debug, Parser)]
#[command(name = "getok", version)]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Grid side n (n x n grid tokens).
    #[arg(long, global = true)]
    grid: Option<u32>,
    /// Offset granularity m.
    #[arg(long, global = true)]
    offset_m: Option<u32>,
    /// IoU target for encoding and for box corner labels.
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Square side masks are resized to in build-offset, 0 to keep them.
    #[arg(long, global = true)]
    resize: Option<u32>,
    /// Exit 2 if any record fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode masks to grid tokens.
    Encode(encode::EncodeArgs),
    /// Decode token sequences to masks.
    Decode(decode::DecodeArgs),
    /// Build offset-supervised training data.
    BuildOffset(build_offset::BuildOffsetArgs),
    /// Score rollouts with the grid or offset rewards.
    Score(score::ScoreArgs),
    /// Write a synthetic mask corpus.
    Synth(synth::SynthArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let flags = Overrides {
        grid: cli.grid,
        offset_m: cli.offset_m,
        resize: cli.resize,
        tau: cli.tau,
        seed: cli.seed,
        jobs: cli.jobs,
    };
    let result = RunConfig::resolve(cli.config.as_deref(), &flags)
        .map_err(CliError::Usage)
        .and_then(|cfg| match &cli.command {
            Command::Encode(a) => encode::run(&cfg, a),
            Command::Decode(a) => decode::run(&cfg, a),
            Command::BuildOffset(a) => build_offset::run(&cfg, a),
            Command::Score(a) => score::run(&cfg, a),
            Command::Synth(a) => synth::run(&cfg, a),
        });
    match result {
        Ok(outcome) => {
            if outcome.failed > 0 {
                eprintln!("{} of {} records failed", outcome.failed, outcome.records);
            }
            ExitCode::from(outcome.exit_code(cli.strict) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
