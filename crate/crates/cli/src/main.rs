use std::path::PathBuf;

use clap::Parser;
use isoperim_cli::{run, Overrides};

/// Compute, track and certify isoperimetric constants of sampler iterates.
#[derive(Debug, Parser)]
#[command(name = "isoperim", version)]
struct Args {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Seed, overriding the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() {
    let args = Args::parse();
    let overrides = Overrides { seed: args.seed, out: args.out, quiet: args.quiet, threads: args.threads };
    std::process::exit(run(&args.config, &overrides));
}
