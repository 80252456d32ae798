//! Command-line front end: `segment`, `evaluate`, `benchmark` and `phantom`.

pub mod args;
mod commands;
pub mod manifest;
pub mod report;

use anyhow::Result;

pub use args::Cli;
use args::Command;
use commands::Globals;

pub fn run(cli: Cli) -> Result<()> {
    if cli.jobs == Some(0) {
        anyhow::bail!("--jobs must be at least 1");
    }
    let ctx = Globals {
        out_dir: cli.out_dir.clone(),
        spacing: cli.spacing,
    };
    let go = move || match &cli.command {
        Command::Segment(a) => commands::segment_cmd(&ctx, a),
        Command::Evaluate(a) => commands::evaluate_cmd(&ctx, a),
        Command::Benchmark(a) => commands::benchmark_cmd(&ctx, a),
        Command::Phantom(a) => commands::phantom_cmd(&ctx, a),
    };
    match cli.jobs {
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(go),
        _ => go(),
    }
}
