use clap::{Args, Parser, Subcommand};
use nonconf_ifs::cli::{self, Command, RunOptions};
use nonconf_ifs::config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

/// Regularity checks, Hausdorff-dimension brackets, distortion certificates
/// and renderings for contracting planar semigroups.
#[derive(Parser)]
#[command(name = "nonconf-ifs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV/PGM/summary files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps and inner sampling loops.
    #[arg(long)]
    jobs: Option<usize>,
    /// Reuse completed sweep rows from an earlier interrupted run.
    #[arg(long)]
    resume: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the compatibility condition K < 1/l^alpha and report bounds.
    Regularity(Common),
    /// Bowen-root dimension bracket across the p-schedule.
    Bounds(Common),
    /// Randomized geometric/angle distortion verification.
    Distortion(Common),
    /// Emit a point cloud as PGM raster and CSV.
    Render(Common),
    /// Parameter sweep with one CSV row per grid point.
    Sweep(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Regularity(c) => (Command::Regularity, c),
        Cmd::Bounds(c) => (Command::Bounds, c),
        Cmd::Distortion(c) => (Command::Distortion, c),
        Cmd::Render(c) => (Command::Render, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.config.display());
            return ExitCode::from(cli::EXIT_CONFIG as u8);
        }
    };
    let config = match RunConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(cli::EXIT_CONFIG as u8);
        }
    };
    let opts = RunOptions {
        out_dir: common.out,
        seed: common.seed,
        jobs: common.jobs,
        resume: common.resume,
    };
    ExitCode::from(cli::run_command(cmd, config, &opts) as u8)
}
