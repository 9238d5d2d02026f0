use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dqw::config::{Experiment, ExperimentConfig};
use dqw::error::{AppError, AppResult};
use dqw::runner::{resolve_out_dir, run_experiment, RunOptions};

#[derive(Parser)]
#[command(name = "dqw", version, about = "Driven bosonic quantum walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Driven evolution with trajectory output and growth fits
    Run(Common),
    /// Eigenfrequencies of the coupling graph
    Spectrum(Common),
    /// Final photon numbers across a range of pump frequencies
    Sweep(Common),
    /// Direct integration against the eigenmode factorisation
    Decompose(Common),
    /// Driven spatial search on glued trees
    Search(Common),
    /// Entrance-weight scaling of the search target mode
    Scaling(Common),
    /// Classical random-walk hitting baseline
    Baseline(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment file
    #[arg(long, short)]
    config: PathBuf,
    /// output directory (default: from the config, else out/<experiment>)
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// worker threads for sweeps and multi-depth runs
    #[arg(long)]
    threads: Option<usize>,
    /// integrator step, overriding the config
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, short)]
    quiet: bool,
}

fn execute(exp: Experiment, args: &Common) -> AppResult<PathBuf> {
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(AppError::config("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| AppError::config(e.to_string()))?;
    }
    let mut cfg = ExperimentConfig::load(&args.config)?;
    let exp = cfg.resolve_experiment(Some(exp))?;
    if let Some(dt) = args.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(AppError::config(format!("--dt must be positive, got {dt}")));
        }
        cfg.override_dt(dt);
    }
    let config_dir = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out_dir = resolve_out_dir(args.out.as_deref(), &cfg, &config_dir, exp);
    let opts = RunOptions { out_dir: out_dir.clone(), config_dir, quiet: args.quiet };
    run_experiment(&cfg, exp, &opts)?;
    Ok(out_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (exp, args) = match &cli.command {
        Command::Run(a) => (Experiment::Run, a),
        Command::Spectrum(a) => (Experiment::Spectrum, a),
        Command::Sweep(a) => (Experiment::Sweep, a),
        Command::Decompose(a) => (Experiment::Decompose, a),
        Command::Search(a) => (Experiment::Search, a),
        Command::Scaling(a) => (Experiment::Scaling, a),
        Command::Baseline(a) => (Experiment::Baseline, a),
    };
    match execute(exp, args) {
        Ok(dir) => {
            if !args.quiet {
                println!("{}", dir.join("manifest.json").display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
