use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use icfa::config::ExperimentConfig;
use icfa::sweep;

/// Achievable rates and precoder design for MIMO interference channels
/// with finite-alphabet inputs.
#[derive(Parser)]
#[command(name = "icfa", version, about)]
struct Cli {
    /// Worker threads (default: ICFA_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; defaults to the config's `out` or a per-command name.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate finite-alphabet rates over the SNR grid; writes CSV.
    Sweep(CommonArgs),
    /// Run the WSR optimizer; writes a precoder report and a trace CSV.
    Optimize(CommonArgs),
    /// Print the closed-form low-SNR beamforming design.
    DesignLow(CommonArgs),
    /// Print the high-SNR power-allocation design and its cascade.
    DesignHigh(CommonArgs),
    /// Print the interference-alignment rate-loss accounting.
    IaLoss(CommonArgs),
    /// Validate gradients against finite differences; exits nonzero on failure.
    Gradcheck(CommonArgs),
    /// Detect one random transmission with the soft MAP detector.
    DetectDemo(CommonArgs),
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn write_output(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("# wrote {}", path.display());
    Ok(())
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();

    let threads = cli
        .threads
        .or_else(|| std::env::var("ICFA_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }

    match &cli.command {
        Command::Sweep(args) => {
            let cfg = load_config(args)?;
            let csv = sweep::run_sweep(&cfg)?;
            let path = cfg.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
            write_output(&path, &csv)?;
        }
        Command::Optimize(args) => {
            let cfg = load_config(args)?;
            let (report, trace) = sweep::run_optimize(&cfg)?;
            let path = cfg.out.clone().unwrap_or_else(|| PathBuf::from("optimize.txt"));
            write_output(&path, &report)?;
            let trace_path = path.with_extension("trace.csv");
            write_output(&trace_path, &trace)?;
        }
        Command::DesignLow(args) => {
            let cfg = load_config(args)?;
            let report = sweep::design_low_report(&cfg)?;
            print!("{report}");
            if let Some(path) = &cfg.out {
                write_output(path, &report)?;
            }
        }
        Command::DesignHigh(args) => {
            let cfg = load_config(args)?;
            let report = sweep::design_high_report(&cfg)?;
            print!("{report}");
            if let Some(path) = &cfg.out {
                write_output(path, &report)?;
            }
        }
        Command::IaLoss(args) => {
            let cfg = load_config(args)?;
            let report = sweep::ia_loss_report(&cfg)?;
            print!("{report}");
            if let Some(path) = &cfg.out {
                write_output(path, &report)?;
            }
        }
        Command::Gradcheck(args) => {
            let cfg = load_config(args)?;
            let (report, ok) = sweep::run_gradcheck(&cfg)?;
            print!("{report}");
            if let Some(path) = &cfg.out {
                write_output(path, &report)?;
            }
            if !ok {
                return Ok(ExitCode::from(1));
            }
        }
        Command::DetectDemo(args) => {
            let cfg = load_config(args)?;
            let report = sweep::detect_demo(&cfg)?;
            print!("{report}");
            if let Some(path) = &cfg.out {
                write_output(path, &report)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
