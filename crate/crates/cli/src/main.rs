use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use irs_robust::harness::{self, Config, SweepAxis};
use irs_robust::lmi::LmiForm;
use irs_robust::maxrho::{check_energy_activity, sdp_at};
use irs_robust::{conic, Error};

/// Robust transmit and reflect beamforming for an IRS-assisted link.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel realization and write its convergence trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides `system.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Average over random channels at each value of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of N, beta, gamma1, M; defaults to the config's sweep section.
        #[arg(long)]
        axis: Option<SweepAxis>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check the config and run the oracle/LMI cross-checks.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the SDP at a fixed reflection magnitude in SDPA sparse format.
    ExportSdp {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long, value_enum, default_value = "full")]
        form: Form,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Form {
    Full,
    Reduced,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_infeasible() => EXIT_INFEASIBLE,
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn load(path: &Path) -> Result<Config> {
    Ok(Config::load(path)?)
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>) -> Result<()> {
    let cfg = load(&config)?;
    let seed = seed.unwrap_or(cfg.system.seed);
    let (ch, sol) = harness::run_single(&cfg, seed)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("trace.csv");
    harness::write_trace_csv(BufWriter::new(File::create(&path)?), &sol)?;
    let slack = check_energy_activity(&sol, &ch, &cfg.system)?;
    println!(
        "{} iterations ({:?}), power {:.4} dB ({:.4} dBm), rho {:.6}, kappa_m {:.6}, rank ratio {:.2e}",
        sol.iterations,
        sol.stop,
        sol.power_db(),
        cfg.system.to_dbm(sol.power),
        sol.rho,
        sol.kappa_m,
        sol.rank_ratio
    );
    if let Some(s) = slack {
        println!("energy slack {s:.3e}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep(
    config: PathBuf,
    axis: Option<SweepAxis>,
    values: Option<Vec<f64>>,
    trials: Option<usize>,
    out: PathBuf,
) -> Result<()> {
    let cfg = load(&config)?;
    let (axis, values) = match (axis, values, &cfg.sweep) {
        (Some(a), Some(v), _) => (a, v),
        (a, v, Some(s)) => (a.unwrap_or(s.axis), v.unwrap_or_else(|| s.values.clone())),
        _ => bail!("no sweep axis/values given on the command line or in the config"),
    };
    let trials = trials.unwrap_or(cfg.system.trials);
    let points = harness::run_sweep(&cfg, axis, &values, trials)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("sweep.csv");
    harness::write_sweep_csv(BufWriter::new(File::create(&path)?), &points)?;
    for p in &points {
        println!(
            "{axis}={:<8} power {:>9.4} dB (std {:.4})  rho {:.4}  iters {:.1}  failed {}/{}",
            p.axis_value, p.power_db_mean, p.power_db_std, p.rho_mean, p.iters_mean, p.infeasible_count, p.trials
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn validate(config: PathBuf) -> Result<bool> {
    let cfg = load(&config)?;
    println!("config ok");
    let mut all = true;
    for c in harness::self_check(&cfg) {
        all &= c.passed;
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(all)
}

fn export(config: PathBuf, rho: f64, form: Form, seed: Option<u64>, out: PathBuf) -> Result<()> {
    let cfg = load(&config)?;
    let ch = irs_robust::channel::generate_channels(&cfg.system, &cfg.topology, seed.unwrap_or(cfg.system.seed))?;
    let form = match form {
        Form::Full => LmiForm::Full,
        Form::Reduced => LmiForm::Reduced,
    };
    let (problem, scale) = sdp_at(&ch, &cfg.system, rho, form, cfg.algorithm.align)?;
    fs::write(&out, conic::to_sdpa(&problem)).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} (W = {scale:.6e} x solution)", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, out, seed } => run(config, out, seed),
        Command::Sweep { config, axis, values, trials, out } => sweep(config, axis, values, trials, out),
        Command::Validate { config } => match validate(config) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_CHECK_FAILED),
            Err(e) => Err(e),
        },
        Command::ExportSdp { config, rho, form, seed, out } => export(config, rho, form, seed, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
