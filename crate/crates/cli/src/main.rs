//! `leocoopbf`: run experiments, parameter sweeps and the validation suite.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use leocoopbf::experiment::{
    cmd_simulate, cmd_sweep, cmd_validate, ExperimentConfig, Level, SweepAxis, ValidateOptions,
};

#[derive(Parser)]
#[command(
    name = "leocoopbf",
    version,
    about = "Cooperative LEO downlink beamforming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every drop of a configuration and write traces.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average the configured solvers over drops at each value of one axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// power_dbm, n_antennas, n_sats or n_uts; defaults to the config's sweep.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-validation suite.
    Validate {
        /// Add the Monte-Carlo and oracle cross-checks.
        #[arg(long)]
        full: bool,
        /// Consensus penalty used by the copy-update checks.
        #[arg(long, default_value_t = 1.0)]
        rho_g: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LEOCOOPBF_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("LEOCOOPBF_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let records = cmd_simulate(&cfg, &out)?;
            for r in &records {
                match r.sum_rate_bps_hz {
                    Some(rate) => println!(
                        "drop {:>4} {:<13} {:>12.6} bps/Hz  {} iterations",
                        r.drop,
                        r.solver.name(),
                        rate,
                        r.iterations.unwrap_or(0)
                    ),
                    None => println!("drop {:>4} {:<13} {}", r.drop, r.solver.name(), r.status),
                }
            }
            println!("wrote {}", out.display());
            Ok(records.iter().any(|r| r.ok()))
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let axis = match (axis, &cfg.sweep) {
                (Some(a), _) => a.parse::<SweepAxis>()?,
                (None, Some(s)) => s.axis,
                (None, None) => bail!("no --axis given and the config has no sweep section"),
            };
            let values = match (values, &cfg.sweep) {
                (Some(v), _) => v,
                (None, Some(s)) if s.axis == axis => s.values.clone(),
                _ => bail!("no --values given for axis {}", axis.name()),
            };
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let res = cmd_sweep(&cfg, axis, &values, &out)?;
            for r in &res.rows {
                println!(
                    "{}={:<8} {:<13} {:<5} mean {:>10} se {:>10} overhead {}",
                    r.axis,
                    r.value,
                    r.solver,
                    r.topology,
                    r.mean_sum_rate_bps_hz.map_or("-".into(), |v| format!("{v:.6}")),
                    r.stderr_sum_rate_bps_hz.map_or("-".into(), |v| format!("{v:.6}")),
                    r.overhead_counted_max.map_or("-".into(), |v| format!("{v}")),
                );
            }
            println!("wrote {}", out.display());
            Ok(res.failures < res.runs)
        }
        Command::Validate { full, rho_g, seed } => {
            let opts = ValidateOptions {
                level: if full { Level::Full } else { Level::Quick },
                rho_g,
                seed,
            };
            let report = cmd_validate(&opts);
            for c in &report {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {:<36} {:>7.2}s  {}", c.name, c.wall_time_s, c.detail);
            }
            let failed: Vec<&str> = report.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            if failed.is_empty() {
                println!("all {} checks passed", report.len());
            } else {
                println!("failed: {}", failed.join(", "));
            }
            Ok(failed.is_empty())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| run(cli));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
