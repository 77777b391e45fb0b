use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use safelearn::config_file::ConfigFile;
use safelearn::harness::{run_one, sweep, write_run};
use safelearn::report::report;
use safelearn::summary::write_summary;

#[derive(Parser)]
#[command(
    name = "safelearn",
    version,
    about = "Safe online learning under an unknown constraint"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its trace, run file and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run seeds `seed, seed + 1, ...` in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Comma-separated horizons; defaults to the config's.
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a run directory.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `<input>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out } => {
            let file = ConfigFile::load(&config)?;
            let cfg = file.experiment()?;
            let dir = out.unwrap_or(file.output.dir);
            let run = run_one(&cfg)?;
            write_run(&dir, &run)?;
            write_summary(&dir.join("summary.csv"), std::slice::from_ref(&run.summary))?;
            let l = &run.output.ledger;
            println!(
                "T={} seed={} regret={:.6} violations={} width_sum={:.6} -> {}",
                cfg.horizon,
                cfg.seed,
                l.regret,
                l.violations,
                l.width_sum,
                dir.display()
            );
        }
        Command::Sweep {
            config,
            seeds,
            horizons,
            out,
        } => {
            let file = ConfigFile::load(&config)?;
            let cfg = file.experiment()?;
            let dir = out.unwrap_or(file.output.dir);
            let horizons = if horizons.is_empty() {
                vec![cfg.horizon]
            } else {
                horizons
            };
            let rows = sweep(&cfg, seeds, &horizons, Some(&dir))?;
            let violating = rows.iter().filter(|r| r.violations > 0).count();
            println!(
                "{} runs, {} with violations -> {}",
                rows.len(),
                violating,
                dir.display()
            );
        }
        Command::Report { input, out } => {
            let out = out.unwrap_or_else(|| input.join("report"));
            let rep = report(&input, &out)
                .with_context(|| format!("building report for {}", input.display()))?;
            for a in &rep.aggregates {
                println!(
                    "T={} n={} regret {:.4} ± {:.4} violations {:.3}",
                    a.horizon, a.n, a.regret_mean, a.regret_std, a.violations_mean
                );
            }
            let failed = rep
                .checks
                .iter()
                .filter(|c| !(c.regret_ok && c.width_sum_ok))
                .count();
            println!(
                "{} runs checked, {} failing a bound",
                rep.checks.len(),
                failed
            );
            if let Some(s) = rep.regret_slope {
                println!("log-log regret slope {s:.3}");
            }
            println!("-> {}", out.display());
        }
    }
    Ok(())
}
