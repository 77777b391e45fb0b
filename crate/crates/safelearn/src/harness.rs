//! Single runs and seed sweeps, with their on-disk layout:
//!
//! - `trace_T<T>_seed<seed>.jsonl` per-round records
//! - `run_T<T>_seed<seed>.json` resolved config and final ledger
//! - `summary.csv` one row per run

use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use safelearn_core::engine::run;
use safelearn_core::{ExperimentConfig, RegretLedger, RunOutput};
use serde::{Deserialize, Serialize};

use crate::summary::{write_summary, SummaryRow};
use crate::trace::write_trace;
use crate::{io_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    pub config: ExperimentConfig,
    pub ledger: RegretLedger,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub output: RunOutput,
    pub summary: SummaryRow,
}

pub fn run_one(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let start = Instant::now();
    let output = run(config)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let l = &output.ledger;
    let summary = SummaryRow {
        seed: config.seed,
        horizon: config.horizon,
        regret: l.regret,
        violations: l.violations,
        violation_mag_sum: l.violation_magnitude_sum,
        width_sum: l.width_sum,
        runtime_ms,
    };
    Ok(RunArtifacts {
        config: config.clone(),
        output,
        summary,
    })
}

pub fn trace_path(dir: &Path, horizon: usize, seed: u64) -> PathBuf {
    dir.join(format!("trace_T{horizon}_seed{seed}.jsonl"))
}

pub fn run_file_path(dir: &Path, horizon: usize, seed: u64) -> PathBuf {
    dir.join(format!("run_T{horizon}_seed{seed}.json"))
}

/// Writes the trace and the run file for one run.
pub fn write_run(dir: &Path, run: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (t, seed) = (run.config.horizon, run.config.seed);
    let path = trace_path(dir, t, seed);
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    write_trace(BufWriter::new(file), &run.output.records)?;
    let path = run_file_path(dir, t, seed);
    let body = serde_json::to_string_pretty(&RunFile {
        config: run.config.clone(),
        ledger: run.output.ledger.clone(),
    })?;
    std::fs::write(&path, body).map_err(io_err(&path))?;
    Ok(())
}

/// Seeds `master + i` for `i < seeds`, crossed with every horizon. Runs in
/// parallel; the returned rows are ordered by horizon, then seed.
pub fn sweep(
    base: &ExperimentConfig,
    seeds: usize,
    horizons: &[usize],
    dir: Option<&Path>,
) -> Result<Vec<SummaryRow>> {
    let jobs: Vec<ExperimentConfig> = horizons
        .iter()
        .flat_map(|&t| {
            (0..seeds as u64).map(move |i| {
                let mut c = base.clone();
                c.horizon = t;
                c.seed = base.seed.wrapping_add(i);
                c
            })
        })
        .collect();
    let rows: Vec<SummaryRow> = jobs
        .par_iter()
        .map(|cfg| {
            let run = run_one(cfg)?;
            if let Some(d) = dir {
                write_run(d, &run)?;
            }
            Ok(run.summary)
        })
        .collect::<Result<_>>()?;
    if let Some(d) = dir {
        write_summary(&d.join("summary.csv"), &rows)?;
    }
    Ok(rows)
}
