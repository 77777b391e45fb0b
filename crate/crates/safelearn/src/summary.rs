//! Per-run summary rows: `seed,T,regret,violations,violation_mag_sum,width_sum,runtime_ms`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{io_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub regret: f64,
    pub violations: usize,
    pub violation_mag_sum: f64,
    pub width_sum: f64,
    pub runtime_ms: f64,
}

pub const HEADER: [&str; 7] = [
    "seed",
    "T",
    "regret",
    "violations",
    "violation_mag_sum",
    "width_sum",
    "runtime_ms",
];

/// Writes the header even when `rows` is empty.
pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
