//! Aggregation over a run directory.
//!
//! Reads `summary.csv`, the run files and the traces written by the
//! harness and emits, into the output directory:
//!
//! - `summary.csv` the per-run rows, ordered by `T` then seed
//! - `aggregate.csv` per-`T` mean and sample standard deviation of each column
//! - `checks.csv` per-run bound checks (regret certificate, width sum,
//!   violation counts with constants 4 and 20)
//! - `curve_{regret,width,violations}_T<T>.csv` two-column `t,value` files,
//!   averaged over seeds

use std::collections::{BTreeMap, HashMap};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use safelearn_core::analysis::{
    alpha_grid, certify_regret, check_width_sum_bound, epsilon_grid, loglog_slope,
    regret_constants, violation_count_report, EluderProfile, DEFAULT_SEARCH_BUDGET,
};
use serde::Serialize;
use serde_json::Value;

use crate::harness::{run_file_path, trace_path, RunFile};
use crate::summary::{read_summary, write_summary, SummaryRow};
use crate::trace::read_trace;
use crate::{io_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub n: usize,
    pub regret_mean: f64,
    pub regret_std: f64,
    pub violations_mean: f64,
    pub violations_std: f64,
    pub violation_mag_sum_mean: f64,
    pub violation_mag_sum_std: f64,
    pub width_sum_mean: f64,
    pub width_sum_std: f64,
    pub runtime_ms_mean: f64,
    pub runtime_ms_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub normalized_regret: f64,
    pub regret_bound: f64,
    pub regret_ok: bool,
    pub width_sum: f64,
    pub width_sum_bound: f64,
    pub width_sum_ok: bool,
    pub violation_count_ok_c4: bool,
    pub violation_count_ok_c20: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<SummaryRow>,
    pub aggregates: Vec<AggregateRow>,
    pub checks: Vec<CheckRow>,
    /// Log-log slope of mean regret against `T`, when at least two
    /// horizons have positive mean regret.
    pub regret_slope: Option<f64>,
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn aggregate(rows: &[SummaryRow]) -> Vec<AggregateRow> {
    let mut by_t: BTreeMap<usize, Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        by_t.entry(r.horizon).or_default().push(r);
    }
    by_t.into_iter()
        .map(|(t, rs)| {
            let col = |f: &dyn Fn(&SummaryRow) -> f64| {
                mean_std(&rs.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let (regret_mean, regret_std) = col(&|r| r.regret);
            let (violations_mean, violations_std) = col(&|r| r.violations as f64);
            let (violation_mag_sum_mean, violation_mag_sum_std) = col(&|r| r.violation_mag_sum);
            let (width_sum_mean, width_sum_std) = col(&|r| r.width_sum);
            let (runtime_ms_mean, runtime_ms_std) = col(&|r| r.runtime_ms);
            AggregateRow {
                horizon: t,
                n: rs.len(),
                regret_mean,
                regret_std,
                violations_mean,
                violations_std,
                violation_mag_sum_mean,
                violation_mag_sum_std,
                width_sum_mean,
                width_sum_std,
                runtime_ms_mean,
                runtime_ms_std,
            }
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

const AGGREGATE_HEADER: [&str; 12] = [
    "T",
    "n",
    "regret_mean",
    "regret_std",
    "violations_mean",
    "violations_std",
    "violation_mag_sum_mean",
    "violation_mag_sum_std",
    "width_sum_mean",
    "width_sum_std",
    "runtime_ms_mean",
    "runtime_ms_std",
];

const CHECK_HEADER: [&str; 10] = [
    "seed",
    "T",
    "normalized_regret",
    "regret_bound",
    "regret_ok",
    "width_sum",
    "width_sum_bound",
    "width_sum_ok",
    "violation_count_ok_c4",
    "violation_count_ok_c20",
];

fn field(v: &Value, key: &str) -> f64 {
    v.get(key).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

/// Per-round curves of one trace: cumulative regret proxy, width at the
/// played action, cumulative violation count.
fn curves(trace: &[Value]) -> [Vec<f64>; 3] {
    let mut violations = 0.0;
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for v in trace {
        if v.get("violated").and_then(Value::as_bool) == Some(true) {
            violations += 1.0;
        }
        out[0].push(field(v, "cumulative_regret_proxy"));
        out[1].push(field(v, "width_at_action"));
        out[2].push(violations);
    }
    out
}

fn check_run(file: &RunFile, trace: &[Value], eluder: &EluderProfile) -> Result<CheckRow> {
    let cfg = &file.config;
    let e = |eps: f64| eluder.value(eps);
    let widths: Vec<f64> = trace.iter().map(|v| field(v, "width_at_action")).collect();
    let beta = cfg.radius();
    let cert = certify_regret(&file.ledger, &regret_constants(cfg), &e)?;
    let (width_sum, width_sum_bound, width_sum_ok) =
        match check_width_sum_bound(&widths, beta, &alpha_grid(), &e) {
            Ok(c) => (c.observed, c.bound, true),
            Err(safelearn_core::Error::BoundViolated {
                observed, bound, ..
            }) => (observed, bound, false),
            Err(other) => return Err(other.into()),
        };
    let counts = |c: f64| violation_count_report(&widths, beta, c, &epsilon_grid(), &e).holds();
    Ok(CheckRow {
        seed: cfg.seed,
        horizon: cfg.horizon,
        normalized_regret: cert.realized,
        regret_bound: cert.bound,
        regret_ok: cert.holds(),
        width_sum,
        width_sum_bound,
        width_sum_ok,
        violation_count_ok_c4: counts(4.0),
        violation_count_ok_c20: counts(20.0),
    })
}

fn write_curve(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{v:.16e}")])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Builds the report for `input` and writes it into `out`.
pub fn report(input: &Path, out: &Path) -> Result<Report> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let summary = input.join("summary.csv");
    let mut rows = if summary.exists() {
        read_summary(&summary)?
    } else {
        Vec::new()
    };
    rows.sort_by_key(|r| (r.horizon, r.seed));
    write_summary(&out.join("summary.csv"), &rows)?;
    let aggregates = aggregate(&rows);
    write_rows(&out.join("aggregate.csv"), &AGGREGATE_HEADER, &aggregates)?;

    let mut checks = Vec::new();
    let mut eluders: HashMap<String, EluderProfile> = HashMap::new();
    let mut sums: BTreeMap<usize, ([Vec<f64>; 3], usize)> = BTreeMap::new();
    for r in &rows {
        let run_path = run_file_path(input, r.horizon, r.seed);
        let trace_file = trace_path(input, r.horizon, r.seed);
        if !run_path.exists() || !trace_file.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&run_path).map_err(io_err(&run_path))?;
        let file: RunFile = serde_json::from_str(&text)?;
        let handle = std::fs::File::open(&trace_file).map_err(io_err(&trace_file))?;
        let trace = read_trace(BufReader::new(handle))?;

        let key = serde_json::to_string(&(&file.config.environment, &file.config.analysis))?;
        if !eluders.contains_key(&key) {
            eluders.insert(
                key.clone(),
                EluderProfile::for_config(&file.config, DEFAULT_SEARCH_BUDGET)?,
            );
        }
        checks.push(check_run(&file, &trace, &eluders[&key])?);

        let c = curves(&trace);
        let entry = sums.entry(r.horizon).or_insert_with(|| {
            (
                [
                    vec![0.0; c[0].len()],
                    vec![0.0; c[0].len()],
                    vec![0.0; c[0].len()],
                ],
                0,
            )
        });
        for (acc, cur) in entry.0.iter_mut().zip(&c) {
            for (a, x) in acc.iter_mut().zip(cur) {
                *a += x;
            }
        }
        entry.1 += 1;
    }
    write_rows(&out.join("checks.csv"), &CHECK_HEADER, &checks)?;
    for (t, (acc, n)) in &sums {
        for (name, values) in ["regret", "width", "violations"].iter().zip(acc) {
            let mean: Vec<f64> = values.iter().map(|v| v / *n as f64).collect();
            let path: PathBuf = out.join(format!("curve_{name}_T{t}.csv"));
            write_curve(&path, &mean)?;
        }
    }

    let pts: Vec<(f64, f64)> = aggregates
        .iter()
        .filter(|a| a.regret_mean > 0.0)
        .map(|a| (a.horizon as f64, a.regret_mean))
        .collect();
    let regret_slope = (pts.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        loglog_slope(&xs, &ys)
    });
    Ok(Report {
        rows,
        aggregates,
        checks,
        regret_slope,
    })
}
