use std::io::Cursor;

use safelearn::harness::run_one;
use safelearn::summary::{read_summary, write_summary, SummaryRow, HEADER};
use safelearn::trace::{read_trace, record_line, write_trace};
use safelearn_core::ExperimentConfig;
use serde_json::Value;

fn short_run(preset: &str) -> safelearn::harness::RunArtifacts {
    let cfg = ExperimentConfig::from_preset(preset, 2, 40, 11).unwrap();
    run_one(&cfg).unwrap()
}

#[test]
fn reals_carry_seventeen_significant_digits() {
    let run = short_run("linear_ball");
    let mut rec = run.output.records[5].clone();
    rec.gamma = 0.1;
    rec.loss_value = 1.0 / 3.0;
    let line = record_line(&rec).unwrap();
    assert!(line.contains("\"gamma\":1.0000000000000001e-1"), "{line}");
    assert!(
        line.contains("\"loss_value\":3.3333333333333331e-1"),
        "{line}"
    );
    assert!(line.contains("\"t\":6,"), "{line}");
    // 17 significant digits round-trip exactly
    let v: Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["loss_value"].as_f64().unwrap(), 1.0 / 3.0);
}

#[test]
fn non_finite_reals_become_null() {
    let run = short_run("linear_ball");
    let mut rec = run.output.records[0].clone();
    rec.expected_width = f64::NAN;
    rec.cumulative_regret_proxy = f64::INFINITY;
    let v: Value = serde_json::from_str(&record_line(&rec).unwrap()).unwrap();
    assert!(v["expected_width"].is_null());
    assert!(v["cumulative_regret_proxy"].is_null());
}

#[test]
fn keys_follow_record_order() {
    let run = short_run("finite_k10");
    let line = record_line(&run.output.records[0]).unwrap();
    let v: serde_json::Map<String, Value> = serde_json::from_str(&line).unwrap();
    let keys: Vec<&str> = v.keys().map(String::as_str).collect();
    assert_eq!(
        &keys[..4],
        &[
            "t",
            "action",
            "recommended_distribution_summary",
            "pre_map_action"
        ]
    );
    assert_eq!(*keys.last().unwrap(), "cumulative_regret_proxy");
}

#[test]
fn trace_round_trips_line_per_round() {
    let run = short_run("polytopic_m3");
    let mut buf = Vec::new();
    write_trace(&mut buf, &run.output.records).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), 40);
    let rows = read_trace(Cursor::new(buf)).unwrap();
    for (row, rec) in rows.iter().zip(&run.output.records) {
        assert_eq!(row["t"].as_u64().unwrap() as usize, rec.t);
        assert_eq!(
            row["width_at_action"].as_f64().unwrap(),
            rec.width_at_action
        );
        assert_eq!(row["violated"].as_bool().unwrap(), rec.violated);
    }
}

#[test]
fn summary_header_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    write_summary(&path, &[]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.trim_end(), HEADER.join(","));
    assert!(read_summary(&path).unwrap().is_empty());

    let rows = vec![
        SummaryRow {
            seed: 1,
            horizon: 10,
            regret: -0.5,
            violations: 2,
            violation_mag_sum: 0.125,
            width_sum: 3.0,
            runtime_ms: 1.5,
        },
        short_run("linear_ball").summary,
    ];
    write_summary(&path, &rows).unwrap();
    assert_eq!(read_summary(&path).unwrap(), rows);
}
