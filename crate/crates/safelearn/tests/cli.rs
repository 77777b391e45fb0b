use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_safelearn");

fn safelearn(args: &[&str]) -> std::process::Output {
    let out = Command::new(BIN).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "safelearn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn run_sweep_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "horizon = 60\nseed = 2\n\n[environment]\npreset = \"finite_k10\"\n",
    )
    .unwrap();
    let single = dir.path().join("single");
    let many = dir.path().join("many");
    let (config, single_s, many_s) = (
        config.to_str().unwrap(),
        single.to_str().unwrap(),
        many.to_str().unwrap(),
    );

    let out = safelearn(&["run", "--config", config, "--out", single_s]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("T=60 seed=2"));
    for f in ["trace_T60_seed2.jsonl", "run_T60_seed2.json", "summary.csv"] {
        assert!(single.join(f).exists(), "{f}");
    }

    safelearn(&[
        "sweep",
        "--config",
        config,
        "--seeds",
        "3",
        "--horizons",
        "30,60",
        "--out",
        many_s,
    ]);
    let summary = std::fs::read_to_string(many.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 7);

    let out = safelearn(&["report", "--input", many_s]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("6 runs checked"));
    assert!(many.join("report/aggregate.csv").exists());
    assert!(many.join("report/curve_width_T30.csv").exists());

    // the single-run trace equals the matching sweep trace byte for byte
    let a = std::fs::read(single.join("trace_T60_seed2.jsonl")).unwrap();
    let b = std::fs::read(many.join("trace_T60_seed2.jsonl")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        "horizon = 0\n[environment]\npreset = \"linear_ball\"\n",
    )
    .unwrap();
    let out = Command::new(BIN)
        .args(["run", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}
