use std::f64::consts::LN_2;

use markov_cocycle::harness::{
    format_real, load_config, run_energy_decay, run_lyapunov, run_sweep, write_atomic, Csv, ExperimentConfig,
    ENERGY_COLUMNS, SWEEP_COLUMNS,
};
use markov_cocycle::Error;
use proptest::prelude::*;

fn config(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(body).unwrap()
}

fn parse(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

proptest! {
    #[test]
    fn reals_round_trip_bit_exactly(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        let back: f64 = format_real(x).parse().unwrap();
        if x.is_nan() {
            prop_assert!(back.is_nan());
        } else {
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}

#[test]
fn csv_write_then_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let mut csv = Csv::new(&["t", "value"]);
    let values = [0.1, 1e-300, -2.5, f64::INFINITY];
    for (k, v) in values.iter().enumerate() {
        csv.push(vec![k.to_string(), format_real(*v)]);
    }
    write_atomic(&path, csv.render().as_bytes()).unwrap();
    let rows = parse(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(rows[0], ["t", "value"]);
    for (row, v) in rows[1..].iter().zip(values) {
        assert_eq!(row[1].parse::<f64>().unwrap(), v);
    }
}

#[test]
fn lyapunov_reports() {
    let diag = config(r#"{"q": 2, "P": [[0.5, 0.5], [0.5, 0.5]], "A": [[2, 0, 0, 0.5], [2, 0, 0, 0.5]], "grid": 256}"#);
    let report = run_lyapunov(&diag).unwrap();
    assert!((report.lambda_plus.value - LN_2).abs() < 1e-3);
    assert!(report.sum_check_pass);
    assert_eq!(report.to_json(), run_lyapunov(&diag).unwrap().to_json());
    assert!(report.to_json().contains("\"config\""));

    let rot = config(
        r#"{"q": 2, "P": [[0.6, 0.4], [0.3, 0.7]], "A": [[[0, -1], [1, 0]], [[0.6, -0.8], [0.8, 0.6]]], "grid": 256, "chain_length": 2000}"#,
    );
    let report = run_lyapunov(&rot).unwrap();
    assert!(report.lambda_plus.value.abs() < 1e-12);
    assert!(report.lambda_minus_direct.value.abs() < 1e-12);
    assert!(report.furstenberg.value.abs() < 1e-12);
}

#[test]
fn rotation_sweep_follows_the_closed_form() {
    // Constant R_t diag(2, 1/2): λ₊ = acosh(1.25 cos t).
    let cfg = config(
        r#"{"q": 2, "P": [[0.6, 0.4], [0.3, 0.7]], "A": [[2, 0, 0, 0.5], [2, 0, 0, 0.5]], "grid": 256,
            "chain_length": 20000, "reps": 8, "sweep": {"family": "rotation_perturb", "values": [0.1, 0.01, 0.001, 0]}}"#,
    );
    let out = run_sweep(&cfg).unwrap();
    let rows = parse(&out.csv.render());
    assert_eq!(rows[0], SWEEP_COLUMNS);
    let ts: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ts, ["0.1", "0.01", "0.001", "0"]);
    let lam: Vec<f64> = out.rows.iter().map(|r| r.lambda_plus_mc.unwrap()).collect();
    for (row, l) in out.rows.iter().zip(&lam) {
        assert!((l - (1.25 * row.t.cos()).acosh()).abs() < 1e-3);
        assert!(row.sum_residual.unwrap() <= 3.0 * row.combined_stderr.unwrap());
    }
    let gaps: Vec<f64> = lam[..3].iter().map(|l| (l - lam[3]).abs()).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn markov_blend_of_the_identity_cocycle_is_flat() {
    let cfg = config(
        r#"{"q": 2, "P": [[0.6, 0.4], [0.3, 0.7]], "A": [[1, 0, 0, 1], [1, 0, 0, 1]], "grid": 64, "chain_length": 1000, "reps": 4,
            "sweep": {"family": "markov_blend", "values": [0, 0.5, 1], "Q": [[0.1, 0.9], [0.8, 0.2]]}}"#,
    );
    for row in run_sweep(&cfg).unwrap().rows {
        assert_eq!(row.lambda_plus_mc, Some(0.0));
        assert!(row.reason.is_empty());
    }
}

#[test]
fn singular_sweep_points_are_reported_not_fatal() {
    let cfg = config(
        r#"{"q": 2, "P": [[0.6, 0.4], [0.3, 0.7]], "A": [[1, 0, 0, 1], [2, 0, 0, 0.5]], "grid": 64, "chain_length": 1000, "reps": 4,
            "sweep": {"family": "matrix_blend", "values": [0, 0.5], "B": [[-1, 0, 0, 1], [2, 0, 0, 0.5]]}}"#,
    );
    let rows = run_sweep(&cfg).unwrap().rows;
    assert!(rows[0].reason.is_empty());
    assert!(rows[1].lambda_plus_mc.is_none() && !rows[1].reason.is_empty());
}

#[test]
fn energy_trace_csv() {
    let cfg = config(
        r#"{"q": 2, "P": [[0.6, 0.4], [0.3, 0.7]], "A": [[2, 0, 0, 0.5], [2, 0, 0.3, 0.5]], "grid": 256,
            "energy": {"u1_radius": 0.35, "iters": 6}}"#,
    );
    let out = run_energy_decay(&cfg).unwrap();
    let rows = parse(&out.csv.render());
    assert_eq!(rows[0], ENERGY_COLUMNS);
    assert!(rows.iter().all(|r| r.len() == 4));
    let totals: Vec<(f64, f64)> = rows[1..]
        .iter()
        .filter(|r| r[1] == "all")
        .map(|r| (r[2].parse().unwrap(), r[3].parse().unwrap()))
        .collect();
    assert_eq!(totals.len(), out.summary.rounds);
    for pair in totals.windows(2) {
        assert!(pair[1].0 <= pair[0].1 * (1.0 + 1e-12));
    }
    let identity = config(
        r#"{"q": 2, "P": [[0.6, 0.4], [0.3, 0.7]], "A": [[1, 0, 0, 1], [1, 0, 0, 1]], "grid": 64,
            "energy": {"u1_radius": 0.35, "u1_center": 1.0}}"#,
    );
    let err = run_energy_decay(&identity).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn config_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(
        &path,
        r#"{"q": 2, "P": [[0.5, 0.5], [0.5, 0.5]], "A": [[1, 0, 0, 1], [0, 1, -1, 0]]}"#,
    )
    .unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!((cfg.grid, cfg.chain_length, cfg.reps), (1024, 100_000, 32));
    assert_eq!(config(&cfg.to_json()), cfg);
    let missing = load_config(dir.path().join("absent.json")).unwrap_err();
    assert!(matches!(missing, Error::Io(_)));
    assert_eq!(missing.exit_code(), 4);
    std::fs::write(
        &path,
        r#"{"q": 2, "P": [[0.5, 0.4], [0.5, 0.5]], "A": [[1, 0, 0, 1], [0, 1, -1, 0]]}"#,
    )
    .unwrap();
    let bad = load_config(&path).unwrap_err();
    assert!(bad.to_string().contains("row 0"), "{bad}");
}
