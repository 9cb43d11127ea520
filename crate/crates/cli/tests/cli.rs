use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DIAG: &str = r#"{"q": 2, "P": [[0.6, 0.4], [0.3, 0.7]], "A": [[2, 0, 0, 0.5], [2, 0, 0.3, 0.5]],
    "grid": 128, "chain_length": 5000, "reps": 8, "seed": 3,
    "sweep": {"family": "rotation_perturb", "values": [0.1, 0.01, 0]},
    "energy": {"u1_radius": 0.35, "iters": 5}}"#;

fn mcocycle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcocycle"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn validate_fills_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"q": 2, "P": [[0.5, 0.5], [0.5, 0.5]], "A": [[1, 0, 0, 1], [0, 1, -1, 0]]}"#,
    );
    let out = mcocycle(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let echoed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echoed["grid"], 1024);
    assert_eq!(echoed["reps"], 32);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        r#"{"q": 2, "P": [[0.5, 0.4], [0.5, 0.5]], "A": [[1, 0, 0, 1], [1, 0, 0, 1]]}"#,
    );
    let out = mcocycle(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 0"));

    let missing = dir.path().join("nope.json");
    assert_eq!(code(&mcocycle(&["validate", missing.to_str().unwrap()])), 4);

    let cfg = write_config(dir.path(), DIAG);
    let unwritable = dir.path().join("no/such/dir/out.csv");
    let out = mcocycle(&["sweep", cfg.to_str().unwrap(), "--out", unwritable.to_str().unwrap()]);
    assert_eq!(code(&out), 4);

    let stiff = write_config(
        dir.path(),
        r#"{"q": 2, "P": [[0.6, 0.4], [0.3, 0.7]], "A": [[1, 1, 0, 1], [0.5, -0.866, 0.866, 0.5]],
            "grid": 1024, "solver": {"max_iters": 3, "tol": 1e-12}}"#,
    );
    assert_eq!(code(&mcocycle(&["stationary", stiff.to_str().unwrap()])), 3);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DIAG);
    for sub in ["lyapunov", "sweep", "stationary"] {
        let runs: Vec<Vec<u8>> = ["1", "4"]
            .iter()
            .map(|t| {
                let out = mcocycle(&[sub, cfg.to_str().unwrap(), "--threads", t]);
                assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
                out.stdout
            })
            .collect();
        assert_eq!(runs[0], runs[1], "{sub}");
    }
}

#[test]
fn sweep_and_energy_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DIAG);
    let sweep = dir.path().join("sweep.csv");
    assert_eq!(
        code(&mcocycle(&[
            "sweep",
            cfg.to_str().unwrap(),
            "--out",
            sweep.to_str().unwrap()
        ])),
        0
    );
    let text = std::fs::read_to_string(&sweep).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,lambda_plus_mc,stderr,lambda_plus_furstenberg,lambda_minus,sum_residual,stationary_residual,reason"
    );
    assert_eq!(text.lines().count(), 4);

    let energy = dir.path().join("energy.csv");
    let out = mcocycle(&[
        "energy-decay",
        cfg.to_str().unwrap(),
        "--out",
        energy.to_str().unwrap(),
        "--grid",
        "256",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("empirical C"));
    let text = std::fs::read_to_string(&energy).unwrap();
    assert_eq!(text.lines().next().unwrap(), "iteration,symbol,energy,bound_rhs");
    assert!(text.lines().all(|l| l.split(',').count() == 4));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("energy.csv.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["recursion_holds"], true);
}

#[test]
fn expanding_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DIAG);
    let out = mcocycle(&["expanding", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["points"]
        .as_array()
        .unwrap()
        .iter()
        .any(|p| !p["expansion"].is_null()));
}
