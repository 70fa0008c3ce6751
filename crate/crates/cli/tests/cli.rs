use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use silab_cli::{run, CliError, CommandKind, RunConfig};

fn silab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn bounds_run_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = silab(
        dir.path(),
        &[
            "verify-bounds",
            "--set",
            "bounds.batch.count=3",
            "--grid",
            "bounds.ns=1,4",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        header(&dir.path().join("bounds.csv")),
        "instance,seed,theorem,n,c,min_slack,num_violations"
    );
    let rows = fs::read_to_string(dir.path().join("bounds.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    // Per instance: the entropy bound for every (n, c), three more bounds per n.
    assert_eq!(rows, 3 * (2 * 4 + 3 * 2));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.starts_with("generated_at_unix: "));
    assert!(summary.contains("command: verify-bounds\nseed: 7\nstatus: PASS\n"));
}

#[test]
fn experiment_outputs_have_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = silab(
        dir.path(),
        &[
            "sweep",
            "--seed",
            "3",
            "--set",
            "sweep.agent.total_steps=2000",
            "--set",
            "sweep.replicates=2",
        ],
    );
    assert!(matches!(out.status.code(), Some(0 | 1)));
    assert_eq!(
        header(&dir.path().join("curves.csv")),
        "run_id,seed,algorithm,n,m,eta,env_steps,eval_return"
    );
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 2);
    assert!(sweep.lines().any(|l| l.starts_with("sil,q,1,")));
}

#[test]
fn failed_gate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = silab(
        dir.path(),
        &[
            "sweep",
            "--set",
            "sweep.agent.total_steps=1000",
            "--set",
            "sweep.gate.max_ratio=0",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("status: FAIL"));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["verify-bounds", "--set", "bounds.no_such_field=1"][..],
        &["verify-operators", "--grid", "operators.grid.betas="],
        &["verify-operators", "--set", "operators.grid.ns=[0]"],
        &["no-such-command"],
    ] {
        let out = silab(dir.path(), args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn unreadable_config_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let out = silab(
        dir.path(),
        &["train", "--config", missing.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_fields_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(
        &path,
        r#"{"seed": 11, "bounds": {"batch": {"count": 2}, "ns": [3], "cs": [0.5]}}"#,
    )
    .unwrap();
    let out = silab(
        dir.path(),
        &["verify-bounds", "--config", path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("seed: 11"));
    assert!(stdout.contains("checks: 8"));
}

#[test]
fn library_entry_point_reports_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        out: dir.path().to_path_buf(),
        ..Default::default()
    };
    cfg.operators.batch.count = 2;
    cfg.operators.contraction_pairs = 20;
    let outcome = run(CommandKind::VerifyOperators, &cfg).unwrap();
    assert!(outcome.passed);
    let names: Vec<_> = outcome
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_owned())
        .collect();
    assert_eq!(
        names,
        [
            "operators_sandwich.csv",
            "operators_contraction.csv",
            "summary.txt"
        ]
    );

    cfg.operators.grid.alphas.clear();
    assert!(matches!(
        run(CommandKind::VerifyOperators, &cfg),
        Err(CliError::Config(_))
    ));
}
