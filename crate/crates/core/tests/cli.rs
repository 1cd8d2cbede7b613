use std::path::Path;
use std::process::Command;

use ibrscp::cli::{self, report, solve_scenario, SolveOptions, VerifyOptions};
use ibrscp::dynamics::Role;
use ibrscp::scenario::{examples_dir, Scenario};
use ibrscp::Error;

fn lone_evader(rounds: usize) -> Scenario {
    let mut s = Scenario::from_path(&examples_dir().join("example1.toml")).unwrap();
    s.name = "lone".into();
    s.players.retain(|p| p.role == Role::Evader);
    s.algorithm.ibr_iterations = rounds;
    s.validate().unwrap();
    s
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.path().is_dir() {
            copy_dir(&e.path(), &target);
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

#[test]
fn report_on_empty_directory_is_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let err = report(dir.path()).unwrap_err();
    assert!(matches!(err, Error::MissingArtifact(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(matches!(
        cli::verify(dir.path(), &VerifyOptions::default()).unwrap_err(),
        Error::MissingArtifact(_)
    ));
}

#[test]
fn solve_verify_report_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("run");
    let first = solve_scenario(&lone_evader(1), &root).unwrap();
    assert_eq!(first.resumed_from, 0);
    assert_eq!(first.summary.iterations_completed, 1);
    assert_eq!(first.summary.recorded.len(), 1);

    let second = solve_scenario(&lone_evader(2), &root).unwrap();
    assert_eq!(second.resumed_from, 1);
    assert_eq!(second.summary.iterations_completed, 2);
    assert_eq!(second.record.iterations[0], first.record.iterations[0]);

    let mut other = lone_evader(3);
    other.engagement.capture_radius = 2.0;
    let err = solve_scenario(&other, &root).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");

    let v = cli::verify(
        &root,
        &VerifyOptions {
            closed_loop: true,
            ..VerifyOptions::default()
        },
    )
    .unwrap();
    assert!(!v.runs.is_empty());
    for r in &v.runs {
        assert_eq!(r.outcome, "evader_reaches_asset", "{r:?}");
        assert_eq!(r.instances, 0);
    }
    assert!(root.join("verification/engagements.csv").is_file());

    let written = report(&root).unwrap();
    assert!(written.iter().any(|p| p.ends_with("report/projections.svg")));
    assert!(written.iter().any(|p| p.ends_with("report/verification.csv")));

    let copy = dir.path().join("copy");
    copy_dir(&root, &copy);
    std::fs::remove_dir_all(copy.join("report")).unwrap();
    report(&copy).unwrap();
    for p in &written {
        let rel = p.strip_prefix(&root).unwrap();
        assert_eq!(
            std::fs::read(p).unwrap(),
            std::fs::read(copy.join(rel)).unwrap(),
            "{}",
            rel.display()
        );
    }
}

#[test]
fn solve_options_override_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lone.toml");
    std::fs::write(&path, lone_evader(5).to_toml().unwrap()).unwrap();
    let out = cli::solve(
        &path,
        &SolveOptions {
            out: Some(dir.path().join("run")),
            ibr_iterations: Some(1),
            scp_iterations: Some(8),
        },
    )
    .unwrap();
    assert_eq!(out.summary.iterations_completed, 1);
    let stored = Scenario::from_path(&dir.path().join("run/scenario.toml")).unwrap();
    assert_eq!(stored.algorithm.scp_iterations, 8);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_ibrscp");
    let dir = tempfile::tempdir().unwrap();

    let status = Command::new(exe).arg("report").arg(dir.path()).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("scenario.toml"));

    let bad = dir.path().join("bad.toml");
    let mut s = lone_evader(1);
    let mut twin = s.players[0].clone();
    twin.name = "E2".into();
    s.players.push(twin);
    std::fs::write(&bad, s.to_toml().unwrap()).unwrap();
    let status = Command::new(exe).arg("solve").arg(&bad).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("exactly one evader"));

    let good = dir.path().join("lone.toml");
    std::fs::write(&good, lone_evader(1).to_toml().unwrap()).unwrap();
    let run = dir.path().join("run");
    let out = Command::new(exe)
        .args(["solve", good.to_str().unwrap(), "--out", run.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("recorded"));
    let out = Command::new(exe)
        .args(["verify", run.to_str().unwrap(), "--laws", "pn", "--ratios", "3,4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("evader_reaches_asset"));
}
