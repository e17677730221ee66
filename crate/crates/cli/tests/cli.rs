use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use demoforge::{BenchmarkReport, RunManifest, RunStatus, Stage};

fn bundle() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e")
}

fn demoforge(args: &[&str]) -> Output {
    let b = bundle();
    Command::new(env!("CARGO_BIN_EXE_demoforge"))
        .arg("--config")
        .arg(b.join("config.toml"))
        .arg("--fixtures")
        .arg(b.join("fixtures"))
        .args(args)
        .env_remove("DEMOFORGE_API_BASE")
        .env_remove("DEMOFORGE_CONFIG")
        .env_remove("DEMOFORGE_LOG")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn new_run(verb: &str, run_dir: &Path, checklist: bool) -> Output {
    let b = bundle();
    let (paper, list) = (b.join("paper.pdf"), b.join("checklist.toml"));
    let mut args = vec![verb, "--paper", path(&paper), "--run-dir", path(run_dir)];
    if checklist {
        args.extend(["--checklist", path(&list)]);
    }
    demoforge(&args)
}

#[test]
fn stage_verbs_reproduce_a_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let whole = tmp.path().join("whole");
    assert_eq!(new_run("run", &whole, true).status.code(), Some(0));

    let staged = tmp.path().join("staged");
    assert_eq!(new_run("plan", &staged, true).status.code(), Some(0));
    for verb in ["generate", "build", "score", "merge", "eval"] {
        let out = demoforge(&[verb, "--run-dir", path(&staged)]);
        assert_eq!(out.status.code(), Some(0), "{verb}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = RunManifest::load(&whole).unwrap();
    let b = RunManifest::load(&staged).unwrap();
    assert_eq!(b.stages_completed, Stage::ALL.to_vec());
    assert_eq!(a.normalized(), b.normalized());
}

#[test]
fn stdout_summary_and_json_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = new_run("run", &tmp.path().join("r"), true);
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["status"], "complete");
    assert_eq!(summary["evaluation"]["completion_rate"], 0.5);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let records: Vec<serde_json::Value> = stderr.lines().map(|l| serde_json::from_str(l).expect("one JSON record per line")).collect();
    assert!(records.iter().any(|r| r["fields"]["message"] == "stage finished"));
}

#[test]
fn a_missing_report_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("r");
    let out = new_run("run", &run_dir, false);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let m = RunManifest::load(&run_dir).unwrap();
    assert_eq!(m.status, RunStatus::Partial);
    assert!(m.evaluation.unwrap().checklist.is_none());
}

#[test]
fn fatal_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.pdf");
    std::fs::write(&bad, b"nothing here").unwrap();
    let run_dir = tmp.path().join("r");
    let out = demoforge(&["run", "--paper", path(&bad), "--run-dir", path(&run_dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(run_dir.join("error.log").is_file());

    let out = demoforge(&["resume", "--run-dir", path(&tmp.path().join("absent"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no run at"));

    let out = demoforge(&["--attempts", "0", "run", "--paper", path(&bad), "--run-dir", path(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));

    let out = Command::new(env!("CARGO_BIN_EXE_demoforge"))
        .args(["--fixtures", path(&tmp.path().join("none")), "resume", "--run-dir", "x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_writes_a_report_with_attempts() {
    let tmp = tempfile::tempdir().unwrap();
    let b = bundle();
    let csv = format!(
        "abbrev,topic,domain,originating_work,checklist,paper\nML-GD,Gradient Descent,Machine Learning,x,{},{}\n",
        b.join("checklist.toml").display(),
        b.join("paper.pdf").display()
    );
    let manifest = tmp.path().join("topics.csv");
    std::fs::write(&manifest, csv).unwrap();
    let report_path = tmp.path().join("report.json");
    let runs = tmp.path().join("runs");
    let out = demoforge(&["bench", "--manifest", path(&manifest), "--runs", path(&runs), "--report", path(&report_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: BenchmarkReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.attempts, 3);
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.groups["ML"].mean, 0.5);
    assert!(runs.join("ML-GD/manifest.json").is_file());
}
