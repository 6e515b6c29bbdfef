use std::fs;
use std::process::Command;

use imann::harness::{read_csv, Method, Status, CSV_HEADER};

fn imann() -> Command {
    Command::new(env!("CARGO_BIN_EXE_imann"))
}

#[test]
fn run_writes_csv_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = imann()
        .args(["run", "--formulation", "f2", "--method", "imann", "--sizes", "5"])
        .args(["--restarts", "2", "--cma-max-evals", "400", "--quad-points", "20"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let text = fs::read_to_string(out.join("attempts.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let attempts = read_csv(&out.join("attempts.csv")).unwrap();
    assert_eq!(attempts.len(), 2);
    assert!(attempts.iter().all(|r| r.method == Method::Imann && r.arch == "1-5-5-1"));
    assert!(attempts.iter().all(|r| r.status != Status::Failed));

    let best = read_csv(&out.join("best.csv")).unwrap();
    assert_eq!(best.len(), 1);
    let plot = fs::read_to_string(out.join("plot/f2_imann_1-5-5-1.dat")).unwrap();
    assert_eq!(plot.lines().count(), 1);
    assert!(plot.starts_with("5 "));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let out = dir.path().join("res");
    fs::write(
        &cfg,
        format!(
            "formulation = \"f1\"\nmethod = \"dnn\"\nsizes = [3]\nrestarts = 4\n\
             dnn-epochs = 50\nquad-points = 10\nout = \"{}\"\n",
            out.display()
        ),
    )
    .unwrap();
    let run = imann()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .args(["--restarts", "2", "--arch", "1-4-1"])
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let attempts = read_csv(&out.join("attempts.csv")).unwrap();
    assert_eq!(attempts.len(), 2);
    assert!(attempts.iter().all(|r| r.arch == "1-4-1" && r.evals <= 50));
}

#[test]
fn report_reselects_from_attempts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let run = imann()
        .args(["sweep", "--formulation", "f9", "--method", "dnn", "--sizes", "4,16"])
        .args(["--restarts", "2", "--dnn-epochs", "30", "--quad-points", "10"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = dir.path().join("report");
    let run = imann()
        .arg("report")
        .arg(out.join("attempts.csv"))
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(
        read_csv(&report.join("best.csv")).unwrap(),
        read_csv(&out.join("best.csv")).unwrap()
    );
    let plot = fs::read_to_string(report.join("plot/f9_dnn_2-32-32-16-1.dat")).unwrap();
    assert_eq!(plot.lines().count(), 2);
}

#[test]
fn bad_invocations_fail() {
    let cases: &[&[&str]] = &[
        &["run", "--method", "imann", "--sizes", "5"],
        &["run", "--formulation", "f1", "--method", "imann", "--sizes", "3,5"],
        &["run", "--formulation", "f10", "--method", "imann", "--sizes", "5"],
        &["run", "--formulation", "f9", "--method", "imann", "--sizes", "5"],
        &["run", "--formulation", "f1", "--method", "svm", "--sizes", "5"],
        &["sweep", "--arch", "1-5-5-1"],
    ];
    for args in cases {
        let out = imann().args(*args).output().unwrap();
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}
