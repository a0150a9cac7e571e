use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ditherlab"))
}

fn data_dir() -> PathBuf {
    std::env::var_os("DITHERLAB_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn inspect_prints_the_label_and_image() {
    let out = bin().arg("inspect").arg("--data-dir").arg(data_dir()).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("label 5\n"), "{text}");
    assert_eq!(text.lines().count(), 29);
    assert!(text.contains('@'));
}

#[test]
fn inspect_rejects_out_of_range_index() {
    let out = bin().args(["inspect", "--set", "test", "--index", "10000", "--data-dir"]).arg(data_dir()).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn run_then_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--epochs", "2", "--batch-size", "256", "--seed", "3", "--data-dir"])
        .arg(data_dir())
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert!(csv.starts_with("regulariser,batch_size,seed,epoch,test_error\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    for name in ["summary.csv", "figure.svg", "journal.json"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }

    let replot = dir.path().join("replot.svg");
    let out = bin().arg("plot").arg(dir.path().join("curves.csv")).arg("-o").arg(&replot).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        std::fs::read_to_string(replot).unwrap(),
        std::fs::read_to_string(dir.path().join("figure.svg")).unwrap()
    );
}

#[test]
fn run_rejects_bad_configurations() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--batch-size", "100"][..],
        &["--epochs", "0"],
        &["--regulariser", "bogus"],
        &["--dropout-rate", "1.0"],
        &["--regulariser", "none", "--regulariser", "none"],
    ] {
        let out = bin().arg("run").args(args).arg("--out-dir").arg(dir.path()).arg("--data-dir").arg(data_dir()).output().unwrap();
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!dir.path().join("curves.csv").exists());
    }
}

#[test]
fn plot_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "regulariser,batch_size,seed,epoch,test_error\nnone,32,1,1,1.5\n").unwrap();
    let out = bin().arg("plot").arg(&input).arg("-o").arg(dir.path().join("f.svg")).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("error"));
}

#[test]
fn missing_data_is_reported() {
    let out = bin().args(["verify-data", "--data-dir", "/nonexistent/mnist"]).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("/nonexistent/mnist"));
}

#[test]
fn verify_data_accepts_canonical_files() {
    let out = bin().arg("verify-data").arg("--data-dir").arg(data_dir()).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
}
