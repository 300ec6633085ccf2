//! End-to-end tests against the compiled `cstore` binary.

use std::path::Path;
use std::process::{Command, Output};

fn cstore(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cstore"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run cstore")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"][..], &["bench", "--help"][..]] {
        let out = cstore(dir.path(), args);
        assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    }
    let out = cstore(dir.path(), &["--help"]);
    for sub in ["generate", "import", "analyze", "bench", "report"] {
        assert!(stdout(&out).contains(sub), "help lacks `{sub}`");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["generate"],
        &["frobnicate"],
        &["generate", "--entries", "10", "--out", "x", "--page-size", "4xyz"],
        &["import", "--store", "s", "--file", "a", "--entries", "5"],
        &["import", "--store", "s"],
        &["analyze"],
        &["bench", "--scenario", "warp-speed"],
        &["import", "--store", "s", "--entries", "5", "--cost-model", "warp=1"],
    ];
    for args in cases {
        let out = cstore(dir.path(), args);
        assert_eq!(code(&out), 1, "{args:?} exited {}: {}", code(&out), stderr(&out));
    }
}

#[test]
fn generate_import_analyze_report_flow() {
    let dir = tempfile::tempdir().unwrap();
    let out = cstore(
        dir.path(),
        &["generate", "--entries", "3000", "--columns", "5", "--seed", "11", "--page-size",
          "4KiB", "--cluster-entries", "1000", "--codec", "zstd", "--out", "ds.cstore"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("3000 entries"));

    let out = cstore(
        dir.path(),
        &["import", "--store", "store", "--file", "ds.cstore", "--page-size", "4KiB",
          "--cluster-entries", "1000", "--codec", "zstd", "--target-block-size", "16KiB"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("imported 3000 entries"));

    let out = cstore(
        dir.path(),
        &["analyze", "--store", "store", "--read-columns", "4", "--out", "store.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = cstore(dir.path(), &["analyze", "--file", "ds.cstore", "--read-columns", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let from_store = std::fs::read_to_string(dir.path().join("store.csv")).unwrap();
    assert_eq!(stdout(&out), from_store, "file and store analyses disagree");
    assert!(from_store.starts_with("bin_lo,bin_hi,count\n"));

    let out = cstore(
        dir.path(),
        &["bench", "--entries", "2000", "--columns", "10", "--read-columns", "9",
          "--cluster-entries", "500", "--page-size", "4KiB,64KiB", "--repeats", "1",
          "--seed", "3", "--out", "sweep.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = cstore(dir.path(), &["report", "sweep.csv", "--page-size", "64KiB"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Target/Baseline"), "report output: {text}");
    assert!(text.contains("reference ratios"), "report output: {text}");
}

#[test]
fn bench_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["bench", "--entries", "1000", "--columns", "10", "--read-columns", "9",
        "--cluster-entries", "400", "--page-size", "4KiB", "--repeats", "2", "--seed", "7"];
    let first = cstore(dir.path(), &args);
    let second = cstore(dir.path(), &args);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    assert_eq!(stdout(&first), stdout(&second));
    assert!(stdout(&first).starts_with("scenario,page_size,codec,repeat,"));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cstore"), b"not a dataset").unwrap();
    let out = cstore(dir.path(), &["import", "--store", "s", "--file", "bad.cstore"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    // Asking for more columns than the dataset has is a schema error.
    let out = cstore(dir.path(), &["generate", "--entries", "100", "--columns", "2", "--out", "small.cstore"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = cstore(dir.path(), &["analyze", "--file", "small.cstore", "--read-columns", "9"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn store_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = cstore(dir.path(), &["analyze", "--store", "missing"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    let out = cstore(dir.path(), &["import", "--store", "s", "--entries", "200", "--columns", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = cstore(dir.path(), &["import", "--store", "s", "--entries", "200", "--columns", "2"]);
    assert_eq!(code(&out), 3, "already holds data: {}", stderr(&out));
}
