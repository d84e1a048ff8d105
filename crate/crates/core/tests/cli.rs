use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn erpa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erpa"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn generate_then_process_prints_record() {
    let tmp = tempfile::tempdir().unwrap();
    let out = erpa(
        tmp.path(),
        &["generate", "--out", "inbox", "--count", "2", "--seed", "3"],
    );
    assert!(out.status.success());
    assert!(tmp.path().join("inbox/doc-0001.bmp.gt.json").exists());

    let out = erpa(tmp.path(), &["process", "inbox/doc-0000.bmp"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["source_id"], "doc-0000.bmp");
}

#[test]
fn config_errors_exit_2_and_io_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[watch]\nnope = 1\n").unwrap();
    let out = erpa(tmp.path(), &["process", "x.png", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));

    let out = erpa(tmp.path(), &["watch", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(3));

    let out = erpa(tmp.path(), &["bench", "--noise", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("ext.csv"),
        "label,engine,total_seconds\nmanual,,160\nERPA,mock,9.94\n",
    )
    .unwrap();
    let out = erpa(
        tmp.path(),
        &[
            "bench",
            "--corpus-size",
            "3",
            "--runs",
            "1",
            "--external-baselines",
            "ext.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("Manual process"));
    assert!(table.contains("ERPA (rules)"));
    assert!(tmp.path().join("erpa-bench/raw_timings.csv").exists());

    let store = tmp.path().join("erpa-bench/run-0/store");
    let out = erpa(
        tmp.path(),
        &[
            "report",
            "--out",
            "r.html",
            "--store",
            store.to_str().unwrap(),
        ],
    );
    assert!(out.status.success());
    let html = fs::read_to_string(tmp.path().join("r.html")).unwrap();
    assert!(html.contains("Documents processed: 3"));
}
