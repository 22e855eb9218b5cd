//! End-to-end checks of the command-line binary: files in, files out,
//! exit codes, and byte-for-byte reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn seqpred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqpred"))
        .args(args)
        .output()
        .expect("the binary runs")
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "exit {:?}, stderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).expect("output file exists")
}

fn body_lines(text: &str) -> Vec<&str> {
    text.lines()
        .filter(|line| !line.starts_with('#') && !line.trim().is_empty())
        .collect()
}

fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|line| {
        line.strip_prefix('#')
            .and_then(|comment| comment.split_once('='))
            .filter(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim())
    })
}

const CHAIN: &str = "markov:order=1;kernel=0.9,0.1|0.2,0.8";

#[test]
fn simulate_writes_the_degenerate_path_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("path.txt");
    let output = seqpred(&[
        "simulate",
        "--process",
        "iid:1",
        "--horizon",
        "5",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_ok(&output);
    let text = read(&out);
    assert_eq!(body_lines(&text), vec!["0"; 5]);
    assert_eq!(header_value(&text, "process"), Some("iid:1"));
    assert_eq!(header_value(&text, "seed"), Some("7"));
    assert_eq!(header_value(&text, "horizon"), Some("5"));

    // Without --out the same content goes to stdout.
    let stdout = seqpred(&["simulate", "--process", "iid:1", "--horizon", "5", "--seed", "7"]);
    assert_ok(&stdout);
    assert_eq!(String::from_utf8_lossy(&stdout.stdout), text);
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        let output = seqpred(&[
            "simulate",
            "--process",
            CHAIN,
            "--horizon",
            "500",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_ok(&output);
    }
    assert_eq!(read(&a), read(&b));
    assert_eq!(body_lines(&read(&a)).len(), 500);
}

#[test]
fn validation_failures_exit_with_code_one() {
    // A kernel row that does not sum to one, named in the diagnostic.
    let bad = "markov:order=1;kernel=0.9,0.1|0.2,0.9";
    let output = seqpred(&["simulate", "--process", bad, "--horizon", "5"]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("row 1"), "stderr: {stderr}");

    // Bad exponents are caught before any work happens.
    let output = seqpred(&[
        "estimate",
        "--process",
        "iid:0.5,0.5",
        "--beta",
        "0.4",
        "--gamma",
        "0.4",
        "--horizon",
        "10",
    ]);
    assert_eq!(output.status.code(), Some(1));

    // No source named anywhere.
    let output = seqpred(&["simulate", "--horizon", "5"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn io_failures_exit_with_code_two() {
    let output = seqpred(&["estimate", "--path-file", "/no/such/file.txt"]);
    assert_eq!(output.status.code(), Some(2));

    let output = seqpred(&[
        "simulate",
        "--process",
        "iid:1",
        "--horizon",
        "3",
        "--out",
        "/no/such/dir/path.txt",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn estimate_round_trips_through_a_path_file() {
    let dir = tempfile::tempdir().unwrap();
    let path_file = dir.path().join("path.txt");
    let from_file = dir.path().join("from_file.csv");
    let in_memory = dir.path().join("in_memory.csv");

    assert_ok(&seqpred(&[
        "simulate",
        "--process",
        CHAIN,
        "--horizon",
        "300",
        "--seed",
        "3",
        "--out",
        path_file.to_str().unwrap(),
    ]));
    assert_ok(&seqpred(&[
        "estimate",
        "--path-file",
        path_file.to_str().unwrap(),
        "--out",
        from_file.to_str().unwrap(),
    ]));
    assert_ok(&seqpred(&[
        "estimate",
        "--process",
        CHAIN,
        "--horizon",
        "300",
        "--seed",
        "3",
        "--out",
        in_memory.to_str().unwrap(),
    ]));
    assert_eq!(read(&from_file), read(&in_memory));

    // Truncating the file re-runs exactly the shorter prefix.
    let truncated = dir.path().join("truncated.csv");
    let shorter = dir.path().join("shorter.csv");
    assert_ok(&seqpred(&[
        "estimate",
        "--path-file",
        path_file.to_str().unwrap(),
        "--horizon",
        "120",
        "--out",
        truncated.to_str().unwrap(),
    ]));
    assert_ok(&seqpred(&[
        "estimate",
        "--process",
        CHAIN,
        "--horizon",
        "120",
        "--seed",
        "3",
        "--out",
        shorter.to_str().unwrap(),
    ]));
    assert_eq!(read(&truncated), read(&shorter));

    // Asking for more symbols than the file holds is refused.
    let output = seqpred(&[
        "estimate",
        "--path-file",
        path_file.to_str().unwrap(),
        "--horizon",
        "301",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn estimate_rejects_symbols_outside_the_declared_source() {
    let dir = tempfile::tempdir().unwrap();
    let path_file = dir.path().join("path.txt");
    fs::write(&path_file, "# process = iid:1\n# seed = 0\n0\n0\n2\n0\n").unwrap();
    let output = seqpred(&["estimate", "--path-file", path_file.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("position 2"), "stderr: {stderr}");
}

#[test]
fn estimate_traces_the_degenerate_source_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    assert_ok(&seqpred(&[
        "estimate",
        "--process",
        "iid:1",
        "--horizon",
        "50",
        "--out",
        out.to_str().unwrap(),
    ]));
    let text = read(&out);
    let columns = header_value(&text, "columns").unwrap();
    assert_eq!(
        columns,
        "replication,round,time,width,est0,oracle0,abs_error,ratio"
    );
    let rows = body_lines(&text);
    assert!(!rows.is_empty());
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0], "0");
        assert_eq!(cells[1], (i + 1).to_string());
        assert_eq!(cells[4], "1", "estimate is exact on a constant path");
        assert_eq!(cells[5], "1");
        assert_eq!(cells[6], "0");
    }
}

#[test]
fn tracked_symbols_select_the_estimate_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    assert_ok(&seqpred(&[
        "estimate",
        "--process",
        CHAIN,
        "--horizon",
        "200",
        "--track",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]));
    let text = read(&out);
    assert_eq!(
        header_value(&text, "columns"),
        Some("replication,round,time,width,est1,oracle1,abs_error,ratio")
    );
    assert_eq!(header_value(&text, "track"), Some("1"));

    let output = seqpred(&[
        "estimate",
        "--process",
        CHAIN,
        "--horizon",
        "50",
        "--track",
        "5",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn config_files_supply_settings_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        "# a tiny run\nprocess = iid:1\nhorizon = 5\nseed = 9\n",
    )
    .unwrap();
    let out = dir.path().join("a.txt");
    assert_ok(&seqpred(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let text = read(&out);
    assert_eq!(body_lines(&text).len(), 5);
    assert_eq!(header_value(&text, "seed"), Some("9"));

    let overridden = dir.path().join("b.txt");
    assert_ok(&seqpred(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--horizon",
        "7",
        "--out",
        overridden.to_str().unwrap(),
    ]));
    assert_eq!(body_lines(&read(&overridden)).len(), 7);
}

#[test]
fn kernel_files_match_their_inline_descriptions() {
    let dir = tempfile::tempdir().unwrap();
    let kernel = dir.path().join("kernel.txt");
    fs::write(&kernel, "# rows are contexts\n0.9 0.1\n0.2 0.8\n").unwrap();
    let from_file = dir.path().join("a.txt");
    let inline = dir.path().join("b.txt");
    assert_ok(&seqpred(&[
        "simulate",
        "--process",
        "markov",
        "--order",
        "1",
        "--kernel-file",
        kernel.to_str().unwrap(),
        "--horizon",
        "100",
        "--seed",
        "4",
        "--out",
        from_file.to_str().unwrap(),
    ]));
    assert_ok(&seqpred(&[
        "simulate",
        "--process",
        CHAIN,
        "--horizon",
        "100",
        "--seed",
        "4",
        "--out",
        inline.to_str().unwrap(),
    ]));
    assert_eq!(read(&from_file), read(&inline));

    let hmm = dir.path().join("hmm.txt");
    fs::write(&hmm, "0.9 0.1\n0.1 0.9\n\n0.95 0.05\n0.05 0.95\n").unwrap();
    assert_ok(&seqpred(&[
        "simulate",
        "--process",
        "hmm",
        "--kernel-file",
        hmm.to_str().unwrap(),
        "--horizon",
        "50",
    ]));
}

#[test]
fn compare_oracle_summarizes_each_replication() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("summary.csv");
    assert_ok(&seqpred(&[
        "compare-oracle",
        "--process",
        CHAIN,
        "--horizon",
        "1500",
        "--replications",
        "3",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]));
    let text = read(&out);
    let columns: Vec<&str> = header_value(&text, "columns").unwrap().split(',').collect();
    let rows = body_lines(&text);
    assert_eq!(rows.len(), 3);
    let memory_col = columns.iter().position(|&c| c == "memory").unwrap();
    let ratio_col = columns
        .iter()
        .position(|&c| c == "terminal_ratio")
        .unwrap();
    let err_col = columns
        .iter()
        .position(|&c| c == "err_mean_decile")
        .unwrap();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), columns.len());
        assert_eq!(cells[0], i.to_string());
        assert_eq!(cells[memory_col], "1");
        assert!(cells[ratio_col].parse::<f64>().unwrap() > 1.0);
        let err: f64 = cells[err_col].parse().unwrap();
        assert!((0.0..=1.0).contains(&err));
    }
}

#[test]
fn sweep_covers_the_grid_and_validates_it_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    assert_ok(&seqpred(&[
        "sweep",
        "--process",
        CHAIN,
        "--horizon",
        "400",
        "--replications",
        "3",
        "--seed",
        "2",
        "--grid-beta",
        "0.2",
        "--grid-beta",
        "0.3",
        "--grid-gamma",
        "0.2",
        "--grid-gamma",
        "0.3",
        "--out",
        out.to_str().unwrap(),
    ]));
    let text = read(&out);
    let rows = body_lines(&text);
    assert_eq!(rows.len(), 12, "2 x 2 grid times 3 replications");
    for row in &rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[2], "identity");
    }

    // Rerunning the sweep reproduces it byte for byte.
    let again = dir.path().join("again.csv");
    assert_ok(&seqpred(&[
        "sweep",
        "--process",
        CHAIN,
        "--horizon",
        "400",
        "--replications",
        "3",
        "--seed",
        "2",
        "--grid-beta",
        "0.2",
        "--grid-beta",
        "0.3",
        "--grid-gamma",
        "0.2",
        "--grid-gamma",
        "0.3",
        "--out",
        again.to_str().unwrap(),
    ]));
    assert_eq!(read(&out), read(&again));

    // One bad grid point sinks the whole request before anything runs.
    let rejected = dir.path().join("rejected.csv");
    let output = seqpred(&[
        "sweep",
        "--process",
        CHAIN,
        "--horizon",
        "400",
        "--grid-beta",
        "0.2",
        "--grid-beta",
        "0.4",
        "--grid-gamma",
        "0.4",
        "--out",
        rejected.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(!rejected.exists(), "nothing may be written for a bad grid");
}
