use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parfilter-bench"))
}

#[test]
fn help_exits_zero() {
    let out = bench().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--filter"));
}

#[test]
fn bad_arguments_exit_one() {
    for args in [
        vec!["--no-such-flag"],
        vec!["--filter", "bloom"],
        vec!["--filter", "gqf", "--load", "1.5"],
        vec!["--filter", "gqf", "--remainder-bits", "12"],
        vec!["--filter", "gqf", "--dist", "kmer", "--kmer-file", "/nonexistent/reads.fa"],
    ] {
        let out = bench().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn prints_csv_rows() {
    let out = bench()
        .args(["--filter", "gqf", "--op", "count", "--dist", "zipf", "--log-slots", "12", "--reps", "1", "--mode", "both"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("filter,api,op,mode,log_slots,load_factor,threads,dist"));
    assert!(lines[1].contains(",naive,"));
    assert!(lines[2].contains(",mapreduce,"));
}

#[test]
fn csv_file_appends_with_one_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    for filter in ["tcf", "tcf-bulk"] {
        let out = bench()
            .args(["--filter", filter, "--op", "fpr", "--log-slots", "12", "--reps", "1", "--queries", "1000", "--csv"])
            .arg(&path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.matches("filter,api").count(), 1);
}
