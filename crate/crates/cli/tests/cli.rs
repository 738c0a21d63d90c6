use std::path::PathBuf;
use std::process::{Command, Output};

fn ansyb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ansyb")).args(args).env_remove("ANSYB_LOG").output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ansyb-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let cases: &[&[&str]] = &[
        &["repcomb", "--p", "3", "--n", "4"],
        &["haar", "fluct", "--n", "6", "--p", "2", "--trials", "6", "--L", "4,8", "--seed", "5"],
        &["haar", "det", "--n", "4", "--l", "8", "--trials", "6"],
        &["mixing", "verify", "--draws", "2"],
        &["dirac", "glue", "--nx", "32", "--t", "0.5"],
        &["fock", "verify", "--seed", "3"],
        &["exchange", "scan", "--qmax", "30", "--points", "3", "--format", "csv"],
    ];
    for args in cases {
        let a = ansyb(args);
        let b = ansyb(args);
        // Tiny trial counts may fail a statistical verdict; only sameness matters here.
        assert!(matches!(a.status.code(), Some(0 | 1)), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.status.code(), b.status.code());
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn failed_verdicts_exit_with_one() {
    let o = ansyb(&["wick", "vev"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed verdicts"));
    // The report is still written.
    assert!(stdout(&o).contains("\"experiment\": \"wick-vev\""));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(ansyb(&["repcomb", "--set", "bogus=1"]).status.code(), Some(2));
    assert_eq!(ansyb(&["repcomb", "--set", "noequals"]).status.code(), Some(2));
    assert_eq!(ansyb(&["repcomb", "--n", "many"]).status.code(), Some(2));
    assert_eq!(ansyb(&["repcomb", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(ansyb(&["repcomb", "--seed", "-1"]).status.code(), Some(2));
    assert_eq!(ansyb(&["nonsense"]).status.code(), Some(2));
    let bad_log = Command::new(env!("CARGO_BIN_EXE_ansyb")).args(["repcomb"]).env("ANSYB_LOG", "loud").output().unwrap();
    assert_eq!(bad_log.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let o = ansyb(&["dirac", "glue", "--nx", "32", "--order", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("order 2"));
}

#[test]
fn csv_output_has_a_header() {
    let o = ansyb(&["repcomb", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("diagram,hook_product,multiplicity,dim,summand_num,summand_den"));
    let m = ansyb(&["mixing", "verify", "--draws", "1", "--emit", "csv"]);
    assert_eq!(stdout(&m).lines().next(), Some("kind,key,value"));
}

#[test]
fn out_writes_the_report_to_a_file() {
    let dir = scratch("out");
    let path = dir.join("report.json");
    let o = ansyb(&["repcomb", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(written, stdout(&ansyb(&["repcomb"])));
    assert!(written.contains("\"fluct_sum\": \"1/3\""));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn flags_override_the_config_file() {
    let dir = scratch("config");
    let path = dir.join("params.cfg");
    std::fs::write(&path, "# repcomb settings\np = 3\nn = 3\nseed = 4\n").unwrap();
    let cfg = path.to_str().unwrap();
    let from_file = stdout(&ansyb(&["repcomb", "--config", cfg]));
    assert!(from_file.contains("\"fluct_sum\": \"7/20\""), "{from_file}");
    assert!(from_file.contains("\"seed\": \"4\""));
    let overridden = stdout(&ansyb(&["repcomb", "--config", cfg, "--n", "2", "--p", "2", "--seed", "9"]));
    assert!(overridden.contains("\"fluct_sum\": \"1/3\""));
    assert!(overridden.contains("\"seed\": \"9\""));
    let via_set = stdout(&ansyb(&["repcomb", "--config", cfg, "--set", "n=4"]));
    assert!(via_set.contains("\"n\": \"4\""));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn word_files_are_evaluated() {
    let dir = scratch("word");
    let path = dir.join("pair.word");
    std::fs::write(&path, "# one fermion pair\npsi 1 +1 x 0\npsidag 1 -1 y 0\n").unwrap();
    let o = ansyb(&["wick", "vev", "--spec", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("\"pairings\": 1"));
    std::fs::write(&path, "quark 1 +1 x\n").unwrap();
    assert_eq!(ansyb(&["wick", "vev", "--spec", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn logging_goes_to_stderr() {
    let o = Command::new(env!("CARGO_BIN_EXE_ansyb")).args(["repcomb"]).env("ANSYB_LOG", "info").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(o.stdout, ansyb(&["repcomb"]).stdout);
    assert!(String::from_utf8_lossy(&o.stderr).contains("repcomb finished"));
}
