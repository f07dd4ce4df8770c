use std::fs;
use std::process::{Command, Output};

use wso_dirk::convergence::parse_csv;
use wso_dirk::tableau::{parse, registry_get};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wso-dirk")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn list_shows_every_scheme() {
    let o = run(&["list"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for name in ["wso2-p3", "wso3-p3", "wso3-p4", "wso1-p3", "wso1-p4", "edirk-so2-p3", "backward-euler"] {
        assert!(out.contains(name), "{name}");
    }
    let line = out.lines().find(|l| l.starts_with("wso3-p4")).unwrap();
    assert!(line.contains("p=4") && line.contains("wso=3"), "{line}");
}

#[test]
fn backward_euler_one_step() {
    let o = run(&["integrate", "--scheme", "backward-euler", "--problem", "decay", "--lambda", "-1", "--dt", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "0.5");
}

#[test]
fn trajectory_has_a_row_per_step() {
    let o = run(&[
        "integrate", "--scheme", "wso2-p3", "--problem", "decay", "--dt", "0.25", "--trajectory",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t,u1");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("1,"));
}

#[test]
fn prothero_robinson_error_is_reported() {
    let o = run(&["integrate", "--scheme", "wso3-p3", "--problem", "pr", "--dt", "1e-2"]);
    assert!(o.status.success());
    let err = stderr(&o);
    let line = err.lines().find(|l| l.starts_with("max error")).unwrap();
    let e: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(e < 1e-4, "{e}");
}

#[test]
fn unattainable_qe_is_a_usage_error() {
    let o = run(&["search", "--stages", "5", "--order", "4", "--qe", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("only up to order 3"));
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_input_exit_codes() {
    assert_eq!(run(&["analyze", "--scheme", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["analyze"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let o = run(&["integrate", "--scheme", "wso2-p3", "--problem", "decay", "--dt", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    fs::write(&path, "stages 2\nA 0.5 0\n").unwrap();
    assert_eq!(run(&["analyze", "--tableau", path.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn analyze_from_file_matches_registry() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    fs::write(&path, wso_dirk::tableau::serialize(&registry_get("wso3-p3").unwrap())).unwrap();
    let a = run(&["analyze", "--tableau", path.to_str().unwrap(), "--format", "kv"]);
    let b = run(&["analyze", "--scheme", "wso3-p3", "--format", "kv"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# decay run\nscheme = backward-euler\nproblem = decay\nlambda = -1\ndt = 0.5\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "integrate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    // two steps of 1/(1 + 0.5)
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 4.0 / 9.0).abs() < 1e-15);
    // the command line wins over the file
    let o = run(&["--config", cfg.to_str().unwrap(), "integrate", "--dt", "1"]);
    assert_eq!(stdout(&o).trim(), "0.5");
}

#[test]
fn converge_writes_parseable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("decay.csv");
    let o = run(&[
        "--jobs",
        "2",
        "converge",
        "--scheme",
        "wso3-p3",
        "--problem",
        "decay",
        "--dt-list",
        "0.5,0.25,0.125,0.0625",
        "--window",
        "all=0:1",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let csv = parse_csv(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(csv.columns, vec!["dt", "err_u"]);
    assert_eq!(csv.rows.len(), 4);
    let slope = stderr(&o);
    let s: f64 = slope
        .lines()
        .find(|l| l.starts_with("slope all u"))
        .and_then(|l| l.rsplit(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(s > 2.5, "{s}");
}

#[test]
fn converge_rejects_malformed_window() {
    let o = run(&["converge", "--scheme", "wso3-p3", "--problem", "decay", "--window", "oops"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn small_search_emits_a_tableau() {
    let o = run(&["--jobs", "1", "search", "--stages", "2", "--order", "2", "--qe", "1", "--seed", "3", "--multistarts", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = parse(&stdout(&o)).unwrap();
    assert_eq!(t.stages(), 2);
    assert!(wso_dirk::analysis::classical_order(&t, 1e-8) >= 2);
}

#[test]
fn block_grid_contains_the_fixed_points() {
    // the first grid node is P1 = (-4 + 3 sqrt 2, sqrt 2 - 1)
    let p1 = (-4.0 + 3.0 * 2f64.sqrt(), 2f64.sqrt() - 1.0);
    let xr = format!("{}:{}", p1.0, p1.0 + 1.0);
    let yr = format!("{}:{}", p1.1, p1.1 + 1.0);
    let o = run(&["block", "--x-range", &xr, "--y-range", &yr, "--grid", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("x,y,r2,r3,r4"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(first[2].abs() < 1e-12 && first[3].abs() < 1e-12);
    assert!(first[4].abs() > 1e-3);
    assert_eq!(out.lines().count(), 1 + 9);
    assert_eq!(run(&["block", "--j", "1"]).status.code(), Some(2));
}
