use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn spec(name: &str) -> PathBuf {
    specs().join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_branchtime"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_spec(cmd: &str, name: &str, extra: &[&str]) -> Output {
    let path = spec(name);
    let mut args = vec![cmd, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value_of<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix(": "))
}

#[test]
fn build_reports_counts() {
    let o = run_spec("build", "split", &[]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(value_of(&text, "segments"), Some("3"));
    assert_eq!(value_of(&text, "nodes"), Some("1"));
    assert_eq!(value_of(&text, "identifications"), Some("0"));
}

#[test]
fn build_rejects_single_branch() {
    let o = run_spec("build", "bad_branches", &[]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("events[0]"), "{err}");
}

#[test]
fn build_flags_loops() {
    let o = run_spec("build", "loop", &[]);
    assert_eq!(code(&o), 0);
    assert_eq!(value_of(&stdout(&o), "chronology-violating"), Some("true"));
}

#[test]
fn unreadable_or_malformed_specs_are_input_errors() {
    assert_eq!(code(&run(&["build", "/nonexistent/spec.json"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"events": [{"kind": "fork"}]}"#).unwrap();
    assert_eq!(code(&run(&["build", bad.to_str().unwrap()])), 1);
}

#[test]
fn horizon_flag_overrides_spec() {
    let o = run_spec("graph", "line", &["--horizon=-3,4"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("[label=\"[-3,4]\"]"));
    assert_eq!(code(&run_spec("graph", "line", &["--horizon", "4,-3"])), 1);
}

#[test]
fn solve_exponential_through_a_division() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = run_spec("solve", "split", &["--f", "x", "--ic", "[]@-1=1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rows = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rows.headers().unwrap(), vec!["segment", "branch_path", "t", "x"]);
    let mut hits = 0;
    for r in rows.records() {
        let r = r.unwrap();
        let t: f64 = r[2].parse().unwrap();
        if t == 0.0 && (&r[1] == "[1]" || &r[1] == "[2]") {
            let x: f64 = r[3].parse().unwrap();
            assert!((x - 1f64.exp()).abs() <= 1e-6, "{x}");
            hits += 1;
        }
    }
    assert_eq!(hits, 2);
}

#[test]
fn solve_csv_goes_to_stdout_without_out() {
    let o = run_spec("solve", "line", &["--f", "-x", "--ic", "[]@0=1", "--step", "0.01"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("segment,branch_path,t,x\n"));
    assert!(text.contains("\n0,[],1,0.36787"), "t=1 row missing");
}

#[test]
fn solve_reports_conflicting_copies() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    let o = run_spec(
        "solve",
        "split",
        &["--f", "x", "--ic", "[1]@0=1", "--ic", "[2]@0=2", "--report", report.to_str().unwrap()],
    );
    assert_eq!(code(&o), 2);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("status: InconsistentInitialConditions\n"), "{text}");
    assert_eq!(value_of(&text, "gap"), Some("1"));
}

#[test]
fn solve_failure_report_defaults_to_stdout() {
    let o = run_spec("solve", "split", &["--f", "x", "--ic", "[1]@0=1", "--ic", "[2]@0=2"]);
    assert_eq!(code(&o), 2);
    assert_eq!(value_of(&stdout(&o), "status"), Some("InconsistentInitialConditions"));
}

#[test]
fn solve_well_posed_report_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.txt");
    let o = run_spec(
        "solve",
        "merge",
        &["--f", "0", "--ic", "[-1]@-1=2", "--ic", "[-2]@-1=2", "--report", report.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().next(), Some("status: WellPosed"));
}

#[test]
fn solve_sticking_mismatch() {
    let o = run_spec("solve", "merge", &["--f", "0", "--ic", "[-1]@-1=1", "--ic", "[-2]@-1=2"]);
    assert_eq!(code(&o), 2);
    assert_eq!(value_of(&stdout(&o), "status"), Some("StickingMismatch"));
}

#[test]
fn solve_blowup() {
    let o = run_spec("solve", "line", &["--f", "x^2", "--ic", "[]@0=1"]);
    assert_eq!(code(&o), 3);
    let text = stdout(&o);
    assert_eq!(value_of(&text, "status"), Some("Blowup"));
    let t: f64 = value_of(&text, "last_t").unwrap().parse().unwrap();
    assert!((0.99..1.01).contains(&t), "{t}");
}

#[test]
fn solve_loop_consistency() {
    let o = run_spec("solve", "loop", &["--f", "0", "--ic", "[]@-1=1"]);
    assert_eq!(code(&o), 0);
    let o = run_spec("solve", "loop", &["--f", "x", "--ic", "[]@-1=1"]);
    assert_eq!(code(&o), 2);
    assert_eq!(value_of(&stdout(&o), "status"), Some("LoopInconsistent"));
}

#[test]
fn solve_input_errors() {
    let cases: [&[&str]; 5] = [
        &["--f", "x+", "--ic", "[]@0=1"],
        &["--f", "x", "--ic", "[]0=1"],
        &["--f", "x", "--ic", "[7]@0=1"],
        &["--f", "x", "--ic", "[]@0=1", "--step", "-1"],
        &["--f", "x", "--ic", "[]@0=1", "--out", "/nonexistent/dir/out.csv"],
    ];
    for extra in cases {
        let o = run_spec("solve", "split", extra);
        assert_eq!(code(&o), 1, "{extra:?}");
    }
}

#[test]
fn graph_matches_golden_files() {
    for name in ["line", "split", "tree", "merge", "loop"] {
        let o = run_spec("graph", name, &[]);
        assert_eq!(code(&o), 0);
        let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{name}.dot"));
        assert_eq!(stdout(&o), std::fs::read_to_string(golden).unwrap(), "{name}");
    }
}

#[test]
fn graph_shapes() {
    let line = stdout(&run_spec("graph", "line", &[]));
    assert_eq!(line.matches("->").count(), 1);
    let tree = stdout(&run_spec("graph", "tree", &[]));
    assert_eq!(tree.lines().filter(|l| l.trim_start().starts_with("n0 ->")).count(), 3);
    let lp = stdout(&run_spec("graph", "loop", &[]));
    let dashed: Vec<&str> = lp.lines().filter(|l| l.contains("style=dashed")).collect();
    assert_eq!(dashed.len(), 1);
    assert!(dashed[0].contains("label=\"period=6.2831853071795862\""));
}

#[test]
fn graph_writes_dot_file() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("g.dot");
    let o = run_spec("graph", "split", &["--dot", dot.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(dot).unwrap(), stdout(&run_spec("graph", "split", &[])));
}

#[test]
fn check_line_and_split() {
    let line = stdout(&run_spec("check", "line", &[]));
    assert_eq!(value_of(&line, "is_hausdorff"), Some("true"));
    assert_eq!(value_of(&line, "is_partial_order"), Some("true"));
    let split = stdout(&run_spec("check", "split", &[]));
    assert_eq!(value_of(&split, "is_hausdorff"), Some("false"));
    assert_eq!(value_of(&split, "witness_pair"), Some("[1]@0 [2]@0"));
    assert_eq!(value_of(&split, "hausdorff_pairs"), Some("1"));
    assert_eq!(value_of(&split, "mccabe_is_hausdorff"), Some("true"));
    let quotient = stdout(&run_spec("check", "split", &["--mccabe"]));
    assert_eq!(value_of(&quotient, "is_hausdorff"), Some("true"));
}

#[test]
fn check_loop() {
    let o = run_spec("check", "loop", &[]);
    assert_eq!(code(&o), 0);
    assert_eq!(value_of(&stdout(&o), "chronology_violating"), Some("true"));
    assert_eq!(code(&run_spec("check", "loop", &["--mccabe"])), 1);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let invocations: [(&str, &str, &[&str]); 4] = [
        ("solve", "tree", &["--f", "x*(1-x)", "--ic", "[]@-1=0.5", "--step", "0.01"]),
        ("graph", "tree", &[]),
        ("check", "split", &[]),
        ("build", "loop", &[]),
    ];
    for (cmd, name, extra) in invocations {
        let a = run_spec(cmd, name, extra);
        let b = run_spec(cmd, name, extra);
        assert_eq!(a.stdout, b.stdout, "{cmd} {name}");
        assert_eq!(code(&a), code(&b));
    }
}
