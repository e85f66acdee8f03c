use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_structres"))
}

fn program(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../programs").join(name);
    root.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let Output { status, stdout, stderr } = bin().args(args).output().expect("binary runs");
    (
        status.code().expect("exit code"),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("structres-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn solve_connect_all_answers() {
    let (code, out, _) = run(&["solve", "--mode", "unif", &program("connect.lp"), "connect(X,Y)"]);
    assert_eq!(code, 0);
    assert_eq!(
        out,
        "X = node1, Y = node2 ;\nX = node2, Y = node3 ;\nX = node1, Y = node3\noutcome=success\n"
    );
}

#[test]
fn solve_struct_on_overlap_is_stuck() {
    let (code, out, _) = run(&["solve", "--mode", "struct", &program("overlap.lp"), "p(X)"]);
    assert_eq!((code, out.as_str()), (1, "outcome=stuck goals={q(X)}\n"));
}

#[test]
fn solve_tm_diverges() {
    let (code, out, _) = run(&["solve", "--mode", "tm", &program("connect.lp"), "connect(X,Y)", "--max-tm-steps", "50"]);
    assert_eq!((code, out.as_str()), (2, "outcome=tm-divergence\n"));
}

#[test]
fn solve_writes_traces() {
    let (lines, json) = (tmp("trace.txt"), tmp("trace.json"));
    let (code, _, _) = run(&[
        "solve",
        &program("connect.lp"),
        "connect(node1,node2)",
        "--trace",
        lines.to_str().unwrap(),
        "--trace-json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&lines).unwrap();
    assert!(text.starts_with("initial={connect(node1,node2)}\nstep=1 mode=unif clause=k2"), "{text}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["strategy"], "unif");
}

#[test]
fn output_is_reproducible() {
    let args = ["solve", "--mode", "struct", &program("blist.lp"), "blist(cons(X,Y))", "--max-depth", "3"];
    assert_eq!(run(&args), run(&args));
}

#[test]
fn transform_connect() {
    let (code, out, _) = run(&["transform", &program("connect.lp")]);
    assert_eq!(code, 0);
    assert_eq!(
        out,
        "k1: connect(X,Z,f_k1(U1,U2)) <= connect(X,Y,U1), connect(Y,Z,U2).\n\
         k2: connect(node1,node2,c_k2).\n\
         k3: connect(node2,node3,c_k3).\n"
    );
}

#[test]
fn transform_edge_cases() {
    let empty = tmp("empty.lp");
    fs::write(&empty, "").unwrap();
    let out = tmp("empty.out");
    let (code, _, _) = run(&["transform", empty.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(&out).unwrap(), "");

    let clash = tmp("clash.lp");
    fs::write(&clash, "k1: p(f_k1(a)) <= q(a).\n").unwrap();
    let (code, _, err) = run(&["transform", clash.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("f_k1"), "{err}");
}

#[test]
fn check_reports() {
    let transformed = tmp("fconnect.lp");
    let (code, _, _) = run(&["transform", &program("connect.lp"), "-o", transformed.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, out, _) = run(&["check", transformed.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out, "non-overlapping: yes\nproductivity: measure-decreasing positions={connect:3}\n");

    let (code, out, _) = run(&["check", &program("overlap.lp")]);
    assert_eq!(code, 1);
    assert!(out.starts_with("non-overlapping: no witness=(k1, k2, {X=c})\n"), "{out}");

    let (code, out, _) = run(&["check", &program("connect.lp")]);
    assert_eq!(code, 1);
    assert!(out.contains("productivity: refuted"), "{out}");
    assert!(out.contains("step=1 mode=tm clause=k1"), "{out}");

    let (code, out, _) = run(&["check", &program("stream.lp"), "--measure", "stream=1,bit=1"]);
    assert_eq!(code, 0);
    assert!(out.contains("measure-decreasing positions={bit:1, stream:1}"), "{out}");
}

#[test]
fn prove_connect() {
    let (code, out, _) = run(&["prove", &program("connect.lp"), "connect(node1,node3)"]);
    assert_eq!(code, 0);
    assert!(out.contains("proof: (k1 k2) k3\n"), "{out}");
    assert!(out.ends_with("check: ok\n"), "{out}");

    let (code, out, _) = run(&["prove", &program("connect.lp"), "connect(node1,node2)"]);
    assert_eq!(code, 0);
    assert!(out.contains("proof: k2\n"), "{out}");

    let (code, out, _) = run(&["prove", &program("blist.lp"), "blist(cons(2,nil))"]);
    assert_eq!(code, 1);
    assert!(!out.contains("proof:"), "{out}");
}

#[test]
fn prove_on_transformed_program_reports_representation() {
    let transformed = tmp("fconnect2.lp");
    run(&["transform", &program("connect.lp"), "-o", transformed.to_str().unwrap()]);
    let (code, out, _) = run(&["prove", transformed.to_str().unwrap(), "connect(node1,node3,U)"]);
    assert_eq!(code, 0);
    assert!(out.contains("representation: f_k1(c_k2,c_k3) recorded=yes"), "{out}");
}

#[test]
fn diff_on_files() {
    let (code, out, _) = run(&["diff", "--theorems", "equiv,record", &program("connect.lp"), "connect(X,Y)"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("equiv: holds\n"), "{out}");
    assert!(out.contains("record: holds\n"), "{out}");

    let report = tmp("report.jsonl");
    let (code, out, _) = run(&[
        "diff",
        "--theorems",
        "equiv",
        &program("overlap.lp"),
        "p(X)",
        "--raw",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(out.starts_with("equiv: refuted\n"), "{out}");
    let line = fs::read_to_string(&report).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["theorem"], "equiv");
    assert_eq!(v["verdict"]["refuted"]["counterexample"].as_array().unwrap().len(), 2);
}

#[test]
fn diff_on_small_corpus() {
    let (code, out, _) = run(&["diff", "--corpus", "--seed", "7", "--count", "12", "--theorems", "oracle,equiv"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.starts_with("theorem "), "{out}");
    assert!(out.contains("\nequiv "), "{out}");
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(run(&["solve", &program("connect.lp"), "connect(X"]).0, 3);
    assert_eq!(run(&["solve", "/nonexistent.lp", "p"]).0, 3);
    assert_eq!(run(&["solve", &program("connect.lp"), "p", "--max-steps", "0"]).0, 3);
    assert_eq!(run(&["frobnicate"]).0, 3);
    assert_eq!(run(&["diff"]).0, 3);
    assert_eq!(run(&["--help"]).0, 0);
}
