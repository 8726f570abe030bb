use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(file: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(file).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_packlay")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn usage_and_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["optimize", "/definitely/missing.lay"]), 2);
    assert_eq!(code(&["optimize", &corpus("foo.lay"), "--scope", "nearby"]), 2);
    assert_eq!(code(&["optimize", &corpus("foo.lay"), "--scope", "local=nope"]), 2);
    let bad = write(dir.path(), "bad.lay", "data = \n");
    assert_eq!(code(&["analyze", &bad]), 2);
    let ill = write(dir.path(), "ill.lay", "data L = N | C Int L\nf : (L) -> Int\nf l = case l of\n  N -> 0\n");
    let out = run(&["analyze", &ill]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-exhaustive"));
    let costs = write(dir.path(), "c.json", r#"{"df":{"succ":2,"after":1,"pred":4,"before":8},"inl":{"succ":4,"after":8,"pred":1,"before":2}}"#);
    assert_eq!(code(&["optimize", &corpus("foo.lay"), "--costs", &costs]), 2);
    assert_eq!(code(&["simulate", "--bench", "nope"]), 2);
    assert_eq!(code(&["simulate", "--bench", "list-length", "--content-size", "2"]), 2);
    assert_eq!(code(&["simulate", "--bench", "list-length", "--layout", "Cons=0,0"]), 2);
}

#[test]
fn constraint_conflicts_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let src = "data T = L | N Int Bool T\n{-# ANN N 0 AFTER 1 #-}\n{-# ANN N 1 AFTER 0 #-}\n\
               f : (T) -> Int\nf t = case t of\n  L -> 0\n  N x b r -> x\n";
    let f = write(dir.path(), "conflict.lay", src);
    let out = run(&["optimize", &f]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("field 0 AFTER field 1") && err.contains("field 1 AFTER field 0"), "{err}");
}

#[test]
fn analyze_writes_dot_lp_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let dots = dir.path().join("dot");
    let lp = dir.path().join("p.lp");
    let json = dir.path().join("a.json");
    let out = run(&[
        "analyze",
        &corpus("running_example.lay"),
        "--dot",
        dots.to_str().unwrap(),
        "--lp",
        lp.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["cfg_search.dot", "cfg_emphContent.dot", "cfg_emphKeyword.dot", "fag_Blog.dot", "fag_CCons.dot", "fag_HCons.dot"] {
        let text = std::fs::read_to_string(dots.join(f)).unwrap();
        assert!(text.starts_with("digraph"), "{f}");
    }
    let lp = std::fs::read_to_string(&lp).unwrap();
    assert_eq!(lp.matches("\nend\n").count(), 3);
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(j["graphs"].as_array().unwrap().len(), 3);
    assert!(j["attrs"].as_array().unwrap().iter().any(|r| r["fn"] == "emphKeyword" && r["dcon"] == "Blog"));
}

#[test]
fn optimize_prints_the_program_and_reports_on_stderr() {
    let out = run(&["optimize", &corpus("foo.lay")]);
    assert!(out.status.success());
    let src = String::from_utf8_lossy(&out.stdout);
    assert!(src.contains("data List = Nil | Cons List Int"), "{src}");
    let report = String::from_utf8_lossy(&out.stderr);
    assert!(report.contains(r#"{"dcon":"Cons","order":[1,0]"#), "{report}");
}

#[test]
fn local_scope_is_accepted() {
    let out = run(&["optimize", &corpus("running_example.lay"), "--scope", "local=search", "--mode", "greedy"]);
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stderr);
    assert!(report.contains("HCons") && !report.contains("Blog"), "{report}");
}

#[test]
fn simulate_accepts_a_rewritten_program() {
    // The flipped program runs on the same inputs as the original.
    let dir = tempfile::tempdir().unwrap();
    let flipped = write(
        dir.path(),
        "flipped.lay",
        "data List = Nil | Cons List Str\nlength : (List) -> Int\nlength l = case l of\n  Nil -> 0\n  Cons rest c -> add 1 (length rest)\n",
    );
    let out = run(&["simulate", &flipped, "--bench", "list-length", "--size", "100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let j: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(j["metrics"]["skip_bytes"], 0);
    assert_eq!(j["metrics"]["tags_read"], 101);
    let out = run(&["simulate", "--bench", "list-length", "--size", "100", "--layout-mode", "packed-offsets"]);
    let j: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(j["metrics"]["offset_derefs"], 100);
    assert_eq!(j["composite"], 6400);
}

#[test]
fn bench_prints_a_table_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("b.json");
    let out = run(&["bench", "rightmost", "--size", "8", "--json", json.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("* rl"), "{text}");
    assert!(text.contains("M_solver") && text.contains("M_greedy"));
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(j["argmin"], "rl");
    assert_eq!(j["rows"].as_array().unwrap().len(), 4);
}
