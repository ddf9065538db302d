use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value as Json;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn c(rel: &str) -> String {
    corpus().join(rel).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twosort")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

#[test]
fn check_reports_classes() {
    let out = ok(&["check", &c("theories/russell.gat")]);
    assert!(out.contains("1 sort equation"), "{out}");
    let j: Json = serde_json::from_str(&ok(&["--format", "json", "check", &c("theories/monoid.gat")])).unwrap();
    assert_eq!(j["classes"]["equation"], 3);
    assert_eq!(j["declarations"], 6);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&run(&["check", &c("bad/nonsense.gat")])), 1);
    assert_eq!(code(&run(&["check", &c("theories/missing.gat")])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["--version"])), 0);
    // the natural numbers have no finite initial model
    let dir = tempfile::tempdir().unwrap();
    let nat = dir.path().join("nat.gat");
    fs::write(&nat, "N : Set; z : N; s : (n : N) N;\n").unwrap();
    let o = run(&["initial", nat.to_str().unwrap(), "--depth", "4"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("\"N\""), "the partial model is still printed");
}

#[test]
fn translate_matches_goldens() {
    for name in ["transitive_graphs", "pointed_set", "empty"] {
        let out = ok(&["translate", &c(&format!("theories/{name}.gat"))]);
        assert_eq!(out, fs::read_to_string(c(&format!("expected/translated/{name}.gat"))).unwrap());
    }
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let dst = dir.path().join("pf.gat");
    let out = ok(&["pushforward", &c("table1/pointed_b.gat"), "-o", dst.to_str().unwrap()]);
    assert!(out.is_empty());
    assert_eq!(fs::read_to_string(&dst).unwrap(), fs::read_to_string(c("expected/pushforward/pointed_b.gat")).unwrap());
}

#[test]
fn prefix_is_renamed_apart_on_clash() {
    let out = ok(&["--prefix", "Con,Fib", "translate", &c("theories/russell.gat")]);
    assert!(!out.starts_with("Con : Set;"), "{out}");
    assert!(out.contains("Fib"), "{out}");
    assert_eq!(code(&run(&["--prefix", "U", "translate", &c("theories/set.gat")])), 2);
    assert_eq!(code(&run(&["--prefix", "U,U", "translate", &c("theories/set.gat")])), 2);
}

#[test]
fn is_family() {
    assert_eq!(ok(&["is-family", &c("theories/set.gat")]).trim(), "false");
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.gat");
    fs::write(&t, ok(&["translate", &c("theories/russell.gat")])).unwrap();
    assert_eq!(ok(&["is-family", t.to_str().unwrap()]).trim(), "true");
}

#[test]
fn coreflector_prints_assignments() {
    let out = ok(&["coreflect", &c("theories/transitive_graphs.gat")]);
    assert!(out.starts_with("V := El V;\n"), "{out}");
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn sortify_then_desortify_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let th = c("theories/transitive_graphs.gat");
    let n = dir.path().join("n.model");
    ok(&["model", "sortify", &th, &c("models/transitive_graphs/triangle.model"), "-o", n.to_str().unwrap()]);
    ok(&["model", "check", &c("expected/translated/transitive_graphs.gat"), n.to_str().unwrap()]);
    let back: Json = serde_json::from_str(&ok(&["model", "desortify", &th, n.to_str().unwrap()])).unwrap();
    let orig: Json = serde_json::from_str(&fs::read_to_string(c("models/transitive_graphs/triangle.model")).unwrap()).unwrap();
    assert_eq!(back["sorts"], orig["sorts"]);
    assert_eq!(back["ops"], orig["ops"]);
    assert_eq!(ok(&["model", "roundtrip", &th, &c("models/transitive_graphs/triangle.model")]).trim(), "roundtrip: identity");
}

#[test]
fn model_for_the_wrong_theory_is_rejected() {
    let o = run(&["model", "check", &c("theories/monoid.gat"), &c("models/set/one.model")]);
    assert_eq!(code(&o), 1);
}

#[test]
fn invalid_model_is_a_domain_failure() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("bad.model");
    let th = c("theories/involution.gat");
    fs::write(
        &m,
        format!(r#"{{"theory": {th:?}, "sorts": {{"B": ["a", "b"]}}, "ops": {{"t": "a", "f": "b", "not": {{"a": "a", "b": "a"}}}}}}"#),
    )
    .unwrap();
    let o = run(&["model", "check", &th, m.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nn"));
}

#[test]
fn comma_example() {
    let th = c("theories/transitive_graphs.gat");
    let out = ok(&["comma", "from", &th, &c("comma/example12.comma")]);
    assert_eq!(out, fs::read_to_string(c("expected/example12.model")).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let n = dir.path().join("n.model");
    fs::write(&n, &out).unwrap();
    let back: Json = serde_json::from_str(&ok(&["comma", "to", &th, n.to_str().unwrap()])).unwrap();
    let orig: Json = serde_json::from_str(&fs::read_to_string(c("comma/example12.comma")).unwrap()).unwrap();
    assert_eq!(back["family"], orig["family"]);
    assert_eq!(back["map"], orig["map"]);
}

#[test]
fn homs_between_graphs() {
    let th = c("theories/transitive_graphs.gat");
    let j: Json = serde_json::from_str(&ok(&[
        "--format",
        "json",
        "homs",
        &th,
        &c("models/transitive_graphs/g2.model"),
        &c("models/transitive_graphs/loop.model"),
    ]))
    .unwrap();
    // both vertices go to the single looped vertex, the edge to the loop
    assert_eq!(j["count"], 1);
    let tiny = run(&["--search-cap", "1", "homs", &th, &c("models/transitive_graphs/triangle.model"), &c("models/transitive_graphs/triangle.model")]);
    assert_eq!(code(&tiny), 3);
}

#[test]
fn adjoint_check_on_russell() {
    let th = c("theories/russell.gat");
    let dir = tempfile::tempdir().unwrap();
    let n = dir.path().join("n.model");
    ok(&["model", "sortify", &th, &c("models/russell/two.model"), "-o", n.to_str().unwrap()]);
    let j: Json = serde_json::from_str(&ok(&["--format", "json", "adjoint-check", &th, &c("models/russell/one.model"), n.to_str().unwrap()])).unwrap();
    assert_eq!(j["bijective"], true);
    assert_eq!(j["unit_is_identity"], true);
    assert_eq!(j["left"], j["right"]);
}

#[test]
fn initial_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("r.json");
    let out = ok(&["initial", &c("theories/involution.gat"), "--depth", "6", "--report", rep.to_str().unwrap()]);
    let m: Json = serde_json::from_str(&out).unwrap();
    assert_eq!(m["sorts"]["B"].as_array().unwrap().len(), 4);
    let r: Json = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(r["saturated"], true);
    assert_eq!(r["class_counts"]["B()"], 4);
    assert_eq!(r["indeterminate_pairs"], 0);
}

#[test]
fn substitutions_check() {
    for e in fs::read_dir(corpus().join("substitutions")).unwrap() {
        let p = e.unwrap().path();
        ok(&["check-subst", p.to_str().unwrap()]);
    }
}

#[test]
fn selftest_passes() {
    let out = ok(&["selftest"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]")).count(), 10, "{out}");
}
