use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bellcheck"));
    c.env_remove("BELL_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.schema.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).expect("schema compiles")
}

/// Runs a subcommand expecting success and checks its JSON against the
/// named schema.
fn json_ok(args: &[&str], schema_name: &str) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).expect("json on stdout");
    let validator = schema(schema_name);
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{args:?} output violates {schema_name}: {errors:#?}");
    v
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn demo_counterexample() {
    let v = json_ok(&["demo-counterexample"], "demo-counterexample");
    assert_eq!(v["quad"]["xy"], "1");
    assert_eq!(v["quad"]["xy'"], "0");
    assert_eq!(v["quad"]["x'y"], "0");
    assert_eq!(v["quad"]["x'y'"], "-1");
    assert_eq!(v["combination"]["value"], "0");
    assert_eq!(v["chsh"]["satisfied"], true);
    assert_eq!(v["fine"]["verdict"], "feasible");
    // Pure: two runs agree byte for byte.
    assert_eq!(run(&["demo-counterexample"]).stdout, run(&["demo-counterexample"]).stdout);
}

#[test]
fn demo_quantum() {
    let v = json_ok(&["demo-quantum"], "demo-quantum");
    let max: f64 = v["chsh"]["max_abs_decimal"].as_str().unwrap().parse().unwrap();
    assert!((max - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["fine"]["verdict"], "infeasible");
    let v = json_ok(&["demo-quantum", "--angles", "0", "0", "0", "0"], "demo-quantum");
    assert_eq!(v["quad"]["xy"], "-1");
}

#[test]
fn counterexample_fixture_matches_library() {
    let text = std::fs::read_to_string(fixture("counterexample.json")).unwrap();
    let parsed = bellcheck::io::parse_str(&text, "counterexample.json").unwrap();
    assert_eq!(parsed, bellcheck::io::ModelFile::Contextual(bellcheck::counterexample_model()));
    assert_eq!(text, bellcheck::io::print_contextual(&bellcheck::counterexample_model()));
    json_ok(&["validate", &fixture("counterexample.json")], "validate");
}

#[test]
fn chsh_on_quads_and_files() {
    let v = json_ok(&["chsh", "--quad", "0", "0", "0", "0"], "chsh");
    assert_eq!(v["chsh"]["max_abs"], "0");
    assert_eq!(v["chsh"]["satisfied"], true);
    let v = json_ok(&["chsh", "--quad", "1", "1", "1", "-1"], "chsh");
    assert_eq!(v["chsh"]["max_abs"], "4");
    assert_eq!(v["chsh"]["satisfied"], false);
    let v = json_ok(&["chsh", "--quad", "0.5", "1/2", "-1/4", "0"], "chsh");
    assert_eq!(v["quad"]["xy"], "1/2");
    let v = json_ok(&["chsh", &fixture("loophole_winner_model.json")], "chsh");
    assert_eq!(v["chsh"]["satisfied"], true);
    assert_eq!(v["postselection"]["conditional_chsh"]["satisfied"], false);
    json_ok(&["chsh", &fixture("quantum_chsh.json")], "chsh");
}

#[test]
fn exact_flatten_exact_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(12);
    for kind in [
        bellcheck::corpus::OutcomeKind::Binary,
        bellcheck::corpus::OutcomeKind::Ternary,
        bellcheck::corpus::OutcomeKind::Fractional,
    ] {
        let model = bellcheck::corpus::random_model(&mut rng, 4, 3, kind);
        let path = write(dir.path(), "m.json", &bellcheck::io::print_contextual(&model));
        let before = json_ok(&["exact", &path], "exact")["quad"].clone();
        for (method, refinement) in [("product", "common"), ("uniform", "common"), ("uniform", "lcm"), ("average", "common")] {
            let flat = dir.path().join(format!("{method}-{refinement}.json")).display().to_string();
            let out = run(&["flatten", &path, "--method", method, "--refinement", refinement, "--out", &flat]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            let text = std::fs::read_to_string(&flat).unwrap();
            let v: Value = serde_json::from_str(&text).unwrap();
            assert!(schema("flatten").is_valid(&v));
            assert!(schema("model").is_valid(&v));
            let after = json_ok(&["exact", &flat], "exact")["quad"].clone();
            assert_eq!(before, after, "{method}/{refinement}");
        }
    }
}

#[test]
fn fine_subcommand() {
    let v = json_ok(&["fine", &fixture("quantum_chsh.json")], "fine");
    assert_eq!(v["result"]["verdict"], "infeasible");
    let v = json_ok(&["fine", &fixture("counterexample.json")], "fine");
    assert_eq!(v["result"]["verdict"], "feasible");
    let v = json_ok(&["fine", &fixture("loophole_winner_model.json")], "fine");
    assert_eq!(v["reduced_to_binary"], true);
    assert_eq!(v["result"]["verdict"], "feasible");
}

#[test]
fn simulate_csv_and_json() {
    let model = fixture("counterexample.json");
    let out = run(&["simulate", "--model", &model, "--trials", "50", "--seed", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,a,b,x,y");
    assert_eq!(lines.len(), 51);
    assert_eq!(out.stdout, run(&["simulate", "--model", &model, "--trials", "50", "--seed", "3"]).stdout);
    assert_ne!(out.stdout, run(&["simulate", "--model", &model, "--trials", "50", "--seed", "4"]).stdout);
    // Thread count does not change the spreadsheet.
    let threaded = bin()
        .args(["simulate", "--model", &model, "--trials", "50", "--seed", "3"])
        .env("BELL_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(out.stdout, threaded.stdout);

    let v = json_ok(
        &["simulate", "--model", &model, "--trials", "2000", "--seed", "3", "--format", "json", "--bias", "1/2,1/4,1/8,1/8"],
        "simulate",
    );
    assert_eq!(v["records"].as_array().unwrap().len(), 2000);
    json_ok(&["simulate", "--model", &model, "--trials", "2000", "--seed", "3", "--format", "json", "--confound"], "simulate");
}

#[test]
fn search_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let model_out = dir.path().join("winner.json").display().to_string();
    let v = json_ok(
        &["search", "--seed", "5", "--budget", "20000", "--source-atoms", "4", "--instrument-atoms", "3", "--min-rate", "0.3", "--model-out", &model_out],
        "search",
    );
    assert_eq!(v["report"]["raw_chsh"]["satisfied"], true);
    assert!(schema("model").is_valid(&serde_json::from_str(&std::fs::read_to_string(&model_out).unwrap()).unwrap()));
}

#[test]
fn text_format() {
    let out = run(&["chsh", "--quad", "1", "0", "0", "-1", "--format", "text"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("satisfied: true"), "{text}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Seed is required for simulate and search, and rejected elsewhere.
    assert_eq!(run(&["simulate", "--model", &fixture("counterexample.json"), "--trials", "5"]).status.code(), Some(2));
    assert_eq!(run(&["search"]).status.code(), Some(2));
    assert_eq!(run(&["demo-counterexample", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(run(&["exact", &fixture("counterexample.json"), "--seed", "1"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["chsh", "--quad", "0", "0", "0", "0", "--format", "csv"]).status.code(), Some(2));
    assert_eq!(run(&["exact", "/nonexistent/model.json"]).status.code(), Some(2));

    // Validation failures exit 1 with nothing on stdout.
    let text = bellcheck::io::print_contextual(&bellcheck::counterexample_model());
    let short = text.replacen("\"1/6\"", "\"2/300\"", 1);
    let path = write(dir.path(), "short.json", &short);
    let out = run(&["validate", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("source") && err.contains("deficit"), "{err}");

    let bad = text.replacen("\"1/6\"", "\"1/six\"", 1);
    let path = write(dir.path(), "bad.json", &bad);
    let out = run(&["exact", &path]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.json:") && err.contains("1/six"), "{err}");

    let out = run(&["chsh", "--quad", "2", "0", "0", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn deficit_of_one_hundredth() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{
  "source": [["a", "a", "99/100"]],
  "alice": [
    {"label": "x", "instrument": [["i", "1"]], "table": {"rows": ["a"], "cols": ["i"], "values": [["1"]]}},
    {"label": "x'", "instrument": [["i", "1"]], "table": {"rows": ["a"], "cols": ["i"], "values": [["1"]]}}
  ],
  "bob": [
    {"label": "y", "instrument": [["i", "1"]], "table": {"rows": ["a"], "cols": ["i"], "values": [["1"]]}},
    {"label": "y'", "instrument": [["i", "1"]], "table": {"rows": ["a"], "cols": ["i"], "values": [["1"]]}}
  ]
}"#;
    let path = write(dir.path(), "m.json", doc);
    let out = run(&["validate", &path]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("source") && err.contains("deficit 1/100"), "{err}");
}
