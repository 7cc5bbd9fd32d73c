//! End-to-end tests of the `tracelinks` binary. Text outputs are compared
//! with golden files under `fixtures/golden/cli`; set `TRACELINKS_BLESS=1`
//! to rewrite them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value as Json;

const EXAMPLE: &str = "examples/boattours.lt";
const TOURS: &str = "fixtures/tours.json";
const WHEREP: &str = "../core/stdlib/wherep.lt";

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn tracelinks(args: &[&str]) -> Output {
    tracelinks_env(args, &[])
}

fn tracelinks_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tracelinks"));
    cmd.args(args).current_dir(manifest_dir()).env_remove("TRACELINKS_FUEL");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("the binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).expect("utf-8 output")
}

/// Runs a command that must succeed and returns its standard output.
fn ok(args: &[&str]) -> String {
    let o = tracelinks(args);
    assert_eq!(o.status.code(), Some(0), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn json(args: &[&str]) -> Json {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let o = tracelinks(&all);
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{args:?}: {e}: {}", stdout(&o)))
}

fn golden(name: &str, actual: &str) {
    let path = manifest_dir().join("fixtures/golden/cli").join(format!("{name}.txt"));
    if std::env::var_os("TRACELINKS_BLESS").is_some() {
        fs::create_dir_all(path.parent().expect("parent")).expect("mkdir");
        fs::write(&path, actual).expect("write golden file");
    }
    let expected = fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing {}; run with TRACELINKS_BLESS=1", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

fn keys(j: &Json) -> Vec<&str> {
    let mut ks: Vec<&str> = j.as_object().expect("object").keys().map(String::as_str).collect();
    ks.sort_unstable();
    ks
}

fn write_temp(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).expect("write temp file");
    p.display().to_string()
}

#[test]
fn check_prints_the_declared_type_of_wherep() {
    assert_eq!(ok(&["check", WHEREP]), "forall a. T(TRACE a) -> T(WHERE a)\n");
    golden("check_wherep_unicode", &ok(&["--unicode", "check", WHEREP]));
}

#[test]
fn check_boattours() {
    assert_eq!(ok(&["check", EXAMPLE]), "[{name : String, phone : String}]\n");
    let j = json(&["check", EXAMPLE]);
    assert_eq!(keys(&j), ["type"]);
}

#[test]
fn normalize_boattours() {
    golden("normalize_boattours", &ok(&["normalize", EXAMPLE]));
    assert_eq!(keys(&json(&["normalize", EXAMPLE])), ["term", "type"]);
}

#[test]
fn trace_boattours() {
    golden("trace_boattours", &ok(&["trace", EXAMPLE]));
    let j = json(&["trace", EXAMPLE]);
    assert_eq!(keys(&j), ["term", "type"]);
    assert_eq!(j["type"], "[{name : Trace String, phone : Trace String}]");
}

#[test]
fn analyze_each_mode() {
    for mode in ["value", "where", "lineage"] {
        golden(&format!("analyze_{mode}"), &ok(&["analyze", "--mode", mode, EXAMPLE]));
        let j = json(&["analyze", "--mode", mode, EXAMPLE]);
        assert_eq!(keys(&j), ["mode", "query", "type"]);
    }
    golden("analyze_lineage_dedup", &ok(&["analyze", "--mode", "lineage", "--dedup", EXAMPLE]));
}

#[test]
fn apply_a_user_supplied_analysis() {
    let dir = tempfile::tempdir().expect("tempdir");
    let f = write_temp(dir.path(), "fn.lt", "# The value analysis, by name.\nvalue\n");
    let applied = ok(&["apply", "--fn", &f, EXAMPLE]);
    assert_eq!(applied, ok(&["analyze", "--mode", "value", EXAMPLE]));
    assert_eq!(keys(&json(&["apply", "--fn", &f, EXAMPLE])), ["query", "type"]);

    // Counting the traced fields of each row is an analysis no builtin offers.
    let count = write_temp(
        dir.path(),
        "count.lt",
        "/\\a. \\t : T(TRACE a). rfold^(name : Int, phone : Int) (\\x : Int. \\y : Int. x + y) 0 {name = 1, phone = 1}\n",
    );
    golden("apply_constant", &ok(&["apply", "--fn", &count, EXAMPLE]));
}

#[test]
fn run_plain_query() {
    let out = ok(&["run", EXAMPLE, "--db", TOURS]);
    golden("run_plain", &out);
    let rows: Json = serde_json::from_str(&out).expect("json rows");
    let pairs: Vec<(&str, &str)> = rows
        .as_array()
        .expect("array")
        .iter()
        .map(|r| (r["name"].as_str().unwrap(), r["phone"].as_str().unwrap()))
        .collect();
    assert_eq!(pairs, [("EdinTours", "412 1200"), ("EdinTours", "412 1200"), ("Burns's", "607 3000")]);
    assert_eq!(keys(&json(&["run", EXAMPLE, "--db", TOURS])), ["result"]);
}

#[test]
fn run_with_analyses() {
    golden("run_where", &ok(&["run", EXAMPLE, "--db", TOURS, "--mode", "where"]));
    golden("run_lineage_dedup", &ok(&["run", EXAMPLE, "--db", TOURS, "--mode", "lineage", "--dedup"]));
    golden("run_lineage", &ok(&["run", EXAMPLE, "--db", TOURS, "--mode", "lineage"]));
}

#[test]
fn sql_listing_and_check() {
    golden("sql_plain", &ok(&["sql", EXAMPLE]));
    golden("sql_where_check", &ok(&["sql", EXAMPLE, "--mode", "where", "--db", TOURS, "--check"]));
    let j = json(&["sql", EXAMPLE, "--mode", "where", "--db", TOURS, "--check"]);
    assert_eq!(keys(&j), ["check", "sql"]);
    assert_eq!(j["check"]["agrees"], true);
    assert_eq!(j["check"]["rows"], 3);
}

#[test]
fn sql_of_nested_lineage_is_rejected() {
    let o = tracelinks(&["sql", EXAMPLE, "--mode", "lineage"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[NotFlat]"), "{}", stderr(&o));
}

#[test]
fn selftest_small_run() {
    let out = ok(&["selftest", "--seed", "3", "--cases", "4", "--suite", "value-roundtrip", "--suite", "oracle-agreement"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2, "{out}");
    assert!(lines[0].starts_with("PASS value-roundtrip: 4 cases, 0 failures"), "{out}");
    assert!(lines[1].starts_with("PASS oracle-agreement: 4 cases, 0 failures"), "{out}");
    let j = json(&["selftest", "--cases", "2", "--suite", "value-trace-identity"]);
    assert_eq!(keys(&j), ["passed", "seed", "suites"]);
    assert_eq!(keys(&j["suites"][0]), ["cases", "failures", "name", "passed"]);
    assert_eq!(j["passed"], true);
}

#[test]
fn unknown_suite_is_a_user_error() {
    let o = tracelinks(&["selftest", "--suite", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o), "error[UnknownSuite]: unknown suite `nope`\n");
}

#[test]
fn parse_errors_point_at_the_source() {
    let dir = tempfile::tempdir().expect("tempdir");
    let f = write_temp(dir.path(), "bad.lt", "[1,\n 2 +]\n");
    let o = tracelinks(&["check", &f]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error[ParseError]: "), "{err}");
    assert!(err.contains(":2:"), "{err}");
    assert!(err.contains("|  2 +]"), "{err}");

    let j = json(&["check", &f]);
    let e = &j["error"];
    assert_eq!(keys(e), ["actual", "code", "exit", "expected", "message", "span", "subterm"]);
    assert_eq!(e["code"], "ParseError");
    assert_eq!(e["exit"], 1);
    assert_eq!(e["span"]["line"], 2);
    assert_eq!(e["span"]["file"], f.as_str());
}

#[test]
fn type_errors_report_the_subterm() {
    let dir = tempfile::tempdir().expect("tempdir");
    let f = write_temp(dir.path(), "bad.lt", "1 + \"two\"\n");
    let o = tracelinks(&["check", &f]);
    assert_eq!(o.status.code(), Some(1));
    let j = json(&["check", &f]);
    let e = &j["error"];
    assert_eq!(e["span"], Json::Null);
    assert_eq!(e["subterm"], "\"two\"");
    assert_eq!(e["expected"], "Int");
    assert_eq!(e["actual"], "String");
}

#[test]
fn non_query_programs_cannot_be_traced() {
    let dir = tempfile::tempdir().expect("tempdir");
    let f = write_temp(dir.path(), "fun.lt", "\\x : Int. x\n");
    let j = json(&["trace", &f]);
    assert_eq!(j["error"]["code"], "NotAQueryType");
}

#[test]
fn missing_files_and_databases() {
    let o = tracelinks(&["check", "no/such/file.lt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[Io]: "));
    let dir = tempfile::tempdir().expect("tempdir");
    let db = write_temp(dir.path(), "db.json", r#"{"t": {"columns": {"oid": "int"}, "rows": [{"oid": 1}, {"oid": 1}]}}"#);
    let o = tracelinks(&["run", EXAMPLE, "--db", &db]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[DuplicateOid]"), "{}", stderr(&o));
}

#[test]
fn fuel_comes_from_flag_then_environment() {
    let o = tracelinks_env(&["analyze", "--mode", "where", EXAMPLE], &[("TRACELINKS_FUEL", "3")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[FuelExhausted]"), "{}", stderr(&o));
    let o = tracelinks_env(&["--fuel", "100000", "analyze", "--mode", "where", EXAMPLE], &[("TRACELINKS_FUEL", "3")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = tracelinks_env(&["check", EXAMPLE], &[("TRACELINKS_FUEL", "lots")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[BadFuel]"));
}

#[test]
fn unroll_limit_bounds_recursion() {
    let o = tracelinks(&["--unroll-limit", "0", "analyze", "--mode", "where", EXAMPLE]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unrolled more than 0 times"), "{}", stderr(&o));
}

#[test]
fn trace_steps_are_written_one_per_line() {
    let dir = tempfile::tempdir().expect("tempdir");
    let steps = dir.path().join("steps.txt");
    let steps_arg = steps.display().to_string();
    let final_nf = ok(&["--trace-steps", &steps_arg, "analyze", "--mode", "value", EXAMPLE]);
    let text = fs::read_to_string(&steps).expect("steps written");
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() > 10, "only {} steps", lines.len());
    // Steps are printed without folding library names, so each line is
    // self-contained.
    assert!(lines[0].starts_with("(fix (value : forall a."), "{}", lines[0]);
    assert_eq!(lines.last().copied(), Some(final_nf.trim_end()));
}

#[test]
fn usage_errors_and_help() {
    let o = tracelinks(&["analyze", EXAMPLE]);
    assert_eq!(o.status.code(), Some(1));
    let o = tracelinks(&["analyze", "--mode", "why", EXAMPLE]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("why"));
    let o = tracelinks(&["sql", EXAMPLE, "--check"]);
    assert_eq!(o.status.code(), Some(1));
    let help = ok(&["--help"]);
    for sub in ["check", "normalize", "trace", "analyze", "apply", "run", "sql", "selftest"] {
        assert!(help.contains(sub), "{sub} missing from help");
    }
}
