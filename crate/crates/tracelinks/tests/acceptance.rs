//! Acceptance criteria. Runs without the test harness so that the
//! `PASS`/`FAIL` line of every criterion is always printed; the process
//! fails if any criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value as Json;
use tracelinks::db::{load_db, parse_db};
use tracelinks::pipeline::Session;
use tracelinks::props::{self, Report};
use tracelinks::sqlite::check_agreement;
use tracelinks_core::normalize::NrcTerm;
use tracelinks_core::runtime::{eval, Value};
use tracelinks_core::stdlib::Mode;
use tracelinks_core::NormalizeConfig;

/// Seed shared by all property criteria.
const SEED: u64 = 1;
/// Wall-clock limit for the boat-tours run, including process start-up.
const BASELINE_LIMIT: Duration = Duration::from_secs(1);
const VALUE_ROUNDTRIP_CASES: usize = 500;
const VALUE_ROUNDTRIP_LIMIT: Duration = Duration::from_secs(60);
const PRESERVATION_MIN_TRACES: usize = 200;
const PROGRESS_MIN_TERMS: usize = 1000;
const NRC_MIN_TERMS: usize = 500;
const VALUE_TRACE_MIN_CONSTRUCTORS: usize = 200;
const LINEAGE_MIN_INSTANCES: usize = 100;

/// The SQL listing for the where-provenance boat-tours query.
const REFERENCE_SQL: &str = "SELECT e.name AS name_val, 'externalTours' AS name_tbl,
       'name' AS name_col, e.oid AS name_row,
       a.phone AS phone_val, 'agencies' AS phone_tbl,
       'phone' AS phone_col, a.oid AS phone_row
  FROM agencies AS a, externaltours AS e
 WHERE a.name = e.name AND e.type = 'boat'";

const PROJECTION_QUERY: &str = r#"for (x <- table "xs" {oid : Int, a : Int, b : Bool}) [x.a]"#;
const PROJECTION_DB: &str = r#"{"xs": {"columns": {"oid": "int", "a": "int", "b": "bool"},
  "rows": [{"oid": 1, "a": 10, "b": true}, {"oid": 2, "a": 20, "b": false}]}}"#;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

type Outcome = Result<String, String>;

fn tracelinks(args: &[&str]) -> Result<(Duration, String), String> {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_tracelinks"))
        .args(args)
        .current_dir(manifest_dir())
        .env_remove("TRACELINKS_FUEL")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !o.status.success() {
        return Err(format!("{args:?} exited with {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
    }
    Ok((elapsed, String::from_utf8(o.stdout).map_err(|e| e.to_string())?))
}

fn run_json(args: &[&str]) -> Result<(Duration, Json), String> {
    let (t, out) = tracelinks(args)?;
    Ok((t, serde_json::from_str(&out).map_err(|e| format!("{e}: {out}"))?))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rows_for<'a>(result: &'a Json, name: &str, path: &[&str]) -> Vec<&'a Json> {
    result
        .as_array()
        .into_iter()
        .flatten()
        .filter(|r| path.iter().fold(*r, |v, k| &v[*k]) == name)
        .collect()
}

fn baseline() -> Outcome {
    let (t, rows) = run_json(&["run", "examples/boattours.lt", "--db", "fixtures/tours.json"])?;
    let expected: Json = serde_json::json!([
        {"name": "EdinTours", "phone": "412 1200"},
        {"name": "EdinTours", "phone": "412 1200"},
        {"name": "Burns's", "phone": "607 3000"},
    ]);
    check(rows == expected, || format!("got {rows}"))?;
    check(t < BASELINE_LIMIT, || format!("took {t:?}, limit {BASELINE_LIMIT:?}"))?;
    Ok(format!("3 rows in table order, {:.3}s (limit {:.1}s)", t.as_secs_f64(), BASELINE_LIMIT.as_secs_f64()))
}

/// The parts of a single-block `SELECT` compared up to alias names,
/// whitespace and letter case of table names in string literals.
#[derive(Debug, PartialEq)]
struct SqlShape {
    select: BTreeSet<(String, String)>,
    from: BTreeSet<String>,
    conjuncts: BTreeSet<String>,
}

/// Splits at `sep` outside single-quoted literals.
fn split_outside_quotes<'a>(s: &'a str, sep: &str) -> Vec<&'a str> {
    let mut parts = Vec::new();
    let mut quoted = false;
    let mut start = 0;
    let mut i = 0;
    while i < s.len() {
        if s.as_bytes()[i] == b'\'' {
            quoted = !quoted;
        } else if !quoted && s[i..].starts_with(sep) {
            parts.push(&s[start..i]);
            i += sep.len();
            start = i;
            continue;
        }
        i += 1;
    }
    parts.push(&s[start..]);
    parts
}

fn sql_shape(sql: &str) -> Result<SqlShape, String> {
    let flat = sql.split_whitespace().collect::<Vec<_>>().join(" ");
    let rest = flat.strip_prefix("SELECT ").ok_or("no SELECT")?;
    let (select, rest) = rest.split_once(" FROM ").ok_or("no FROM")?;
    let (from, cond) = rest.split_once(" WHERE ").unwrap_or((rest, ""));
    let mut aliases = Vec::new();
    let mut tables = BTreeSet::new();
    for item in from.split(", ") {
        let (table, alias) = item.split_once(" AS ").ok_or_else(|| format!("FROM item without alias: {item}"))?;
        tables.insert(table.to_lowercase());
        aliases.push((format!("{alias}."), format!("{}.", table.to_lowercase())));
    }
    let canon = |e: &str| {
        let mut e = e.trim().to_string();
        for (alias, table) in &aliases {
            e = e.replace(alias.as_str(), table);
        }
        // Table names appear in string literals with varying case.
        if e.starts_with('\'') {
            e = e.to_lowercase();
        }
        e
    };
    let mut items = BTreeSet::new();
    for item in split_outside_quotes(select, ", ") {
        let (expr, col) = item.rsplit_once(" AS ").ok_or_else(|| format!("select item without name: {item}"))?;
        items.insert((col.trim().to_string(), canon(expr)));
    }
    let mut conjuncts = BTreeSet::new();
    if !cond.is_empty() {
        for c in split_outside_quotes(cond, " AND ") {
            let mut sides: Vec<String> = c.split(" = ").map(canon).collect();
            sides.sort();
            conjuncts.insert(sides.join(" = "));
        }
    }
    Ok(SqlShape { select: items, from: tables, conjuncts })
}

fn where_provenance() -> Outcome {
    let (_, rows) = run_json(&["run", "examples/boattours.lt", "--db", "fixtures/tours.json", "--mode", "where"])?;
    let burns = rows_for(&rows, "Burns's", &["name", "val"]);
    check(burns.len() == 1, || format!("{} rows for Burns's", burns.len()))?;
    let name = &burns[0]["name"];
    let phone = &burns[0]["phone"];
    check(name["tbl"] == "ExternalTours" && name["col"] == "name" && name["row"] == 7, || format!("name {name}"))?;
    check(phone["tbl"] == "Agencies" && phone["col"] == "phone" && phone["row"] == 2, || format!("phone {phone}"))?;

    let (_, sql) = tracelinks(&["sql", "examples/boattours.lt", "--mode", "where"])?;
    let ours = sql_shape(&sql)?;
    let reference = sql_shape(REFERENCE_SQL)?;
    check(ours == reference, || format!("SQL differs: ours {ours:?}, reference {reference:?}"))?;

    let s = Session::new(NormalizeConfig::default()).map_err(|e| e.to_string())?;
    let q = props::boattours(&s);
    let nrc = s.compile(Some(Mode::Where), &q).map_err(|e| e.to_string())?;
    let ty = s.result_type(Some(Mode::Where), &q).map_err(|e| e.to_string())?;
    let db = load_db(&manifest_dir().join("fixtures/tours.json")).map_err(|e| e.to_string())?;
    let a = check_agreement(&nrc, &ty, &db).map_err(|e| e.to_string())?;
    check(a.agrees(), || format!("SQLite {:?} vs evaluator {:?}", a.engine, a.reference))?;
    Ok(format!(
        "Burns's annotated (ExternalTours, name, 7) and (Agencies, phone, 2); SQL matches the listing; SQLite agrees on {} rows",
        a.reference.len()
    ))
}

fn lineage_pairs(v: &Json) -> BTreeSet<(String, i64)> {
    v.as_array()
        .into_iter()
        .flatten()
        .map(|a| (a["table"].as_str().unwrap_or_default().to_string(), a["row"].as_i64().unwrap_or_default()))
        .collect()
}

/// The lineage list of every element of a plain list result.
fn lineage_lists(v: &Value) -> Vec<Vec<Value>> {
    v.as_list()
        .unwrap_or_default()
        .iter()
        .map(|r| r.field("lineage").and_then(Value::as_list).unwrap_or_default().to_vec())
        .collect()
}

/// The nonempty lists joined by `++` in a normalized lineage field.
fn concat_leaves(m: &NrcTerm, out: &mut Vec<NrcTerm>) {
    match m {
        NrcTerm::Concat(a, b) => {
            concat_leaves(a, out);
            concat_leaves(b, out);
        }
        NrcTerm::Empty => {}
        other => out.push(other.clone()),
    }
}

fn lineage_field(m: &NrcTerm) -> Option<&NrcTerm> {
    match m {
        NrcTerm::For(_, _, body) => lineage_field(body),
        NrcTerm::Singleton(r) => match &**r {
            NrcTerm::Record(fs) => fs.iter().find(|(l, _)| &**l == "lineage").map(|(_, t)| t),
            _ => None,
        },
        _ => None,
    }
}

fn lineage() -> Outcome {
    let (_, rows) =
        run_json(&["run", "examples/boattours.lt", "--db", "fixtures/tours.json", "--mode", "lineage", "--dedup"])?;
    let burns = rows_for(&rows, "Burns's", &["data", "name"]);
    check(burns.len() == 1, || format!("{} rows for Burns's", burns.len()))?;
    let got = lineage_pairs(&burns[0]["lineage"]);
    let want: BTreeSet<(String, i64)> = [("Agencies".to_string(), 2), ("ExternalTours".to_string(), 7)].into();
    check(got == want, || format!("lineage {got:?}"))?;

    let s = Session::new(NormalizeConfig::default()).map_err(|e| e.to_string())?;
    let q = s.query("projection.lt", PROJECTION_QUERY).map_err(|e| e.to_string())?;
    let nrc = s.analyze(Mode::Lineage, &q).map_err(|e| e.to_string())?;
    let field = lineage_field(&nrc).ok_or_else(|| format!("no lineage field in {}", tracelinks_core::syntax::print(&nrc.to_term())))?;
    let mut leaves = Vec::new();
    concat_leaves(field, &mut leaves);
    check(leaves.len() == 3 && leaves.iter().all(|l| *l == leaves[0]), || {
        format!("annotations {}", tracelinks_core::syntax::print(&field.to_term()))
    })?;
    let db = parse_db(PROJECTION_DB).map_err(|e| e.to_string())?;
    let v = eval(&nrc, &db).map_err(|e| e.to_string())?;
    let lists = lineage_lists(&v);
    check(lists.len() == 2 && lists.iter().all(|l| l.len() == 3 && l.iter().all(|a| *a == l[0])), || {
        format!("evaluated lineage {lists:?}")
    })?;
    Ok("Burns's lineage {(Agencies,2),(ExternalTours,7)}; projection query carries 3 identical annotations".into())
}

fn suite(r: Report, min_cases: usize, limit: Option<Duration>) -> Outcome {
    check(r.cases >= min_cases, || format!("only {} cases, need {min_cases}", r.cases))?;
    check(r.passed(), || r.line())?;
    if let Some(limit) = limit {
        check(r.elapsed < limit, || format!("took {:?}, limit {limit:?}", r.elapsed))?;
    }
    Ok(r.line().trim_start_matches("PASS ").to_string())
}

fn main() {
    let s = Session::new(NormalizeConfig::default()).expect("the standard library loads");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("boat-tours baseline", Box::new(baseline)),
        ("where-provenance", Box::new(where_provenance)),
        ("lineage", Box::new(lineage)),
        (
            "value roundtrip",
            Box::new(|| {
                suite(
                    props::value_roundtrip(&s, SEED, VALUE_ROUNDTRIP_CASES),
                    VALUE_ROUNDTRIP_CASES,
                    Some(VALUE_ROUNDTRIP_LIMIT),
                )
            }),
        ),
        (
            "preservation",
            Box::new(|| suite(props::preservation(&s, SEED, PRESERVATION_MIN_TRACES), PRESERVATION_MIN_TRACES, None)),
        ),
        ("progress", Box::new(|| suite(props::progress(&s, SEED, PROGRESS_MIN_TERMS), PROGRESS_MIN_TERMS, None))),
        (
            "NRC certification",
            Box::new(|| suite(props::nrc_certification(&s, SEED, NRC_MIN_TERMS), NRC_MIN_TERMS, None)),
        ),
        (
            "VALUE after TRACE identity",
            Box::new(|| {
                suite(
                    props::value_trace_identity(&s, SEED, VALUE_TRACE_MIN_CONSTRUCTORS),
                    VALUE_TRACE_MIN_CONSTRUCTORS,
                    None,
                )
            }),
        ),
        (
            "lineage soundness",
            Box::new(|| suite(props::lineage_soundness(&s, SEED, LINEAGE_MIN_INSTANCES), LINEAGE_MIN_INSTANCES, None)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
