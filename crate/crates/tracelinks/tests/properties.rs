//! Invariants of the pipeline checked on generated databases and queries.
//! Every case draws a generator seed, so a failing case is reproduced by
//! `generate(seed, budget)`.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracelinks::db::parse_db;
use tracelinks::gen::{generate, query_constructor, with_redexes, Budget};
use tracelinks::pipeline::Session;
use tracelinks::props;
use tracelinks_core::normalize::{dedup_concat, extract_nrc, normalize_traced, NrcTerm};
use tracelinks_core::runtime::{eval, Value};
use tracelinks_core::selftrace::trace_type;
use tracelinks_core::stdlib::Mode;
use tracelinks_core::syntax::{print, Term};
use tracelinks_core::typecheck::type_of;
use tracelinks_core::types::{normalize_constructor, types_equal};
use tracelinks_core::{Constructor, Context, Kind, NormalizeConfig, Type};

fn session() -> Session {
    Session::new(NormalizeConfig::default()).expect("the standard library loads")
}

fn query(s: &Session, seed: u64, budget: &Budget) -> tracelinks::pipeline::Query {
    let g = generate(seed, budget);
    s.query_of(g.query, g.ty).expect("generated queries have query types")
}

/// Runs one case of a named suite at `seed`.
fn suite_case(s: &Session, name: &str, seed: u64) -> Result<(), TestCaseError> {
    let r = props::run_suite(s, name, seed, 1).expect("known suite");
    prop_assert!(r.passed(), "{}", r.line());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_agreement(seed in any::<u64>()) {
        suite_case(&session(), "oracle-agreement", seed)?;
    }

    #[test]
    fn value_analysis_is_the_identity(seed in any::<u64>()) {
        suite_case(&session(), "value-roundtrip", seed)?;
    }

    #[test]
    fn where_provenance_projects_to_the_query(seed in any::<u64>()) {
        suite_case(&session(), "where-projection", seed)?;
    }

    #[test]
    fn lineage_annotations_are_witnesses(seed in any::<u64>()) {
        suite_case(&session(), "lineage-soundness", seed)?;
    }

    #[test]
    fn pipelines_normalize_to_nrc(seed in any::<u64>()) {
        suite_case(&session(), "nrc-certification", seed)?;
    }

    #[test]
    fn sqlite_agrees_with_the_evaluator(seed in any::<u64>()) {
        suite_case(&session(), "sql-agreement", seed)?;
    }

    #[test]
    fn terms_print_and_parse_back(seed in any::<u64>()) {
        suite_case(&session(), "print-parse-roundtrip", seed)?;
    }

    #[test]
    fn value_undoes_trace_on_constructors(seed in any::<u64>()) {
        suite_case(&session(), "value-trace-identity", seed)?;
    }

    #[test]
    fn normalization_steps_preserve_types(seed in any::<u64>()) {
        let r = props::preservation_generated(&session(), seed, 1);
        prop_assert!(r.passed(), "{}", r.line());
    }

    #[test]
    fn classification_matches_stepping(seed in any::<u64>()) {
        suite_case(&session(), "progress", seed)?;
    }

    /// The traced query has the traced type.
    #[test]
    fn traced_queries_have_traced_types(seed in any::<u64>()) {
        let s = session();
        let q = query(&s, seed, &Budget::full());
        let t = s.trace(&q).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let ctx = Context::new();
        let ty = type_of(&ctx, &t).map_err(|e| TestCaseError::fail(format!("{e}: {}", print(&t))))?;
        let want = Type::Embed(trace_type(&q.con));
        prop_assert!(types_equal(&ctx, &ty, &want).expect("comparable"), "{} is not {}", ty, want);
        prop_assert!(t.free_vars().is_empty());
    }

    /// Adding an unused binding, or swapping two independent ones, does not
    /// change the type of a comprehension body.
    #[test]
    fn typing_is_stable_under_weakening_and_exchange(seed in any::<u64>()) {
        let g = generate(seed, &Budget::full());
        let Term::For(x, src, body) = &g.query else { return Ok(()) };
        let Term::Table(_, schema) = &**src else { return Ok(()) };
        let row = Type::Record(schema.clone());
        let base = Context::new().with_term(x, row.clone());
        let ty = type_of(&base, body).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let weakened = Context::new().with_type("unused_a", Kind::Type).with_term("unused_x", Type::Bool).with_term(x, row.clone());
        let w = type_of(&weakened, body);
        prop_assert_eq!(w.as_ref(), Ok(&ty));
        let swapped = Context::new().with_term(x, row).with_term("unused_x", Type::Bool);
        let e = type_of(&swapped, body);
        prop_assert_eq!(e.as_ref(), Ok(&ty));
    }

    /// Any two terms along a normalization trace that are already NRC
    /// evaluate to the same value.
    #[test]
    fn single_steps_keep_the_value(seed in any::<u64>()) {
        let g = generate(seed, &Budget::flat());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = with_redexes(&mut rng, g.query.clone(), &g.ty);
        let expected = eval(&extract_nrc(&g.query, &Context::new()).expect("generated queries are NRC"), &g.db)
            .expect("generated queries evaluate");
        let mut values = Vec::new();
        normalize_traced(&m, &NormalizeConfig::default(), |t| {
            if let Ok(nrc) = extract_nrc(t, &Context::new()) {
                values.push((print(t), eval(&nrc, &g.db)));
            }
        })
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(!values.is_empty());
        for (t, v) in values {
            prop_assert_eq!(v.as_ref(), Ok(&expected), "{}", t);
        }
    }

    /// The type-level analyses are total on query types.
    #[test]
    fn analysis_types_normalize(seed in any::<u64>()) {
        let s = session();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = query_constructor(&mut rng, 4);
        for f in ["TRACE", "VALUE", "WHERE", "LINEAGE"] {
            let app = Constructor::app(s.lib.constructor(f).expect("builtin").clone(), c.clone());
            let nf = normalize_constructor(&app).map_err(|e| TestCaseError::fail(format!("{f}: {e}")))?;
            prop_assert!(nf.free_vars().is_empty());
        }
    }

    /// Removing repeated branches of a union changes neither the set of
    /// result rows nor the lineage annotations each one carries.
    #[test]
    fn dedup_keeps_lineage_sets(seed in any::<u64>()) {
        let s = session();
        let g = generate(seed, &Budget::flat());
        let q = s.query_of(g.query.clone(), g.ty.clone()).expect("query type");
        let nrc = s.analyze(Mode::Lineage, &q).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let deduped = dedup_concat(&nrc);
        prop_assert_eq!(dedup_concat(&deduped), deduped.clone());
        let a = lineage_sets(&eval(&nrc, &g.db).expect("evaluates"));
        let b = lineage_sets(&eval(&deduped, &g.db).expect("evaluates"));
        prop_assert_eq!(a, b);
    }
}

fn lineage_sets(v: &Value) -> BTreeSet<(Value, BTreeSet<Value>)> {
    v.as_list()
        .unwrap_or_default()
        .iter()
        .map(|r| {
            let data = r.field("data").cloned().expect("data field");
            let ann = r.field("lineage").and_then(Value::as_list).unwrap_or_default().iter().cloned().collect();
            (data, ann)
        })
        .collect()
}

/// Without deduplication, projecting one column out of a table with `n`
/// columns besides `oid` repeats the row's annotation `n + 1` times.
#[test]
fn lineage_duplication_counts() {
    let s = session();
    let columns = ["a", "b", "c"];
    for n in 1..=3 {
        let cols = &columns[..n];
        let schema: Vec<String> = cols.iter().map(|c| format!("{c} : Int")).collect();
        let src = format!("for (x <- table \"xs\" {{oid : Int, {}}}) [x.a]", schema.join(", "));
        let q = s.query("dup.lt", &src).expect("typechecks");
        let nrc = s.analyze(Mode::Lineage, &q).expect("analyzes");
        let row: Vec<String> = cols.iter().map(|c| format!("\"{c}\": 5")).collect();
        let db = parse_db(&format!(
            "{{\"xs\": {{\"columns\": {{\"oid\": \"int\", {}}}, \"rows\": [{{\"oid\": 9, {}}}]}}}}",
            cols.iter().map(|c| format!("\"{c}\": \"int\"")).collect::<Vec<_>>().join(", "),
            row.join(", ")
        ))
        .expect("database");
        let v = eval(&nrc, &db).expect("evaluates");
        let rows = v.as_list().expect("list");
        assert_eq!(rows.len(), 1);
        let ann = rows[0].field("lineage").and_then(Value::as_list).expect("lineage list");
        assert_eq!(ann.len(), n + 1, "n = {n}: {}", print(&nrc.to_term()));
        assert!(ann.iter().all(|a| *a == ann[0]));
        assert_eq!(lineage_nrc_leaves(&nrc), n + 1);
    }
}

/// Number of nonempty lists concatenated in the lineage field of a
/// single-comprehension lineage query.
fn lineage_nrc_leaves(m: &NrcTerm) -> usize {
    fn leaves(m: &NrcTerm) -> usize {
        match m {
            NrcTerm::Concat(a, b) => leaves(a) + leaves(b),
            NrcTerm::Empty => 0,
            _ => 1,
        }
    }
    match m {
        NrcTerm::For(_, _, body) => lineage_nrc_leaves(body),
        NrcTerm::Singleton(r) => match &**r {
            NrcTerm::Record(fs) => fs.iter().find(|(l, _)| &**l == "lineage").map_or(0, |(_, t)| leaves(t)),
            _ => 0,
        },
        _ => 0,
    }
}
