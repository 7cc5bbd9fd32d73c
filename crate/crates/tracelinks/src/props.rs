//! Property suites over generated inputs. Each suite runs a fixed number of
//! cases from a seed and reports every failing case.
//!
//! The suites back both the `selftest` subcommand and the acceptance
//! tests.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracelinks_core::normalize::{self, classify, extract_nrc, non_nrc_nodes, normalize_traced, step};
use tracelinks_core::runtime::{eval, Database, Value};
use tracelinks_core::stdlib::Mode;
use tracelinks_core::syntax::{alpha_equal, name, parse, print, Term, Type};
use tracelinks_core::typecheck::type_of;
use tracelinks_core::types::{constructors_equal, types_equal, Context};
use tracelinks_core::{Constructor, Kind};

use crate::gen::{self, generate, with_redexes, Budget, Generated};
use crate::pipeline::{Query, Session};
use crate::sqlite::check_agreement;

/// The result of one property suite.
#[derive(Clone, Debug)]
pub struct Report {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// One summary line, `PASS name: ...` or `FAIL name: ...`.
    pub fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let mut s = format!(
            "{status} {}: {} cases, {} failures, {:.2}s",
            self.name,
            self.cases,
            self.failures.len(),
            self.elapsed.as_secs_f64()
        );
        if let Some(first) = self.failures.first() {
            s.push_str(&format!("; first: {first}"));
        }
        s
    }
}

struct Runner {
    name: &'static str,
    start: Instant,
    cases: usize,
    failures: Vec<String>,
}

impl Runner {
    fn new(name: &'static str) -> Runner {
        Runner { name, start: Instant::now(), cases: 0, failures: Vec::new() }
    }

    fn case(&mut self, label: impl FnOnce() -> String, r: Result<(), String>) {
        self.cases += 1;
        if let Err(e) = r {
            self.failures.push(format!("{}: {e}", label()));
        }
    }

    fn finish(self) -> Report {
        Report { name: self.name, cases: self.cases, failures: self.failures, elapsed: self.start.elapsed() }
    }
}

fn query(g: &Generated) -> Query {
    Query { term: g.query.clone(), ty: g.ty.clone(), con: g.con.clone() }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// The boat-tours query used by several suites.
pub const BOATTOURS: &str = include_str!("../examples/boattours.lt");

/// `eval(analyze(value, q), db) = eval(normalize(q), db)`.
pub fn value_roundtrip(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("value-roundtrip");
    for i in 0..n as u64 {
        let g = generate(seed.wrapping_add(i), &Budget::full());
        let q = query(&g);
        let res = (|| {
            let a = eval(&s.analyze(Mode::Value, &q).map_err(err)?, &g.db).map_err(err)?;
            let b = eval(&s.to_nrc(&q).map_err(err)?, &g.db).map_err(err)?;
            if a == b {
                Ok(())
            } else {
                Err(format!("{a} != {b}"))
            }
        })();
        r.case(|| format!("seed {}", seed.wrapping_add(i)), res);
    }
    r.finish()
}

/// `eval(normalize(q), db) = eval(q, db)` on generated NRC queries.
pub fn oracle_agreement(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("oracle-agreement");
    for i in 0..n as u64 {
        let g = generate(seed.wrapping_add(i), &Budget::full());
        let res = (|| {
            let direct = extract_nrc(&g.query, &Context::new()).map_err(err)?;
            let a = eval(&direct, &g.db).map_err(err)?;
            let b = eval(&s.to_nrc(&query(&g)).map_err(err)?, &g.db).map_err(err)?;
            if a == b {
                Ok(())
            } else {
                Err(format!("{a} != {b}"))
            }
        })();
        r.case(|| format!("seed {}", seed.wrapping_add(i)), res);
    }
    r.finish()
}

/// Removes where-provenance annotations from a value of type
/// `WHERE c`, giving a value of type `c`.
pub fn strip_where(v: &Value, c: &Constructor) -> Option<Value> {
    match (c, v) {
        (Constructor::ListC(e), Value::List(xs)) => {
            Some(Value::List(xs.iter().map(|x| strip_where(x, e)).collect::<Option<Vec<_>>>()?))
        }
        (Constructor::RecordC(row), Value::Record(fs)) => {
            let (fields, _) = row.row_spine();
            let mut out = Vec::new();
            for (l, fc) in fields {
                out.push((l.clone(), strip_where(fs.get(l)?, fc)?));
            }
            Some(Value::record(out))
        }
        (_, Value::Record(_)) => v.field("val").cloned(),
        _ => None,
    }
}

/// Stripping annotations from the where-provenance result gives the plain
/// result.
pub fn where_projection(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("where-projection");
    for i in 0..n as u64 {
        let g = generate(seed.wrapping_add(i), &Budget::full());
        let q = query(&g);
        let res = (|| {
            let w = eval(&s.analyze(Mode::Where, &q).map_err(err)?, &g.db).map_err(err)?;
            let plain = eval(&s.to_nrc(&q).map_err(err)?, &g.db).map_err(err)?;
            match strip_where(&w, &g.con) {
                Some(v) if v == plain => Ok(()),
                Some(v) => Err(format!("{v} != {plain}")),
                None => Err(format!("unexpected shape {w}")),
            }
        })();
        r.case(|| format!("seed {}", seed.wrapping_add(i)), res);
    }
    r.finish()
}

/// A generated instance with at most `max_rows` rows in total.
fn small_instance(seed: u64, max_rows: usize) -> Generated {
    let mut g = generate(seed, &Budget::tiny());
    let mut kept = 0;
    g.db = g.db.filter_rows(|_, _| {
        kept += 1;
        kept <= max_rows
    });
    g
}

fn all_rows(db: &Database) -> Vec<(String, i64)> {
    let mut out = Vec::new();
    for (n, t) in db.tables() {
        for row in &t.rows {
            if let Some(Value::Int(oid)) = row.get("oid") {
                out.push((n.to_string(), *oid));
            }
        }
    }
    out
}

/// Every lineage annotation is a sufficient witness: any database that
/// keeps all annotated rows still produces the annotated element. Checked
/// by enumerating all row subsets of databases with at most five rows.
pub fn lineage_soundness(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("lineage-soundness");
    for i in 0..n as u64 {
        let g = small_instance(seed.wrapping_add(i), 5);
        let q = query(&g);
        let res = (|| {
            let plain = s.to_nrc(&q).map_err(err)?;
            let lin = eval(&s.analyze(Mode::Lineage, &q).map_err(err)?, &g.db).map_err(err)?;
            let rows = all_rows(&g.db);
            let subsets: Vec<Database> = (0u32..1 << rows.len())
                .map(|mask| {
                    let keep: BTreeSet<(String, i64)> =
                        rows.iter().enumerate().filter(|(j, _)| mask & (1 << j) != 0).map(|(_, r)| r.clone()).collect();
                    g.db.filter_rows(|t, oid| keep.contains(&(t.to_string(), oid)))
                })
                .collect();
            let results: Vec<Value> =
                subsets.iter().map(|d| eval(&plain, d)).collect::<Result<_, _>>().map_err(err)?;
            for elem in lin.as_list().ok_or("lineage result is not a list")? {
                let data = elem.field("data").ok_or("missing data")?;
                let mut witness = BTreeSet::new();
                for a in elem.field("lineage").and_then(Value::as_list).ok_or("missing lineage")? {
                    match (a.field("table"), a.field("row")) {
                        (Some(Value::Str(t)), Some(Value::Int(row))) => {
                            let t = rows
                                .iter()
                                .find(|(n, o)| n.eq_ignore_ascii_case(t) && o == row)
                                .ok_or_else(|| format!("annotation ({t}, {row}) names no row"))?;
                            witness.insert(t.clone());
                        }
                        _ => return Err(format!("malformed annotation {a}")),
                    }
                }
                for (d, res) in subsets.iter().zip(&results) {
                    let present = all_rows(d).into_iter().collect::<BTreeSet<_>>();
                    if witness.is_subset(&present) && !res.as_list().is_some_and(|xs| xs.contains(data)) {
                        return Err(format!("{data} missing from the result on rows {present:?}"));
                    }
                }
            }
            Ok(())
        })();
        r.case(|| format!("seed {}", seed.wrapping_add(i)), res);
    }
    r.finish()
}

/// Pipeline terms `f @(TRACE C) (trace q)` for the three analyses.
fn pipeline_term(s: &Session, mode: Mode, q: &Query) -> Result<Term, String> {
    let f = s.lib.term(mode.function_name()).map_err(err)?.clone();
    s.lib.compose(&f, &q.term, &q.con, &s.cfg).map_err(err)
}

/// The boat-tours query, typechecked.
pub fn boattours(s: &Session) -> Query {
    s.query("boattours.lt", BOATTOURS).expect("the bundled example typechecks")
}

/// Checks that every step of the normalization trace of `m` keeps its type.
fn preserves(s: &Session, ctx: &Context, m: &Term) -> Result<usize, String> {
    let ty = type_of(ctx, m).map_err(err)?;
    let mut steps = 0;
    let mut failure = None;
    normalize_traced(m, &s.cfg, |t| {
        steps += 1;
        if failure.is_some() {
            return;
        }
        match type_of(ctx, t) {
            Ok(u) if types_equal(ctx, &ty, &u).unwrap_or(false) => {}
            Ok(u) => failure = Some(format!("step {steps}: type {u} differs from {ty} in {}", print(t))),
            Err(e) => failure = Some(format!("step {steps}: {e} in {}", print(t))),
        }
    })
    .map_err(err)?;
    failure.map_or(Ok(steps), Err)
}

/// Every single normalization step preserves the type. Runs the three
/// analysis pipelines on the boat-tours query and `n` generated queries
/// wrapped in redexes, every eighth of them inside an analysis pipeline.
pub fn preservation(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("preservation");
    let bt = boattours(s);
    for mode in [Mode::Value, Mode::Where, Mode::Lineage] {
        let res = pipeline_term(s, mode, &bt).and_then(|m| preserves(s, &Context::new(), &m).map(|_| ()));
        r.case(|| format!("boattours {mode:?}"), res);
    }
    preserve_generated(&mut r, s, seed, n);
    r.finish()
}

/// The generated part of [`preservation`], without the boat-tours
/// pipelines.
pub fn preservation_generated(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("preservation");
    preserve_generated(&mut r, s, seed, n);
    r.finish()
}

fn preserve_generated(r: &mut Runner, s: &Session, seed: u64, n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n as u64 {
        // Pipelines multiply the trace length, so they get smaller queries.
        let budget = if i % 8 == 7 { Budget::tiny() } else { Budget::flat() };
        let g = generate(seed.wrapping_add(i), &budget);
        let res = if i % 8 == 7 {
            let mode = [Mode::Value, Mode::Where, Mode::Lineage][(i / 8 % 3) as usize];
            pipeline_term(s, mode, &query(&g))
        } else {
            Ok(with_redexes(&mut rng, g.query.clone(), &g.ty))
        }
        .and_then(|m| preserves(s, &Context::new(), &m).map(|_| ()));
        r.case(|| format!("seed {}", seed.wrapping_add(i)), res);
    }
}

/// A constructor mentioning the type variable `a` and the row variable
/// `r`, for building open terms.
fn open_constructor(rng: &mut impl Rng, depth: usize) -> Constructor {
    match rng.random_range(0..6) {
        0 => Constructor::var("a"),
        1 if depth > 0 => Constructor::list(open_constructor(rng, depth - 1)),
        2 if depth > 0 => Constructor::record(Constructor::row_with_tail(
            [(name("k"), open_constructor(rng, depth - 1))],
            Constructor::var("r"),
        )),
        3 => Constructor::record(Constructor::var("r")),
        _ => gen::query_constructor(rng, depth),
    }
}

/// Well-typed terms for the progress suite, with the context typing
/// their free variables: intermediate terms of closed pipelines and of
/// open analysis applications stuck on variables.
fn progress_population(s: &Session, seed: u64, want: usize) -> Vec<(Context, Term)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let fns = ["value", "wherep", "lineage", "linnotation", "wherep_tr", "lineage_tr", "linnotation_tr"];
    let mut i = 0u64;
    while out.len() < want {
        i += 1;
        let (ctx, m) = if i % 3 == 0 {
            let g = generate(seed.wrapping_add(i), &Budget::tiny());
            let mode = [Mode::Value, Mode::Where, Mode::Lineage][(i % 9 / 3) as usize];
            match pipeline_term(s, mode, &query(&g)) {
                Ok(m) => (Context::new(), m),
                Err(_) => continue,
            }
        } else {
            let f = fns[rng.random_range(0..fns.len())];
            let c = open_constructor(&mut rng, 2);
            let ctx = Context::new().with_type("a", Kind::Type).with_type("r", Kind::Row);
            let Ok(fterm) = s.lib.term(f) else { continue };
            let Ok(Type::Forall(_, _, body)) = type_of(&ctx, fterm) else { continue };
            let Type::Fun(dom, _) = *body else { continue };
            let dom = tracelinks_core::syntax::subst_con_in_type(&dom, &name("a"), &c);
            let ctx = ctx.with_term("x", dom);
            (ctx, Term::app(Term::tyapp(fterm.clone(), c), Term::var("x")))
        };
        if type_of(&ctx, &m).is_err() {
            continue;
        }
        // Sample points along the trace, always including the final term.
        let cfg = normalize::NormalizeConfig { fuel: 5_000, ..s.cfg.clone() };
        let stride = rng.random_range(5..40);
        let mut j = 0;
        let last = normalize_traced(&m, &cfg, |t| {
            if j % stride == 0 {
                out.push((ctx.clone(), t.clone()));
            }
            j += 1;
        });
        if let Ok(t) = last {
            out.push((ctx, t));
        }
    }
    out.truncate(want);
    out
}

/// Populations at least this large must exercise every eliminator.
pub const PROGRESS_COVERAGE_MIN: usize = 100;

/// `classify(t)` is `NotNormal` exactly when `step(t)` exists.
pub fn progress(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("progress");
    let mut kinds = BTreeSet::new();
    for (j, (ctx, t)) in progress_population(s, seed, n).into_iter().enumerate() {
        for node in ["typecase", "tracecase", "rmap", "rfold"] {
            if t.any(&|u: &Term| u.node_name() == node) {
                kinds.insert(node);
            }
        }
        let res = (|| {
            type_of(&ctx, &t).map_err(err)?;
            let class = classify(&t);
            let stepped = step(&t);
            if class.is_normal() == stepped.is_none() {
                Ok(())
            } else {
                Err(format!("classify says {class:?} but step gives {:?} for {}", stepped.map(|u| print(&u)), print(&t)))
            }
        })();
        r.case(|| format!("term {j}"), res);
    }
    // Small smoke runs are too short to be expected to reach every eliminator.
    for node in ["typecase", "tracecase", "rmap", "rfold"] {
        if n >= PROGRESS_COVERAGE_MIN && !kinds.contains(node) {
            r.failures.push(format!("population contains no {node} terms"));
        }
    }
    r.finish()
}

/// Normal forms of closed pipeline terms are NRC queries.
pub fn nrc_certification(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("nrc-certification");
    for i in 0..n as u64 {
        let g = generate(seed.wrapping_add(i), &Budget::full());
        let mode = [Mode::Value, Mode::Where, Mode::Lineage][(i % 3) as usize];
        let res = (|| {
            let m = pipeline_term(s, mode, &query(&g))?;
            let nf = s.normalize(&m).map_err(err)?;
            let nrc = extract_nrc(&nf, &Context::new()).map_err(err)?;
            let t = nrc.to_term();
            let bad = non_nrc_nodes(&t);
            if !bad.is_empty() {
                return Err(format!("non-NRC nodes {bad:?}"));
            }
            if t.any(&|u: &Term| u.is_trace_constructor()) {
                return Err("trace constructor left".into());
            }
            Ok(())
        })();
        r.case(|| format!("seed {} {mode:?}", seed.wrapping_add(i)), res);
    }
    r.finish()
}

/// `VALUE (TRACE C) = C` for query-type constructors.
pub fn value_trace_identity(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("value-trace-identity");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (Ok(value), Ok(trace)) = (s.lib.constructor("VALUE"), s.lib.constructor("TRACE")) else {
        r.failures.push("stdlib lacks VALUE or TRACE".into());
        return r.finish();
    };
    for j in 0..n {
        let c = gen::query_constructor(&mut rng, 3);
        let lhs = Constructor::app(value.clone(), Constructor::app(trace.clone(), c.clone()));
        let res = match constructors_equal(&Context::new(), &lhs, &c, &Kind::Type) {
            Ok(true) => Ok(()),
            Ok(false) => Err(format!("VALUE (TRACE {c}) differs from {c}")),
            Err(e) => Err(e.to_string()),
        };
        r.case(|| format!("constructor {j}"), res);
    }
    r.finish()
}

/// SQL emitted for flat queries and their where-provenance returns the
/// same rows on SQLite as the reference evaluator.
pub fn sql_agreement(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("sql-agreement");
    for i in 0..n as u64 {
        let g = generate(seed.wrapping_add(i), &Budget::flat());
        let q = query(&g);
        for mode in [None, Some(Mode::Where)] {
            let res = (|| {
                let (_, nrc, ty) = s.sql(mode, &q).map_err(err)?;
                let a = check_agreement(&nrc, &ty, &g.db).map_err(err)?;
                if a.agrees() {
                    Ok(())
                } else {
                    Err(format!("{}: sqlite {:?} vs eval {:?}", a.sql, a.engine, a.reference))
                }
            })();
            r.case(|| format!("seed {} {mode:?}", seed.wrapping_add(i)), res);
        }
    }
    r.finish()
}

/// `parse(print(t))` is alpha-equal to `t` for generated queries and
/// pipeline terms.
pub fn print_parse_roundtrip(s: &Session, seed: u64, n: usize) -> Report {
    let mut r = Runner::new("print-parse-roundtrip");
    for i in 0..n as u64 {
        let g = generate(seed.wrapping_add(i), &Budget::full());
        let terms = if i % 5 == 0 {
            vec![g.query.clone(), pipeline_term(s, Mode::Where, &query(&g)).unwrap_or(g.query.clone())]
        } else {
            vec![g.query.clone()]
        };
        for t in terms {
            let text = print(&t);
            let res = match parse(&text) {
                Ok(p) if alpha_equal(&p.main, &t) => Ok(()),
                Ok(p) => Err(format!("reparsed as {}", print(&p.main))),
                Err(e) => Err(format!("{e} in {text}")),
            };
            r.case(|| format!("seed {}", seed.wrapping_add(i)), res);
        }
    }
    r.finish()
}

/// The label of every suite, in run order, with its default case count.
pub const SUITES: &[(&str, usize)] = &[
    ("value-roundtrip", 500),
    ("oracle-agreement", 500),
    ("where-projection", 200),
    ("lineage-soundness", 100),
    ("preservation", 200),
    ("progress", 1000),
    ("nrc-certification", 500),
    ("value-trace-identity", 200),
    ("sql-agreement", 200),
    ("print-parse-roundtrip", 200),
];

/// Runs the suite called `name` with `n` cases.
pub fn run_suite(s: &Session, name: &str, seed: u64, n: usize) -> Option<Report> {
    Some(match name {
        "value-roundtrip" => value_roundtrip(s, seed, n),
        "oracle-agreement" => oracle_agreement(s, seed, n),
        "where-projection" => where_projection(s, seed, n),
        "lineage-soundness" => lineage_soundness(s, seed, n),
        "preservation" => preservation(s, seed, n),
        "progress" => progress(s, seed, n),
        "nrc-certification" => nrc_certification(s, seed, n),
        "value-trace-identity" => value_trace_identity(s, seed, n),
        "sql-agreement" => sql_agreement(s, seed, n),
        "print-parse-roundtrip" => print_parse_roundtrip(s, seed, n),
        _ => return None,
    })
}
