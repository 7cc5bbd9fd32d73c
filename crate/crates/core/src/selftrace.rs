//! The self-tracing rewrite of query terms and the `TRACE` type function.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::syntax::{fresh_name, name, print, subst_term, Constructor, Kind, Name, Term, Type};
use crate::typecheck::{type_of, TypingError};
use crate::types::{canon, canonical_constructor, to_constructor, Context, TypeError};

/// Errors of the self-tracing rewrite.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SelfTraceError {
    #[error("self-tracing expects a query in normal form; found {0}")]
    NotInNormalForm(String),
    #[error("not a query type: {0}")]
    NotAQueryType(String),
    #[error("dist: `{0}` is not the image of a query type under TRACE")]
    ShapeMismatch(String),
    #[error(transparent)]
    Typing(#[from] TypingError),
    #[error(transparent)]
    Kind(#[from] TypeError),
}

type Result<T> = core::result::Result<T, SelfTraceError>;

/// `λa. Typerec a (Trace Bool, Trace Int, Trace String, λb c. [c],
/// λr s. Record s, λb t. t)`.
pub fn trace_constructor() -> Constructor {
    use Constructor as C;
    let a = C::var("a");
    C::lam(
        "a",
        Kind::Type,
        C::typerec(
            a,
            [
                C::trace(C::BoolC),
                C::trace(C::IntC),
                C::trace(C::StringC),
                C::lam("b", Kind::Type, C::lam("c", Kind::Type, C::list(C::var("c")))),
                C::lam("r", Kind::Row, C::lam("s", Kind::Row, C::record(C::var("s")))),
                C::lam("b", Kind::Type, C::lam("t", Kind::Type, C::var("t"))),
            ],
        ),
    )
}

/// `TRACE c`, unreduced.
pub fn trace_type(c: &Constructor) -> Constructor {
    Constructor::app(trace_constructor(), c.clone())
}

/// Name of the hole marker. It cannot be written in source text, so it
/// never clashes with a user variable.
const HOLE: &str = "<hole>";

/// A term with exactly one hole.
#[derive(Clone, Debug, PartialEq)]
pub struct HoleExpr {
    term: Term,
}

impl HoleExpr {
    /// The hole itself, to be placed inside a larger term.
    pub fn hole() -> Term {
        Term::var(HOLE)
    }

    /// Wraps `term`, which must contain exactly one [`HoleExpr::hole`].
    pub fn new(term: Term) -> Option<HoleExpr> {
        let mut count = 0;
        count_holes(&term, &mut count);
        (count == 1).then_some(HoleExpr { term })
    }

    /// `If {cond = cond, out = H}`.
    pub fn if_(cond: Term) -> HoleExpr {
        HoleExpr { term: Term::TrIf(Arc::new(Term::record([(name("cond"), cond), (name("out"), Self::hole())]))) }
    }

    /// `For d {in = input, out = H}`.
    pub fn for_(d: Constructor, input: Term) -> HoleExpr {
        HoleExpr {
            term: Term::TrFor(d, Arc::new(Term::record([(name("in"), input), (name("out"), Self::hole())]))),
        }
    }

    pub fn fill(&self, t: &Term) -> Term {
        (*subst_term(&Arc::new(self.term.clone()), HOLE, t)).clone()
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut fv = self.term.free_vars();
        fv.remove(HOLE);
        fv
    }
}

fn count_holes(t: &Term, n: &mut usize) {
    if matches!(t, Term::Var(x) if &**x == HOLE) {
        *n += 1;
    }
    t.for_each_child(|c| count_holes(c, n));
}

/// Pushes `k` down to every trace leaf of `m`, following the shape of the
/// normalized constructor `c` (a `TRACE` image).
pub fn dist(c: &Constructor, k: &HoleExpr, m: &Term) -> Result<Term> {
    match c {
        Constructor::TraceC(_) => Ok(k.fill(m)),
        // `for (x <- []) [..]` only reduces to `[]`, and its binder would
        // have no known type.
        Constructor::ListC(_) if *m == Term::EmptyList => Ok(Term::EmptyList),
        Constructor::ListC(inner) => {
            let mut avoid = k.free_vars();
            avoid.extend(m.free_vars());
            let x = fresh_name("x", &avoid);
            let body = dist(inner, k, &Term::Var(x.clone()))?;
            Ok(Term::For(x, Arc::new(m.clone()), Arc::new(Term::singleton(body))))
        }
        Constructor::RecordC(row) => {
            let (fields, tail) = row.row_spine();
            if *tail != Constructor::RowEmpty {
                return Err(SelfTraceError::ShapeMismatch(print_con(c)));
            }
            let mut out = Vec::new();
            for (l, d) in fields {
                out.push((l.clone(), dist(d, k, &Term::Project(Arc::new(m.clone()), l.clone()))?));
            }
            Ok(Term::record(out))
        }
        _ => Err(SelfTraceError::ShapeMismatch(print_con(c))),
    }
}

fn print_con(c: &Constructor) -> String {
    crate::syntax::print_con(c)
}

/// The query type of `m` under `ctx` as a constructor. The element type
/// of an empty list defaults to `Int`.
fn query_constructor(ctx: &Context, m: &Term) -> Result<Constructor> {
    let t = canon(&type_of(ctx, m)?)?;
    let t = default_unknown(&t);
    match to_constructor(&t) {
        Some(c) if crate::typecheck::is_query_type(&t) => Ok(c),
        _ => Err(SelfTraceError::NotAQueryType(alloc::format!("`{}` has type {t}", print(m)))),
    }
}

fn default_unknown(t: &Type) -> Type {
    match t {
        Type::Unknown => Type::Int,
        Type::List(a) => Type::list(default_unknown(a)),
        Type::Record(r) => Type::Record(crate::syntax::RowType {
            fields: r.fields.iter().map(|(l, t)| (l.clone(), default_unknown(t))).collect(),
        }),
        other => other.clone(),
    }
}

/// Rewrites the closed normal query `m : T(at)` so that it computes its
/// own trace, of type `T(TRACE at)`.
pub fn self_trace(m: &Term, at: &Constructor) -> Result<Term> {
    let found = query_constructor(&Context::new(), m)?;
    if !crate::types::con_equiv(&found, at)? {
        return Err(SelfTraceError::NotAQueryType(alloc::format!(
            "query has type {} but {} was expected",
            print_con(&found),
            print_con(at)
        )));
    }
    let stdlib = crate::stdlib::Stdlib::load()
        .map_err(|e| SelfTraceError::NotInNormalForm(alloc::format!("stdlib unavailable: {e}")))?;
    let value_bool = stdlib
        .value_at(&trace_bool())
        .map_err(|e| SelfTraceError::NotInNormalForm(alloc::format!("stdlib unavailable: {e}")))?;
    self_trace_with(&Context::new(), m, &value_bool)
}

/// `Trace Bool`, the type of traced conditions.
pub fn trace_bool() -> Constructor {
    Constructor::trace(Constructor::BoolC)
}

/// Self-tracing of a query whose free variables are typed by `ctx`.
/// `value_bool` is the closed term `value @(Trace Bool)` used to decide
/// traced conditions.
pub fn self_trace_with(ctx: &Context, m: &Term, value_bool: &Term) -> Result<Term> {
    Tracer { ctx: ctx.clone(), value_bool: value_bool.clone() }.tr(m)
}

struct Tracer {
    ctx: Context,
    value_bool: Term,
}

impl Tracer {
    fn tr(&mut self, m: &Term) -> Result<Term> {
        let a = |t: Term| Arc::new(t);
        Ok(match m {
            Term::Var(_) => m.clone(),
            Term::Const(_) => Term::TrLit(a(m.clone())),
            Term::Plus(l, r) => {
                Term::TrOpPlus(a(Term::record([(name("l"), self.tr(l)?), (name("r"), self.tr(r)?)])))
            }
            Term::Eq(l, r) => {
                let c = query_constructor(&self.ctx, r)?;
                Term::TrOpEq(c, a(Term::record([(name("l"), self.tr(l)?), (name("r"), self.tr(r)?)])))
            }
            Term::EmptyRecord => Term::EmptyRecord,
            Term::RecordExt(l, h, t) => Term::RecordExt(l.clone(), a(self.tr(h)?), a(self.tr(t)?)),
            Term::Project(r, l) => Term::Project(a(self.tr(r)?), l.clone()),
            Term::EmptyList => Term::EmptyList,
            Term::Singleton(x) => Term::Singleton(a(self.tr(x)?)),
            Term::Concat(l, r) => Term::Concat(a(self.tr(l)?), a(self.tr(r)?)),
            Term::Table(..) => table_trace(m, name("y")),
            Term::For(x, src, body) => {
                let ts = query_constructor(&self.ctx, src)?;
                let elem = match ts {
                    Constructor::ListC(e) => *e,
                    other => return Err(SelfTraceError::NotAQueryType(print_con(&other))),
                };
                let whole = query_constructor(&self.ctx, m)?;
                // Rows of a table are named after the binder ranging over
                // them, so that names survive normalization.
                let tsrc = match &**src {
                    Term::Table(..) => table_trace(src, x.clone()),
                    _ => self.tr(src)?,
                };
                let n = self.ctx.len();
                self.ctx.push_term(x.clone(), Type::Embed(elem.clone()));
                let tbody = self.tr(body);
                self.ctx.truncate(n);
                let tbody = tbody?;
                let shape = canonical_constructor(&trace_type(&whole))?;
                let k = HoleExpr::for_(elem, Term::Var(x.clone()));
                Term::For(x.clone(), a(tsrc), a(dist(&shape, &k, &tbody)?))
            }
            Term::If(c, t, e) => {
                let whole = query_constructor(&self.ctx, m)?;
                let shape = canonical_constructor(&trace_type(&whole))?;
                let tc = self.tr(c)?;
                let k = HoleExpr::if_(tc.clone());
                let cond = Term::App(a(self.value_bool.clone()), a(tc));
                Term::If(a(cond), a(dist(&shape, &k, &self.tr(t)?)?), a(dist(&shape, &k, &self.tr(e)?)?))
            }
            other => return Err(SelfTraceError::NotInNormalForm(alloc::format!("{} node", other.node_name()))),
        })
    }
}

/// `for (y <- table n s) [{l = Cell {..}, .., oid = Lit y.oid}]`.
fn table_trace(table: &Term, y: Name) -> Term {
    let Term::Table(n, schema) = table else { unreachable!("table_trace needs a table") };
    let a = Arc::new;
    let yv = || Arc::new(Term::Var(y.clone()));
    let mut fields = Vec::new();
    for (l, _) in &schema.fields {
        let proj = Term::Project(yv(), l.clone());
        let leaf = if &**l == "oid" {
            Term::TrLit(a(proj))
        } else {
            Term::TrCell(a(Term::record([
                (name("col"), Term::Const(crate::syntax::Literal::Str(String::from(&**l)))),
                (name("row"), Term::Project(yv(), name("oid"))),
                (name("tbl"), Term::Const(crate::syntax::Literal::Str(String::from(&**n)))),
                (name("val"), proj),
            ])))
        };
        fields.push((l.clone(), leaf));
    }
    Term::For(y, a(table.clone()), a(Term::singleton(Term::record(fields))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_equal, parse, parse_constructor, Env};
    use crate::types::normalize_constructor;

    fn con(s: &str) -> Constructor {
        parse_constructor(s, &Env::default()).unwrap()
    }

    fn main_of(s: &str) -> Term {
        parse(s).unwrap().main
    }

    #[test]
    fn trace_type_examples() {
        let n = |c: &str| normalize_constructor(&trace_type(&parse_constructor(c, &Env::default()).unwrap())).unwrap();
        assert_eq!(n("Int"), Constructor::trace(Constructor::IntC));
        assert_eq!(
            n("[{name : String, phone : String}]"),
            parse_constructor("[{name : Trace String, phone : Trace String}]", &Env::default()).unwrap()
        );
        assert!(matches!(n("a"), Constructor::Typerec(..)));
    }

    #[test]
    fn plus_and_constants() {
        let t = self_trace(&main_of("2 + 3"), &Constructor::IntC).unwrap();
        assert!(alpha_equal(&t, &main_of("OpPlus {l = Lit 2, r = Lit 3}")));
        let t = self_trace(&main_of("[{answer = 42}]"), &con("[{answer : Int}]")).unwrap();
        assert!(alpha_equal(&t, &main_of("[{answer = Lit 42}]")));
    }

    #[test]
    fn dist_cases() {
        let k = HoleExpr::if_(main_of("Lit true"));
        let leaf = dist(&Constructor::trace(Constructor::IntC), &k, &main_of("Lit 1")).unwrap();
        assert!(alpha_equal(&leaf, &main_of("If {cond = Lit true, out = Lit 1}")));
        let rec = parse_constructor("{a : Trace Int}", &Env::default()).unwrap();
        let r = dist(&rec, &k, &Term::var("r")).unwrap();
        assert!(alpha_equal(&r, &main_of("{a = If {cond = Lit true, out = r.a}}")));
        let list = parse_constructor("[Trace Int]", &Env::default()).unwrap();
        let l = dist(&list, &k, &Term::var("l")).unwrap();
        assert!(alpha_equal(&l, &main_of("for (x <- l) [If {cond = Lit true, out = x}]")));
        assert!(matches!(dist(&Constructor::IntC, &k, &Term::var("l")), Err(SelfTraceError::ShapeMismatch(_))));
    }

    #[test]
    fn table_becomes_cells() {
        let q = main_of(r#"table "Agencies" {oid : Int, name : String}"#);
        let t = self_trace(&q, &con("[{oid : Int, name : String}]")).unwrap();
        let expect = main_of(
            r#"for (y <- table "Agencies" {oid : Int, name : String})
                 [{oid = Lit y.oid, name = Cell {tbl = "Agencies", col = "name", row = y.oid, val = y.name}}]"#,
        );
        assert!(alpha_equal(&t, &expect), "{}", print(&t));
    }

    #[test]
    fn hole_count_enforced() {
        assert!(HoleExpr::new(Term::int(1)).is_none());
        assert!(HoleExpr::new(Term::TrLit(Arc::new(HoleExpr::hole()))).is_some());
    }
}
