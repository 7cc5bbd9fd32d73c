//! Typing of terms.
//!
//! Types are synthesized bottom-up. Wherever a rule demands agreement of
//! two types the check goes through [`types_equal`], so the conversion
//! rule never appears as a separate step.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::selftrace::trace_constructor;
use crate::syntax::{
    alpha_equal_con, fresh_name, print, subst_con_in_term, subst_con_in_type, Bind2, Constructor, Kind, Label,
    Literal, Name, RowType, Term, Type,
};
pub use crate::syntax::{subst_con_in_term as substitute_constructor_in_term, subst_term as substitute_term};
use crate::types::{
    canon, canonical_constructor, con_equiv, join, kind_of_constructor, kind_of_type, to_constructor, types_equal,
    Context, TypeError,
};

/// Type of each literal kind.
pub fn constant_type(c: &Literal) -> Type {
    match c {
        Literal::Bool(_) => Type::Bool,
        Literal::Int(_) => Type::Int,
        Literal::Str(_) => Type::String,
    }
}

/// Typing failures. Subterms are rendered as source text because terms
/// carry no positions.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TypingError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(Name),
    #[error("type mismatch in `{term}`: expected {expected}, found {actual}")]
    TypeMismatch { term: String, expected: Type, actual: Type },
    #[error("`{term}` is not a function; it has type {actual}")]
    NotAFunction { term: String, actual: Type },
    #[error("`{term}` is not polymorphic; it has type {actual}")]
    NotPolymorphic { term: String, actual: Type },
    #[error("`{term}` is not a record; it has type {actual}")]
    NotARecord { term: String, actual: Type },
    #[error("`{term}` is not a list; it has type {actual}")]
    NotAList { term: String, actual: Type },
    #[error("`{term}` must have a base type; it has type {actual}")]
    NotABaseType { term: String, actual: Type },
    #[error("`{term}` is not a trace; it has type {actual}")]
    NotATrace { term: String, actual: Type },
    #[error("record `{term}` of type {actual} has no label `{label}`")]
    MissingLabel { term: String, label: Label, actual: Type },
    #[error("label `{label}` already present in `{term}`")]
    DuplicateLabel { term: String, label: Label },
    #[error("bad schema for table `{table}`: {reason}")]
    BadTableSchema { table: Name, reason: String },
    #[error("rmap function `{term}` has type {actual}, expected the shape forall a. T(D a) -> T(C a)")]
    RmapFunctionShape { term: String, actual: Type },
    #[error("rfold over `{term}`: {reason}")]
    RfoldShape { term: String, reason: String },
    #[error("`==` is not supported at type {actual} in `{term}`")]
    NotEqualityType { term: String, actual: Type },
    #[error("the body of fix `{term}` must be a lambda or type abstraction")]
    BadFix { term: String },
    #[error("`{term}` has a type that is not a query type: {actual}")]
    NotAQueryType { term: String, actual: Type },
    #[error("type variable `{var}` escapes its scope in `{term}`")]
    EscapingTypeVariable { term: String, var: Name },
    #[error(transparent)]
    Kind(#[from] TypeError),
}

/// Machine-readable summary of a [`TypingError`].
#[derive(Clone, Debug, PartialEq)]
pub struct TypingDiagnostic {
    pub code: &'static str,
    pub message: String,
    /// The offending subterm, printed.
    pub subterm: Option<String>,
    pub expected: Option<Type>,
    pub actual: Option<Type>,
}

impl TypingError {
    pub fn code(&self) -> &'static str {
        match self {
            TypingError::UnboundVariable(_) => "UnboundVariable",
            TypingError::TypeMismatch { .. } => "TypeMismatch",
            TypingError::NotAFunction { .. } => "NotAFunction",
            TypingError::NotPolymorphic { .. } => "NotPolymorphic",
            TypingError::NotARecord { .. } => "NotARecord",
            TypingError::NotAList { .. } => "NotAList",
            TypingError::NotATrace { .. } => "NotATrace",
            TypingError::NotABaseType { .. } => "NotABaseType",
            TypingError::MissingLabel { .. } => "MissingLabel",
            TypingError::DuplicateLabel { .. } => "DuplicateLabel",
            TypingError::BadTableSchema { .. } => "BadTableSchema",
            TypingError::RmapFunctionShape { .. } => "RmapFunctionShape",
            TypingError::RfoldShape { .. } => "RfoldShape",
            TypingError::NotEqualityType { .. } => "NotEqualityType",
            TypingError::BadFix { .. } => "BadFix",
            TypingError::NotAQueryType { .. } => "NotAQueryType",
            TypingError::EscapingTypeVariable { .. } => "EscapingTypeVariable",
            TypingError::Kind(TypeError::UnboundTypeVariable(_)) => "UnboundTypeVariable",
            TypingError::Kind(TypeError::KindMismatch { .. }) => "KindMismatch",
            TypingError::Kind(TypeError::DuplicateLabel(_)) => "DuplicateLabel",
            TypingError::Kind(TypeError::FuelExhausted(_)) => "FuelExhausted",
            TypingError::Kind(TypeError::NotComparable(_)) => "NotComparable",
        }
    }

    pub fn diagnostic(&self) -> TypingDiagnostic {
        use TypingError::*;
        let (subterm, expected, actual) = match self {
            TypeMismatch { term, expected, actual } => (Some(term.clone()), Some(expected.clone()), Some(actual.clone())),
            NotAFunction { term, actual }
            | NotPolymorphic { term, actual }
            | NotARecord { term, actual }
            | NotAList { term, actual }
            | NotATrace { term, actual }
            | NotABaseType { term, actual }
            | MissingLabel { term, actual, .. }
            | RmapFunctionShape { term, actual }
            | NotEqualityType { term, actual }
            | NotAQueryType { term, actual } => (Some(term.clone()), None, Some(actual.clone())),
            DuplicateLabel { term, .. } | RfoldShape { term, .. } | BadFix { term } | EscapingTypeVariable { term, .. } => {
                (Some(term.clone()), None, None)
            }
            _ => (None, None, None),
        };
        TypingDiagnostic { code: self.code(), message: format!("{self}"), subterm, expected, actual }
    }
}

type Result<T> = core::result::Result<T, TypingError>;

const SNIPPET: usize = 120;

fn snippet(m: &Term) -> String {
    let s = print(m);
    if s.chars().count() <= SNIPPET {
        s
    } else {
        let mut t: String = s.chars().take(SNIPPET).collect();
        t.push_str(" ...");
        t
    }
}

/// `Trace a`, or the unknown type when `a` is unknown (an element of an
/// empty list).
fn trace_of_known(a: Type) -> Type {
    if a == Type::Unknown {
        Type::Unknown
    } else {
        Type::trace(a)
    }
}

/// Synthesizes the type of `m` in `ctx`.
pub fn type_of(ctx: &Context, m: &Term) -> Result<Type> {
    Checker { ctx: ctx.clone(), closed: Vec::new() }.ty(m)
}

/// Checks `m` against `expected`.
pub fn check(ctx: &Context, m: &Term, expected: &Type) -> Result<()> {
    let actual = type_of(ctx, m)?;
    if types_equal(ctx, expected, &actual)? {
        Ok(())
    } else {
        Err(TypingError::TypeMismatch { term: snippet(m), expected: expected.clone(), actual })
    }
}

/// The closed record of the four `Cell` fields at value type `a`.
pub fn cell_record(a: Type) -> Type {
    Type::record([
        ("col".into(), Type::String),
        ("row".into(), Type::Int),
        ("tbl".into(), Type::String),
        ("val".into(), a),
    ])
}

/// `T(TRACE c)`.
pub fn traced(c: &Constructor) -> Type {
    Type::Embed(Constructor::app(trace_constructor(), c.clone()))
}

fn if_record(a: Type) -> Type {
    Type::record([("cond".into(), Type::trace(Type::Bool)), ("out".into(), Type::trace(a))])
}

fn for_record(c: &Constructor, a: Type) -> Type {
    Type::record([("in".into(), traced(c)), ("out".into(), Type::trace(a))])
}

fn op_eq_record(c: &Constructor) -> Type {
    Type::record([("l".into(), traced(c)), ("r".into(), traced(c))])
}

fn op_plus_record() -> Type {
    Type::record([("l".into(), Type::trace(Type::Int)), ("r".into(), Type::trace(Type::Int))])
}

/// A record type that is either fully known or ends in a row constructor.
enum RecordShape {
    Closed(RowType),
    Open(Constructor),
}

/// True for the types `==` may compare: base types, records of such
/// types, and neutral embedded types.
pub fn is_equality_type(t: &Type) -> bool {
    match t {
        Type::Bool | Type::Int | Type::String | Type::Unknown => true,
        Type::Record(r) => r.fields.iter().all(|(_, t)| is_equality_type(t)),
        Type::Embed(c) => matches!(c, Constructor::Var(_) | Constructor::App(..) | Constructor::Typerec(..)),
        _ => false,
    }
}

/// True for nested relational types: base types, lists and closed
/// records of them.
pub fn is_query_type(t: &Type) -> bool {
    match t {
        Type::Bool | Type::Int | Type::String | Type::Unknown => true,
        Type::List(a) => is_query_type(a),
        Type::Record(r) => r.fields.iter().all(|(_, t)| is_query_type(t)),
        _ => false,
    }
}

struct Checker {
    ctx: Context,
    /// Closed abstractions already typed. Unrolling a recursive function
    /// copies its definition into every use, so the same closed
    /// abstraction recurs often in intermediate terms.
    closed: Vec<(Term, Type)>,
}

impl Checker {
    fn mismatch<T>(&self, m: &Term, expected: &Type, actual: &Type) -> Result<T> {
        Err(TypingError::TypeMismatch { term: snippet(m), expected: expected.clone(), actual: actual.clone() })
    }

    fn expect(&self, m: &Term, expected: &Type, actual: &Type) -> Result<()> {
        if types_equal(&self.ctx, expected, actual)? {
            Ok(())
        } else {
            self.mismatch(m, expected, actual)
        }
    }

    fn check(&mut self, m: &Term, expected: &Type) -> Result<Type> {
        let actual = self.ty(m)?;
        self.expect(m, expected, &actual)?;
        Ok(actual)
    }

    fn well_kinded(&mut self, t: &Type) -> Result<()> {
        kind_of_type(&mut self.ctx, t)?;
        Ok(())
    }

    fn kind_of(&mut self, c: &Constructor) -> Result<Kind> {
        Ok(kind_of_constructor(&mut self.ctx, c)?)
    }

    fn expect_con_kind(&mut self, c: &Constructor, k: &Kind) -> Result<()> {
        let got = self.kind_of(c)?;
        if got == *k {
            Ok(())
        } else {
            Err(TypeError::KindMismatch { con: crate::syntax::print_con(c), expected: k.clone(), actual: got }.into())
        }
    }

    /// A name for a type binder that clashes with nothing in scope.
    fn fresh_tyvar(&self, base: &Name, body_ftv: &BTreeSet<Name>) -> Name {
        let mut avoid = self.ctx.names();
        avoid.extend(self.ctx.free_type_vars_of_terms());
        avoid.extend(body_ftv.iter().cloned());
        fresh_name(base, &avoid)
    }

    fn clashes(&self, a: &Name) -> bool {
        self.ctx.lookup_type(a).is_some() || self.ctx.free_type_vars_of_terms().contains(a)
    }

    /// Opens a type binder `a` over `body`, renaming it if it would
    /// shadow something in scope.
    fn open_tybinder(&self, a: &Name, body: &Arc<Term>) -> (Name, Arc<Term>) {
        if self.clashes(a) {
            let b = self.fresh_tyvar(a, &body.free_tyvars());
            let body = subst_con_in_term(body, a, &Constructor::Var(b.clone()));
            (b, body)
        } else {
            (a.clone(), body.clone())
        }
    }

    fn under_term<T>(&mut self, x: &Name, t: Type, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let n = self.ctx.len();
        self.ctx.push_term(x.clone(), t);
        let r = f(self);
        self.ctx.truncate(n);
        r
    }

    fn under_type<T>(&mut self, a: &Name, k: Kind, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let n = self.ctx.len();
        self.ctx.push_type(a.clone(), k);
        let r = f(self);
        self.ctx.truncate(n);
        r
    }

    fn as_fun(&self, t: &Type) -> Result<Option<(Type, Type)>> {
        if let Type::Fun(a, b) = t {
            return Ok(Some(((**a).clone(), (**b).clone())));
        }
        Ok(match canon(t)? {
            Type::Fun(a, b) => Some((*a, *b)),
            Type::Unknown => Some((Type::Unknown, Type::Unknown)),
            _ => None,
        })
    }

    fn as_forall(&self, t: &Type) -> Result<Option<(Name, Kind, Type)>> {
        if let Type::Forall(a, k, b) = t {
            return Ok(Some((a.clone(), k.clone(), (**b).clone())));
        }
        Ok(match canon(t)? {
            Type::Forall(a, k, b) => Some((a, k, *b)),
            _ => None,
        })
    }

    fn as_list(&self, t: &Type) -> Result<Option<Type>> {
        if let Type::List(a) = t {
            return Ok(Some((**a).clone()));
        }
        Ok(match canon(t)? {
            Type::List(a) => Some(*a),
            Type::Unknown => Some(Type::Unknown),
            _ => None,
        })
    }

    fn as_trace(&self, t: &Type) -> Result<Option<Type>> {
        if let Type::Trace(a) = t {
            return Ok(Some((**a).clone()));
        }
        Ok(match canon(t)? {
            Type::Trace(a) => Some(*a),
            Type::Unknown => Some(Type::Unknown),
            _ => None,
        })
    }

    fn as_record(&self, t: &Type) -> Result<Option<RecordShape>> {
        if let Type::Record(r) = t {
            return Ok(Some(RecordShape::Closed(r.clone())));
        }
        Ok(match canon(t)? {
            Type::Record(r) => Some(RecordShape::Closed(r)),
            Type::Embed(Constructor::RecordC(row)) => Some(RecordShape::Open(*row)),
            _ => None,
        })
    }

    fn join_or_mismatch(&self, m: &Term, a: &Type, b: &Type) -> Result<Type> {
        match join(a, b)? {
            Some(t) => Ok(if crate::types::has_unknown(a) { t } else { a.clone() }),
            None => self.mismatch(m, a, b),
        }
    }

    fn ty(&mut self, m: &Term) -> Result<Type> {
        if !matches!(m, Term::Fix(..) | Term::TyLam(..)) {
            return self.ty_uncached(m);
        }
        if let Some((_, t)) = self.closed.iter().find(|(k, _)| k == m) {
            return Ok(t.clone());
        }
        let t = self.ty_uncached(m)?;
        if m.free_vars().is_empty() && m.free_tyvars().is_empty() {
            self.closed.push((m.clone(), t.clone()));
        }
        Ok(t)
    }

    fn ty_uncached(&mut self, m: &Term) -> Result<Type> {
        match m {
            Term::Const(c) => Ok(constant_type(c)),
            Term::Var(x) => self.ctx.lookup_term(x).cloned().ok_or_else(|| TypingError::UnboundVariable(x.clone())),
            Term::Lam(x, a, body) => {
                self.well_kinded(a)?;
                let b = self.under_term(x, a.clone(), |s| s.ty(body))?;
                Ok(Type::fun(a.clone(), b))
            }
            Term::App(f, a) => {
                let tf = self.ty(f)?;
                let Some((dom, cod)) = self.as_fun(&tf)? else {
                    return Err(TypingError::NotAFunction { term: snippet(f), actual: tf });
                };
                self.check(a, &dom)?;
                Ok(cod)
            }
            Term::TyLam(a, k, body) => {
                let (a, body) = self.open_tybinder(a, body);
                let b = self.under_type(&a, k.clone(), |s| s.ty(&body))?;
                Ok(Type::Forall(a, k.clone(), Box::new(b)))
            }
            Term::TyApp(f, c) => {
                let tf = self.ty(f)?;
                if tf == Type::Unknown {
                    return Ok(Type::Unknown);
                }
                let Some((a, k, b)) = self.as_forall(&tf)? else {
                    return Err(TypingError::NotPolymorphic { term: snippet(f), actual: tf });
                };
                self.expect_con_kind(c, &k)?;
                Ok(subst_con_in_type(&b, &a, c))
            }
            Term::Fix(f, a, body) => {
                if !matches!(**body, Term::Lam(..) | Term::TyLam(..)) {
                    return Err(TypingError::BadFix { term: snippet(m) });
                }
                self.well_kinded(a)?;
                self.under_term(f, a.clone(), |s| s.check(body, a))?;
                Ok(a.clone())
            }
            Term::If(c, t, e) => {
                self.check(c, &Type::Bool)?;
                let tt = self.ty(t)?;
                let te = self.ty(e)?;
                self.join_or_mismatch(e, &tt, &te)
            }
            Term::Plus(a, b) => {
                self.check(a, &Type::Int)?;
                self.check(b, &Type::Int)?;
                Ok(Type::Int)
            }
            Term::Eq(a, b) => {
                let ta = self.ty(a)?;
                let tb = self.ty(b)?;
                let t = self.join_or_mismatch(b, &ta, &tb)?;
                if !is_equality_type(&canon(&t)?) {
                    return Err(TypingError::NotEqualityType { term: snippet(m), actual: t });
                }
                Ok(Type::Bool)
            }
            Term::EmptyRecord => Ok(Type::Record(RowType::default())),
            Term::RecordExt(l, h, t) => {
                let th = self.ty(h)?;
                let tt = self.ty(t)?;
                match self.as_record(&tt)? {
                    Some(RecordShape::Closed(r)) => {
                        if r.get(l).is_some() {
                            return Err(TypingError::DuplicateLabel { term: snippet(m), label: l.clone() });
                        }
                        let mut fields = r.fields;
                        fields.push((l.clone(), th));
                        Ok(Type::Record(RowType::new(fields)))
                    }
                    Some(RecordShape::Open(row)) => {
                        if row.row_spine().0.iter().any(|(k, _)| *k == l) {
                            return Err(TypingError::DuplicateLabel { term: snippet(m), label: l.clone() });
                        }
                        let Some(c) = to_constructor(&th) else {
                            return Err(TypingError::NotAQueryType { term: snippet(h), actual: th });
                        };
                        Ok(Type::Embed(Constructor::record(crate::syntax::insert_row_field(l.clone(), c, row))))
                    }
                    None => Err(TypingError::NotARecord { term: snippet(t), actual: tt }),
                }
            }
            Term::Project(r, l) => {
                let tr = self.ty(r)?;
                if tr == Type::Unknown {
                    return Ok(Type::Unknown);
                }
                match self.as_record(&tr)? {
                    Some(RecordShape::Closed(row)) => match row.get(l) {
                        Some(t) => Ok(t.clone()),
                        None => Err(TypingError::MissingLabel { term: snippet(r), label: l.clone(), actual: tr }),
                    },
                    Some(RecordShape::Open(row)) => {
                        match row.row_spine().0.into_iter().find(|(k, _)| *k == l) {
                            Some((_, c)) => Ok(canon(&Type::Embed(c.clone()))?),
                            None => Err(TypingError::MissingLabel { term: snippet(r), label: l.clone(), actual: tr }),
                        }
                    }
                    None => Err(TypingError::NotARecord { term: snippet(r), actual: tr }),
                }
            }
            Term::RMap(s, f, r) => self.rmap(m, s, f, r),
            Term::RFold(s, l, z, r) => self.rfold(m, s, l, z, r),
            Term::EmptyList => Ok(Type::list(Type::Unknown)),
            Term::Singleton(a) => Ok(Type::list(self.ty(a)?)),
            Term::Concat(a, b) => {
                let ta = self.ty(a)?;
                if self.as_list(&ta)?.is_none() {
                    return Err(TypingError::NotAList { term: snippet(a), actual: ta });
                }
                let tb = self.ty(b)?;
                if self.as_list(&tb)?.is_none() {
                    return Err(TypingError::NotAList { term: snippet(b), actual: tb });
                }
                self.join_or_mismatch(b, &ta, &tb)
            }
            Term::For(x, src, body) => {
                let ts = self.ty(src)?;
                let Some(elem) = self.as_list(&ts)? else {
                    return Err(TypingError::NotAList { term: snippet(src), actual: ts });
                };
                let tb = self.under_term(x, elem, |s| s.ty(body))?;
                if tb == Type::Unknown || self.as_list(&tb)?.is_some() {
                    Ok(if tb == Type::Unknown { Type::list(Type::Unknown) } else { tb })
                } else {
                    Err(TypingError::NotAList { term: snippet(body), actual: tb })
                }
            }
            Term::Table(n, schema) => {
                let bad = |reason: &str| TypingError::BadTableSchema { table: n.clone(), reason: reason.into() };
                match schema.get("oid") {
                    Some(Type::Int) => {}
                    Some(_) => return Err(bad("column `oid` must have type Int")),
                    None => return Err(bad("missing column `oid : Int`")),
                }
                if let Some((l, _)) = schema.fields.iter().find(|(_, t)| !t.is_base()) {
                    return Err(bad(&format!("column `{l}` is not of base type")));
                }
                kind_of_row_type_checked(&mut self.ctx, schema)?;
                Ok(Type::list(Type::Record(schema.clone())))
            }
            Term::TrLit(a) => {
                let t = self.ty(a)?;
                let c = canon(&t)?;
                if !c.is_base() {
                    return Err(TypingError::NotABaseType { term: snippet(a), actual: t });
                }
                Ok(Type::trace(c))
            }
            Term::TrIf(a) => {
                let t = self.ty(a)?;
                let out = self.field_trace(a, &t, "out")?;
                self.expect(a, &if_record(out.clone()), &t)?;
                Ok(trace_of_known(out))
            }
            Term::TrFor(c, a) => {
                self.expect_con_kind(c, &Kind::Type)?;
                let t = self.ty(a)?;
                let out = self.field_trace(a, &t, "out")?;
                self.expect(a, &for_record(c, out.clone()), &t)?;
                Ok(trace_of_known(out))
            }
            Term::TrCell(a) => {
                let t = self.ty(a)?;
                let val = match self.as_record(&t)? {
                    Some(RecordShape::Closed(r)) => r.get("val").cloned(),
                    _ => None,
                };
                let Some(val) = val else {
                    return self.mismatch(a, &cell_record(placeholder()), &t);
                };
                let val = canon(&val)?;
                let expected = cell_record(val.clone());
                self.expect(a, &expected, &t)?;
                if !val.is_base() {
                    return self.mismatch(a, &expected, &t);
                }
                Ok(Type::trace(val))
            }
            Term::TrOpEq(c, a) => {
                self.expect_con_kind(c, &Kind::Type)?;
                self.check(a, &op_eq_record(c))?;
                Ok(Type::trace(Type::Bool))
            }
            Term::TrOpPlus(a) => {
                self.check(a, &op_plus_record())?;
                Ok(Type::trace(Type::Int))
            }
            Term::Tracecase(scrut, bs) => self.tracecase(m, scrut, bs),
            Term::Typecase(c, motive, bs) => {
                self.expect_con_kind(c, &Kind::Type)?;
                let v = motive.var.clone();
                self.under_type(&v, Kind::Type, |s| s.well_kinded(&motive.body))?;
                let at = |d: &Constructor| subst_con_in_type(&motive.body, &v, d);
                self.check(&bs.bool_, &at(&Constructor::BoolC))?;
                self.check(&bs.int, &at(&Constructor::IntC))?;
                self.check(&bs.string, &at(&Constructor::StringC))?;
                let cases: [(&crate::syntax::TyBind, Kind, fn(Constructor) -> Constructor); 3] = [
                    (&bs.list, Kind::Type, Constructor::list),
                    (&bs.record, Kind::Row, Constructor::record),
                    (&bs.trace, Kind::Type, Constructor::trace),
                ];
                for (b, k, wrap) in cases {
                    let (a, body) = self.open_tybinder(&b.tyvar, &b.body);
                    let expected = at(&wrap(Constructor::Var(a.clone())));
                    self.under_type(&a, k, |s| s.check(&body, &expected))?;
                }
                Ok(at(c))
            }
            Term::TraceOf(q) => {
                let t = self.ty(q)?;
                let ct = canon(&t)?;
                let c = match to_constructor(&ct) {
                    Some(c) if is_query_type(&ct) => c,
                    _ => return Err(TypingError::NotAQueryType { term: snippet(q), actual: t }),
                };
                Ok(traced(&c))
            }
        }
    }

    /// The `A` of a record argument whose `out` field has type `Trace A`.
    fn field_trace(&mut self, a: &Term, t: &Type, field: &str) -> Result<Type> {
        if let Some(RecordShape::Closed(r)) = self.as_record(t)? {
            if let Some(ft) = r.get(field) {
                if let Some(inner) = self.as_trace(ft)? {
                    return Ok(inner);
                }
            }
        }
        Err(TypingError::NotATrace { term: format!("{}.{field}", snippet(a)), actual: t.clone() })
    }

    fn rmap(&mut self, m: &Term, s: &Constructor, f: &Term, r: &Term) -> Result<Type> {
        self.expect_con_kind(s, &Kind::Row)?;
        let tf = self.ty(f)?;
        let shape_err = || TypingError::RmapFunctionShape { term: snippet(f), actual: tf.clone() };
        let Some((a, k, body)) = self.as_forall(&tf)? else { return Err(shape_err()) };
        if k != Kind::Type {
            return Err(shape_err());
        }
        let Some((dom, cod)) = self.as_fun(&body)? else { return Err(shape_err()) };
        let (Some(dc), Some(cc)) = (to_constructor(&canon(&dom)?), to_constructor(&canon(&cod)?)) else {
            return Err(shape_err());
        };
        let d = Constructor::Lam(a.clone(), Kind::Type, Box::new(dc));
        let c = Constructor::Lam(a.clone(), Kind::Type, Box::new(cc));
        let id = Constructor::lam("a", Kind::Type, Constructor::var("a"));
        let expected_row =
            if alpha_equal_con(&canonical_constructor(&d)?, &id) { s.clone() } else { Constructor::rmap(d, s.clone()) };
        self.check(r, &Type::Embed(Constructor::record(expected_row)))?;
        let _ = m;
        Ok(Type::Embed(Constructor::record(Constructor::rmap(c, s.clone()))))
    }

    fn rfold(&mut self, m: &Term, s: &Constructor, l: &Term, z: &Term, r: &Term) -> Result<Type> {
        self.expect_con_kind(s, &Kind::Row)?;
        let tl = self.ty(l)?;
        let tz = self.ty(z)?;
        let shape = |reason: String| TypingError::RfoldShape { term: snippet(m), reason };
        let Some((a1, rest)) = self.as_fun(&tl)? else {
            return Err(TypingError::NotAFunction { term: snippet(l), actual: tl });
        };
        let Some((a2, a3)) = self.as_fun(&rest)? else {
            return Err(TypingError::NotAFunction { term: snippet(l), actual: tl });
        };
        let acc = self.join_or_mismatch(z, &a1, &tz)?;
        self.expect(l, &Type::fun(acc.clone(), Type::fun(acc.clone(), acc.clone())), &Type::fun(a1, Type::fun(a2, a3)))?;
        let Some(c) = to_constructor(&canon(&acc)?) else {
            return Err(shape(format!("accumulator type {acc} is not a constructor type")));
        };
        // Every field of the row must have the accumulator type.
        let row = canonical_constructor(s)?;
        let (fields, tail) = row.row_spine();
        for (lbl, d) in &fields {
            if !con_equiv(d, &c)? {
                return Err(shape(format!("field `{lbl}` has type {d}, expected {c}")));
            }
        }
        match tail {
            Constructor::RowEmpty => {}
            Constructor::Rmap(g, _) => {
                let probe = fresh_name("probe", &g.free_vars());
                let applied = Constructor::app((**g).clone(), Constructor::Var(probe.clone()));
                let out = canonical_constructor(&applied)?;
                if out.free_vars().contains(&probe) || !con_equiv(&out, &c)? {
                    return Err(shape(format!("row tail `{tail}` is not uniformly of type {c}")));
                }
            }
            other => return Err(shape(format!("row tail `{other}` has unknown field types"))),
        }
        self.check(r, &Type::Embed(Constructor::record(s.clone())))?;
        Ok(acc)
    }

    fn tracecase(&mut self, m: &Term, scrut: &Term, bs: &crate::syntax::TraceBranches) -> Result<Type> {
        let ts = self.ty(scrut)?;
        let Some(a) = self.as_trace(&ts)? else {
            return Err(TypingError::NotATrace { term: snippet(scrut), actual: ts });
        };
        let a_canon = canon(&a)?;
        let t_lit = self.under_term(&bs.lit.var, a.clone(), |s| s.ty(&bs.lit.body))?;
        let t_if = self.under_term(&bs.if_.var, if_record(a.clone()), |s| s.ty(&bs.if_.body))?;
        let t_for = self.two_binder(m, &bs.for_, |c| for_record(c, a.clone()))?;
        let t_cell = self.under_term(&bs.cell.var, cell_record(a.clone()), |s| s.ty(&bs.cell.body))?;
        let mut b = t_lit;
        for (t, body) in [(t_if, &bs.if_.body), (t_for, &bs.for_.body), (t_cell, &bs.cell.body)] {
            b = self.join_or_mismatch(body, &b, &t)?;
        }
        self.refined_branch(&a_canon, Type::Bool, &b, |s, b| {
            let t = s.two_binder(m, &bs.op_eq, op_eq_record)?;
            s.expect(&bs.op_eq.body, b, &t)
        })?;
        self.refined_branch(&a_canon, Type::Int, &b, |s, b| {
            let t = s.under_term(&bs.op_plus.var, op_plus_record(), |s| s.ty(&bs.op_plus.body))?;
            s.expect(&bs.op_plus.body, b, &t)
        })?;
        Ok(b)
    }

    /// Checks a branch that is only reachable when the trace's value type
    /// `a` equals `base`. A type variable `a` is refined to `base` inside
    /// the branch; a branch that cannot be reached is skipped.
    fn refined_branch(
        &mut self,
        a: &Type,
        base: Type,
        b: &Type,
        check: impl FnOnce(&mut Self, &Type) -> Result<()>,
    ) -> Result<()> {
        match a {
            _ if *a == base => check(self, b),
            Type::Embed(Constructor::Var(g)) if self.ctx.lookup_type(g).is_some() => {
                let bc = to_constructor(&base).unwrap_or(Constructor::IntC);
                let saved = self.ctx.clone();
                self.ctx = self.ctx.subst_type_var(g, &bc);
                let refined_b = subst_con_in_type(b, g, &bc);
                let r = check(self, &refined_b);
                self.ctx = saved;
                r
            }
            Type::Bool | Type::Int | Type::String | Type::List(_) | Type::Record(_) | Type::Trace(_) | Type::Fun(..) => {
                Ok(())
            }
            Type::Embed(Constructor::RecordC(_)) => Ok(()),
            _ => check(self, b),
        }
    }

    /// Types a branch binding a type variable and a term variable whose
    /// type mentions it; the result may not mention the type variable.
    fn two_binder(&mut self, m: &Term, b: &Bind2, arg: impl FnOnce(&Constructor) -> Type) -> Result<Type> {
        let (a, body) = self.open_tybinder(&b.tyvar, &b.body);
        let av = Constructor::Var(a.clone());
        let xt = arg(&av);
        let t = self.under_type(&a, Kind::Type, |s| s.under_term(&b.var, xt, |s| s.ty(&body)))?;
        let ct = canon(&t)?;
        if ct.free_vars().contains(&a) {
            return Err(TypingError::EscapingTypeVariable { term: snippet(m), var: a });
        }
        Ok(ct)
    }
}

fn kind_of_row_type_checked(ctx: &mut Context, r: &RowType) -> Result<()> {
    crate::types::kind_of_row_type(ctx, r)?;
    Ok(())
}

/// Placeholder used in diagnostics where a type is unconstrained.
fn placeholder() -> Type {
    Type::Embed(Constructor::var("_"))
}

/// Free term variables of `m` that are not bound in `ctx`.
pub fn unbound_variables(ctx: &Context, m: &Term) -> Vec<Name> {
    m.free_vars().into_iter().filter(|x| ctx.lookup_term(x).is_none()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_type, Env};

    fn ty_of(src: &str) -> Result<Type> {
        type_of(&Context::new(), &parse(src).unwrap().main)
    }

    fn same(t: &Type, src: &str) -> bool {
        types_equal(&Context::new(), t, &parse_type(src, &Env::default()).unwrap()).unwrap()
    }

    #[test]
    fn plus() {
        assert_eq!(ty_of("2 + 3"), Ok(Type::Int));
    }

    #[test]
    fn boat_tours_type() {
        let src = r#"
            for (a <- table "Agencies" {oid : Int, name : String, based_in : String, phone : String})
            for (e <- table "ExternalTours" {oid : Int, name : String, destination : String, type : String, price : Int})
            where (a.name == e.name && e.type == "boat")
            [{name = e.name, phone = a.phone}]"#;
        let t = ty_of(src).unwrap();
        assert!(same(&t, "[{name : String, phone : String}]"), "{t}");
    }

    #[test]
    fn table_needs_oid() {
        assert!(matches!(ty_of("table \"t\" {a : Int}"), Err(TypingError::BadTableSchema { .. })));
        assert!(matches!(ty_of("table \"t\" {oid : Int, a : [Int]}"), Err(TypingError::BadTableSchema { .. })));
    }

    #[test]
    fn trace_constructors() {
        assert!(same(&ty_of("OpPlus {l = Lit 2, r = Lit 3}").unwrap(), "Trace Int"));
        assert!(same(
            &ty_of("Cell {tbl = \"t\", col = \"c\", row = 1, val = true}").unwrap(),
            "Trace Bool"
        ));
        assert!(ty_of("Cell {tbl = \"t\", col = \"c\", row = true, val = 1}").is_err());
        assert!(same(&ty_of("OpEq Int {l = Lit 1, r = Lit 2}").unwrap(), "Trace Bool"));
        assert!(same(&ty_of("For [Int] {in = [Lit 1], out = Lit 2}").unwrap(), "Trace Int"));
    }

    #[test]
    fn polymorphism() {
        let t = ty_of("(/\\a. \\x:a. x) @Int 3").unwrap();
        assert!(same(&t, "Int"));
        assert!(matches!(ty_of("(\\x:Int. x) true"), Err(TypingError::TypeMismatch { .. })));
    }

    #[test]
    fn rmap_and_rfold() {
        let id = "/\\a. \\x:a. x";
        let t = ty_of(&format!("rmap^(a : Int, b : Bool) ({id}) {{a = 1, b = true}}")).unwrap();
        assert!(same(&t, "{a : Int, b : Bool}"), "{t}");
        let t = ty_of("rfold^(a : Int, b : Int) (\\x:Int. \\y:Int. x + y) 0 {a = 1, b = 2}").unwrap();
        assert_eq!(t, Type::Int);
        assert!(matches!(
            ty_of("rfold^(a : Int, b : Bool) (\\x:Int. \\y:Int. x + y) 0 {a = 1, b = true}"),
            Err(TypingError::RfoldShape { .. })
        ));
    }

    #[test]
    fn fix_body_must_be_abstraction() {
        assert!(matches!(ty_of("fix (f : Int). 1"), Err(TypingError::BadFix { .. })));
    }

    #[test]
    fn equality_restricted() {
        assert!(matches!(ty_of("(\\x:Int. x) == (\\x:Int. x)"), Err(TypingError::NotEqualityType { .. })));
        assert_eq!(ty_of("{a = 1} == {a = 2}"), Ok(Type::Bool));
    }

    #[test]
    fn empty_list_joins() {
        assert!(same(&ty_of("[] ++ [1]").unwrap(), "[Int]"));
        assert!(same(&ty_of("if true then [] else [1]").unwrap(), "[Int]"));
    }

    #[test]
    fn unbound() {
        assert_eq!(ty_of("x"), Err(TypingError::UnboundVariable("x".into())));
    }
}
