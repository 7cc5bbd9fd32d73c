//! Kinding, constructor computation and the equivalence checks for
//! constructors and types.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::syntax::{
    alpha_equal_con, fresh_name, print_con, subst_con_in_con, subst_con_in_type, Constructor,
    Kind, Label, Name, RowType, Type,
};

/// Default step budget for constructor normalization.
pub const DEFAULT_CON_FUEL: usize = 100_000;

/// Errors raised by kinding and type-level computation.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TypeError {
    #[error("unbound type variable `{0}`")]
    UnboundTypeVariable(Name),
    #[error("kind mismatch in `{con}`: expected {expected}, found {actual}")]
    KindMismatch { con: String, expected: Kind, actual: Kind },
    #[error("duplicate label `{0}` in row")]
    DuplicateLabel(Label),
    #[error("constructor normalization ran out of fuel after {0} steps")]
    FuelExhausted(usize),
    #[error("types cannot be compared: {0}")]
    NotComparable(String),
}

/// One entry of a typing context.
#[derive(Clone, Debug, PartialEq)]
pub enum Binding {
    Type(Name, Kind),
    Term(Name, Type),
}

/// An ordered typing context. Lookups find the innermost binding.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Context {
    bindings: Vec<Binding>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    pub fn with_type(mut self, a: &str, k: Kind) -> Self {
        self.push_type(a.into(), k);
        self
    }

    pub fn with_term(mut self, x: &str, t: Type) -> Self {
        self.push_term(x.into(), t);
        self
    }

    pub fn push_type(&mut self, a: Name, k: Kind) {
        self.bindings.push(Binding::Type(a, k));
    }

    pub fn push_term(&mut self, x: Name, t: Type) {
        self.bindings.push(Binding::Term(x, t));
    }

    pub fn pop(&mut self) {
        self.bindings.pop();
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.bindings.truncate(n);
    }

    pub fn lookup_type(&self, a: &str) -> Option<&Kind> {
        self.bindings.iter().rev().find_map(|b| match b {
            Binding::Type(x, k) if &**x == a => Some(k),
            _ => None,
        })
    }

    pub fn lookup_term(&self, x: &str) -> Option<&Type> {
        self.bindings.iter().rev().find_map(|b| match b {
            Binding::Term(y, t) if &**y == x => Some(t),
            _ => None,
        })
    }

    /// All names bound in the context, term and type alike.
    pub fn names(&self) -> BTreeSet<Name> {
        self.bindings
            .iter()
            .map(|b| match b {
                Binding::Type(x, _) | Binding::Term(x, _) => x.clone(),
            })
            .collect()
    }

    /// Type variables bound in the context.
    pub fn type_names(&self) -> BTreeSet<Name> {
        self.bindings
            .iter()
            .filter_map(|b| match b {
                Binding::Type(x, _) => Some(x.clone()),
                Binding::Term(..) => None,
            })
            .collect()
    }

    /// Free type variables of the types stored in term bindings.
    pub fn free_type_vars_of_terms(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for b in &self.bindings {
            if let Binding::Term(_, t) = b {
                out.extend(t.free_vars());
            }
        }
        out
    }

    /// Replaces the type variable `a` by `d` in every term binding, as
    /// needed when a branch refines `a`.
    pub fn subst_type_var(&self, a: &str, d: &Constructor) -> Context {
        Context {
            bindings: self
                .bindings
                .iter()
                .map(|b| match b {
                    Binding::Term(x, t) => Binding::Term(x.clone(), subst_con_in_type(t, a, d)),
                    other => other.clone(),
                })
                .collect(),
        }
    }

    /// True if every binding is a term variable of closed record type over
    /// base fields.
    pub fn is_query_context(&self) -> bool {
        self.bindings.iter().all(|b| match b {
            Binding::Term(_, Type::Record(r)) => r.fields.iter().all(|(_, t)| t.is_base()),
            _ => false,
        })
    }
}

fn mismatch(c: &Constructor, expected: Kind, actual: Kind) -> TypeError {
    TypeError::KindMismatch { con: print_con(c), expected, actual }
}

fn expect_kind(ctx: &mut Context, c: &Constructor, k: &Kind) -> Result<(), TypeError> {
    let got = kind_of_constructor(ctx, c)?;
    if got == *k {
        Ok(())
    } else {
        Err(mismatch(c, k.clone(), got))
    }
}

/// Kind of a constructor or row constructor.
pub fn kind_of_constructor(ctx: &mut Context, c: &Constructor) -> Result<Kind, TypeError> {
    use Constructor::*;
    match c {
        BoolC | IntC | StringC => Ok(Kind::Type),
        Var(a) => ctx.lookup_type(a).cloned().ok_or_else(|| TypeError::UnboundTypeVariable(a.clone())),
        Lam(a, k, body) => {
            ctx.push_type(a.clone(), k.clone());
            let r = kind_of_constructor(ctx, body);
            ctx.pop();
            Ok(Kind::arrow(k.clone(), r?))
        }
        App(f, a) => match kind_of_constructor(ctx, f)? {
            Kind::Arrow(k1, k2) => {
                expect_kind(ctx, a, &k1)?;
                Ok(*k2)
            }
            other => {
                let ka = kind_of_constructor(ctx, a)?;
                Err(mismatch(f, Kind::arrow(ka, Kind::Type), other))
            }
        },
        ListC(a) | TraceC(a) => {
            expect_kind(ctx, a, &Kind::Type)?;
            Ok(Kind::Type)
        }
        RecordC(r) => {
            expect_kind(ctx, r, &Kind::Row)?;
            Ok(Kind::Type)
        }
        Typerec(a, bs) => {
            expect_kind(ctx, a, &Kind::Type)?;
            let k = kind_of_constructor(ctx, &bs[0])?;
            expect_kind(ctx, &bs[1], &k)?;
            expect_kind(ctx, &bs[2], &k)?;
            let step = Kind::arrow(Kind::Type, Kind::arrow(k.clone(), k.clone()));
            expect_kind(ctx, &bs[3], &step)?;
            expect_kind(ctx, &bs[4], &Kind::arrow(Kind::Row, Kind::arrow(Kind::Row, k.clone())))?;
            expect_kind(ctx, &bs[5], &step)?;
            Ok(k)
        }
        RowEmpty => Ok(Kind::Row),
        RowExtend(..) => {
            let (fields, tail) = c.row_spine();
            let mut seen = BTreeSet::new();
            for (l, h) in fields {
                if !seen.insert(l.clone()) {
                    return Err(TypeError::DuplicateLabel(l.clone()));
                }
                expect_kind(ctx, h, &Kind::Type)?;
            }
            expect_kind(ctx, tail, &Kind::Row)?;
            Ok(Kind::Row)
        }
        Rmap(f, r) => {
            expect_kind(ctx, f, &Kind::arrow(Kind::Type, Kind::Type))?;
            expect_kind(ctx, r, &Kind::Row)?;
            Ok(Kind::Row)
        }
    }
}

/// Checks that a type is well formed; every well-formed type has kind
/// `Type`.
pub fn kind_of_type(ctx: &mut Context, t: &Type) -> Result<Kind, TypeError> {
    match t {
        Type::Bool | Type::Int | Type::String | Type::Unknown => {}
        Type::Embed(c) => expect_kind(ctx, c, &Kind::Type)?,
        Type::Fun(a, b) => {
            kind_of_type(ctx, a)?;
            kind_of_type(ctx, b)?;
        }
        Type::List(a) | Type::Trace(a) => {
            kind_of_type(ctx, a)?;
        }
        Type::Record(r) => {
            kind_of_row_type(ctx, r)?;
        }
        Type::Forall(a, k, b) => {
            ctx.push_type(a.clone(), k.clone());
            let r = kind_of_type(ctx, b);
            ctx.pop();
            r?;
        }
    }
    Ok(Kind::Type)
}

/// Checks a row type; well-formed row types have kind `Row`.
pub fn kind_of_row_type(ctx: &mut Context, r: &RowType) -> Result<Kind, TypeError> {
    let mut seen = BTreeSet::new();
    for (l, t) in &r.fields {
        if !seen.insert(l.clone()) {
            return Err(TypeError::DuplicateLabel(l.clone()));
        }
        kind_of_type(ctx, t)?;
    }
    Ok(Kind::Row)
}

fn typerec_root(scrut: &Constructor, bs: &[Constructor; 6]) -> Option<Constructor> {
    use Constructor::*;
    let again = |c: &Constructor| Typerec(Box::new(c.clone()), Box::new(bs.clone()));
    match scrut {
        BoolC => Some(bs[0].clone()),
        IntC => Some(bs[1].clone()),
        StringC => Some(bs[2].clone()),
        ListC(c) => Some(Constructor::app(Constructor::app(bs[3].clone(), (**c).clone()), again(c))),
        TraceC(c) => Some(Constructor::app(Constructor::app(bs[5].clone(), (**c).clone()), again(c))),
        RecordC(s) => {
            let mut avoid = BTreeSet::new();
            for b in bs.iter() {
                avoid.extend(b.free_vars());
            }
            let a = fresh_name("a", &avoid);
            let f = Constructor::Lam(a.clone(), Kind::Type, Box::new(again(&Var(a))));
            Some(Constructor::app(
                Constructor::app(bs[4].clone(), (**s).clone()),
                Constructor::rmap(f, (**s).clone()),
            ))
        }
        _ => None,
    }
}

fn root_step(c: &Constructor) -> Option<Constructor> {
    use Constructor::*;
    match c {
        App(f, a) => match &**f {
            Lam(x, _, body) => Some(subst_con_in_con(body, x, a)),
            _ => None,
        },
        Rmap(f, r) => match &**r {
            RowEmpty => Some(RowEmpty),
            RowExtend(l, d, s) => Some(RowExtend(
                l.clone(),
                Box::new(Constructor::app((**f).clone(), (**d).clone())),
                Box::new(Constructor::rmap((**f).clone(), (**s).clone())),
            )),
            _ => None,
        },
        Typerec(scrut, bs) => typerec_root(scrut, bs),
        RowExtend(l1, c1, rest) => match &**rest {
            RowExtend(l2, c2, tail) if l2 < l1 => Some(RowExtend(
                l2.clone(),
                c2.clone(),
                Box::new(RowExtend(l1.clone(), c1.clone(), tail.clone())),
            )),
            _ => None,
        },
        _ => None,
    }
}

/// One leftmost-outermost step of constructor computation, or `None` if
/// no rule applies anywhere.
pub fn reduce_constructor_step(c: &Constructor) -> Option<Constructor> {
    use Constructor::*;
    if let Some(r) = root_step(c) {
        return Some(r);
    }
    match c {
        BoolC | IntC | StringC | Var(_) | RowEmpty => None,
        Lam(x, k, b) => reduce_constructor_step(b).map(|b| Lam(x.clone(), k.clone(), Box::new(b))),
        App(f, a) => reduce_constructor_step(f)
            .map(|f| App(Box::new(f), a.clone()))
            .or_else(|| reduce_constructor_step(a).map(|a| App(f.clone(), Box::new(a)))),
        Rmap(f, a) => reduce_constructor_step(f)
            .map(|f| Rmap(Box::new(f), a.clone()))
            .or_else(|| reduce_constructor_step(a).map(|a| Rmap(f.clone(), Box::new(a)))),
        ListC(a) => reduce_constructor_step(a).map(|a| ListC(Box::new(a))),
        RecordC(a) => reduce_constructor_step(a).map(|a| RecordC(Box::new(a))),
        TraceC(a) => reduce_constructor_step(a).map(|a| TraceC(Box::new(a))),
        Typerec(a, bs) => {
            if let Some(a) = reduce_constructor_step(a) {
                return Some(Typerec(Box::new(a), bs.clone()));
            }
            for i in 0..6 {
                if let Some(b) = reduce_constructor_step(&bs[i]) {
                    let mut nbs = bs.clone();
                    nbs[i] = b;
                    return Some(Typerec(a.clone(), nbs));
                }
            }
            None
        }
        RowExtend(l, h, t) => reduce_constructor_step(h)
            .map(|h| RowExtend(l.clone(), Box::new(h), t.clone()))
            .or_else(|| reduce_constructor_step(t).map(|t| RowExtend(l.clone(), h.clone(), Box::new(t)))),
    }
}

/// Reduces a constructor to normal form with the default fuel.
pub fn normalize_constructor(c: &Constructor) -> Result<Constructor, TypeError> {
    normalize_constructor_with(c, DEFAULT_CON_FUEL)
}

/// Reduces a constructor to normal form, failing after `fuel` steps.
pub fn normalize_constructor_with(c: &Constructor, fuel: usize) -> Result<Constructor, TypeError> {
    let mut cur = c.clone();
    for _ in 0..fuel {
        match reduce_constructor_step(&cur) {
            Some(next) => cur = next,
            None => return Ok(cur),
        }
    }
    if reduce_constructor_step(&cur).is_none() {
        Ok(cur)
    } else {
        Err(TypeError::FuelExhausted(fuel))
    }
}

/// Contracts `λa. C a` to `C` wherever `a` is not free in `C`.
pub fn eta_contract(c: &Constructor) -> Constructor {
    use Constructor::*;
    match c {
        Lam(x, k, b) => {
            let b = eta_contract(b);
            if let App(f, arg) = &b {
                if matches!(&**arg, Var(y) if y == x) && !f.free_vars().contains(x) {
                    return (**f).clone();
                }
            }
            Lam(x.clone(), k.clone(), Box::new(b))
        }
        App(f, a) => Constructor::app(eta_contract(f), eta_contract(a)),
        Rmap(f, a) => Constructor::rmap(eta_contract(f), eta_contract(a)),
        ListC(a) => Constructor::list(eta_contract(a)),
        RecordC(a) => Constructor::record(eta_contract(a)),
        TraceC(a) => Constructor::trace(eta_contract(a)),
        Typerec(a, bs) => Constructor::typerec(eta_contract(a), bs.clone().map(|b| eta_contract(&b))),
        RowExtend(l, h, t) => RowExtend(l.clone(), Box::new(eta_contract(h)), Box::new(eta_contract(t))),
        BoolC | IntC | StringC | Var(_) | RowEmpty => c.clone(),
    }
}

/// Normal form followed by eta-contraction: the representative used for
/// equivalence checks.
pub fn canonical_constructor(c: &Constructor) -> Result<Constructor, TypeError> {
    Ok(eta_contract(&normalize_constructor(c)?))
}

/// Decides constructor equivalence at kind `k`. Both constructors must
/// have kind `k` in `ctx`.
pub fn constructors_equal(ctx: &Context, c1: &Constructor, c2: &Constructor, k: &Kind) -> Result<bool, TypeError> {
    let mut ctx = ctx.clone();
    expect_kind(&mut ctx, c1, k)?;
    expect_kind(&mut ctx, c2, k)?;
    Ok(alpha_equal_con(&canonical_constructor(c1)?, &canonical_constructor(c2)?))
}

/// Equivalence of constructors without a kinding check.
pub fn con_equiv(c1: &Constructor, c2: &Constructor) -> Result<bool, TypeError> {
    Ok(alpha_equal_con(&canonical_constructor(c1)?, &canonical_constructor(c2)?))
}

/// Pushes the embedding `T(·)` inward as far as it goes, normalizing the
/// embedded constructors.
pub fn canon(t: &Type) -> Result<Type, TypeError> {
    Ok(match t {
        Type::Bool | Type::Int | Type::String | Type::Unknown => t.clone(),
        Type::Embed(c) => embed_normal(&canonical_constructor(c)?)?,
        Type::Fun(a, b) => Type::fun(canon(a)?, canon(b)?),
        Type::List(a) => Type::list(canon(a)?),
        Type::Trace(a) => Type::trace(canon(a)?),
        Type::Record(r) => Type::Record(RowType {
            fields: r.fields.iter().map(|(l, t)| Ok((l.clone(), canon(t)?))).collect::<Result<_, TypeError>>()?,
        }),
        Type::Forall(a, k, b) => Type::Forall(a.clone(), k.clone(), Box::new(canon(b)?)),
    })
}

fn embed_normal(c: &Constructor) -> Result<Type, TypeError> {
    use Constructor::*;
    Ok(match c {
        BoolC => Type::Bool,
        IntC => Type::Int,
        StringC => Type::String,
        ListC(a) => Type::list(embed_normal(a)?),
        TraceC(a) => Type::trace(embed_normal(a)?),
        RecordC(row) => {
            let (fields, tail) = row.row_spine();
            if *tail == RowEmpty {
                Type::Record(RowType::new(
                    fields
                        .into_iter()
                        .map(|(l, d)| Ok((l.clone(), embed_normal(d)?)))
                        .collect::<Result<Vec<_>, TypeError>>()?,
                ))
            } else {
                Type::Embed(c.clone())
            }
        }
        Var(_) | App(..) | Typerec(..) => Type::Embed(c.clone()),
        Lam(..) | RowEmpty | RowExtend(..) | Rmap(..) => {
            return Err(TypeError::NotComparable(alloc::format!(
                "`{}` is not a constructor of kind Type",
                print_con(c)
            )))
        }
    })
}

/// Converts a type back to a constructor when it has no function or
/// polymorphic parts.
pub fn to_constructor(t: &Type) -> Option<Constructor> {
    Some(match t {
        Type::Bool => Constructor::BoolC,
        Type::Int => Constructor::IntC,
        Type::String => Constructor::StringC,
        Type::Embed(c) => c.clone(),
        Type::List(a) => Constructor::list(to_constructor(a)?),
        Type::Trace(a) => Constructor::trace(to_constructor(a)?),
        Type::Record(r) => Constructor::record(Constructor::row(
            r.fields.iter().map(|(l, t)| Some((l.clone(), to_constructor(t)?))).collect::<Option<Vec<_>>>()?,
        )),
        Type::Fun(..) | Type::Forall(..) | Type::Unknown => return None,
    })
}

/// Decides type equivalence. `Type::Unknown` matches any type.
pub fn types_equal(_ctx: &Context, a: &Type, b: &Type) -> Result<bool, TypeError> {
    Ok(canon_eq(&canon(a)?, &canon(b)?))
}

/// Structural alpha-equality of canonical types with `Unknown` as a
/// wildcard.
pub fn canon_eq(a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::Unknown, _) | (_, Type::Unknown) => true,
        (Type::Bool, Type::Bool) | (Type::Int, Type::Int) | (Type::String, Type::String) => true,
        (Type::Embed(x), Type::Embed(y)) => alpha_equal_con(x, y),
        (Type::Fun(a1, b1), Type::Fun(a2, b2)) => canon_eq(a1, a2) && canon_eq(b1, b2),
        (Type::List(x), Type::List(y)) | (Type::Trace(x), Type::Trace(y)) => canon_eq(x, y),
        (Type::Record(r1), Type::Record(r2)) => {
            r1.fields.len() == r2.fields.len()
                && r1.fields.iter().zip(&r2.fields).all(|((l1, t1), (l2, t2))| l1 == l2 && canon_eq(t1, t2))
        }
        (Type::Forall(x, k1, b1), Type::Forall(y, k2, b2)) => {
            if k1 != k2 {
                return false;
            }
            if x == y {
                return canon_eq(b1, b2);
            }
            let mut avoid = b1.free_vars();
            avoid.extend(b2.free_vars());
            let z = fresh_name(x, &avoid);
            let zc = Constructor::Var(z);
            canon_eq(&subst_con_in_type(b1, x, &zc), &subst_con_in_type(b2, y, &zc))
        }
        _ => false,
    }
}

/// Least upper bound of two equivalent types, replacing `Unknown` parts
/// of one side by the other side. Returns `None` if they differ.
pub fn join(a: &Type, b: &Type) -> Result<Option<Type>, TypeError> {
    let (ca, cb) = (canon(a)?, canon(b)?);
    if !canon_eq(&ca, &cb) {
        return Ok(None);
    }
    Ok(Some(join_canon(&ca, &cb)))
}

fn join_canon(a: &Type, b: &Type) -> Type {
    match (a, b) {
        (Type::Unknown, t) | (t, Type::Unknown) => t.clone(),
        (Type::Fun(a1, b1), Type::Fun(a2, b2)) => Type::fun(join_canon(a1, a2), join_canon(b1, b2)),
        (Type::List(x), Type::List(y)) => Type::list(join_canon(x, y)),
        (Type::Trace(x), Type::Trace(y)) => Type::trace(join_canon(x, y)),
        (Type::Record(r1), Type::Record(r2)) => Type::Record(RowType {
            fields: r1.fields.iter().zip(&r2.fields).map(|((l, t1), (_, t2))| (l.clone(), join_canon(t1, t2))).collect(),
        }),
        _ => a.clone(),
    }
}

/// True if the canonical form of `t` mentions `Unknown`.
pub fn has_unknown(t: &Type) -> bool {
    match t {
        Type::Unknown => true,
        Type::Fun(a, b) => has_unknown(a) || has_unknown(b),
        Type::List(a) | Type::Trace(a) => has_unknown(a),
        Type::Record(r) => r.fields.iter().any(|(_, t)| has_unknown(t)),
        Type::Forall(_, _, b) => has_unknown(b),
        _ => false,
    }
}

/// Position of a constructor in the normal-form grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstructorClass {
    /// Normal constructor (sort C).
    Normal,
    /// Neutral constructor stuck on a variable (sort E).
    Neutral,
    /// Normal row (sort S).
    NormalRow,
    /// Neutral row (sort U).
    NeutralRow,
    /// A computation rule applies somewhere.
    NotNormal,
}

/// Classifies a constructor against the normal and neutral grammars,
/// independently of [`reduce_constructor_step`].
pub fn classify_constructor(c: &Constructor) -> ConstructorClass {
    use ConstructorClass as K;
    if is_neutral(c) {
        return K::Neutral;
    }
    if is_neutral_row(c) {
        return K::NeutralRow;
    }
    if is_normal_row(c) {
        return K::NormalRow;
    }
    if is_normal(c) {
        return K::Normal;
    }
    K::NotNormal
}

fn is_neutral(c: &Constructor) -> bool {
    match c {
        Constructor::Var(_) => true,
        Constructor::App(f, a) => is_neutral(f) && is_normal_any(a),
        Constructor::Typerec(a, bs) => is_neutral(a) && bs.iter().all(is_normal_any),
        _ => false,
    }
}

fn is_normal(c: &Constructor) -> bool {
    match c {
        Constructor::BoolC | Constructor::IntC | Constructor::StringC => true,
        Constructor::ListC(a) | Constructor::TraceC(a) => is_normal(a),
        Constructor::RecordC(r) => is_normal_row(r),
        Constructor::Lam(_, _, b) => is_normal_any(b),
        other => is_neutral(other),
    }
}

fn is_neutral_row(c: &Constructor) -> bool {
    match c {
        Constructor::Rmap(f, r) => is_normal(f) && is_neutral_row(r),
        other => is_neutral(other),
    }
}

fn is_normal_row(c: &Constructor) -> bool {
    match c {
        Constructor::RowEmpty => true,
        Constructor::RowExtend(l, h, t) => {
            let sorted = match &**t {
                Constructor::RowExtend(l2, _, _) => l < l2,
                _ => true,
            };
            sorted && is_normal(h) && is_normal_row(t)
        }
        other => is_neutral_row(other),
    }
}

fn is_normal_any(c: &Constructor) -> bool {
    is_normal(c) || is_normal_row(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_constructor, parse_type, Env};

    fn con(s: &str) -> Constructor {
        parse_constructor(s, &Env::default()).unwrap()
    }

    fn ty(s: &str) -> Type {
        parse_type(s, &Env::default()).unwrap()
    }

    const TRACE: &str = "\\a. Typerec a (Trace Bool, Trace Int, Trace String, \\b. \\c. [c], \\r:Row. \\s:Row. Record s, \\b. \\t. t)";
    const VALUE: &str = "\\a. Typerec a (Bool, Int, String, \\b. \\c. [c], \\r:Row. \\s:Row. Record s, \\b. \\t. b)";

    #[test]
    fn kinds_of_examples() {
        let mut ctx = Context::new();
        assert_eq!(kind_of_constructor(&mut ctx, &Constructor::BoolC), Ok(Kind::Type));
        assert_eq!(
            kind_of_constructor(&mut ctx, &con("\\a. [a]")),
            Ok(Kind::arrow(Kind::Type, Kind::Type))
        );
        assert_eq!(kind_of_constructor(&mut ctx, &con(TRACE)), Ok(Kind::arrow(Kind::Type, Kind::Type)));
        assert_eq!(kind_of_type(&mut ctx, &ty("forall a. a -> a")), Ok(Kind::Type));
        assert_eq!(kind_of_type(&mut ctx, &ty("T((\\a. a) Bool)")), Ok(Kind::Type));
    }

    #[test]
    fn kind_errors() {
        let mut ctx = Context::new();
        assert_eq!(
            kind_of_constructor(&mut ctx, &con("a")),
            Err(TypeError::UnboundTypeVariable("a".into()))
        );
        assert!(matches!(kind_of_constructor(&mut ctx, &con("Rmap Int ()")), Err(TypeError::KindMismatch { .. })));
        assert!(matches!(kind_of_constructor(&mut ctx, &con("{a : ()}")), Err(TypeError::KindMismatch { .. })));
    }

    #[test]
    fn step_examples() {
        assert_eq!(reduce_constructor_step(&con("(\\a. a) Int")), Some(Constructor::IntC));
        assert_eq!(
            reduce_constructor_step(&con("Typerec Bool (Int, Bool, Bool, \\a. \\b. b, \\r:Row. \\s:Row. Int, \\a. \\b. b)")),
            Some(Constructor::IntC)
        );
        assert_eq!(reduce_constructor_step(&con("Rmap F ()")), Some(Constructor::RowEmpty));
        assert_eq!(reduce_constructor_step(&con("a")), None);
    }

    #[test]
    fn trace_of_list_of_record() {
        let c = Constructor::app(con(TRACE), con("[{a : Int}]"));
        assert_eq!(normalize_constructor(&c).unwrap(), con("[{a : Trace Int}]"));
    }

    #[test]
    fn value_after_trace() {
        for s in ["[Int]", "{a : [{b : String}], c : Bool}", "Int"] {
            let c = con(s);
            let vt = Constructor::app(con(VALUE), Constructor::app(con(TRACE), c.clone()));
            assert!(constructors_equal(&Context::new(), &vt, &c, &Kind::Type).unwrap(), "{s}");
        }
    }

    #[test]
    fn equality_examples() {
        let ctx = Context::new();
        assert!(!constructors_equal(&ctx, &Constructor::BoolC, &Constructor::IntC, &Kind::Type).unwrap());
        assert!(constructors_equal(
            &ctx,
            &con("Typerec Bool (Int, Bool, Bool, \\a. \\b. b, \\r:Row. \\s:Row. Int, \\a. \\b. b)"),
            &Constructor::IntC,
            &Kind::Type
        )
        .unwrap());
        let f = Context::new().with_type("f", Kind::arrow(Kind::Type, Kind::Type));
        assert!(constructors_equal(&f, &con("\\a. f a"), &con("f"), &Kind::arrow(Kind::Type, Kind::Type)).unwrap());
        assert!(types_equal(&ctx, &ty("T(Bool)"), &Type::Bool).unwrap());
        let traced_int = Type::Embed(Constructor::app(con(TRACE), Constructor::IntC));
        assert!(types_equal(&ctx, &traced_int, &ty("Trace Int")).unwrap());
        assert!(!types_equal(&ctx, &ty("[Int]"), &ty("[Bool]")).unwrap());
        assert!(types_equal(&ctx, &ty("forall a. a -> a"), &ty("forall b. T(b) -> b")).unwrap());
    }

    #[test]
    fn rmap_over_open_row_leaves_residual() {
        let c = normalize_constructor(&con("Rmap F (a : Int | r)")).unwrap();
        assert_eq!(c, con("(a : F Int | Rmap F r)"));
        assert_eq!(classify_constructor(&c), ConstructorClass::NormalRow);
    }

    #[test]
    fn fuel_is_enforced() {
        let omega = con("(\\x:Type -> Type. x x)");
        // Ill-kinded, but the step function does not care; it loops.
        let c = Constructor::app(omega.clone(), omega);
        assert_eq!(normalize_constructor_with(&c, 50), Err(TypeError::FuelExhausted(50)));
    }

    #[test]
    fn not_comparable() {
        assert!(matches!(canon(&ty("T(\\a. a)")), Err(TypeError::NotComparable(_))));
    }
}
