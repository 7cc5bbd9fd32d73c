//! Term reduction: β-rules, commuting conversions and congruence, the
//! normal-form classifier, and extraction of NRC queries from normal
//! forms.
//!
//! The strategy is leftmost-outermost. At each node the β-rules are tried
//! first, then the commuting conversions, then reduction of the
//! constructors stored in the node, and only then the subterms from left
//! to right.
//!
//! Fixpoints are unrolled lazily: `fix` is unrolled only in head position
//! of an application or type application, and only when that application
//! is not under a λ, a Λ, a `fix`, or a case branch. Recursive calls inside
//! the body of a function that is never applied therefore stay folded.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::selftrace;
use crate::stdlib::Stdlib;
use crate::syntax::{
    alpha_equal, fresh_name, print, subst_con_in_term, subst_term, Constructor, Label, Literal, Name, RowType, Term,
};
use crate::types::{classify_constructor, normalize_constructor, ConstructorClass, Context};

pub const DEFAULT_FUEL: usize = 1_000_000;
pub const DEFAULT_UNROLL_LIMIT: usize = 500;

/// Budgets and switches for [`normalize`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizeConfig {
    /// Maximum number of reduction steps.
    pub fuel: usize,
    /// Maximum number of unrollings of the fixpoints with the same binder.
    pub unroll_limit: usize,
    /// Remove duplicate branches of `++` from extracted NRC terms.
    pub dedup_lineage: bool,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig { fuel: DEFAULT_FUEL, unroll_limit: DEFAULT_UNROLL_LIMIT, dedup_lineage: false }
    }
}

impl NormalizeConfig {
    pub fn validate(&self) -> Result<(), NormalizeError> {
        if self.fuel == 0 {
            return Err(NormalizeError::InvalidConfig(String::from("fuel must be at least 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NormalizeError {
    #[error("normalization gave up after {steps} steps ({reason}); the term may not terminate")]
    FuelExhausted { steps: usize, reason: String, last: Box<Term> },
    #[error("invalid normalizer configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "internal error: `{node}` survived normalization at {path}; normal query terms are NRC, so this is a normalizer bug"
    )]
    ResidualConstruct { node: &'static str, path: String },
    #[error("NRC extraction needs a query context (variables bound to records of base types)")]
    NotAQueryContext,
}

/// Sort of a term in the normal-form grammar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NormalFormClass {
    /// Normal term (sort M).
    NormalTerm,
    /// Neutral term stuck on a variable or neutral constructor (sort F).
    NeutralTerm,
    /// Equality test, allowed as an `if` condition (sort H).
    NeutralConditional,
    /// `rmap` over a neutral row, which may be projected from (sort P).
    NeutralProjection,
    /// A table (sort T).
    NeutralTable,
    /// Not normal; names the leftmost-outermost redex.
    NotNormal(String),
}

impl NormalFormClass {
    pub fn is_normal(&self) -> bool {
        !matches!(self, NormalFormClass::NotNormal(_))
    }
}

// ---------------------------------------------------------------------------
// Positions and reduction state

#[derive(Clone, Copy, Debug)]
struct Pos {
    /// May a `fix` in head position be unrolled here?
    unroll: bool,
}

impl Pos {
    const TOP: Pos = Pos { unroll: true };
    const FROZEN: Pos = Pos { unroll: false };
}

struct State {
    fuel: usize,
    steps: usize,
    unroll_limit: Option<usize>,
    unrolls: BTreeMap<Name, usize>,
    stdlib: Option<Option<Stdlib>>,
}

impl State {
    fn new(cfg: &NormalizeConfig) -> State {
        State { fuel: cfg.fuel, steps: 0, unroll_limit: Some(cfg.unroll_limit), unrolls: BTreeMap::new(), stdlib: None }
    }

    fn unlimited() -> State {
        State { fuel: usize::MAX, steps: 0, unroll_limit: None, unrolls: BTreeMap::new(), stdlib: None }
    }

    fn unroll(&mut self, f: &Name, at: &Term) -> Result<(), NormalizeError> {
        let n = self.unrolls.entry(f.clone()).or_insert(0);
        *n += 1;
        match self.unroll_limit {
            Some(limit) if *n > limit => Err(NormalizeError::FuelExhausted {
                steps: self.steps,
                reason: format!("fixpoint `{f}` unrolled more than {limit} times"),
                last: Box::new(at.clone()),
            }),
            _ => Ok(()),
        }
    }

    fn tick(&mut self, at: &Term) -> Result<(), NormalizeError> {
        self.steps += 1;
        if self.steps > self.fuel {
            return Err(NormalizeError::FuelExhausted {
                steps: self.steps - 1,
                reason: format!("fuel of {} steps used up", self.fuel),
                last: Box::new(at.clone()),
            });
        }
        Ok(())
    }

    fn value_bool(&mut self) -> Option<Term> {
        let lib = self.stdlib.get_or_insert_with(|| Stdlib::load().ok()).as_ref()?;
        lib.value_at(&selftrace::trace_bool()).ok()
    }
}

// ---------------------------------------------------------------------------
// Root rules

fn arc(t: Term) -> Arc<Term> {
    Arc::new(t)
}

fn is_closed(m: &Term) -> bool {
    m.free_vars().is_empty() && m.free_tyvars().is_empty()
}

fn con_not_normal(c: &Constructor) -> bool {
    classify_constructor(c) == ConstructorClass::NotNormal
}

/// Normalizes a constructor stored in a term, if it is not normal yet.
fn reduce_con(c: &Constructor) -> Option<Constructor> {
    if con_not_normal(c) {
        normalize_constructor(c).ok()
    } else {
        None
    }
}

/// The fields of a normal, closed row, or `None` for any other row.
fn closed_row(s: &Constructor) -> Option<Vec<(Label, Constructor)>> {
    let (fields, tail) = s.row_spine();
    (*tail == Constructor::RowEmpty).then(|| fields.into_iter().map(|(l, c)| (l.clone(), c.clone())).collect())
}

/// Binds the term variable `x` and type variable `a` of a two-binder
/// branch to `c` and `m`.
fn subst_both(body: &Arc<Term>, a: &str, c: &Constructor, x: &str, m: &Arc<Term>) -> Term {
    (*subst_term(&subst_con_in_term(body, a, c), x, m)).clone()
}

/// One rewrite at the root of `m`, or `None`.
fn root_step(m: &Term, pos: Pos, st: &mut State) -> Result<Option<Term>, NormalizeError> {
    use Term as T;
    let r = match m {
        T::App(f, n) => match &**f {
            T::Lam(x, _, b) => Some((*subst_term(b, x, n)).clone()),
            T::Fix(g, _, b) if pos.unroll => {
                st.unroll(g, m)?;
                Some(T::App(subst_term(b, g, f), n.clone()))
            }
            T::If(l, a, b) => Some(T::If(l.clone(), arc(T::App(a.clone(), n.clone())), arc(T::App(b.clone(), n.clone())))),
            _ => None,
        },
        T::TyApp(f, c) => match &**f {
            T::TyLam(a, _, b) => Some((*subst_con_in_term(b, a, c)).clone()),
            T::Fix(g, _, b) if pos.unroll => {
                st.unroll(g, m)?;
                Some(T::TyApp(subst_term(b, g, f), c.clone()))
            }
            T::If(l, a, b) => {
                Some(T::If(l.clone(), arc(T::TyApp(a.clone(), c.clone())), arc(T::TyApp(b.clone(), c.clone()))))
            }
            _ => reduce_con(c).map(|c| T::TyApp(f.clone(), c)),
        },
        T::If(c, t, e) => match &**c {
            T::Const(Literal::Bool(true)) => Some((**t).clone()),
            T::Const(Literal::Bool(false)) => Some((**e).clone()),
            T::If(l, m1, m2) => Some(T::If(
                l.clone(),
                arc(T::If(m1.clone(), t.clone(), e.clone())),
                arc(T::If(m2.clone(), t.clone(), e.clone())),
            )),
            _ => None,
        },
        T::Project(r, l) => match &**r {
            T::RecordExt(..) => r.record_spine().0.into_iter().find(|(k, _)| *k == l).map(|(_, v)| v.clone()),
            T::If(c, a, b) => Some(T::If(
                c.clone(),
                arc(T::Project(a.clone(), l.clone())),
                arc(T::Project(b.clone(), l.clone())),
            )),
            _ => None,
        },
        T::RMap(s, f, n) => match reduce_con(s) {
            Some(s) => Some(T::RMap(s, f.clone(), n.clone())),
            None => closed_row(s).map(|fields| {
                T::record(fields.into_iter().map(|(l, c)| {
                    let call = T::App(arc(T::TyApp(f.clone(), c)), arc(T::Project(n.clone(), l.clone())));
                    (l, call)
                }))
            }),
        },
        T::RFold(s, l, z, n) => match reduce_con(s) {
            Some(s) => Some(T::RFold(s, l.clone(), z.clone(), n.clone())),
            None => closed_row(s).map(|fields| {
                let mut acc = z.clone();
                for (k, _) in fields.into_iter().rev() {
                    let head = T::App(l.clone(), arc(T::Project(n.clone(), k)));
                    acc = arc(T::App(arc(head), acc));
                }
                (*acc).clone()
            }),
        },
        T::For(x, src, body) => match &**src {
            T::EmptyList => Some(T::EmptyList),
            T::Singleton(v) => Some((*subst_term(body, x, v)).clone()),
            T::Concat(a, b) => Some(T::Concat(
                arc(T::For(x.clone(), a.clone(), body.clone())),
                arc(T::For(x.clone(), b.clone(), body.clone())),
            )),
            T::For(y, l, inner) => {
                let mut fv = body.free_vars();
                fv.remove(x);
                let (y, inner) = if fv.contains(y) {
                    let mut avoid = fv;
                    avoid.extend(inner.free_vars());
                    avoid.insert(x.clone());
                    let y2 = fresh_name(y, &avoid);
                    let inner = subst_term(inner, y, &T::Var(y2.clone()));
                    (y2, inner)
                } else {
                    (y.clone(), inner.clone())
                };
                Some(T::For(y, l.clone(), arc(T::For(x.clone(), inner, body.clone()))))
            }
            T::If(c, a, b) => Some(T::If(
                c.clone(),
                arc(T::For(x.clone(), a.clone(), body.clone())),
                arc(T::For(x.clone(), b.clone(), body.clone())),
            )),
            _ => None,
        },
        T::Tracecase(s, bs) => match &**s {
            T::TrLit(v) => Some((*subst_term(&bs.lit.body, &bs.lit.var, v)).clone()),
            T::TrIf(v) => Some((*subst_term(&bs.if_.body, &bs.if_.var, v)).clone()),
            T::TrFor(c, v) => Some(subst_both(&bs.for_.body, &bs.for_.tyvar, c, &bs.for_.var, v)),
            T::TrCell(v) => Some((*subst_term(&bs.cell.body, &bs.cell.var, v)).clone()),
            T::TrOpEq(c, v) => Some(subst_both(&bs.op_eq.body, &bs.op_eq.tyvar, c, &bs.op_eq.var, v)),
            T::TrOpPlus(v) => Some((*subst_term(&bs.op_plus.body, &bs.op_plus.var, v)).clone()),
            T::If(c, a, b) => Some(T::If(
                c.clone(),
                arc(T::Tracecase(a.clone(), bs.clone())),
                arc(T::Tracecase(b.clone(), bs.clone())),
            )),
            _ => None,
        },
        T::Typecase(c, mot, bs) => match reduce_con(c) {
            Some(c) => Some(T::Typecase(c, mot.clone(), bs.clone())),
            None => match c {
                Constructor::BoolC => Some((*bs.bool_).clone()),
                Constructor::IntC => Some((*bs.int).clone()),
                Constructor::StringC => Some((*bs.string).clone()),
                Constructor::ListC(d) => Some((*subst_con_in_term(&bs.list.body, &bs.list.tyvar, d)).clone()),
                Constructor::RecordC(d) => Some((*subst_con_in_term(&bs.record.body, &bs.record.tyvar, d)).clone()),
                Constructor::TraceC(d) => Some((*subst_con_in_term(&bs.trace.body, &bs.trace.tyvar, d)).clone()),
                _ => None,
            },
        },
        T::TrFor(c, v) => reduce_con(c).map(|c| T::TrFor(c, v.clone())),
        T::TrOpEq(c, v) => reduce_con(c).map(|c| T::TrOpEq(c, v.clone())),
        T::TraceOf(q) => {
            if is_closed(q) && classify(q).is_normal() {
                match st.value_bool() {
                    Some(vb) => selftrace::self_trace_with(&Context::new(), q, &vb).ok(),
                    None => None,
                }
            } else {
                None
            }
        }
        _ => None,
    };
    Ok(r)
}

// ---------------------------------------------------------------------------
// Congruence

/// Position of the children of `m`: binders and case branches freeze
/// fixpoint unrolling.
fn child_pos(m: &Term, pos: Pos) -> Pos {
    match m {
        Term::Lam(..) | Term::TyLam(..) | Term::Fix(..) | Term::Typecase(..) => Pos::FROZEN,
        _ => pos,
    }
}

/// Rebuilds `m` with `f` applied to each immediate subterm in left-to-right
/// order. The scrutinee of a `tracecase` keeps the outer position; its
/// branches are frozen.
fn map_children<E>(
    m: &Term,
    pos: Pos,
    f: &mut dyn FnMut(&Arc<Term>, Pos) -> Result<Arc<Term>, E>,
) -> Result<Term, E> {
    use Term as T;
    let p = child_pos(m, pos);
    Ok(match m {
        T::Const(_) | T::Var(_) | T::EmptyRecord | T::EmptyList | T::Table(..) => m.clone(),
        T::Lam(x, a, b) => T::Lam(x.clone(), a.clone(), f(b, p)?),
        T::TyLam(x, k, b) => T::TyLam(x.clone(), k.clone(), f(b, p)?),
        T::Fix(x, a, b) => T::Fix(x.clone(), a.clone(), f(b, p)?),
        T::App(a, b) => {
            let a = f(a, p)?;
            T::App(a, f(b, p)?)
        }
        T::TyApp(a, c) => T::TyApp(f(a, p)?, c.clone()),
        T::If(a, b, c) => {
            let a = f(a, p)?;
            let b = f(b, p)?;
            T::If(a, b, f(c, p)?)
        }
        T::Plus(a, b) => {
            let a = f(a, p)?;
            T::Plus(a, f(b, p)?)
        }
        T::Eq(a, b) => {
            let a = f(a, p)?;
            T::Eq(a, f(b, p)?)
        }
        T::RecordExt(l, a, b) => {
            let a = f(a, p)?;
            T::RecordExt(l.clone(), a, f(b, p)?)
        }
        T::Project(a, l) => T::Project(f(a, p)?, l.clone()),
        T::RMap(s, a, b) => {
            let a = f(a, p)?;
            T::RMap(s.clone(), a, f(b, p)?)
        }
        T::RFold(s, a, b, c) => {
            let a = f(a, p)?;
            let b = f(b, p)?;
            T::RFold(s.clone(), a, b, f(c, p)?)
        }
        T::Singleton(a) => T::Singleton(f(a, p)?),
        T::Concat(a, b) => {
            let a = f(a, p)?;
            T::Concat(a, f(b, p)?)
        }
        T::For(x, a, b) => {
            let a = f(a, p)?;
            T::For(x.clone(), a, f(b, p)?)
        }
        T::TrLit(a) => T::TrLit(f(a, p)?),
        T::TrIf(a) => T::TrIf(f(a, p)?),
        T::TrFor(c, a) => T::TrFor(c.clone(), f(a, p)?),
        T::TrCell(a) => T::TrCell(f(a, p)?),
        T::TrOpEq(c, a) => T::TrOpEq(c.clone(), f(a, p)?),
        T::TrOpPlus(a) => T::TrOpPlus(f(a, p)?),
        T::TraceOf(a) => T::TraceOf(f(a, p)?),
        T::Tracecase(s, bs) => {
            let s = f(s, p)?;
            let mut nb = (**bs).clone();
            nb.lit.body = f(&bs.lit.body, Pos::FROZEN)?;
            nb.if_.body = f(&bs.if_.body, Pos::FROZEN)?;
            nb.for_.body = f(&bs.for_.body, Pos::FROZEN)?;
            nb.cell.body = f(&bs.cell.body, Pos::FROZEN)?;
            nb.op_eq.body = f(&bs.op_eq.body, Pos::FROZEN)?;
            nb.op_plus.body = f(&bs.op_plus.body, Pos::FROZEN)?;
            T::Tracecase(s, Arc::new(nb))
        }
        T::Typecase(c, mot, bs) => {
            let mut nb = (**bs).clone();
            nb.bool_ = f(&bs.bool_, p)?;
            nb.int = f(&bs.int, p)?;
            nb.string = f(&bs.string, p)?;
            nb.list.body = f(&bs.list.body, p)?;
            nb.record.body = f(&bs.record.body, p)?;
            nb.trace.body = f(&bs.trace.body, p)?;
            T::Typecase(c.clone(), mot.clone(), Arc::new(nb))
        }
    })
}

fn step_in(m: &Term, pos: Pos, st: &mut State) -> Result<Option<Term>, NormalizeError> {
    if let Some(r) = root_step(m, pos, st)? {
        return Ok(Some(r));
    }
    let mut done = false;
    let mut err = None;
    let rebuilt = map_children::<NormalizeError>(m, pos, &mut |c, p| {
        if done || err.is_some() {
            return Ok(c.clone());
        }
        match step_in(c, p, st) {
            Ok(Some(r)) => {
                done = true;
                Ok(arc(r))
            }
            Ok(None) => Ok(c.clone()),
            Err(e) => {
                err = Some(e);
                Ok(c.clone())
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(done.then_some(rebuilt))
}

/// One reduction step under the canonical strategy, or `None` if `m` is
/// in normal form. Fixpoints are unrolled without limit.
pub fn step(m: &Term) -> Option<Term> {
    step_in(m, Pos::TOP, &mut State::unlimited()).ok().flatten()
}

fn norm(m: &Arc<Term>, pos: Pos, st: &mut State) -> Result<Arc<Term>, NormalizeError> {
    let mut cur = m.clone();
    loop {
        if let Some(r) = root_step(&cur, pos, st)? {
            st.tick(&cur)?;
            cur = arc(r);
            continue;
        }
        let next = map_children(&cur, pos, &mut |c, p| norm(c, p, st))?;
        if let Some(r) = root_step(&next, pos, st)? {
            st.tick(&next)?;
            cur = arc(r);
            continue;
        }
        return Ok(arc(next));
    }
}

/// Reduces `m` to normal form.
///
/// Subterms are normalized before their parent is re-examined, so the
/// rewrites performed form a valid reduction sequence but not necessarily
/// the one [`step`] would choose. The normal form is the same.
pub fn normalize(m: &Term, cfg: &NormalizeConfig) -> Result<Term, NormalizeError> {
    cfg.validate()?;
    let mut st = State::new(cfg);
    Ok((*norm(&arc(m.clone()), Pos::TOP, &mut st)?).clone())
}

/// Reduces `m` to normal form one [`step`] at a time and calls `on_step`
/// with every intermediate term, starting with `m` itself.
pub fn normalize_traced(
    m: &Term,
    cfg: &NormalizeConfig,
    mut on_step: impl FnMut(&Term),
) -> Result<Term, NormalizeError> {
    cfg.validate()?;
    let mut st = State::new(cfg);
    let mut cur = m.clone();
    on_step(&cur);
    while let Some(next) = step_in(&cur, Pos::TOP, &mut st)? {
        st.tick(&cur)?;
        cur = next;
        on_step(&cur);
    }
    Ok(cur)
}

// ---------------------------------------------------------------------------
// Classification

/// Classifies `m` against the normal-form grammar. This mirrors the redex
/// patterns of [`step`] but is written independently so the two can be
/// tested against each other.
pub fn classify(m: &Term) -> NormalFormClass {
    classify_at(m, true)
}

fn classify_at(m: &Term, unroll: bool) -> NormalFormClass {
    if let Some(reason) = redex(m, unroll) {
        return NormalFormClass::NotNormal(reason);
    }
    let mut found = None;
    let binder = matches!(m, Term::Lam(..) | Term::TyLam(..) | Term::Fix(..) | Term::Typecase(..));
    let branches: Vec<*const Term> = match m {
        Term::Tracecase(_, bs) => {
            [&bs.lit.body, &bs.if_.body, &bs.for_.body, &bs.cell.body, &bs.op_eq.body, &bs.op_plus.body]
                .into_iter()
                .map(|b| Arc::as_ptr(b))
                .collect()
        }
        _ => Vec::new(),
    };
    m.for_each_child(|c| {
        if found.is_none() {
            let frozen = binder || branches.contains(&(c as *const Term));
            if let NormalFormClass::NotNormal(r) = classify_at(c, unroll && !frozen) {
                found = Some(r);
            }
        }
    });
    if let Some(r) = found {
        return NormalFormClass::NotNormal(r);
    }
    sort_of(m)
}

fn is_record_literal(m: &Term) -> bool {
    matches!(m, Term::RecordExt(..) | Term::EmptyRecord)
}

fn is_row_closed_normal(s: &Constructor) -> bool {
    let mut cur = s;
    loop {
        match cur {
            Constructor::RowEmpty => return true,
            Constructor::RowExtend(_, _, t) => cur = t,
            _ => return false,
        }
    }
}

/// The rule that applies at the root of `m`, if any.
fn redex(m: &Term, unroll: bool) -> Option<String> {
    use Term as T;
    let is_if = |t: &Term| matches!(t, T::If(..));
    let reason = match m {
        T::App(f, _) => match &**f {
            T::Lam(..) => "application of a λ",
            T::Fix(..) if unroll => "fix in head position",
            T::If(..) => "if under application",
            _ => return None,
        },
        T::TyApp(f, c) => match &**f {
            T::TyLam(..) => "type application of a Λ",
            T::Fix(..) if unroll => "fix in head position",
            T::If(..) => "if under type application",
            _ if con_not_normal(c) => "constructor redex in type argument",
            _ => return None,
        },
        T::If(c, _, _) => match &**c {
            T::Const(Literal::Bool(_)) => "if on a constant",
            T::If(..) => "if under if",
            _ => return None,
        },
        T::Project(r, l) => {
            if is_if(r) {
                "if under projection"
            } else if is_record_literal(r) && r.record_spine().0.iter().any(|(k, _)| *k == l) {
                "projection from a record literal"
            } else {
                return None;
            }
        }
        T::RMap(s, _, _) => {
            if con_not_normal(s) {
                "constructor redex in rmap row"
            } else if is_row_closed_normal(s) {
                "rmap over a closed row"
            } else {
                return None;
            }
        }
        T::RFold(s, _, _, _) => {
            if con_not_normal(s) {
                "constructor redex in rfold row"
            } else if is_row_closed_normal(s) {
                "rfold over a closed row"
            } else {
                return None;
            }
        }
        T::For(_, src, _) => match &**src {
            T::EmptyList => "for over []",
            T::Singleton(_) => "for over a singleton",
            T::Concat(..) => "for over ++",
            T::For(..) => "for over for",
            T::If(..) => "if under for source",
            _ => return None,
        },
        T::Tracecase(s, _) => {
            if s.is_trace_constructor() {
                "tracecase on a trace constructor"
            } else if is_if(s) {
                "if under tracecase"
            } else {
                return None;
            }
        }
        T::Typecase(c, _, _) => {
            if con_not_normal(c) {
                "constructor redex in typecase scrutinee"
            } else if matches!(
                c,
                Constructor::BoolC
                    | Constructor::IntC
                    | Constructor::StringC
                    | Constructor::ListC(_)
                    | Constructor::RecordC(_)
                    | Constructor::TraceC(_)
            ) {
                "typecase on a known constructor"
            } else {
                return None;
            }
        }
        T::TrFor(c, _) | T::TrOpEq(c, _) if con_not_normal(c) => "constructor redex in trace constructor",
        T::TraceOf(q) => {
            if is_closed(q) && classify(q).is_normal() && traceable(q) {
                "trace of a normal query"
            } else {
                return None;
            }
        }
        _ => return None,
    };
    Some(String::from(reason))
}

fn traceable(q: &Term) -> bool {
    let Ok(lib) = Stdlib::load() else { return false };
    let Ok(vb) = lib.value_at(&selftrace::trace_bool()) else { return false };
    selftrace::self_trace_with(&Context::new(), q, &vb).is_ok()
}

fn sort_of(m: &Term) -> NormalFormClass {
    use NormalFormClass as K;
    match m {
        Term::Var(_)
        | Term::Project(..)
        | Term::App(..)
        | Term::TyApp(..)
        | Term::RFold(..)
        | Term::Tracecase(..)
        | Term::Typecase(..) => K::NeutralTerm,
        Term::RMap(..) => K::NeutralProjection,
        Term::Eq(..) => K::NeutralConditional,
        Term::Table(..) => K::NeutralTable,
        _ => K::NormalTerm,
    }
}

// ---------------------------------------------------------------------------
// NRC

/// Terms of the nested relational calculus: the target of normalization
/// for queries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NrcTerm {
    Const(Literal),
    Var(Name),
    Record(Vec<(Label, NrcTerm)>),
    Project(Box<NrcTerm>, Label),
    Plus(Box<NrcTerm>, Box<NrcTerm>),
    Eq(Box<NrcTerm>, Box<NrcTerm>),
    If(Box<NrcTerm>, Box<NrcTerm>, Box<NrcTerm>),
    Table(Name, RowType),
    Empty,
    Singleton(Box<NrcTerm>),
    Concat(Box<NrcTerm>, Box<NrcTerm>),
    For(Name, Box<NrcTerm>, Box<NrcTerm>),
}

impl NrcTerm {
    /// The same query as a term of the full calculus.
    pub fn to_term(&self) -> Term {
        let b = |n: &NrcTerm| arc(n.to_term());
        match self {
            NrcTerm::Const(c) => Term::Const(c.clone()),
            NrcTerm::Var(x) => Term::Var(x.clone()),
            NrcTerm::Record(fs) => Term::record(fs.iter().map(|(l, v)| (l.clone(), v.to_term()))),
            NrcTerm::Project(r, l) => Term::Project(b(r), l.clone()),
            NrcTerm::Plus(x, y) => Term::Plus(b(x), b(y)),
            NrcTerm::Eq(x, y) => Term::Eq(b(x), b(y)),
            NrcTerm::If(c, x, y) => Term::If(b(c), b(x), b(y)),
            NrcTerm::Table(n, s) => Term::Table(n.clone(), s.clone()),
            NrcTerm::Empty => Term::EmptyList,
            NrcTerm::Singleton(x) => Term::Singleton(b(x)),
            NrcTerm::Concat(x, y) => Term::Concat(b(x), b(y)),
            NrcTerm::For(x, s, body) => Term::For(x.clone(), b(s), b(body)),
        }
    }

    pub fn size(&self) -> usize {
        self.to_term().size()
    }
}

impl fmt::Display for NrcTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(&self.to_term()))
    }
}

/// Re-expresses the normal term `m` in the NRC grammar. `ctx` must be a
/// query context. Any other construct left in `m` is reported as a
/// [`NormalizeError::ResidualConstruct`].
pub fn extract_nrc(m: &Term, ctx: &Context) -> Result<NrcTerm, NormalizeError> {
    if !ctx.is_query_context() {
        return Err(NormalizeError::NotAQueryContext);
    }
    let mut path = Vec::new();
    extract(m, &mut path)
}

fn extract(m: &Term, path: &mut Vec<String>) -> Result<NrcTerm, NormalizeError> {
    let sub = |t: &Term, seg: &str, path: &mut Vec<String>| -> Result<Box<NrcTerm>, NormalizeError> {
        path.push(String::from(seg));
        let r = extract(t, path);
        path.pop();
        r.map(Box::new)
    };
    Ok(match m {
        Term::Const(c) => NrcTerm::Const(c.clone()),
        Term::Var(x) => NrcTerm::Var(x.clone()),
        Term::EmptyRecord => NrcTerm::Record(Vec::new()),
        Term::RecordExt(..) => {
            let (fields, tail) = m.record_spine();
            if *tail != Term::EmptyRecord {
                path.push(String::from("record tail"));
                return Err(residual(tail, path));
            }
            let mut out = Vec::new();
            for (l, v) in fields {
                out.push((l.clone(), *sub(v, &format!("field {l}"), path)?));
            }
            NrcTerm::Record(out)
        }
        Term::Project(r, l) => NrcTerm::Project(sub(r, "projection", path)?, l.clone()),
        Term::Plus(a, b) => NrcTerm::Plus(sub(a, "+ left", path)?, sub(b, "+ right", path)?),
        Term::Eq(a, b) => NrcTerm::Eq(sub(a, "== left", path)?, sub(b, "== right", path)?),
        Term::If(c, a, b) => {
            NrcTerm::If(sub(c, "if condition", path)?, sub(a, "then", path)?, sub(b, "else", path)?)
        }
        Term::Table(n, s) => NrcTerm::Table(n.clone(), s.clone()),
        Term::EmptyList => NrcTerm::Empty,
        Term::Singleton(a) => NrcTerm::Singleton(sub(a, "singleton", path)?),
        Term::Concat(a, b) => NrcTerm::Concat(sub(a, "++ left", path)?, sub(b, "++ right", path)?),
        Term::For(x, s, b) => {
            NrcTerm::For(x.clone(), sub(s, &format!("for {x} source"), path)?, sub(b, &format!("for {x} body"), path)?)
        }
        other => return Err(residual(other, path)),
    })
}

fn residual(m: &Term, path: &[String]) -> NormalizeError {
    let path = if path.is_empty() { String::from("the root") } else { path.join(" / ") };
    NormalizeError::ResidualConstruct { node: m.node_name(), path }
}

/// Drops branches of `++` chains that are alpha-equal to an earlier branch,
/// and empty branches, bottom-up. This only preserves meaning when results
/// are read as sets.
pub fn dedup_concat(m: &NrcTerm) -> NrcTerm {
    let b = |n: &NrcTerm| Box::new(dedup_concat(n));
    match m {
        NrcTerm::Concat(..) => {
            let mut parts = Vec::new();
            flatten_concat(m, &mut parts);
            let mut kept: Vec<NrcTerm> = Vec::new();
            let mut kept_terms: Vec<Term> = Vec::new();
            for p in parts {
                let p = dedup_concat(p);
                if p == NrcTerm::Empty {
                    continue;
                }
                let t = p.to_term();
                if kept_terms.iter().any(|k| alpha_equal(k, &t)) {
                    continue;
                }
                kept_terms.push(t);
                kept.push(p);
            }
            let mut it = kept.into_iter().rev();
            match it.next() {
                None => NrcTerm::Empty,
                Some(last) => it.fold(last, |acc, p| NrcTerm::Concat(Box::new(p), Box::new(acc))),
            }
        }
        NrcTerm::Const(_) | NrcTerm::Var(_) | NrcTerm::Table(..) | NrcTerm::Empty => m.clone(),
        NrcTerm::Record(fs) => NrcTerm::Record(fs.iter().map(|(l, v)| (l.clone(), dedup_concat(v))).collect()),
        NrcTerm::Project(r, l) => NrcTerm::Project(b(r), l.clone()),
        NrcTerm::Plus(x, y) => NrcTerm::Plus(b(x), b(y)),
        NrcTerm::Eq(x, y) => NrcTerm::Eq(b(x), b(y)),
        NrcTerm::If(c, x, y) => NrcTerm::If(b(c), b(x), b(y)),
        NrcTerm::Singleton(x) => NrcTerm::Singleton(b(x)),
        NrcTerm::For(x, s, body) => NrcTerm::For(x.clone(), b(s), b(body)),
    }
}

fn flatten_concat<'a>(m: &'a NrcTerm, out: &mut Vec<&'a NrcTerm>) {
    match m {
        NrcTerm::Concat(a, b) => {
            flatten_concat(a, out);
            flatten_concat(b, out);
        }
        other => out.push(other),
    }
}

/// Names of the constructs that must not occur in an NRC query.
pub fn non_nrc_nodes(m: &Term) -> BTreeSet<&'static str> {
    let mut out = BTreeSet::new();
    collect_non_nrc(m, &mut out);
    out
}

fn collect_non_nrc(m: &Term, out: &mut BTreeSet<&'static str>) {
    match m {
        Term::Const(_)
        | Term::Var(_)
        | Term::EmptyRecord
        | Term::RecordExt(..)
        | Term::Project(..)
        | Term::Plus(..)
        | Term::Eq(..)
        | Term::If(..)
        | Term::Table(..)
        | Term::EmptyList
        | Term::Singleton(_)
        | Term::Concat(..)
        | Term::For(..) => {}
        other => {
            out.insert(other.node_name());
        }
    }
    m.for_each_child(|c| collect_non_nrc(c, out));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn tm(s: &str) -> Term {
        parse(s).unwrap().main
    }

    fn nf(s: &str) -> Term {
        normalize(&tm(s), &NormalizeConfig::default()).unwrap()
    }

    #[test]
    fn for_rules() {
        assert_eq!(step(&tm("for (x <- []) [x]")), Some(Term::EmptyList));
        assert!(alpha_equal(&step(&tm("for (x <- [1]) [x + x]")).unwrap(), &tm("[1 + 1]")));
    }

    #[test]
    fn tracecase_for_substitutes_both_binders() {
        let m = tm(
            "tracecase For Int {in = Lit 1, out = Lit 2} of {
               Lit x => 0, If x => 0, For a x => (\\y : T(a). 5) 1, Cell x => 0, OpEq a x => 0, OpPlus x => 0 }",
        );
        let r = step(&m).unwrap();
        assert!(alpha_equal(&r, &tm("(\\y : T(Int). 5) 1")), "{}", print(&r));
    }

    #[test]
    fn normal_nrc_is_fixed() {
        let q = tm(r#"for (x <- table "t" {oid : Int, a : Int}) [{a = x.a}]"#);
        assert_eq!(step(&q), None);
        assert_eq!(normalize(&q, &NormalizeConfig::default()).unwrap(), q);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&tm("x")), NormalFormClass::NeutralTerm);
        assert!(!classify(&tm("(\\x : Int. x) 1")).is_normal());
        assert_eq!(classify(&tm(r#"for (x <- table "t" {oid : Int, a : Int}) [x.a]"#)), NormalFormClass::NormalTerm);
        assert_eq!(classify(&tm("x.a == 1")), NormalFormClass::NeutralConditional);
        assert_eq!(classify(&tm(r#"table "t" {oid : Int}"#)), NormalFormClass::NeutralTable);
    }

    #[test]
    fn commuting_conversions() {
        let m = tm("for (x <- for (y <- ys) [y]) [x]");
        assert!(alpha_equal(&step(&m).unwrap(), &tm("for (y <- ys) for (x <- [y]) [x]")));
        let m = tm("for (x <- for (y <- ys) [y]) [{a = x, b = y}]");
        let r = step(&m).unwrap();
        assert!(alpha_equal(&r, &tm("for (y_1 <- ys) for (x <- [y_1]) [{a = x, b = y}]")), "{}", print(&r));
        assert!(alpha_equal(&nf("(if c then {a = 1} else {a = 2}).a"), &tm("if c then 1 else 2")));
    }

    #[test]
    fn rmap_and_rfold_unroll() {
        let r = nf("rmap^(a : Int, b : Int) (/\\t. \\x : T(t). x) {a = 1, b = 2}");
        assert!(alpha_equal(&r, &tm("{a = 1, b = 2}")), "{}", print(&r));
        let r = nf("rfold^(a : Int, b : Int) (\\x : Int. \\y : Int. x + y) 0 {a = 1, b = 2}");
        assert!(alpha_equal(&r, &tm("1 + (2 + 0)")), "{}", print(&r));
    }

    #[test]
    fn fix_unrolls_lazily() {
        let f = "fix (f : Int -> Int). \\x : Int. f x";
        assert_eq!(classify(&tm(f)), NormalFormClass::NormalTerm);
        let cfg = NormalizeConfig { unroll_limit: 10, ..NormalizeConfig::default() };
        let e = normalize(&tm(&format!("({f}) 1")), &cfg).unwrap_err();
        assert!(matches!(e, NormalizeError::FuelExhausted { .. }));
        let cfg = NormalizeConfig { fuel: 50, ..NormalizeConfig::default() };
        assert!(matches!(normalize(&tm(&format!("({f}) 1")), &cfg), Err(NormalizeError::FuelExhausted { .. })));
    }

    #[test]
    fn extract_and_residuals() {
        let q = nf(r#"for (x <- table "t" {oid : Int, a : Int}) [{a = x.a}]"#);
        assert!(extract_nrc(&q, &Context::new()).is_ok());
        let e = extract_nrc(&tm("/\\a. typecase a return z. Int of { Bool => 1, Int => 2, String => 3, List b => 4, Record r => 5, Trace b => 6 }"), &Context::new()).unwrap_err();
        assert!(matches!(e, NormalizeError::ResidualConstruct { node: "type abstraction", .. }));
    }

    #[test]
    fn dedup_examples() {
        let a = extract_nrc(&tm(r#"[{tbl = "xs", row = x.oid}] ++ [{tbl = "xs", row = x.oid}]"#), &Context::new()).unwrap();
        let single = extract_nrc(&tm(r#"[{tbl = "xs", row = x.oid}]"#), &Context::new()).unwrap();
        assert_eq!(dedup_concat(&a), single);
        let b = extract_nrc(&tm("[1] ++ [2]"), &Context::new()).unwrap();
        assert_eq!(dedup_concat(&b), b);
        let c = extract_nrc(&tm("[1] ++ ([1] ++ [1])"), &Context::new()).unwrap();
        assert_eq!(dedup_concat(&c), extract_nrc(&tm("[1]"), &Context::new()).unwrap());
    }

    #[test]
    fn classify_agrees_with_step_on_examples() {
        for s in [
            "x",
            "(\\x : Int. x) 1",
            "if true then 1 else 2",
            "{a = 1}.a",
            "x.a",
            "for (x <- xs) [x]",
            "for (x <- []) [x]",
            "fix (f : Int -> Int). \\x : Int. f x",
            "\\y : Int. (fix (f : Int -> Int). \\x : Int. f x) y",
        ] {
            let m = tm(s);
            assert_eq!(classify(&m).is_normal(), step(&m).is_none(), "{s}");
        }
    }
}
