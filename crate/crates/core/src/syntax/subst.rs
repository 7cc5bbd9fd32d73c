//! Capture-avoiding substitution of terms for term variables and of
//! constructors for type variables.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::sync::Arc;

use super::{
    Bind1, Bind2, Constructor, Label, Motive, Name, RowType, Term, TraceBranches, TyBind, Type,
    TypeBranches,
};

/// Returns a variant of `base` that is not in `avoid`. Numeric suffixes of
/// the form `_N` are replaced rather than stacked.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let stem = match base.rfind('_') {
        Some(i) if i > 0 && base[i + 1..].chars().all(|c| c.is_ascii_digit()) && i + 1 < base.len() => {
            &base[..i]
        }
        _ => base,
    };
    let stem = if stem.is_empty() || stem == "_" { "v" } else { stem };
    let mut k = 1usize;
    loop {
        let cand: Name = Arc::from(format!("{stem}_{k}").as_str());
        if !avoid.contains(&cand) {
            return cand;
        }
        k += 1;
    }
}

/// Inserts a field into a row spine, keeping the known prefix sorted.
pub fn insert_row_field(l: Label, c: Constructor, row: Constructor) -> Constructor {
    match row {
        Constructor::RowExtend(l2, c2, rest) if l2 < l => {
            Constructor::RowExtend(l2, c2, Box::new(insert_row_field(l, c, *rest)))
        }
        row => Constructor::RowExtend(l, Box::new(c), Box::new(row)),
    }
}

fn insert_record_field(l: Label, m: Arc<Term>, rec: Arc<Term>) -> Term {
    match &*rec {
        Term::RecordExt(l2, m2, rest) if *l2 < l => Term::RecordExt(
            l2.clone(),
            m2.clone(),
            Arc::new(insert_record_field(l, m, rest.clone())),
        ),
        _ => Term::RecordExt(l, m, rec),
    }
}

/// `c[a := d]` on constructors.
pub fn subst_con_in_con(c: &Constructor, a: &str, d: &Constructor) -> Constructor {
    let fv = d.free_vars();
    con_subst(c, a, d, &fv)
}

fn con_subst(c: &Constructor, a: &str, d: &Constructor, fv: &BTreeSet<Name>) -> Constructor {
    use Constructor::*;
    match c {
        Var(x) if &**x == a => d.clone(),
        Var(_) | BoolC | IntC | StringC | RowEmpty => c.clone(),
        Lam(x, k, body) => {
            if &**x == a {
                return c.clone();
            }
            if fv.contains(x) {
                let mut avoid = fv.clone();
                avoid.extend(body.free_vars());
                avoid.insert(Arc::from(a));
                let y = fresh_name(x, &avoid);
                let renamed = con_subst(body, x, &Var(y.clone()), &BTreeSet::from([y.clone()]));
                Lam(y, k.clone(), Box::new(con_subst(&renamed, a, d, fv)))
            } else {
                Lam(x.clone(), k.clone(), Box::new(con_subst(body, a, d, fv)))
            }
        }
        App(f, x) => App(Box::new(con_subst(f, a, d, fv)), Box::new(con_subst(x, a, d, fv))),
        Rmap(f, x) => Rmap(Box::new(con_subst(f, a, d, fv)), Box::new(con_subst(x, a, d, fv))),
        ListC(x) => ListC(Box::new(con_subst(x, a, d, fv))),
        RecordC(x) => RecordC(Box::new(con_subst(x, a, d, fv))),
        TraceC(x) => TraceC(Box::new(con_subst(x, a, d, fv))),
        Typerec(x, bs) => Typerec(
            Box::new(con_subst(x, a, d, fv)),
            Box::new([
                con_subst(&bs[0], a, d, fv),
                con_subst(&bs[1], a, d, fv),
                con_subst(&bs[2], a, d, fv),
                con_subst(&bs[3], a, d, fv),
                con_subst(&bs[4], a, d, fv),
                con_subst(&bs[5], a, d, fv),
            ]),
        ),
        RowExtend(l, h, t) => {
            let h2 = con_subst(h, a, d, fv);
            let t2 = con_subst(t, a, d, fv);
            insert_row_field(l.clone(), h2, t2)
        }
    }
}

/// `ty[a := d]` on types.
pub fn subst_con_in_type(ty: &Type, a: &str, d: &Constructor) -> Type {
    let fv = d.free_vars();
    type_subst(ty, a, d, &fv)
}

fn type_subst(ty: &Type, a: &str, d: &Constructor, fv: &BTreeSet<Name>) -> Type {
    match ty {
        Type::Embed(c) => Type::Embed(con_subst(c, a, d, fv)),
        Type::Bool | Type::Int | Type::String | Type::Unknown => ty.clone(),
        Type::Fun(x, y) => Type::fun(type_subst(x, a, d, fv), type_subst(y, a, d, fv)),
        Type::List(x) => Type::list(type_subst(x, a, d, fv)),
        Type::Trace(x) => Type::trace(type_subst(x, a, d, fv)),
        Type::Record(r) => Type::Record(RowType {
            fields: r.fields.iter().map(|(l, t)| (l.clone(), type_subst(t, a, d, fv))).collect(),
        }),
        Type::Forall(x, k, body) => {
            if &**x == a {
                return ty.clone();
            }
            if fv.contains(x) {
                let mut avoid = fv.clone();
                avoid.extend(body.free_vars());
                avoid.insert(Arc::from(a));
                let y = fresh_name(x, &avoid);
                let renamed = type_subst(body, x, &Constructor::Var(y.clone()), &BTreeSet::from([y.clone()]));
                Type::Forall(y, k.clone(), Box::new(type_subst(&renamed, a, d, fv)))
            } else {
                Type::Forall(x.clone(), k.clone(), Box::new(type_subst(body, a, d, fv)))
            }
        }
    }
}

/// `m[x := n]`, capture-avoiding for both term and type binders.
pub fn subst_term(m: &Arc<Term>, x: &str, n: &Term) -> Arc<Term> {
    let s = Subst::Term {
        x,
        n: Arc::new(n.clone()),
        fv: n.free_vars(),
        ftv: n.free_tyvars(),
    };
    s.apply(m)
}

/// `m[a := d]` on every annotation and constructor argument inside `m`.
pub fn subst_con_in_term(m: &Arc<Term>, a: &str, d: &Constructor) -> Arc<Term> {
    let s = Subst::Con { a, d, fv: d.free_vars() };
    s.apply(m)
}

enum Subst<'a> {
    Term {
        x: &'a str,
        n: Arc<Term>,
        fv: BTreeSet<Name>,
        ftv: BTreeSet<Name>,
    },
    Con {
        a: &'a str,
        d: &'a Constructor,
        fv: BTreeSet<Name>,
    },
}

impl Subst<'_> {
    fn ty(&self, t: &Type) -> Type {
        match self {
            Subst::Term { .. } => t.clone(),
            Subst::Con { a, d, fv } => type_subst(t, a, d, fv),
        }
    }

    fn con(&self, c: &Constructor) -> Constructor {
        match self {
            Subst::Term { .. } => c.clone(),
            Subst::Con { a, d, fv } => con_subst(c, a, d, fv),
        }
    }

    /// Does a term binder named `y` stop the substitution?
    fn stops_at_term_binder(&self, y: &str) -> bool {
        matches!(self, Subst::Term { x, .. } if *x == y)
    }

    fn stops_at_type_binder(&self, b: &str) -> bool {
        matches!(self, Subst::Con { a, .. } if *a == b)
    }

    /// Would the term binder `y` capture a free variable of the replacement?
    fn captures_term(&self, y: &Name) -> bool {
        matches!(self, Subst::Term { fv, .. } if fv.contains(y))
    }

    fn captures_type(&self, b: &Name) -> bool {
        match self {
            Subst::Term { ftv, .. } => ftv.contains(b),
            Subst::Con { fv, .. } => fv.contains(b),
        }
    }

    fn avoid_set(&self, body: &Term) -> BTreeSet<Name> {
        let mut avoid = body.free_vars();
        avoid.extend(body.free_tyvars());
        match self {
            Subst::Term { x, fv, ftv, .. } => {
                avoid.extend(fv.iter().cloned());
                avoid.extend(ftv.iter().cloned());
                avoid.insert(Arc::from(*x));
            }
            Subst::Con { a, fv, .. } => {
                avoid.extend(fv.iter().cloned());
                avoid.insert(Arc::from(*a));
            }
        }
        avoid
    }

    /// Substitutes under a term binder, renaming it if it would capture.
    fn under_term(&self, y: &Name, body: &Arc<Term>) -> (Name, Arc<Term>) {
        if self.stops_at_term_binder(y) {
            return (y.clone(), body.clone());
        }
        if self.captures_term(y) {
            let y2 = fresh_name(y, &self.avoid_set(body));
            let renamed = subst_term(body, y, &Term::Var(y2.clone()));
            (y2, self.apply(&renamed))
        } else {
            (y.clone(), self.apply(body))
        }
    }

    /// Substitutes under a type binder, renaming it if it would capture.
    fn under_type(&self, b: &Name, body: &Arc<Term>) -> (Name, Arc<Term>) {
        if self.stops_at_type_binder(b) {
            return (b.clone(), body.clone());
        }
        if self.captures_type(b) {
            let b2 = fresh_name(b, &self.avoid_set(body));
            let renamed = subst_con_in_term(body, b, &Constructor::Var(b2.clone()));
            (b2, self.apply(&renamed))
        } else {
            (b.clone(), self.apply(body))
        }
    }

    fn under_both(&self, b: &Name, y: &Name, body: &Arc<Term>) -> (Name, Name, Arc<Term>) {
        // Rename the type binder first, then the term binder, so that a
        // stop at either binder is respected.
        if self.stops_at_type_binder(b) {
            return (b.clone(), y.clone(), body.clone());
        }
        let (b2, body) = if self.captures_type(b) {
            let b2 = fresh_name(b, &self.avoid_set(body));
            (b2.clone(), subst_con_in_term(body, b, &Constructor::Var(b2)))
        } else {
            (b.clone(), body.clone())
        };
        let (y2, body) = self.under_term(y, &body);
        (b2, y2, body)
    }

    fn bind1(&self, b: &Bind1) -> Bind1 {
        let (var, body) = self.under_term(&b.var, &b.body);
        Bind1 { var, body }
    }

    fn bind2(&self, b: &Bind2) -> Bind2 {
        let (tyvar, var, body) = self.under_both(&b.tyvar, &b.var, &b.body);
        Bind2 { tyvar, var, body }
    }

    fn tybind(&self, b: &TyBind) -> TyBind {
        let (tyvar, body) = self.under_type(&b.tyvar, &b.body);
        TyBind { tyvar, body }
    }

    fn apply(&self, m: &Arc<Term>) -> Arc<Term> {
        Arc::new(self.apply_term(m))
    }

    fn apply_term(&self, m: &Term) -> Term {
        use Term::*;
        let s = |t: &Arc<Term>| self.apply(t);
        match m {
            Var(y) => match self {
                Subst::Term { x, n, .. } if &**y == *x => (**n).clone(),
                _ => m.clone(),
            },
            Const(_) | EmptyRecord | EmptyList => m.clone(),
            Table(name, row) => Table(
                name.clone(),
                RowType {
                    fields: row.fields.iter().map(|(l, t)| (l.clone(), self.ty(t))).collect(),
                },
            ),
            Lam(y, t, b) => {
                let (y2, b2) = self.under_term(y, b);
                Lam(y2, self.ty(t), b2)
            }
            Fix(y, t, b) => {
                let (y2, b2) = self.under_term(y, b);
                Fix(y2, self.ty(t), b2)
            }
            App(f, a) => App(s(f), s(a)),
            TyLam(b, k, body) => {
                let (b2, body2) = self.under_type(b, body);
                TyLam(b2, k.clone(), body2)
            }
            TyApp(f, c) => TyApp(s(f), self.con(c)),
            If(c, t, e) => If(s(c), s(t), s(e)),
            Plus(a, b) => Plus(s(a), s(b)),
            Eq(a, b) => Eq(s(a), s(b)),
            RecordExt(l, h, t) => {
                let h2 = s(h);
                let t2 = s(t);
                insert_record_field(l.clone(), h2, t2)
            }
            Project(r, l) => Project(s(r), l.clone()),
            RMap(row, f, r) => RMap(self.con(row), s(f), s(r)),
            RFold(row, l, z, r) => RFold(self.con(row), s(l), s(z), s(r)),
            Singleton(a) => Singleton(s(a)),
            Concat(a, b) => Concat(s(a), s(b)),
            For(y, src, body) => {
                let src2 = s(src);
                let (y2, body2) = self.under_term(y, body);
                For(y2, src2, body2)
            }
            TrLit(a) => TrLit(s(a)),
            TrIf(a) => TrIf(s(a)),
            TrFor(c, a) => TrFor(self.con(c), s(a)),
            TrCell(a) => TrCell(s(a)),
            TrOpEq(c, a) => TrOpEq(self.con(c), s(a)),
            TrOpPlus(a) => TrOpPlus(s(a)),
            TraceOf(a) => TraceOf(s(a)),
            Tracecase(scrut, bs) => Tracecase(
                s(scrut),
                Arc::new(TraceBranches {
                    lit: self.bind1(&bs.lit),
                    if_: self.bind1(&bs.if_),
                    for_: self.bind2(&bs.for_),
                    cell: self.bind1(&bs.cell),
                    op_eq: self.bind2(&bs.op_eq),
                    op_plus: self.bind1(&bs.op_plus),
                }),
            ),
            Typecase(c, motive, bs) => {
                let motive2 = match self {
                    Subst::Term { .. } => motive.clone(),
                    Subst::Con { a, d, fv } => {
                        if &*motive.var == *a {
                            motive.clone()
                        } else if fv.contains(&motive.var) {
                            let mut avoid = fv.clone();
                            avoid.extend(motive.body.free_vars());
                            avoid.insert(Arc::from(*a));
                            let v = fresh_name(&motive.var, &avoid);
                            let renamed = subst_con_in_type(&motive.body, &motive.var, &Constructor::Var(v.clone()));
                            Arc::new(Motive { var: v, body: type_subst(&renamed, a, d, fv) })
                        } else {
                            Arc::new(Motive {
                                var: motive.var.clone(),
                                body: type_subst(&motive.body, a, d, fv),
                            })
                        }
                    }
                };
                Typecase(
                    self.con(c),
                    motive2,
                    Arc::new(TypeBranches {
                        bool_: s(&bs.bool_),
                        int: s(&bs.int),
                        string: s(&bs.string),
                        list: self.tybind(&bs.list),
                        record: self.tybind(&bs.record),
                        trace: self.tybind(&bs.trace),
                    }),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_equal, Kind};

    #[test]
    fn var_replaced() {
        let m = Arc::new(Term::var("x"));
        assert_eq!(*subst_term(&m, "x", &Term::int(1)), Term::int(1));
    }

    #[test]
    fn shadowing_binder_stops() {
        let m = Arc::new(Term::lam("x", Type::Int, Term::var("x")));
        assert_eq!(*subst_term(&m, "x", &Term::int(1)), *m);
    }

    #[test]
    fn capture_is_avoided() {
        let m = Arc::new(Term::lam("y", Type::Int, Term::var("x")));
        let out = subst_term(&m, "x", &Term::var("y"));
        match &*out {
            Term::Lam(y2, _, body) => {
                assert_ne!(&**y2, "y");
                assert_eq!(**body, Term::var("y"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constructor_into_annotations() {
        let body = Term::lam("x", Type::Embed(Constructor::var("a")), Term::var("x"));
        let out = subst_con_in_term(&Arc::new(body), "a", &Constructor::IntC);
        let expect = Term::lam("x", Type::Embed(Constructor::IntC), Term::var("x"));
        assert!(alpha_equal(&out, &expect));
    }

    #[test]
    fn constructor_into_trace_payload() {
        let m = Term::TrFor(Constructor::var("a"), Arc::new(Term::var("m")));
        let rec = Constructor::record_of([(Arc::from("a"), Constructor::IntC)]);
        let out = subst_con_in_term(&Arc::new(m), "a", &rec);
        assert_eq!(*out, Term::TrFor(rec, Arc::new(Term::var("m"))));
    }

    #[test]
    fn type_binder_renamed_when_capturing() {
        // (/\b. \x:T(a). x)[a := b] must not capture b.
        let m = Term::tylam("b", Kind::Type, Term::lam("x", Type::Embed(Constructor::var("a")), Term::var("x")));
        let out = subst_con_in_term(&Arc::new(m), "a", &Constructor::var("b"));
        match &*out {
            Term::TyLam(b2, _, body) => {
                assert_ne!(&**b2, "b");
                match &**body {
                    Term::Lam(_, Type::Embed(Constructor::Var(v)), _) => assert_eq!(&**v, "b"),
                    other => panic!("unexpected {other:?}"),
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn row_substitution_keeps_order() {
        let row = Constructor::RowExtend(Arc::from("b"), Box::new(Constructor::IntC), Box::new(Constructor::var("r")));
        let out = subst_con_in_con(&row, "r", &Constructor::row([(Arc::from("a"), Constructor::BoolC)]));
        let (fields, tail) = out.row_spine();
        assert_eq!(fields.iter().map(|(l, _)| &***l).collect::<alloc::vec::Vec<_>>(), ["a", "b"]);
        assert_eq!(*tail, Constructor::RowEmpty);
    }

    #[test]
    fn fresh_names_skip_taken() {
        let avoid = BTreeSet::from([Arc::from("x_1"), Arc::from("x_2")]);
        assert_eq!(&*fresh_name("x", &avoid), "x_3");
        assert_eq!(&*fresh_name("x_7", &avoid), "x_3");
    }
}
