//! Alpha-equivalence for constructors, types and terms.

use alloc::vec::Vec;

use super::{Bind1, Bind2, Constructor, Name, Term, TyBind, Type};

#[derive(Default)]
struct Env {
    tm: Vec<(Name, Name)>,
    ty: Vec<(Name, Name)>,
}

fn same_var(stack: &[(Name, Name)], x: &Name, y: &Name) -> bool {
    for (a, b) in stack.iter().rev() {
        let hit_a = a == x;
        let hit_b = b == y;
        if hit_a || hit_b {
            return hit_a && hit_b;
        }
    }
    x == y
}

/// Alpha-equivalence of terms.
pub fn alpha_equal(a: &Term, b: &Term) -> bool {
    term_eq(&mut Env::default(), a, b)
}

/// Alpha-equivalence of constructors.
pub fn alpha_equal_con(a: &Constructor, b: &Constructor) -> bool {
    con_eq(&mut Env::default(), a, b)
}

/// Alpha-equivalence of types.
pub fn alpha_equal_type(a: &Type, b: &Type) -> bool {
    type_eq(&mut Env::default(), a, b)
}

fn con_eq(env: &mut Env, a: &Constructor, b: &Constructor) -> bool {
    use Constructor::*;
    match (a, b) {
        (BoolC, BoolC) | (IntC, IntC) | (StringC, StringC) | (RowEmpty, RowEmpty) => true,
        (Var(x), Var(y)) => same_var(&env.ty, x, y),
        (Lam(x, k1, b1), Lam(y, k2, b2)) => {
            if k1 != k2 {
                return false;
            }
            env.ty.push((x.clone(), y.clone()));
            let r = con_eq(env, b1, b2);
            env.ty.pop();
            r
        }
        (App(f1, a1), App(f2, a2)) | (Rmap(f1, a1), Rmap(f2, a2)) => con_eq(env, f1, f2) && con_eq(env, a1, a2),
        (ListC(x), ListC(y)) | (RecordC(x), RecordC(y)) | (TraceC(x), TraceC(y)) => con_eq(env, x, y),
        (Typerec(c1, b1), Typerec(c2, b2)) => {
            con_eq(env, c1, c2) && b1.iter().zip(b2.iter()).all(|(x, y)| con_eq(env, x, y))
        }
        (RowExtend(l1, h1, t1), RowExtend(l2, h2, t2)) => l1 == l2 && con_eq(env, h1, h2) && con_eq(env, t1, t2),
        _ => false,
    }
}

fn type_eq(env: &mut Env, a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::Embed(x), Type::Embed(y)) => con_eq(env, x, y),
        (Type::Bool, Type::Bool) | (Type::Int, Type::Int) | (Type::String, Type::String) => true,
        (Type::Unknown, Type::Unknown) => true,
        (Type::Fun(a1, b1), Type::Fun(a2, b2)) => type_eq(env, a1, a2) && type_eq(env, b1, b2),
        (Type::List(x), Type::List(y)) | (Type::Trace(x), Type::Trace(y)) => type_eq(env, x, y),
        (Type::Record(r1), Type::Record(r2)) => {
            r1.fields.len() == r2.fields.len()
                && r1
                    .fields
                    .iter()
                    .zip(r2.fields.iter())
                    .all(|((l1, t1), (l2, t2))| l1 == l2 && type_eq(env, t1, t2))
        }
        (Type::Forall(x, k1, b1), Type::Forall(y, k2, b2)) => {
            if k1 != k2 {
                return false;
            }
            env.ty.push((x.clone(), y.clone()));
            let r = type_eq(env, b1, b2);
            env.ty.pop();
            r
        }
        _ => false,
    }
}

fn under_tm(env: &mut Env, x: &Name, y: &Name, a: &Term, b: &Term) -> bool {
    env.tm.push((x.clone(), y.clone()));
    let r = term_eq(env, a, b);
    env.tm.pop();
    r
}

fn under_ty(env: &mut Env, x: &Name, y: &Name, a: &Term, b: &Term) -> bool {
    env.ty.push((x.clone(), y.clone()));
    let r = term_eq(env, a, b);
    env.ty.pop();
    r
}

fn bind1_eq(env: &mut Env, a: &Bind1, b: &Bind1) -> bool {
    under_tm(env, &a.var, &b.var, &a.body, &b.body)
}

fn bind2_eq(env: &mut Env, a: &Bind2, b: &Bind2) -> bool {
    env.ty.push((a.tyvar.clone(), b.tyvar.clone()));
    let r = under_tm(env, &a.var, &b.var, &a.body, &b.body);
    env.ty.pop();
    r
}

fn tybind_eq(env: &mut Env, a: &TyBind, b: &TyBind) -> bool {
    under_ty(env, &a.tyvar, &b.tyvar, &a.body, &b.body)
}

fn term_eq(env: &mut Env, a: &Term, b: &Term) -> bool {
    use Term::*;
    if core::ptr::eq(a, b) && env.tm.is_empty() && env.ty.is_empty() {
        return true;
    }
    match (a, b) {
        (Const(x), Const(y)) => x == y,
        (Var(x), Var(y)) => same_var(&env.tm, x, y),
        (Lam(x, t1, b1), Lam(y, t2, b2)) | (Fix(x, t1, b1), Fix(y, t2, b2)) => {
            type_eq(env, t1, t2) && under_tm(env, x, y, b1, b2)
        }
        (App(f1, a1), App(f2, a2))
        | (Plus(f1, a1), Plus(f2, a2))
        | (Eq(f1, a1), Eq(f2, a2))
        | (Concat(f1, a1), Concat(f2, a2)) => term_eq(env, f1, f2) && term_eq(env, a1, a2),
        (TyLam(x, k1, b1), TyLam(y, k2, b2)) => k1 == k2 && under_ty(env, x, y, b1, b2),
        (TyApp(f1, c1), TyApp(f2, c2)) => term_eq(env, f1, f2) && con_eq(env, c1, c2),
        (If(c1, t1, e1), If(c2, t2, e2)) => term_eq(env, c1, c2) && term_eq(env, t1, t2) && term_eq(env, e1, e2),
        (EmptyRecord, EmptyRecord) | (EmptyList, EmptyList) => true,
        (RecordExt(l1, h1, t1), RecordExt(l2, h2, t2)) => l1 == l2 && term_eq(env, h1, h2) && term_eq(env, t1, t2),
        (Project(r1, l1), Project(r2, l2)) => l1 == l2 && term_eq(env, r1, r2),
        (RMap(s1, f1, r1), RMap(s2, f2, r2)) => con_eq(env, s1, s2) && term_eq(env, f1, f2) && term_eq(env, r1, r2),
        (RFold(s1, l1, z1, r1), RFold(s2, l2, z2, r2)) => {
            con_eq(env, s1, s2) && term_eq(env, l1, l2) && term_eq(env, z1, z2) && term_eq(env, r1, r2)
        }
        (Singleton(x), Singleton(y))
        | (TrLit(x), TrLit(y))
        | (TrIf(x), TrIf(y))
        | (TrCell(x), TrCell(y))
        | (TrOpPlus(x), TrOpPlus(y))
        | (TraceOf(x), TraceOf(y)) => term_eq(env, x, y),
        (TrFor(c1, x), TrFor(c2, y)) | (TrOpEq(c1, x), TrOpEq(c2, y)) => con_eq(env, c1, c2) && term_eq(env, x, y),
        (For(x, s1, b1), For(y, s2, b2)) => term_eq(env, s1, s2) && under_tm(env, x, y, b1, b2),
        (Table(n1, r1), Table(n2, r2)) => {
            n1 == n2
                && r1.fields.len() == r2.fields.len()
                && r1
                    .fields
                    .iter()
                    .zip(r2.fields.iter())
                    .all(|((l1, t1), (l2, t2))| l1 == l2 && type_eq(env, t1, t2))
        }
        (Tracecase(m1, b1), Tracecase(m2, b2)) => {
            term_eq(env, m1, m2)
                && bind1_eq(env, &b1.lit, &b2.lit)
                && bind1_eq(env, &b1.if_, &b2.if_)
                && bind2_eq(env, &b1.for_, &b2.for_)
                && bind1_eq(env, &b1.cell, &b2.cell)
                && bind2_eq(env, &b1.op_eq, &b2.op_eq)
                && bind1_eq(env, &b1.op_plus, &b2.op_plus)
        }
        (Typecase(c1, m1, b1), Typecase(c2, m2, b2)) => {
            if !con_eq(env, c1, c2) {
                return false;
            }
            env.ty.push((m1.var.clone(), m2.var.clone()));
            let motive_ok = type_eq(env, &m1.body, &m2.body);
            env.ty.pop();
            motive_ok
                && term_eq(env, &b1.bool_, &b2.bool_)
                && term_eq(env, &b1.int, &b2.int)
                && term_eq(env, &b1.string, &b2.string)
                && tybind_eq(env, &b1.list, &b2.list)
                && tybind_eq(env, &b1.record, &b2.record)
                && tybind_eq(env, &b1.trace, &b2.trace)
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Kind;

    #[test]
    fn renaming_only() {
        let a = Term::lam("x", Type::Int, Term::var("x"));
        let b = Term::lam("y", Type::Int, Term::var("y"));
        assert!(alpha_equal(&a, &b));
    }

    #[test]
    fn different_bodies() {
        let a = Term::lam("x", Type::Int, Term::var("x"));
        let b = Term::lam("x", Type::Int, Term::int(0));
        assert!(!alpha_equal(&a, &b));
    }

    #[test]
    fn type_binders() {
        let a = Term::tylam(
            "a",
            Kind::Type,
            Term::lam("x", Type::Embed(Constructor::var("a")), Term::var("x")),
        );
        let b = Term::tylam(
            "b",
            Kind::Type,
            Term::lam("z", Type::Embed(Constructor::var("b")), Term::var("z")),
        );
        assert!(alpha_equal(&a, &b));
    }

    #[test]
    fn free_and_bound_do_not_mix() {
        let a = Term::lam("x", Type::Int, Term::var("y"));
        let b = Term::lam("y", Type::Int, Term::var("y"));
        assert!(!alpha_equal(&a, &b));
    }
}
