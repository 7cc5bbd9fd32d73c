//! Pretty-printer producing text the parser accepts again.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::alpha::{alpha_equal, alpha_equal_con};
use super::parser::Env;
use super::{Constructor, Kind, Literal, Term, Type};

/// Configurable printer. By default it prints ASCII syntax without
/// folding any names.
#[derive(Clone, Debug, Default)]
pub struct Printer {
    unicode: bool,
    cons: Vec<(String, Constructor)>,
    terms: Vec<(String, Term)>,
}

/// Prints a term in ASCII syntax.
pub fn print(t: &Term) -> String {
    Printer::new().term(t)
}

/// Prints a constructor in ASCII syntax.
pub fn print_con(c: &Constructor) -> String {
    Printer::new().con(c)
}

/// Prints a type in ASCII syntax.
pub fn print_type(t: &Type) -> String {
    Printer::new().ty(t)
}

// Term precedence levels.
const EXPR: u8 = 0;
const CONCAT: u8 = 1;
const EQ: u8 = 3;
const SUM: u8 = 4;
const APP: u8 = 5;
const POSTFIX: u8 = 6;

fn escape(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl Printer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Use λ, Λ, ∀ and arrow glyphs instead of ASCII.
    pub fn unicode(mut self, on: bool) -> Self {
        self.unicode = on;
        self
    }

    /// Print constructors alpha-equal to `c` as `name`.
    pub fn fold_con(mut self, name: &str, c: Constructor) -> Self {
        self.cons.push((name.to_string(), c));
        self
    }

    /// Print terms alpha-equal to `m` as `name`.
    pub fn fold_term(mut self, name: &str, m: Term) -> Self {
        self.terms.push((name.to_string(), m));
        self
    }

    /// Fold every non-trivial name defined in `env`.
    pub fn fold_env(mut self, env: &Env) -> Self {
        for (n, c) in &env.cons {
            if c.size() > 1 {
                self.cons.push((n.clone(), c.clone()));
            }
        }
        for (n, m) in &env.terms {
            if m.size() > 1 {
                self.terms.push((n.clone(), m.clone()));
            }
        }
        self
    }

    pub fn term(&self, t: &Term) -> String {
        let mut s = String::new();
        self.t(&mut s, t, EXPR);
        s
    }

    pub fn con(&self, c: &Constructor) -> String {
        let mut s = String::new();
        self.c(&mut s, c, 0);
        s
    }

    pub fn ty(&self, t: &Type) -> String {
        let mut s = String::new();
        self.ty_at(&mut s, t, 0);
        s
    }

    fn lam(&self) -> &'static str {
        if self.unicode {
            "λ"
        } else {
            "\\"
        }
    }

    fn big_lam(&self) -> &'static str {
        if self.unicode {
            "Λ"
        } else {
            "/\\"
        }
    }

    fn arrow(&self) -> &'static str {
        if self.unicode {
            " → "
        } else {
            " -> "
        }
    }

    fn fat(&self) -> &'static str {
        if self.unicode {
            " ⇒ "
        } else {
            " => "
        }
    }

    fn larrow(&self) -> &'static str {
        if self.unicode {
            " ← "
        } else {
            " <- "
        }
    }

    fn forall(&self) -> &'static str {
        if self.unicode {
            "∀"
        } else {
            "forall "
        }
    }

    // ---- kinds ----

    fn kind(&self, s: &mut String, k: &Kind, atom: bool) {
        match k {
            Kind::Type => s.push_str("Type"),
            Kind::Row => s.push_str("Row"),
            Kind::Arrow(a, b) => {
                if atom {
                    s.push('(');
                }
                self.kind(s, a, true);
                s.push_str(self.arrow());
                self.kind(s, b, false);
                if atom {
                    s.push(')');
                }
            }
        }
    }

    fn binder_kind(&self, s: &mut String, k: &Kind) {
        if *k != Kind::Type {
            s.push(':');
            self.kind(s, k, false);
        }
    }

    // ---- constructors: level 0 = lambda, 1 = application, 2 = atom ----

    fn c(&self, s: &mut String, c: &Constructor, prec: u8) {
        if c.size() > 1 {
            if let Some((n, _)) = self.cons.iter().find(|(_, d)| alpha_equal_con(d, c)) {
                s.push_str(n);
                return;
            }
        }
        let level = match c {
            Constructor::Lam(..) => 0,
            Constructor::App(..)
            | Constructor::TraceC(_)
            | Constructor::Rmap(..)
            | Constructor::Typerec(..) => 1,
            Constructor::RecordC(r) if !matches!(**r, Constructor::RowExtend(..) | Constructor::RowEmpty) => 1,
            _ => 2,
        };
        if level < prec {
            s.push('(');
            self.c(s, c, 0);
            s.push(')');
            return;
        }
        match c {
            Constructor::BoolC => s.push_str("Bool"),
            Constructor::IntC => s.push_str("Int"),
            Constructor::StringC => s.push_str("String"),
            Constructor::Var(x) => s.push_str(x),
            Constructor::Lam(x, k, b) => {
                s.push_str(self.lam());
                s.push_str(x);
                self.binder_kind(s, k);
                s.push_str(". ");
                self.c(s, b, 0);
            }
            Constructor::App(f, a) => {
                // The head of an application chain must be another
                // application or an atom.
                let head_prec = if matches!(**f, Constructor::App(..)) { 1 } else { 2 };
                self.c(s, f, head_prec);
                s.push(' ');
                self.c(s, a, 2);
            }
            Constructor::ListC(a) => {
                s.push('[');
                self.c(s, a, 0);
                s.push(']');
            }
            Constructor::TraceC(a) => {
                s.push_str("Trace ");
                self.c(s, a, 2);
            }
            Constructor::RecordC(r) => match **r {
                Constructor::RowExtend(..) | Constructor::RowEmpty => {
                    s.push('{');
                    self.row_body(s, r);
                    s.push('}');
                }
                _ => {
                    s.push_str("Record ");
                    self.c(s, r, 2);
                }
            },
            Constructor::Rmap(f, r) => {
                s.push_str("Rmap ");
                self.c(s, f, 2);
                s.push(' ');
                self.c(s, r, 2);
            }
            Constructor::Typerec(a, bs) => {
                s.push_str("Typerec ");
                self.c(s, a, 2);
                s.push_str(" (");
                for (i, b) in bs.iter().enumerate() {
                    if i > 0 {
                        s.push_str(", ");
                    }
                    self.c(s, b, 0);
                }
                s.push(')');
            }
            Constructor::RowEmpty => s.push_str("()"),
            Constructor::RowExtend(..) => {
                s.push('(');
                self.row_body(s, c);
                s.push(')');
            }
        }
    }

    fn row_body(&self, s: &mut String, row: &Constructor) {
        let (fields, tail) = row.row_spine();
        for (i, (l, c)) in fields.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push_str(l);
            s.push_str(" : ");
            self.c(s, c, 0);
        }
        if *tail != Constructor::RowEmpty {
            s.push_str(if fields.is_empty() { "| " } else { " | " });
            self.c(s, tail, 0);
        }
    }

    // ---- types: level 0 = forall, 1 = arrow, 2 = application, 3 = atom ----

    fn ty_at(&self, s: &mut String, t: &Type, prec: u8) {
        let level = match t {
            Type::Forall(..) => 0,
            Type::Fun(..) => 1,
            Type::Trace(_) => 2,
            _ => 3,
        };
        if level < prec {
            s.push('(');
            self.ty_at(s, t, 0);
            s.push(')');
            return;
        }
        match t {
            Type::Bool => s.push_str("Bool"),
            Type::Int => s.push_str("Int"),
            Type::String => s.push_str("String"),
            Type::Unknown => s.push('?'),
            Type::Embed(c) => {
                s.push_str("T(");
                self.c(s, c, 0);
                s.push(')');
            }
            Type::Fun(a, b) => {
                self.ty_at(s, a, 2);
                s.push_str(self.arrow());
                self.ty_at(s, b, 1);
            }
            Type::List(a) => {
                s.push('[');
                self.ty_at(s, a, 0);
                s.push(']');
            }
            Type::Trace(a) => {
                s.push_str("Trace ");
                self.ty_at(s, a, 3);
            }
            Type::Record(r) => {
                s.push('{');
                for (i, (l, t)) in r.fields.iter().enumerate() {
                    if i > 0 {
                        s.push_str(", ");
                    }
                    s.push_str(l);
                    s.push_str(" : ");
                    self.ty_at(s, t, 0);
                }
                s.push('}');
            }
            Type::Forall(a, k, b) => {
                s.push_str(self.forall());
                s.push_str(a);
                self.binder_kind(s, k);
                s.push_str(". ");
                self.ty_at(s, b, 0);
            }
        }
    }

    // ---- terms ----

    fn level(t: &Term) -> u8 {
        match t {
            Term::Lam(..)
            | Term::TyLam(..)
            | Term::Fix(..)
            | Term::If(..)
            | Term::For(..)
            | Term::Tracecase(..)
            | Term::Typecase(..) => EXPR,
            Term::Concat(..) => CONCAT,
            Term::Eq(..) => EQ,
            Term::Plus(..) => SUM,
            Term::App(..)
            | Term::TyApp(..)
            | Term::RMap(..)
            | Term::RFold(..)
            | Term::TrLit(_)
            | Term::TrIf(_)
            | Term::TrFor(..)
            | Term::TrCell(_)
            | Term::TrOpEq(..)
            | Term::TrOpPlus(_)
            | Term::TraceOf(_) => APP,
            Term::Project(..) => POSTFIX,
            _ => POSTFIX + 1,
        }
    }

    fn t(&self, s: &mut String, t: &Term, prec: u8) {
        if t.size() > 1 {
            if let Some((n, _)) = self.terms.iter().find(|(_, d)| alpha_equal(d, t)) {
                s.push_str(n);
                return;
            }
        }
        if Self::level(t) < prec {
            s.push('(');
            self.t(s, t, EXPR);
            s.push(')');
            return;
        }
        match t {
            Term::Const(Literal::Bool(b)) => s.push_str(if *b { "true" } else { "false" }),
            Term::Const(Literal::Int(i)) => {
                if *i < 0 {
                    let _ = write!(s, "({i})");
                } else {
                    let _ = write!(s, "{i}");
                }
            }
            Term::Const(Literal::Str(x)) => s.push_str(&escape(x)),
            Term::Var(x) => s.push_str(x),
            Term::Lam(x, ty, b) => {
                s.push_str(self.lam());
                s.push_str(x);
                s.push_str(" : ");
                self.ty_at(s, ty, 0);
                s.push_str(". ");
                self.t(s, b, EXPR);
            }
            Term::TyLam(a, k, b) => {
                s.push_str(self.big_lam());
                s.push_str(a);
                self.binder_kind(s, k);
                s.push_str(". ");
                self.t(s, b, EXPR);
            }
            Term::Fix(f, ty, b) => {
                s.push_str("fix (");
                s.push_str(f);
                s.push_str(" : ");
                self.ty_at(s, ty, 0);
                s.push_str("). ");
                self.t(s, b, EXPR);
            }
            Term::If(c, a, b) => {
                s.push_str("if ");
                self.t(s, c, EXPR);
                s.push_str(" then ");
                self.t(s, a, EXPR);
                s.push_str(" else ");
                self.t(s, b, EXPR);
            }
            Term::For(x, src, b) => {
                s.push_str("for (");
                s.push_str(x);
                s.push_str(self.larrow());
                self.t(s, src, EXPR);
                s.push_str(") ");
                self.t(s, b, EXPR);
            }
            Term::Concat(a, b) => {
                self.t(s, a, CONCAT + 1);
                s.push_str(" ++ ");
                self.t(s, b, CONCAT);
            }
            Term::Eq(a, b) => {
                self.t(s, a, SUM);
                s.push_str(" == ");
                self.t(s, b, SUM);
            }
            Term::Plus(a, b) => {
                self.t(s, a, SUM);
                s.push_str(" + ");
                self.t(s, b, APP);
            }
            Term::App(f, a) => {
                self.app_head(s, f);
                s.push(' ');
                self.t(s, a, POSTFIX);
            }
            Term::TyApp(f, c) => {
                self.app_head(s, f);
                s.push_str(" @");
                self.c(s, c, 2);
            }
            Term::RMap(row, f, r) => {
                s.push_str("rmap^");
                self.c(s, row, 2);
                s.push(' ');
                self.t(s, f, POSTFIX);
                s.push(' ');
                self.t(s, r, POSTFIX);
            }
            Term::RFold(row, l, z, r) => {
                s.push_str("rfold^");
                self.c(s, row, 2);
                for m in [l, z, r] {
                    s.push(' ');
                    self.t(s, m, POSTFIX);
                }
            }
            Term::TrLit(m) => self.prefixed(s, "Lit", None, m),
            Term::TrIf(m) => self.prefixed(s, "If", None, m),
            Term::TrFor(c, m) => self.prefixed(s, "For", Some(c), m),
            Term::TrCell(m) => self.prefixed(s, "Cell", None, m),
            Term::TrOpEq(c, m) => self.prefixed(s, "OpEq", Some(c), m),
            Term::TrOpPlus(m) => self.prefixed(s, "OpPlus", None, m),
            Term::TraceOf(m) => self.prefixed(s, "trace", None, m),
            Term::Project(m, l) => {
                self.t(s, m, POSTFIX);
                s.push('.');
                s.push_str(l);
            }
            Term::EmptyRecord => s.push_str("{}"),
            Term::RecordExt(..) => {
                let (fields, tail) = t.record_spine();
                s.push('{');
                for (i, (l, m)) in fields.iter().enumerate() {
                    if i > 0 {
                        s.push_str(", ");
                    }
                    s.push_str(l);
                    s.push_str(" = ");
                    self.t(s, m, EXPR);
                }
                if *tail != Term::EmptyRecord {
                    s.push_str(" | ");
                    self.t(s, tail, EXPR);
                }
                s.push('}');
            }
            Term::EmptyList => s.push_str("[]"),
            Term::Singleton(m) => {
                s.push('[');
                self.t(s, m, EXPR);
                s.push(']');
            }
            Term::Table(n, row) => {
                s.push_str("table ");
                s.push_str(&escape(n));
                s.push(' ');
                self.ty_at(s, &Type::Record(row.clone()), 0);
            }
            Term::Tracecase(m, bs) => {
                s.push_str("tracecase ");
                self.t(s, m, EXPR);
                s.push_str(" of { ");
                let one = |s: &mut String, kw: &str, x: &str, b: &Term| {
                    s.push_str(kw);
                    s.push(' ');
                    s.push_str(x);
                    s.push_str(self.fat());
                    self.t(s, b, EXPR);
                };
                let two = |s: &mut String, kw: &str, a: &str, x: &str, b: &Term| {
                    s.push_str(kw);
                    s.push(' ');
                    s.push_str(a);
                    s.push(' ');
                    s.push_str(x);
                    s.push_str(self.fat());
                    self.t(s, b, EXPR);
                };
                one(s, "Lit", &bs.lit.var, &bs.lit.body);
                s.push_str(", ");
                one(s, "If", &bs.if_.var, &bs.if_.body);
                s.push_str(", ");
                two(s, "For", &bs.for_.tyvar, &bs.for_.var, &bs.for_.body);
                s.push_str(", ");
                one(s, "Cell", &bs.cell.var, &bs.cell.body);
                s.push_str(", ");
                two(s, "OpEq", &bs.op_eq.tyvar, &bs.op_eq.var, &bs.op_eq.body);
                s.push_str(", ");
                one(s, "OpPlus", &bs.op_plus.var, &bs.op_plus.body);
                s.push_str(" }");
            }
            Term::Typecase(c, mo, bs) => {
                s.push_str("typecase ");
                self.c(s, c, 0);
                s.push_str(" return ");
                s.push_str(&mo.var);
                s.push_str(". ");
                self.ty_at(s, &mo.body, 0);
                s.push_str(" of { ");
                for (kw, b) in [("Bool", &bs.bool_), ("Int", &bs.int), ("String", &bs.string)] {
                    s.push_str(kw);
                    s.push_str(self.fat());
                    self.t(s, b, EXPR);
                    s.push_str(", ");
                }
                for (i, (kw, b)) in [("List", &bs.list), ("Record", &bs.record), ("Trace", &bs.trace)]
                    .into_iter()
                    .enumerate()
                {
                    if i > 0 {
                        s.push_str(", ");
                    }
                    s.push_str(kw);
                    s.push(' ');
                    s.push_str(&b.tyvar);
                    s.push_str(self.fat());
                    self.t(s, &b.body, EXPR);
                }
                s.push_str(" }");
            }
        }
    }

    fn app_head(&self, s: &mut String, f: &Term) {
        let chain = matches!(f, Term::App(..) | Term::TyApp(..)) && !self.folds(f);
        if chain {
            self.t(s, f, APP);
        } else {
            self.t(s, f, POSTFIX);
        }
    }

    fn folds(&self, t: &Term) -> bool {
        t.size() > 1 && self.terms.iter().any(|(_, d)| alpha_equal(d, t))
    }

    fn prefixed(&self, s: &mut String, kw: &str, c: Option<&Constructor>, m: &Term) {
        s.push_str(kw);
        s.push(' ');
        if let Some(c) = c {
            self.c(s, c, 2);
            s.push(' ');
        }
        self.t(s, m, POSTFIX);
    }
}

impl core::fmt::Display for Kind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let mut s = String::new();
        Printer::new().kind(&mut s, self, false);
        f.write_str(&s)
    }
}

impl core::fmt::Display for Constructor {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&print_con(self))
    }
}

impl core::fmt::Display for Type {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&print_type(self))
    }
}

impl core::fmt::Display for Term {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&print(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_constructor, parse_type};

    fn roundtrip(src: &str) {
        let t = parse(src).unwrap().main;
        let printed = print(&t);
        let back = parse(&printed).unwrap_or_else(|e| panic!("{printed}: {e}")).main;
        assert!(alpha_equal(&t, &back), "{src} printed as {printed}");
    }

    #[test]
    fn roundtrips() {
        for src in [
            "2 + 3 + 4",
            "2 + (3 + 4)",
            "(\\x:Int. x + 1) 2",
            "f (-3) x.l",
            "[1] ++ [2] ++ []",
            "([1] ++ [2]) ++ []",
            "{a = 1, b = \"s\\\"q\" | r}",
            "for (x <- table \"t\" {oid : Int, n : String}) where (x.n == \"a\") [x]",
            "/\\a:Row. \\x:T(Record a). rmap^a f x",
            "f @(List Int) @Bool x",
            "tracecase t of { Lit x => 1, If x => 2, For a x => 3, Cell x => 4, OpEq a x => 5, OpPlus x => 6 }",
            "typecase List Int return a. T(a) -> Int of { Bool => 1, Int => 2, String => 3, List b => 4, Record r => 5, Trace c => 6 }",
            "Lit (x.a) == OpPlus {l = 1, r = 2}",
            "fix (f : Int -> Int). \\x:Int. f x",
            "rfold^(a : Int) g 0 {a = 1}",
        ] {
            roundtrip(src);
        }
    }

    #[test]
    fn constructor_roundtrip() {
        for src in [
            "\\a. Typerec a (Bool, Int, String, \\b. \\c. [c], \\r:Row. \\s:Row. Record s, \\b. \\t. t)",
            "{a : Int | Rmap (\\x. Trace x) r}",
            "F (List a) b",
            "(l : Bool)",
            "Record (Rmap F r)",
        ] {
            let c = parse_constructor(src, &Env::default()).unwrap();
            let back = parse_constructor(&print_con(&c), &Env::default()).unwrap();
            assert!(alpha_equal_con(&c, &back), "{src} printed as {}", print_con(&c));
        }
    }

    #[test]
    fn type_roundtrip() {
        for src in ["forall a. T(a) -> (Int -> Int) -> [Trace Int]", "{a : Bool, b : [a]}"] {
            let t = parse_type(src, &Env::default()).unwrap();
            assert_eq!(parse_type(&print_type(&t), &Env::default()).unwrap(), t);
        }
    }

    #[test]
    fn unicode_and_folding() {
        let c = parse_constructor("\\a. List a", &Env::default()).unwrap();
        let p = Printer::new().unicode(true).fold_con("L", c.clone());
        let t = Type::forall("b", Kind::Type, Type::Embed(Constructor::app(c, Constructor::var("b"))));
        assert_eq!(p.ty(&t), "∀b. T(L b)");
    }
}
