//! Abstract syntax for kinds, constructors, types and terms, plus the
//! surface parser and printer.
//!
//! Row constructors share the [`Constructor`] enum with ordinary
//! constructors: a row is simply a constructor of kind `Row`. This lets
//! constructor application take rows as arguments (`C_R S (Rmap …)`) without
//! a second application form.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

mod alpha;
mod lexer;
mod parser;
mod printer;
mod subst;

pub use alpha::{alpha_equal, alpha_equal_con, alpha_equal_type};
pub use parser::{parse, parse_constructor, parse_type, parse_with, Decl, Env, ParseError, Program};
pub use printer::{print, print_con, print_type, Printer};
pub use subst::{
    fresh_name, insert_row_field, subst_con_in_con, subst_con_in_term, subst_con_in_type, subst_term,
};

/// Variable and label names.
pub type Name = Arc<str>;

/// Record labels.
pub type Label = Arc<str>;

/// Build a [`Name`] from a string slice.
pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// Kinds classify constructors.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Type,
    Row,
    Arrow(Box<Kind>, Box<Kind>),
}

impl Kind {
    pub fn arrow(a: Kind, b: Kind) -> Kind {
        Kind::Arrow(Box::new(a), Box::new(b))
    }
}

/// Type-level terms. Constructors of kind `Row` use the `Row*` variants
/// and `Rmap`; row variables are plain [`Constructor::Var`]s.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constructor {
    BoolC,
    IntC,
    StringC,
    Var(Name),
    Lam(Name, Kind, Box<Constructor>),
    App(Box<Constructor>, Box<Constructor>),
    ListC(Box<Constructor>),
    RecordC(Box<Constructor>),
    TraceC(Box<Constructor>),
    /// Branches in the fixed order Bool, Int, String, List, Record, Trace.
    Typerec(Box<Constructor>, Box<[Constructor; 6]>),
    RowEmpty,
    RowExtend(Label, Box<Constructor>, Box<Constructor>),
    Rmap(Box<Constructor>, Box<Constructor>),
}

/// Rows are constructors of kind `Row`.
pub type RowConstructor = Constructor;

impl Constructor {
    pub fn var(n: &str) -> Constructor {
        Constructor::Var(name(n))
    }

    pub fn lam(x: &str, k: Kind, body: Constructor) -> Constructor {
        Constructor::Lam(name(x), k, Box::new(body))
    }

    pub fn app(f: Constructor, a: Constructor) -> Constructor {
        Constructor::App(Box::new(f), Box::new(a))
    }

    pub fn list(c: Constructor) -> Constructor {
        Constructor::ListC(Box::new(c))
    }

    pub fn trace(c: Constructor) -> Constructor {
        Constructor::TraceC(Box::new(c))
    }

    pub fn record(row: Constructor) -> Constructor {
        Constructor::RecordC(Box::new(row))
    }

    pub fn rmap(f: Constructor, row: Constructor) -> Constructor {
        Constructor::Rmap(Box::new(f), Box::new(row))
    }

    pub fn typerec(c: Constructor, branches: [Constructor; 6]) -> Constructor {
        Constructor::Typerec(Box::new(c), Box::new(branches))
    }

    /// Closed row from fields; labels are sorted.
    pub fn row<I>(fields: I) -> Constructor
    where
        I: IntoIterator<Item = (Label, Constructor)>,
    {
        Self::row_with_tail(fields, Constructor::RowEmpty)
    }

    /// Row from fields ending in `tail`; the known fields are sorted.
    pub fn row_with_tail<I>(fields: I, tail: Constructor) -> Constructor
    where
        I: IntoIterator<Item = (Label, Constructor)>,
    {
        let mut fs: Vec<(Label, Constructor)> = fields.into_iter().collect();
        fs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut row = tail;
        for (l, c) in fs.into_iter().rev() {
            row = Constructor::RowExtend(l, Box::new(c), Box::new(row));
        }
        row
    }

    /// Record constructor over a closed row.
    pub fn record_of<I>(fields: I) -> Constructor
    where
        I: IntoIterator<Item = (Label, Constructor)>,
    {
        Constructor::record(Self::row(fields))
    }

    /// Splits an extension spine into its fields and the final tail.
    pub fn row_spine(&self) -> (Vec<(&Label, &Constructor)>, &Constructor) {
        let mut fields = Vec::new();
        let mut cur = self;
        while let Constructor::RowExtend(l, c, rest) = cur {
            fields.push((l, &**c));
            cur = rest;
        }
        (fields, cur)
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    pub(crate) fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Constructor::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Constructor::Lam(x, _, b) => {
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            Constructor::App(f, a) | Constructor::Rmap(f, a) => {
                f.collect_free(bound, out);
                a.collect_free(bound, out);
            }
            Constructor::ListC(c) | Constructor::RecordC(c) | Constructor::TraceC(c) => {
                c.collect_free(bound, out)
            }
            Constructor::Typerec(c, bs) => {
                c.collect_free(bound, out);
                for b in bs.iter() {
                    b.collect_free(bound, out);
                }
            }
            Constructor::RowExtend(_, c, r) => {
                c.collect_free(bound, out);
                r.collect_free(bound, out);
            }
            Constructor::BoolC | Constructor::IntC | Constructor::StringC | Constructor::RowEmpty => {}
        }
    }

    /// Number of nodes, used for size budgets in tests and generators.
    pub fn size(&self) -> usize {
        match self {
            Constructor::Lam(_, _, b)
            | Constructor::ListC(b)
            | Constructor::RecordC(b)
            | Constructor::TraceC(b) => 1 + b.size(),
            Constructor::App(f, a) | Constructor::Rmap(f, a) => 1 + f.size() + a.size(),
            Constructor::RowExtend(_, c, r) => 1 + c.size() + r.size(),
            Constructor::Typerec(c, bs) => 1 + c.size() + bs.iter().map(|b| b.size()).sum::<usize>(),
            _ => 1,
        }
    }
}

/// Computation-free types. A record whose row ends in a neutral row
/// constructor can only be written through the embedding, as
/// `Embed(RecordC(..))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Type {
    Embed(Constructor),
    Bool,
    Int,
    String,
    Fun(Box<Type>, Box<Type>),
    List(Box<Type>),
    Record(RowType),
    Trace(Box<Type>),
    Forall(Name, Kind, Box<Type>),
    /// Element type of an empty list literal, compatible with every type.
    /// Never produced by the parser.
    Unknown,
}

/// A closed row of types, kept sorted by label.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RowType {
    pub fields: Vec<(Label, Type)>,
}

impl RowType {
    pub fn new<I>(fields: I) -> RowType
    where
        I: IntoIterator<Item = (Label, Type)>,
    {
        let mut fields: Vec<(Label, Type)> = fields.into_iter().collect();
        fields.sort_by(|a, b| a.0.cmp(&b.0));
        RowType { fields }
    }

    pub fn get(&self, l: &str) -> Option<&Type> {
        self.fields.iter().find(|(k, _)| &**k == l).map(|(_, t)| t)
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.fields.iter().map(|(l, _)| l)
    }
}

impl Type {
    pub fn fun(a: Type, b: Type) -> Type {
        Type::Fun(Box::new(a), Box::new(b))
    }

    pub fn list(a: Type) -> Type {
        Type::List(Box::new(a))
    }

    pub fn trace(a: Type) -> Type {
        Type::Trace(Box::new(a))
    }

    pub fn forall(a: &str, k: Kind, body: Type) -> Type {
        Type::Forall(name(a), k, Box::new(body))
    }

    pub fn record<I>(fields: I) -> Type
    where
        I: IntoIterator<Item = (Label, Type)>,
    {
        Type::Record(RowType::new(fields))
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Type::Bool | Type::Int | Type::String)
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    pub(crate) fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Type::Embed(c) => c.collect_free(bound, out),
            Type::Fun(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Type::List(a) | Type::Trace(a) => a.collect_free(bound, out),
            Type::Record(r) => {
                for (_, t) in &r.fields {
                    t.collect_free(bound, out);
                }
            }
            Type::Forall(x, _, b) => {
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            Type::Bool | Type::Int | Type::String | Type::Unknown => {}
        }
    }
}

/// Literal constants.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Str(String),
}

/// A branch binding one term variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bind1 {
    pub var: Name,
    pub body: Arc<Term>,
}

/// A branch binding a type variable and a term variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bind2 {
    pub tyvar: Name,
    pub var: Name,
    pub body: Arc<Term>,
}

/// A branch binding one type variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TyBind {
    pub tyvar: Name,
    pub body: Arc<Term>,
}

/// The six `tracecase` branches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceBranches {
    pub lit: Bind1,
    pub if_: Bind1,
    pub for_: Bind2,
    pub cell: Bind1,
    pub op_eq: Bind2,
    pub op_plus: Bind1,
}

/// The six `typecase` branches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeBranches {
    pub bool_: Arc<Term>,
    pub int: Arc<Term>,
    pub string: Arc<Term>,
    pub list: TyBind,
    pub record: TyBind,
    pub trace: TyBind,
}

/// The result type of a `typecase`, abstracted over the scrutinee.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Motive {
    pub var: Name,
    pub body: Type,
}

/// Terms. Children are reference counted so rewriting can share the
/// untouched parts of a term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Const(Literal),
    Var(Name),
    Lam(Name, Type, Arc<Term>),
    App(Arc<Term>, Arc<Term>),
    TyLam(Name, Kind, Arc<Term>),
    TyApp(Arc<Term>, Constructor),
    Fix(Name, Type, Arc<Term>),
    If(Arc<Term>, Arc<Term>, Arc<Term>),
    Plus(Arc<Term>, Arc<Term>),
    Eq(Arc<Term>, Arc<Term>),
    EmptyRecord,
    RecordExt(Label, Arc<Term>, Arc<Term>),
    Project(Arc<Term>, Label),
    RMap(Constructor, Arc<Term>, Arc<Term>),
    RFold(Constructor, Arc<Term>, Arc<Term>, Arc<Term>),
    EmptyList,
    Singleton(Arc<Term>),
    Concat(Arc<Term>, Arc<Term>),
    For(Name, Arc<Term>, Arc<Term>),
    Table(Name, RowType),
    TrLit(Arc<Term>),
    TrIf(Arc<Term>),
    TrFor(Constructor, Arc<Term>),
    TrCell(Arc<Term>),
    TrOpEq(Constructor, Arc<Term>),
    TrOpPlus(Arc<Term>),
    Tracecase(Arc<Term>, Arc<TraceBranches>),
    Typecase(Constructor, Arc<Motive>, Arc<TypeBranches>),
    /// Surface `trace M`; replaced by the self-traced query before typing.
    TraceOf(Arc<Term>),
}

impl Term {
    pub fn int(i: i64) -> Term {
        Term::Const(Literal::Int(i))
    }

    pub fn bool(b: bool) -> Term {
        Term::Const(Literal::Bool(b))
    }

    pub fn str(s: &str) -> Term {
        Term::Const(Literal::Str(String::from(s)))
    }

    pub fn var(x: &str) -> Term {
        Term::Var(name(x))
    }

    pub fn lam(x: &str, ty: Type, body: Term) -> Term {
        Term::Lam(name(x), ty, Arc::new(body))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Arc::new(f), Arc::new(a))
    }

    pub fn tylam(a: &str, k: Kind, body: Term) -> Term {
        Term::TyLam(name(a), k, Arc::new(body))
    }

    pub fn tyapp(f: Term, c: Constructor) -> Term {
        Term::TyApp(Arc::new(f), c)
    }

    pub fn if_(c: Term, t: Term, e: Term) -> Term {
        Term::If(Arc::new(c), Arc::new(t), Arc::new(e))
    }

    pub fn plus(a: Term, b: Term) -> Term {
        Term::Plus(Arc::new(a), Arc::new(b))
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::Eq(Arc::new(a), Arc::new(b))
    }

    pub fn project(m: Term, l: &str) -> Term {
        Term::Project(Arc::new(m), name(l))
    }

    pub fn singleton(m: Term) -> Term {
        Term::Singleton(Arc::new(m))
    }

    pub fn concat(a: Term, b: Term) -> Term {
        Term::Concat(Arc::new(a), Arc::new(b))
    }

    pub fn for_(x: &str, src: Term, body: Term) -> Term {
        Term::For(name(x), Arc::new(src), Arc::new(body))
    }

    /// Record literal; labels are sorted.
    pub fn record<I>(fields: I) -> Term
    where
        I: IntoIterator<Item = (Label, Term)>,
    {
        Self::record_with_tail(fields, Term::EmptyRecord)
    }

    /// Record extension of `tail` by `fields`; labels are sorted.
    pub fn record_with_tail<I>(fields: I, tail: Term) -> Term
    where
        I: IntoIterator<Item = (Label, Term)>,
    {
        let mut fs: Vec<(Label, Term)> = fields.into_iter().collect();
        fs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = tail;
        for (l, m) in fs.into_iter().rev() {
            out = Term::RecordExt(l, Arc::new(m), Arc::new(out));
        }
        out
    }

    /// Splits a record extension spine into fields and tail.
    pub fn record_spine(&self) -> (Vec<(&Label, &Term)>, &Term) {
        let mut fields = Vec::new();
        let mut cur = self;
        while let Term::RecordExt(l, m, rest) = cur {
            fields.push((l, &**m));
            cur = rest;
        }
        (fields, cur)
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        let under = |x: &Name, body: &Term, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>| {
            bound.push(x.clone());
            body.collect_free(bound, out);
            bound.pop();
        };
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Lam(x, _, b) | Term::Fix(x, _, b) => under(x, b, bound, out),
            Term::For(x, s, b) => {
                s.collect_free(bound, out);
                under(x, b, bound, out);
            }
            Term::Tracecase(m, bs) => {
                m.collect_free(bound, out);
                under(&bs.lit.var, &bs.lit.body, bound, out);
                under(&bs.if_.var, &bs.if_.body, bound, out);
                under(&bs.for_.var, &bs.for_.body, bound, out);
                under(&bs.cell.var, &bs.cell.body, bound, out);
                under(&bs.op_eq.var, &bs.op_eq.body, bound, out);
                under(&bs.op_plus.var, &bs.op_plus.body, bound, out);
            }
            _ => self.for_each_child(|c| c.collect_free(bound, out)),
        }
    }

    /// Free type variables, including those in annotations.
    pub fn free_tyvars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free_ty(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free_ty(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        fn under(x: &Name, body: &Term, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
            bound.push(x.clone());
            body.collect_free_ty(bound, out);
            bound.pop();
        }
        match self {
            Term::Lam(_, t, b) | Term::Fix(_, t, b) => {
                t.collect_free(bound, out);
                b.collect_free_ty(bound, out);
            }
            Term::TyLam(a, _, b) => under(a, b, bound, out),
            Term::TyApp(f, c) => {
                f.collect_free_ty(bound, out);
                c.collect_free(bound, out);
            }
            Term::RMap(s, m, n) => {
                s.collect_free(bound, out);
                m.collect_free_ty(bound, out);
                n.collect_free_ty(bound, out);
            }
            Term::RFold(s, l, m, n) => {
                s.collect_free(bound, out);
                l.collect_free_ty(bound, out);
                m.collect_free_ty(bound, out);
                n.collect_free_ty(bound, out);
            }
            Term::Table(_, r) => {
                for (_, t) in &r.fields {
                    t.collect_free(bound, out);
                }
            }
            Term::TrFor(c, m) | Term::TrOpEq(c, m) => {
                c.collect_free(bound, out);
                m.collect_free_ty(bound, out);
            }
            Term::Tracecase(m, bs) => {
                m.collect_free_ty(bound, out);
                bs.lit.body.collect_free_ty(bound, out);
                bs.if_.body.collect_free_ty(bound, out);
                under(&bs.for_.tyvar, &bs.for_.body, bound, out);
                bs.cell.body.collect_free_ty(bound, out);
                under(&bs.op_eq.tyvar, &bs.op_eq.body, bound, out);
                bs.op_plus.body.collect_free_ty(bound, out);
            }
            Term::Typecase(c, mo, bs) => {
                c.collect_free(bound, out);
                bound.push(mo.var.clone());
                mo.body.collect_free(bound, out);
                bound.pop();
                bs.bool_.collect_free_ty(bound, out);
                bs.int.collect_free_ty(bound, out);
                bs.string.collect_free_ty(bound, out);
                under(&bs.list.tyvar, &bs.list.body, bound, out);
                under(&bs.record.tyvar, &bs.record.body, bound, out);
                under(&bs.trace.tyvar, &bs.trace.body, bound, out);
            }
            _ => self.for_each_child(|c| c.collect_free_ty(bound, out)),
        }
    }

    /// Calls `f` on every immediate subterm, in left-to-right order.
    pub fn for_each_child<'a>(&'a self, mut f: impl FnMut(&'a Term)) {
        match self {
            Term::Const(_) | Term::Var(_) | Term::EmptyRecord | Term::EmptyList | Term::Table(..) => {}
            Term::Lam(_, _, b)
            | Term::TyLam(_, _, b)
            | Term::Fix(_, _, b)
            | Term::TyApp(b, _)
            | Term::Project(b, _)
            | Term::Singleton(b)
            | Term::TrLit(b)
            | Term::TrIf(b)
            | Term::TrFor(_, b)
            | Term::TrCell(b)
            | Term::TrOpEq(_, b)
            | Term::TrOpPlus(b)
            | Term::TraceOf(b) => f(b),
            Term::App(a, b)
            | Term::Plus(a, b)
            | Term::Eq(a, b)
            | Term::RecordExt(_, a, b)
            | Term::RMap(_, a, b)
            | Term::Concat(a, b)
            | Term::For(_, a, b) => {
                f(a);
                f(b)
            }
            Term::If(a, b, c) | Term::RFold(_, a, b, c) => {
                f(a);
                f(b);
                f(c)
            }
            Term::Tracecase(m, bs) => {
                f(m);
                f(&bs.lit.body);
                f(&bs.if_.body);
                f(&bs.for_.body);
                f(&bs.cell.body);
                f(&bs.op_eq.body);
                f(&bs.op_plus.body);
            }
            Term::Typecase(_, _, bs) => {
                f(&bs.bool_);
                f(&bs.int);
                f(&bs.string);
                f(&bs.list.body);
                f(&bs.record.body);
                f(&bs.trace.body);
            }
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        let mut n = 1;
        self.for_each_child(|c| n += c.size());
        n
    }

    /// True if any node satisfies `p`.
    pub fn any(&self, p: &impl Fn(&Term) -> bool) -> bool {
        if p(self) {
            return true;
        }
        let mut found = false;
        self.for_each_child(|c| {
            if !found && c.any(p) {
                found = true;
            }
        });
        found
    }

    /// Short name of the node's syntactic form, used in diagnostics.
    pub fn node_name(&self) -> &'static str {
        match self {
            Term::Const(_) => "constant",
            Term::Var(_) => "variable",
            Term::Lam(..) => "lambda",
            Term::App(..) => "application",
            Term::TyLam(..) => "type abstraction",
            Term::TyApp(..) => "type application",
            Term::Fix(..) => "fix",
            Term::If(..) => "if",
            Term::Plus(..) => "+",
            Term::Eq(..) => "==",
            Term::EmptyRecord => "empty record",
            Term::RecordExt(..) => "record",
            Term::Project(..) => "projection",
            Term::RMap(..) => "rmap",
            Term::RFold(..) => "rfold",
            Term::EmptyList => "[]",
            Term::Singleton(_) => "singleton",
            Term::Concat(..) => "++",
            Term::For(..) => "for",
            Term::Table(..) => "table",
            Term::TrLit(_) => "Lit",
            Term::TrIf(_) => "If",
            Term::TrFor(..) => "For",
            Term::TrCell(_) => "Cell",
            Term::TrOpEq(..) => "OpEq",
            Term::TrOpPlus(_) => "OpPlus",
            Term::Tracecase(..) => "tracecase",
            Term::Typecase(..) => "typecase",
            Term::TraceOf(_) => "trace",
        }
    }

    /// True for the six trace constructors.
    pub fn is_trace_constructor(&self) -> bool {
        matches!(
            self,
            Term::TrLit(_)
                | Term::TrIf(_)
                | Term::TrFor(..)
                | Term::TrCell(_)
                | Term::TrOpEq(..)
                | Term::TrOpPlus(_)
        )
    }
}
