//! Recursive-descent parser for the surface syntax documented in
//! `docs/grammar.md`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use super::lexer::{lex, Tok, Token};
use super::{
    name, Bind1, Bind2, Constructor, Kind, Label, Literal, Motive, Name, RowType, Term, TraceBranches, TyBind,
    Type, TypeBranches,
};

/// A syntax error with a 1-based source position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl core::error::Error for ParseError {}

/// A top-level declaration.
#[derive(Clone, Debug, PartialEq)]
pub enum Decl {
    /// `NAME = constructor;` where NAME starts with an upper-case letter.
    Con(Name, Constructor),
    /// `name = term;`
    Term(Name, Term),
}

/// A parsed source file: declarations followed by the main expression.
/// Declarations are already inlined into later declarations and `main`.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub decls: Vec<Decl>,
    pub main: Term,
}

/// Names visible to a source file before its own declarations, such as
/// the builtins of the standard library.
#[derive(Clone, Debug, Default)]
pub struct Env {
    pub cons: BTreeMap<String, Constructor>,
    pub terms: BTreeMap<String, Term>,
}

const KEYWORDS: &[&str] = &[
    "for", "where", "if", "then", "else", "table", "fix", "typecase", "tracecase", "rmap", "rfold", "trace", "true",
    "false", "forall", "of", "return", "Type", "Row", "Bool", "Int", "String", "List", "Record", "Trace", "T",
    "Typerec", "Rmap", "Lit", "If", "For", "Cell", "OpEq", "OpPlus",
];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Parses a whole program with no predefined names.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    parse_with(src, &Env::default())
}

/// Parses a whole program; free names found in `env` are inlined.
pub fn parse_with(src: &str, env: &Env) -> Result<Program, ParseError> {
    let mut p = Parser::new(src, env)?;
    p.program()
}

/// Parses a single type.
pub fn parse_type(src: &str, env: &Env) -> Result<Type, ParseError> {
    let mut p = Parser::new(src, env)?;
    let t = p.ty()?;
    p.expect(Tok::Eof, "end of input")?;
    Ok(t)
}

/// Parses a single constructor.
pub fn parse_constructor(src: &str, env: &Env) -> Result<Constructor, ParseError> {
    let mut p = Parser::new(src, env)?;
    let c = p.con()?;
    p.expect(Tok::Eof, "end of input")?;
    Ok(c)
}

struct Parser<'e> {
    toks: Vec<Token>,
    pos: usize,
    env: &'e Env,
    cons: BTreeMap<String, Constructor>,
    terms: BTreeMap<String, Term>,
    tm_scope: Vec<Name>,
    ty_scope: Vec<Name>,
}

fn tok_desc(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(i) => format!("`{i}`"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Eof => String::from("end of input"),
        other => format!("{other:?}"),
    }
}

impl<'e> Parser<'e> {
    fn new(src: &str, env: &'e Env) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            env,
            cons: BTreeMap::new(),
            terms: BTreeMap::new(),
            tm_scope: Vec::new(),
            ty_scope: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let t = &self.toks[self.pos];
        Err(ParseError { line: t.line, col: t.col, message: msg.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            let found = tok_desc(self.peek());
            self.error(format!("expected {what}, found {found}"))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            let found = tok_desc(self.peek());
            self.error(format!("expected `{kw}`, found {found}"))
        }
    }

    /// A binder or variable name: any identifier that is not a keyword.
    fn ident(&mut self) -> Result<Name, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(name(&s))
            }
            other => self.error(format!("expected identifier, found {}", tok_desc(&other))),
        }
    }

    /// A record label: any identifier, keywords included.
    fn label(&mut self) -> Result<Label, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(name(&s))
            }
            other => self.error(format!("expected label, found {}", tok_desc(&other))),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut decls = Vec::new();
        while let (Tok::Ident(s), Tok::Assign) = (self.peek().clone(), self.peek_at(1).clone()) {
            if is_keyword(&s) {
                return self.error(format!("`{s}` is a keyword and cannot be declared"));
            }
            if self.cons.contains_key(&s) || self.terms.contains_key(&s) {
                return self.error(format!("duplicate top-level name `{s}`"));
            }
            self.bump();
            self.bump();
            let upper = s.chars().next().is_some_and(|c| c.is_uppercase());
            if upper {
                let c = self.con()?;
                self.expect(Tok::Semi, "`;` after declaration")?;
                self.cons.insert(s.clone(), c.clone());
                decls.push(Decl::Con(name(&s), c));
            } else {
                let m = self.expr()?;
                self.expect(Tok::Semi, "`;` after declaration")?;
                self.terms.insert(s.clone(), m.clone());
                decls.push(Decl::Term(name(&s), m));
            }
        }
        let main = self.expr()?;
        self.expect(Tok::Eof, "end of input")?;
        Ok(Program { decls, main })
    }

    // ---- kinds ----

    fn kind(&mut self) -> Result<Kind, ParseError> {
        let a = self.kind_atom()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let b = self.kind()?;
            Ok(Kind::arrow(a, b))
        } else {
            Ok(a)
        }
    }

    fn kind_atom(&mut self) -> Result<Kind, ParseError> {
        if self.eat_kw("Type") {
            Ok(Kind::Type)
        } else if self.eat_kw("Row") {
            Ok(Kind::Row)
        } else if *self.peek() == Tok::LParen {
            self.bump();
            let k = self.kind()?;
            self.expect(Tok::RParen, "`)`")?;
            Ok(k)
        } else {
            let found = tok_desc(self.peek());
            self.error(format!("expected a kind, found {found}"))
        }
    }

    fn opt_kind(&mut self) -> Result<Kind, ParseError> {
        if *self.peek() == Tok::Colon {
            self.bump();
            self.kind()
        } else {
            Ok(Kind::Type)
        }
    }

    // ---- constructors ----

    fn con(&mut self) -> Result<Constructor, ParseError> {
        if *self.peek() == Tok::Lambda {
            self.bump();
            let a = self.ident()?;
            let k = self.opt_kind()?;
            self.expect(Tok::Dot, "`.`")?;
            self.ty_scope.push(a.clone());
            let body = self.con();
            self.ty_scope.pop();
            return Ok(Constructor::Lam(a, k, Box::new(body?)));
        }
        self.con_app()
    }

    fn starts_con_atom(&self) -> bool {
        match self.peek() {
            Tok::LParen | Tok::LBracket | Tok::LBrace => true,
            Tok::Ident(s) => matches!(s.as_str(), "Bool" | "Int" | "String") || !is_keyword(s),
            _ => false,
        }
    }

    fn con_app(&mut self) -> Result<Constructor, ParseError> {
        let head = if self.eat_kw("List") {
            return Ok(Constructor::list(self.con_atom()?));
        } else if self.eat_kw("Trace") {
            return Ok(Constructor::trace(self.con_atom()?));
        } else if self.eat_kw("Record") {
            return Ok(Constructor::record(self.con_atom()?));
        } else if self.eat_kw("Rmap") {
            let f = self.con_atom()?;
            let r = self.con_atom()?;
            return Ok(Constructor::rmap(f, r));
        } else if self.eat_kw("Typerec") {
            let c = self.con_atom()?;
            self.expect(Tok::LParen, "`(` before the six Typerec branches")?;
            let mut bs = Vec::new();
            for i in 0..6 {
                if i > 0 {
                    self.expect(Tok::Comma, "`,` between Typerec branches")?;
                }
                bs.push(self.con()?);
            }
            self.expect(Tok::RParen, "`)` after the six Typerec branches")?;
            let arr: [Constructor; 6] = bs.try_into().unwrap_or_else(|_| unreachable!());
            Constructor::typerec(c, arr)
        } else {
            self.con_atom()?
        };
        let mut c = head;
        while self.starts_con_atom() {
            let a = self.con_atom()?;
            c = Constructor::app(c, a);
        }
        Ok(c)
    }

    fn con_atom(&mut self) -> Result<Constructor, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "Bool" => {
                self.bump();
                Ok(Constructor::BoolC)
            }
            Tok::Ident(s) if s == "Int" => {
                self.bump();
                Ok(Constructor::IntC)
            }
            Tok::Ident(s) if s == "String" => {
                self.bump();
                Ok(Constructor::StringC)
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(self.resolve_con(&s))
            }
            Tok::LBracket => {
                self.bump();
                let c = self.con()?;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Constructor::list(c))
            }
            Tok::LBrace => {
                self.bump();
                let row = self.row_fields(Tok::RBrace)?;
                Ok(Constructor::record(row))
            }
            Tok::LParen => {
                let is_row = matches!(self.peek_at(1), Tok::RParen | Tok::Pipe)
                    || matches!((self.peek_at(1), self.peek_at(2)), (Tok::Ident(_), Tok::Colon));
                self.bump();
                if is_row {
                    self.row_fields(Tok::RParen)
                } else {
                    let c = self.con()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(c)
                }
            }
            other => self.error(format!("expected a constructor, found {}", tok_desc(&other))),
        }
    }

    fn resolve_con(&self, s: &str) -> Constructor {
        if self.ty_scope.iter().any(|x| &**x == s) {
            return Constructor::var(s);
        }
        if let Some(c) = self.cons.get(s).or_else(|| self.env.cons.get(s)) {
            return c.clone();
        }
        Constructor::var(s)
    }

    /// `l : C, … [| tail]` up to `close`; the opening bracket is consumed.
    fn row_fields(&mut self, close: Tok) -> Result<Constructor, ParseError> {
        let mut fields: Vec<(Label, Constructor)> = Vec::new();
        let mut tail = Constructor::RowEmpty;
        if *self.peek() != close && *self.peek() != Tok::Pipe {
            loop {
                let l = self.label()?;
                self.expect(Tok::Colon, "`:` after label")?;
                let c = self.con()?;
                if fields.iter().any(|(k, _)| *k == l) {
                    return self.error(format!("duplicate record label `{l}`"));
                }
                fields.push((l, c));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        if *self.peek() == Tok::Pipe {
            self.bump();
            tail = self.con()?;
        }
        self.expect(close, "closing bracket of row")?;
        Ok(Constructor::row_with_tail(fields, tail))
    }

    // ---- types ----

    fn ty(&mut self) -> Result<Type, ParseError> {
        if self.eat_kw("forall") {
            let a = self.ident()?;
            let k = self.opt_kind()?;
            self.expect(Tok::Dot, "`.`")?;
            self.ty_scope.push(a.clone());
            let body = self.ty();
            self.ty_scope.pop();
            return Ok(Type::Forall(a, k, Box::new(body?)));
        }
        let a = self.ty_app()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let b = self.ty()?;
            Ok(Type::fun(a, b))
        } else {
            Ok(a)
        }
    }

    fn ty_app(&mut self) -> Result<Type, ParseError> {
        if self.eat_kw("List") {
            Ok(Type::list(self.ty_atom()?))
        } else if self.eat_kw("Trace") {
            Ok(Type::trace(self.ty_atom()?))
        } else {
            self.ty_atom()
        }
    }

    fn ty_atom(&mut self) -> Result<Type, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "Bool" => {
                self.bump();
                Ok(Type::Bool)
            }
            Tok::Ident(s) if s == "Int" => {
                self.bump();
                Ok(Type::Int)
            }
            Tok::Ident(s) if s == "String" => {
                self.bump();
                Ok(Type::String)
            }
            Tok::Ident(s) if s == "T" => {
                self.bump();
                self.expect(Tok::LParen, "`(` after T")?;
                let c = self.con()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Type::Embed(c))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(Type::Embed(self.resolve_con(&s)))
            }
            Tok::LBracket => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Type::list(t))
            }
            Tok::LBrace => {
                self.bump();
                let row = self.row_type_fields()?;
                Ok(Type::Record(row))
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            other => self.error(format!("expected a type, found {}", tok_desc(&other))),
        }
    }

    fn row_type_fields(&mut self) -> Result<RowType, ParseError> {
        let mut fields: Vec<(Label, Type)> = Vec::new();
        if *self.peek() != Tok::RBrace {
            loop {
                let l = self.label()?;
                self.expect(Tok::Colon, "`:` after label")?;
                let t = self.ty()?;
                if fields.iter().any(|(k, _)| *k == l) {
                    return self.error(format!("duplicate record label `{l}`"));
                }
                fields.push((l, t));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(RowType::new(fields))
    }

    // ---- terms ----

    fn with_tm<T>(&mut self, x: &Name, f: impl FnOnce(&mut Self) -> T) -> T {
        self.tm_scope.push(x.clone());
        let r = f(self);
        self.tm_scope.pop();
        r
    }

    fn with_ty<T>(&mut self, a: &Name, f: impl FnOnce(&mut Self) -> T) -> T {
        self.ty_scope.push(a.clone());
        let r = f(self);
        self.ty_scope.pop();
        r
    }

    fn starts_prefix_form(&self) -> bool {
        matches!(self.peek(), Tok::Lambda | Tok::BigLambda)
            || ["if", "for", "where", "fix", "typecase", "tracecase"]
                .iter()
                .any(|k| self.is_kw(k))
    }

    fn expr(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Lambda => {
                self.bump();
                let x = self.ident()?;
                self.expect(Tok::Colon, "`:` and a type annotation after the lambda binder")?;
                let t = self.ty()?;
                self.expect(Tok::Dot, "`.`")?;
                let body = self.with_tm(&x, |p| p.expr())?;
                Ok(Term::Lam(x, t, Arc::new(body)))
            }
            Tok::BigLambda => {
                self.bump();
                let a = self.ident()?;
                let k = self.opt_kind()?;
                self.expect(Tok::Dot, "`.`")?;
                let body = self.with_ty(&a, |p| p.expr())?;
                Ok(Term::TyLam(a, k, Arc::new(body)))
            }
            Tok::Ident(s) => match s.as_str() {
                "if" => {
                    self.bump();
                    let c = self.expr()?;
                    self.expect_kw("then")?;
                    let t = self.expr()?;
                    self.expect_kw("else")?;
                    let e = self.expr()?;
                    Ok(Term::if_(c, t, e))
                }
                "for" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(` after for")?;
                    let x = self.ident()?;
                    self.expect(Tok::LArrow, "`<-`")?;
                    let src = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    let body = self.with_tm(&x, |p| p.expr())?;
                    Ok(Term::For(x, Arc::new(src), Arc::new(body)))
                }
                "where" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(` after where")?;
                    let c = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    let body = self.expr()?;
                    Ok(Term::if_(c, body, Term::EmptyList))
                }
                "fix" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(` after fix")?;
                    let f = self.ident()?;
                    self.expect(Tok::Colon, "`:`")?;
                    let t = self.ty()?;
                    self.expect(Tok::RParen, "`)`")?;
                    self.expect(Tok::Dot, "`.`")?;
                    let body = self.with_tm(&f, |p| p.expr())?;
                    Ok(Term::Fix(f, t, Arc::new(body)))
                }
                "typecase" => self.typecase(),
                "tracecase" => self.tracecase(),
                _ => self.concat(),
            },
            _ => self.concat(),
        }
    }

    fn rhs<F>(&mut self, f: F) -> Result<Term, ParseError>
    where
        F: FnOnce(&mut Self) -> Result<Term, ParseError>,
    {
        if self.starts_prefix_form() {
            self.expr()
        } else {
            f(self)
        }
    }

    fn concat(&mut self) -> Result<Term, ParseError> {
        let a = self.and()?;
        if *self.peek() == Tok::PlusPlus {
            self.bump();
            let b = self.rhs(|p| p.concat())?;
            Ok(Term::concat(a, b))
        } else {
            Ok(a)
        }
    }

    fn and(&mut self) -> Result<Term, ParseError> {
        let a = self.equality()?;
        if *self.peek() == Tok::AndAnd {
            self.bump();
            let b = self.rhs(|p| p.and())?;
            Ok(Term::if_(a, b, Term::bool(false)))
        } else {
            Ok(a)
        }
    }

    fn equality(&mut self) -> Result<Term, ParseError> {
        let a = self.sum()?;
        if *self.peek() == Tok::EqEq {
            self.bump();
            let b = self.rhs(|p| p.sum())?;
            if *self.peek() == Tok::EqEq {
                return self.error("`==` does not associate; add parentheses");
            }
            Ok(Term::eq(a, b))
        } else {
            Ok(a)
        }
    }

    fn sum(&mut self) -> Result<Term, ParseError> {
        let mut a = self.app()?;
        while *self.peek() == Tok::Plus {
            self.bump();
            if self.starts_prefix_form() {
                let b = self.expr()?;
                return Ok(Term::plus(a, b));
            }
            let b = self.app()?;
            a = Term::plus(a, b);
        }
        Ok(a)
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Int(_) | Tok::Str(_) | Tok::LParen | Tok::LBrace | Tok::LBracket => true,
            Tok::Ident(s) => matches!(s.as_str(), "true" | "false" | "table") || !is_keyword(s),
            _ => false,
        }
    }

    fn app(&mut self) -> Result<Term, ParseError> {
        if let Tok::Ident(s) = self.peek().clone() {
            let wrap1 = |p: &mut Self, f: fn(Arc<Term>) -> Term| -> Result<Term, ParseError> {
                p.bump();
                let m = p.postfix()?;
                Ok(f(Arc::new(m)))
            };
            match s.as_str() {
                "Lit" => return wrap1(self, Term::TrLit),
                "If" => return wrap1(self, Term::TrIf),
                "Cell" => return wrap1(self, Term::TrCell),
                "OpPlus" => return wrap1(self, Term::TrOpPlus),
                "trace" => return wrap1(self, Term::TraceOf),
                "For" | "OpEq" => {
                    self.bump();
                    let c = self.con_atom()?;
                    let m = Arc::new(self.postfix()?);
                    return Ok(if s == "For" { Term::TrFor(c, m) } else { Term::TrOpEq(c, m) });
                }
                "rmap" => {
                    self.bump();
                    self.expect(Tok::Caret, "`^` and a row after rmap")?;
                    let row = self.con_atom()?;
                    let f = self.postfix()?;
                    let r = self.postfix()?;
                    return Ok(Term::RMap(row, Arc::new(f), Arc::new(r)));
                }
                "rfold" => {
                    self.bump();
                    self.expect(Tok::Caret, "`^` and a row after rfold")?;
                    let row = self.con_atom()?;
                    let l = self.postfix()?;
                    let z = self.postfix()?;
                    let r = self.postfix()?;
                    return Ok(Term::RFold(row, Arc::new(l), Arc::new(z), Arc::new(r)));
                }
                _ => {}
            }
        }
        let mut f = self.postfix()?;
        loop {
            if *self.peek() == Tok::At {
                self.bump();
                let c = self.con_atom()?;
                f = Term::tyapp(f, c);
            } else if self.starts_atom() {
                let a = self.postfix()?;
                f = Term::app(f, a);
            } else {
                return Ok(f);
            }
        }
    }

    fn postfix(&mut self) -> Result<Term, ParseError> {
        let mut m = self.atom()?;
        while *self.peek() == Tok::Dot {
            self.bump();
            let l = self.label()?;
            m = Term::Project(Arc::new(m), l);
        }
        Ok(m)
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Term::int(i))
            }
            Tok::Minus => {
                self.bump();
                match self.bump() {
                    Tok::Int(i) => Ok(Term::int(-i)),
                    _ => self.error("expected an integer literal after `-`"),
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Term::Const(Literal::Str(s)))
            }
            Tok::Ident(s) => match s.as_str() {
                "true" => {
                    self.bump();
                    Ok(Term::bool(true))
                }
                "false" => {
                    self.bump();
                    Ok(Term::bool(false))
                }
                "table" => {
                    self.bump();
                    let n = match self.bump() {
                        Tok::Str(n) => n,
                        _ => return self.error("expected the table name as a string literal"),
                    };
                    self.expect(Tok::LBrace, "`{` and the table schema")?;
                    let row = self.row_type_fields()?;
                    Ok(Term::Table(name(&n), row))
                }
                _ if is_keyword(&s) => self.error(format!("unexpected keyword `{s}`")),
                _ => {
                    self.bump();
                    Ok(self.resolve_term(&s))
                }
            },
            Tok::LParen => {
                self.bump();
                let m = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(m)
            }
            Tok::LBracket => {
                self.bump();
                if *self.peek() == Tok::RBracket {
                    self.bump();
                    return Ok(Term::EmptyList);
                }
                let mut items = alloc::vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    items.push(self.expr()?);
                }
                self.expect(Tok::RBracket, "`]`")?;
                let mut out = Term::singleton(items.pop().unwrap_or(Term::EmptyList));
                while let Some(m) = items.pop() {
                    out = Term::concat(Term::singleton(m), out);
                }
                Ok(out)
            }
            Tok::LBrace => {
                self.bump();
                let mut fields: Vec<(Label, Term)> = Vec::new();
                let mut tail = Term::EmptyRecord;
                if *self.peek() != Tok::RBrace && *self.peek() != Tok::Pipe {
                    loop {
                        let l = self.label()?;
                        self.expect(Tok::Assign, "`=` after label")?;
                        let m = self.expr()?;
                        if fields.iter().any(|(k, _)| *k == l) {
                            return self.error(format!("duplicate record label `{l}`"));
                        }
                        fields.push((l, m));
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                if *self.peek() == Tok::Pipe {
                    self.bump();
                    tail = self.expr()?;
                }
                self.expect(Tok::RBrace, "`}`")?;
                Ok(Term::record_with_tail(fields, tail))
            }
            other => self.error(format!("expected an expression, found {}", tok_desc(&other))),
        }
    }

    fn resolve_term(&self, s: &str) -> Term {
        if self.tm_scope.iter().any(|x| &**x == s) {
            return Term::var(s);
        }
        if let Some(m) = self.terms.get(s).or_else(|| self.env.terms.get(s)) {
            return m.clone();
        }
        Term::var(s)
    }

    fn branch_head(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            let found = tok_desc(self.peek());
            self.error(format!("expected the `{kw}` branch, found {found}"))
        }
    }

    fn typecase(&mut self) -> Result<Term, ParseError> {
        self.expect_kw("typecase")?;
        let c = self.con()?;
        self.expect_kw("return")?;
        let v = self.ident()?;
        self.expect(Tok::Dot, "`.` after the motive binder")?;
        let motive_ty = self.with_ty(&v, |p| p.ty())?;
        self.expect_kw("of")?;
        self.expect(Tok::LBrace, "`{`")?;
        let simple = |p: &mut Self, kw: &str, last: bool| -> Result<Arc<Term>, ParseError> {
            p.branch_head(kw)?;
            p.expect(Tok::FatArrow, "`=>`")?;
            let m = p.expr()?;
            if !last {
                p.expect(Tok::Comma, "`,` between branches")?;
            }
            Ok(Arc::new(m))
        };
        let bool_ = simple(self, "Bool", false)?;
        let int = simple(self, "Int", false)?;
        let string = simple(self, "String", false)?;
        let binder = |p: &mut Self, kw: &str, last: bool| -> Result<TyBind, ParseError> {
            p.branch_head(kw)?;
            let b = p.ident()?;
            p.expect(Tok::FatArrow, "`=>`")?;
            let m = p.with_ty(&b, |p| p.expr())?;
            if !last {
                p.expect(Tok::Comma, "`,` between branches")?;
            }
            Ok(TyBind { tyvar: b, body: Arc::new(m) })
        };
        let list = binder(self, "List", false)?;
        let record = binder(self, "Record", false)?;
        let trace = binder(self, "Trace", true)?;
        if *self.peek() == Tok::Comma {
            self.bump();
        }
        self.expect(Tok::RBrace, "`}` after the six typecase branches")?;
        Ok(Term::Typecase(
            c,
            Arc::new(Motive { var: v, body: motive_ty }),
            Arc::new(TypeBranches { bool_, int, string, list, record, trace }),
        ))
    }

    fn tracecase(&mut self) -> Result<Term, ParseError> {
        self.expect_kw("tracecase")?;
        let m = self.expr()?;
        self.expect_kw("of")?;
        self.expect(Tok::LBrace, "`{`")?;
        let one = |p: &mut Self, kw: &str, last: bool| -> Result<Bind1, ParseError> {
            p.branch_head(kw)?;
            let x = p.ident()?;
            p.expect(Tok::FatArrow, "`=>`")?;
            let body = p.with_tm(&x, |p| p.expr())?;
            if !last {
                p.expect(Tok::Comma, "`,` between branches")?;
            }
            Ok(Bind1 { var: x, body: Arc::new(body) })
        };
        let two = |p: &mut Self, kw: &str| -> Result<Bind2, ParseError> {
            p.branch_head(kw)?;
            let a = p.ident()?;
            let x = p.ident()?;
            p.expect(Tok::FatArrow, "`=>`")?;
            let body = p.with_ty(&a, |p| p.with_tm(&x, |p| p.expr()))?;
            p.expect(Tok::Comma, "`,` between branches")?;
            Ok(Bind2 { tyvar: a, var: x, body: Arc::new(body) })
        };
        let lit = one(self, "Lit", false)?;
        let if_ = one(self, "If", false)?;
        let for_ = two(self, "For")?;
        let cell = one(self, "Cell", false)?;
        let op_eq = two(self, "OpEq")?;
        let op_plus = one(self, "OpPlus", true)?;
        if *self.peek() == Tok::Comma {
            self.bump();
        }
        self.expect(Tok::RBrace, "`}` after the six tracecase branches")?;
        Ok(Term::Tracecase(
            Arc::new(m),
            Arc::new(TraceBranches { lit, if_, for_, cell, op_eq, op_plus }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn main_of(s: &str) -> Term {
        parse(s).unwrap().main
    }

    #[test]
    fn plus() {
        assert_eq!(main_of("2+3"), Term::plus(Term::int(2), Term::int(3)));
    }

    #[test]
    fn where_sugar() {
        let m = main_of(r#"where (e.type == "boat") [e.name]"#);
        let expect = Term::if_(
            Term::eq(Term::project(Term::var("e"), "type"), Term::str("boat")),
            Term::singleton(Term::project(Term::var("e"), "name")),
            Term::EmptyList,
        );
        assert_eq!(m, expect);
    }

    #[test]
    fn for_over_empty() {
        assert_eq!(main_of("for (x <- []) x"), Term::for_("x", Term::EmptyList, Term::var("x")));
    }

    #[test]
    fn and_sugar() {
        assert_eq!(main_of("a && b"), Term::if_(Term::var("a"), Term::var("b"), Term::bool(false)));
    }

    #[test]
    fn labels_are_sorted() {
        let m = main_of("{b = 1, a = 2}");
        let (fields, _) = m.record_spine();
        assert_eq!(&**fields[0].0, "a");
    }

    #[test]
    fn duplicate_label_rejected() {
        let e = parse("{a = 1, a = 2}").unwrap_err();
        assert!(e.message.contains("duplicate record label"));
    }

    #[test]
    fn duplicate_decl_rejected() {
        let e = parse("x = 1; x = 2; x").unwrap_err();
        assert!(e.message.contains("duplicate top-level name"));
    }

    #[test]
    fn declarations_are_inlined() {
        let p = parse("F = \\a. List a; x = 1; /\\b. \\y:T(F b). x").unwrap();
        let expect = Term::tylam(
            "b",
            Kind::Type,
            Term::lam(
                "y",
                Type::Embed(Constructor::app(
                    Constructor::lam("a", Kind::Type, Constructor::list(Constructor::var("a"))),
                    Constructor::var("b"),
                )),
                Term::int(1),
            ),
        );
        assert_eq!(p.main, expect);
        assert_eq!(p.decls.len(), 2);
    }

    #[test]
    fn error_has_position() {
        let e = parse("for (x <- ) x").unwrap_err();
        assert_eq!((e.line, e.col), (1, 11));
    }

    #[test]
    fn typerec_tuple() {
        let c = parse_constructor("\\a. Typerec a (Bool, Int, String, \\b c. c, \\r s. Record s, \\b t. t)", &Env::default());
        assert!(c.is_err(), "multi-binder lambdas are not part of the grammar");
        let c = parse_constructor(
            "\\a. Typerec a (Bool, Int, String, \\b. \\c. c, \\r:Row. \\s:Row. Record s, \\b. \\t. t)",
            &Env::default(),
        )
        .unwrap();
        assert!(matches!(c, Constructor::Lam(_, _, ref b) if matches!(**b, Constructor::Typerec(..))));
    }

    #[test]
    fn rows_in_parens() {
        let c = parse_constructor("Rmap F (b : Int, a : Bool | r)", &Env::default()).unwrap();
        match c {
            Constructor::Rmap(_, row) => {
                let (fields, tail) = row.row_spine();
                assert_eq!(&**fields[0].0, "a");
                assert_eq!(*tail, Constructor::var("r"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
