//! SQL generation for flat NRC queries.
//!
//! A query whose result is a list of (possibly nested) records of base
//! types becomes one `SELECT` per branch of its `++` chain, joined with
//! `UNION ALL`. Comprehension binders become `FROM` aliases, `if` guards
//! become `WHERE` conjuncts, and nested record fields are flattened into
//! columns named by their label path joined with `_`. Booleans are the
//! integers 0 and 1.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::normalize::NrcTerm;
use crate::syntax::{Label, Literal, Name, RowType, Type};
use crate::types::canon;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SqlError {
    #[error("result type {0} is not a list of flat records; nested collections need query shredding")]
    NotFlat(String),
    #[error("cannot translate {detail} at {path}")]
    UnsupportedShape { detail: String, path: String },
}

/// One output column: its SQL name, the label path in the result value,
/// and its base type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub path: Vec<Label>,
    pub ty: Type,
}

/// A single `SELECT ... FROM ... WHERE ...` block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Select {
    /// `(expression, column name)` pairs.
    pub items: Vec<(String, String)>,
    /// `(lower-cased table name, alias)` pairs.
    pub from: Vec<(String, String)>,
    /// Conjuncts of the `WHERE` clause.
    pub conditions: Vec<String>,
}

/// A `UNION ALL` of selects over a fixed column list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SqlQuery {
    pub columns: Vec<Column>,
    pub selects: Vec<Select>,
}

impl fmt::Display for Select {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        for (i, (e, a)) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{e} AS {}", quote_ident(a))?;
        }
        if !self.from.is_empty() {
            f.write_str("\n  FROM ")?;
            for (i, (t, a)) in self.from.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{} AS {a}", quote_ident(t))?;
            }
        }
        if !self.conditions.is_empty() {
            write!(f, "\n WHERE {}", self.conditions.join(" AND "))?;
        }
        Ok(())
    }
}

impl fmt::Display for SqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.selects.is_empty() {
            f.write_str("SELECT ")?;
            for (i, c) in self.columns.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "NULL AS {}", quote_ident(&c.name))?;
            }
            return f.write_str(" WHERE 0 = 1");
        }
        for (i, s) in self.selects.iter().enumerate() {
            if i > 0 {
                f.write_str("\nUNION ALL\n")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

const RESERVED: &[&str] = &[
    "all", "and", "as", "by", "case", "cross", "distinct", "else", "end", "except", "exists", "from", "group",
    "having", "in", "inner", "intersect", "is", "join", "left", "like", "limit", "not", "null", "on", "or", "order",
    "select", "table", "then", "union", "using", "values", "when", "where", "with",
];

fn is_plain_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED.contains(&s.to_ascii_lowercase().as_str())
}

/// Double-quotes an identifier unless it is a plain, unreserved name.
pub fn quote_ident(s: &str) -> String {
    if is_plain_ident(s) {
        String::from(s)
    } else {
        format!("\"{}\"", s.replace('"', "\"\""))
    }
}

/// A single-quoted SQL string literal.
pub fn quote_str(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// The flattened columns of a list type, or `NotFlat`.
pub fn result_columns(ty: &Type) -> Result<Vec<Column>, SqlError> {
    let t = canon(ty).map_err(|_| SqlError::NotFlat(crate::syntax::print_type(ty)))?;
    let Type::List(elem) = &t else {
        return Err(SqlError::NotFlat(crate::syntax::print_type(ty)));
    };
    let mut out = Vec::new();
    if elem.is_base() {
        out.push(Column { name: String::from("value"), path: Vec::new(), ty: (**elem).clone() });
        return Ok(out);
    }
    flatten_type(elem, &mut Vec::new(), &mut out).map_err(|_| SqlError::NotFlat(crate::syntax::print_type(ty)))?;
    Ok(out)
}

fn flatten_type(t: &Type, path: &mut Vec<Label>, out: &mut Vec<Column>) -> Result<(), ()> {
    match t {
        Type::Bool | Type::Int | Type::String => {
            let name = path.iter().map(|l| &**l).collect::<Vec<_>>().join("_");
            out.push(Column { name, path: path.clone(), ty: t.clone() });
            Ok(())
        }
        Type::Record(row) => {
            for (l, ft) in &row.fields {
                path.push(l.clone());
                flatten_type(ft, path, out)?;
                path.pop();
            }
            Ok(())
        }
        _ => Err(()),
    }
}

/// Translates the NRC query `m` of type `ty` to SQL.
pub fn emit_sql(m: &NrcTerm, ty: &Type) -> Result<String, SqlError> {
    Ok(format!("{}", translate(m, ty)?))
}

/// Like [`emit_sql`], returning the structured query.
pub fn translate(m: &NrcTerm, ty: &Type) -> Result<SqlQuery, SqlError> {
    let columns = result_columns(ty)?;
    let mut g = Gen { columns: &columns, scope: Vec::new(), conds: Vec::new(), path: Vec::new(), out: Vec::new() };
    g.branch(m)?;
    let selects = g.out;
    Ok(SqlQuery { columns, selects })
}

struct Binding {
    var: Name,
    alias: String,
    table: String,
    schema: RowType,
}

struct Gen<'a> {
    columns: &'a [Column],
    scope: Vec<Binding>,
    conds: Vec<String>,
    path: Vec<String>,
    out: Vec<Select>,
}

impl Gen<'_> {
    fn unsupported<T>(&self, detail: String) -> Result<T, SqlError> {
        let path = if self.path.is_empty() { String::from("the root") } else { self.path.join(" / ") };
        Err(SqlError::UnsupportedShape { detail, path })
    }

    fn nested<T>(&mut self, seg: String, f: impl FnOnce(&mut Self) -> Result<T, SqlError>) -> Result<T, SqlError> {
        self.path.push(seg);
        let r = f(self);
        self.path.pop();
        r
    }

    fn branch(&mut self, m: &NrcTerm) -> Result<(), SqlError> {
        match m {
            NrcTerm::Empty => Ok(()),
            NrcTerm::Concat(a, b) => {
                self.nested(String::from("++ left"), |g| g.branch(a))?;
                self.nested(String::from("++ right"), |g| g.branch(b))
            }
            NrcTerm::For(x, src, body) => {
                let NrcTerm::Table(n, schema) = &**src else {
                    return self.unsupported(format!("a comprehension over a non-table source in `for {x}`"));
                };
                let alias = self.alias_for(x);
                self.scope.push(Binding {
                    var: x.clone(),
                    alias,
                    table: n.to_ascii_lowercase(),
                    schema: schema.clone(),
                });
                let r = self.nested(format!("for {x} body"), |g| g.branch(body));
                self.scope.pop();
                r
            }
            NrcTerm::If(c, a, b) => {
                let cond = self.nested(String::from("if condition"), |g| g.cond(c))?;
                self.conds.push(cond.clone());
                let r = self.nested(String::from("then"), |g| g.branch(a));
                self.conds.pop();
                r?;
                if **b != NrcTerm::Empty {
                    self.conds.push(format!("NOT ({cond})"));
                    let r = self.nested(String::from("else"), |g| g.branch(b));
                    self.conds.pop();
                    r?;
                }
                Ok(())
            }
            NrcTerm::Singleton(e) => {
                let mut items = Vec::new();
                for c in self.columns {
                    let mut v = (**e).clone();
                    for l in &c.path {
                        v = self.field(&v, l)?;
                    }
                    let expr = self.nested(format!("column {}", c.name), |g| g.scalar(&v))?;
                    items.push((expr, c.name.clone()));
                }
                let from = self.scope.iter().map(|b| (b.table.clone(), b.alias.clone())).collect();
                self.out.push(Select { items, from, conditions: self.conds.clone() });
                Ok(())
            }
            other => self.unsupported(format!("`{}` in collection position", other.to_term().node_name())),
        }
    }

    fn alias_for(&self, x: &str) -> String {
        let taken = |a: &str| self.scope.iter().any(|b| b.alias == a);
        if is_plain_ident(x) && !taken(x) {
            return String::from(x);
        }
        let mut i = self.scope.len();
        loop {
            let a = format!("t{i}");
            if !taken(&a) {
                return a;
            }
            i += 1;
        }
    }

    fn binding(&self, x: &str) -> Option<&Binding> {
        self.scope.iter().rev().find(|b| &*b.var == x)
    }

    /// The field `l` of a record-valued expression.
    fn field(&self, v: &NrcTerm, l: &Label) -> Result<NrcTerm, SqlError> {
        match v {
            NrcTerm::Record(fs) => match fs.iter().find(|(k, _)| k == l) {
                Some((_, e)) => Ok(e.clone()),
                None => self.unsupported(format!("missing field `{l}`")),
            },
            NrcTerm::Var(_) => Ok(NrcTerm::Project(alloc::boxed::Box::new(v.clone()), l.clone())),
            NrcTerm::If(c, a, b) => Ok(NrcTerm::If(
                c.clone(),
                alloc::boxed::Box::new(self.field(a, l)?),
                alloc::boxed::Box::new(self.field(b, l)?),
            )),
            other => self.unsupported(format!("record expression `{other}`")),
        }
    }

    /// Base-typed fields of a record-valued expression, in label order.
    fn scalars(&self, v: &NrcTerm) -> Result<Vec<String>, SqlError> {
        match v {
            NrcTerm::Record(fs) => {
                let mut out = Vec::new();
                for (_, e) in fs {
                    out.extend(self.scalars(e)?);
                }
                Ok(out)
            }
            NrcTerm::Var(x) => match self.binding(x) {
                Some(b) => Ok(b.schema.fields.iter().map(|(l, _)| format!("{}.{}", b.alias, quote_ident(l))).collect()),
                None => self.unsupported(format!("free variable `{x}`")),
            },
            other => Ok(alloc::vec![self.scalar(other)?]),
        }
    }

    fn scalar(&self, e: &NrcTerm) -> Result<String, SqlError> {
        Ok(match e {
            NrcTerm::Const(Literal::Int(i)) if *i < 0 => format!("({i})"),
            NrcTerm::Const(Literal::Int(i)) => format!("{i}"),
            NrcTerm::Const(Literal::Bool(b)) => String::from(if *b { "1" } else { "0" }),
            NrcTerm::Const(Literal::Str(s)) => quote_str(s),
            NrcTerm::Project(r, l) => match &**r {
                NrcTerm::Var(x) => match self.binding(x) {
                    Some(b) if b.schema.get(l).is_some() => format!("{}.{}", b.alias, quote_ident(l)),
                    Some(_) => return self.unsupported(format!("unknown column `{x}.{l}`")),
                    None => return self.unsupported(format!("free variable `{x}`")),
                },
                NrcTerm::Record(_) | NrcTerm::If(..) => self.scalar(&self.field(r, l)?)?,
                other => return self.unsupported(format!("projection from `{other}`")),
            },
            NrcTerm::Plus(a, b) => format!("({} + {})", self.scalar(a)?, self.scalar(b)?),
            NrcTerm::Eq(..) => format!("({})", self.cond(e)?),
            NrcTerm::If(c, a, b) => format!("CASE WHEN {} THEN {} ELSE {} END", self.cond(c)?, self.scalar(a)?, self.scalar(b)?),
            other => return self.unsupported(format!("`{other}` in a column")),
        })
    }

    fn cond(&self, e: &NrcTerm) -> Result<String, SqlError> {
        Ok(match e {
            NrcTerm::Eq(a, b) => {
                let xs = self.scalars(a)?;
                let ys = self.scalars(b)?;
                if xs.len() != ys.len() {
                    return self.unsupported(String::from("comparison of records of different shape"));
                }
                if xs.is_empty() {
                    return Ok(String::from("1 = 1"));
                }
                xs.iter().zip(&ys).map(|(x, y)| format!("{x} = {y}")).collect::<Vec<_>>().join(" AND ")
            }
            NrcTerm::Const(Literal::Bool(true)) => String::from("1 = 1"),
            NrcTerm::Const(Literal::Bool(false)) => String::from("0 = 1"),
            NrcTerm::If(c, a, b) => {
                format!("CASE WHEN {} THEN {} ELSE {} END = 1", self.cond(c)?, self.scalar(a)?, self.scalar(b)?)
            }
            other => format!("{} = 1", self.scalar(other)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::extract_nrc;
    use crate::syntax::{parse, parse_type, Env};
    use crate::types::Context;

    fn q(s: &str) -> NrcTerm {
        extract_nrc(&parse(s).unwrap().main, &Context::new()).unwrap()
    }

    fn ty(s: &str) -> Type {
        parse_type(s, &Env::default()).unwrap()
    }

    #[test]
    fn single_projection() {
        let sql = emit_sql(&q(r#"for (x <- table "t" {oid : Int, a : Int}) [{a = x.a}]"#), &ty("[{a : Int}]")).unwrap();
        assert_eq!(sql, "SELECT x.a AS a\n  FROM t AS x");
    }

    #[test]
    fn nested_records_flatten() {
        let cols = result_columns(&ty("[{name : {val : String, row : Int}, n : Int}]")).unwrap();
        let names: Vec<_> = cols.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["n", "name_row", "name_val"]);
    }

    #[test]
    fn nested_list_is_not_flat() {
        assert!(matches!(result_columns(&ty("[{a : Int, l : [Int]}]")), Err(SqlError::NotFlat(_))));
    }

    #[test]
    fn guards_and_unions() {
        let m = q(r#"(for (x <- table "T" {oid : Int, b : Bool}) if x.b then [x.oid] else [0]) ++ [7]"#);
        let sql = emit_sql(&m, &ty("[Int]")).unwrap();
        assert_eq!(
            sql,
            "SELECT x.oid AS value\n  FROM t AS x\n WHERE x.b = 1\nUNION ALL\nSELECT 0 AS value\n  FROM t AS x\n WHERE NOT (x.b = 1)\nUNION ALL\nSELECT 7 AS value"
        );
    }

    #[test]
    fn quoting() {
        assert_eq!(quote_str("Burns's"), "'Burns''s'");
        assert_eq!(quote_ident("order"), "\"order\"");
        assert_eq!(emit_sql(&NrcTerm::Empty, &ty("[{a : Int}]")).unwrap(), "SELECT NULL AS a WHERE 0 = 1");
    }
}
