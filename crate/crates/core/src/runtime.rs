//! In-memory databases and a direct evaluator for NRC queries.
//!
//! Evaluation uses list semantics: `for` visits table rows in ascending
//! `oid` and concatenates the results, `++` appends. Integer arithmetic is
//! checked and overflow is an error.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::normalize::NrcTerm;
use crate::syntax::{Label, Literal, Name, RowType, Type};

/// Values of NRC queries.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
    List(Vec<Value>),
    /// Fields are kept in label order.
    Record(BTreeMap<Label, Value>),
}

impl Value {
    pub fn record<I: IntoIterator<Item = (Label, Value)>>(fields: I) -> Value {
        Value::Record(fields.into_iter().collect())
    }

    pub fn str(s: &str) -> Value {
        Value::Str(String::from(s))
    }

    pub fn field(&self, l: &str) -> Option<&Value> {
        match self {
            Value::Record(fs) => fs.get(l),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(xs) => Some(xs),
            _ => None,
        }
    }

    fn from_literal(c: &Literal) -> Value {
        match c {
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(i) => Value::Int(*i),
            Literal::Str(s) => Value::Str(s.clone()),
        }
    }

    /// Does this value inhabit the base type `t`?
    pub fn has_base_type(&self, t: &Type) -> bool {
        matches!((self, t), (Value::Bool(_), Type::Bool) | (Value::Int(_), Type::Int) | (Value::Str(_), Type::String))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::List(xs) => {
                f.write_str("[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
            Value::Record(fs) => {
                f.write_str("{")?;
                for (i, (l, v)) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{l} = {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// A table row: one base value per column.
pub type Row = BTreeMap<Label, Value>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub schema: RowType,
    /// Rows in ascending `oid` order.
    pub rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DatabaseError {
    #[error("table `{table}`: {detail}")]
    SchemaViolation { table: String, detail: String },
    #[error("table `{table}`: duplicate oid {oid}")]
    DuplicateOid { table: String, oid: i64 },
}

/// Named tables. Lookup of table names ignores ASCII case.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    tables: BTreeMap<String, (Name, Table)>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    /// Adds a table after checking every row against the schema and the
    /// uniqueness of `oid`. Rows are sorted by `oid`.
    pub fn insert(&mut self, name: &str, schema: RowType, mut rows: Vec<Row>) -> Result<(), DatabaseError> {
        let err = |detail: String| DatabaseError::SchemaViolation { table: String::from(name), detail };
        match schema.get("oid") {
            Some(Type::Int) => {}
            _ => return Err(err(String::from("schema lacks the column oid : Int"))),
        }
        for (l, t) in &schema.fields {
            if !t.is_base() {
                return Err(err(format!("column `{l}` is not of base type")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (l, t) in &schema.fields {
                match row.get(l) {
                    None => return Err(err(format!("row {i} lacks column `{l}`"))),
                    Some(v) if !v.has_base_type(t) => {
                        return Err(err(format!("row {i}: column `{l}` holds {v}, expected {t}")))
                    }
                    Some(_) => {}
                }
            }
            if let Some(extra) = row.keys().find(|k| schema.get(k).is_none()) {
                return Err(err(format!("row {i} has unknown column `{extra}`")));
            }
        }
        rows.sort_by_key(oid_of);
        for w in rows.windows(2) {
            if oid_of(&w[0]) == oid_of(&w[1]) {
                return Err(DatabaseError::DuplicateOid { table: String::from(name), oid: oid_of(&w[0]) });
            }
        }
        self.tables.insert(name.to_ascii_lowercase(), (crate::syntax::name(name), Table { schema, rows }));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Table> {
        self.tables.get(&name.to_ascii_lowercase()).map(|(_, t)| t)
    }

    /// Tables with the names they were inserted under.
    pub fn tables(&self) -> impl Iterator<Item = (&Name, &Table)> {
        self.tables.values().map(|(n, t)| (n, t))
    }

    pub fn total_rows(&self) -> usize {
        self.tables.values().map(|(_, t)| t.rows.len()).sum()
    }

    /// A copy keeping only the rows for which `keep(table, oid)` holds.
    pub fn filter_rows(&self, mut keep: impl FnMut(&str, i64) -> bool) -> Database {
        let mut out = self.clone();
        for (n, t) in out.tables.values_mut() {
            t.rows.retain(|r| keep(n, oid_of(r)));
        }
        out
    }
}

fn oid_of(r: &Row) -> i64 {
    match r.get("oid") {
        Some(Value::Int(i)) => *i,
        _ => i64::MIN,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no table named `{0}`")]
    MissingTable(String),
    #[error("table `{table}` does not have the schema the query expects: {detail}")]
    SchemaMismatch { table: String, detail: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("integer overflow")]
    Overflow,
    #[error("ill-typed query: {0}")]
    IllTyped(String),
}

/// Evaluates a closed NRC query.
pub fn eval(m: &NrcTerm, db: &Database) -> Result<Value, EvalError> {
    Evaluator { db, env: Vec::new() }.eval(m)
}

struct Evaluator<'a> {
    db: &'a Database,
    env: Vec<(Name, Value)>,
}

impl Evaluator<'_> {
    fn eval(&mut self, m: &NrcTerm) -> Result<Value, EvalError> {
        Ok(match m {
            NrcTerm::Const(c) => Value::from_literal(c),
            NrcTerm::Var(x) => self
                .env
                .iter()
                .rev()
                .find(|(y, _)| y == x)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| EvalError::UnboundVariable(String::from(&**x)))?,
            NrcTerm::Record(fs) => {
                let mut out = BTreeMap::new();
                for (l, v) in fs {
                    out.insert(l.clone(), self.eval(v)?);
                }
                Value::Record(out)
            }
            NrcTerm::Project(r, l) => match self.eval(r)? {
                Value::Record(mut fs) => {
                    fs.remove(l).ok_or_else(|| EvalError::IllTyped(format!("no field `{l}`")))?
                }
                v => return Err(EvalError::IllTyped(format!("projection `.{l}` from {v}"))),
            },
            NrcTerm::Plus(a, b) => match (self.eval(a)?, self.eval(b)?) {
                (Value::Int(x), Value::Int(y)) => Value::Int(x.checked_add(y).ok_or(EvalError::Overflow)?),
                (x, y) => return Err(EvalError::IllTyped(format!("{x} + {y}"))),
            },
            NrcTerm::Eq(a, b) => Value::Bool(self.eval(a)? == self.eval(b)?),
            NrcTerm::If(c, a, b) => match self.eval(c)? {
                Value::Bool(true) => self.eval(a)?,
                Value::Bool(false) => self.eval(b)?,
                v => return Err(EvalError::IllTyped(format!("condition {v}"))),
            },
            NrcTerm::Table(n, schema) => {
                let t = self.db.get(n).ok_or_else(|| EvalError::MissingTable(String::from(&**n)))?;
                if t.schema != *schema {
                    return Err(EvalError::SchemaMismatch {
                        table: String::from(&**n),
                        detail: format!(
                            "query declares {} but the database has {}",
                            crate::syntax::print_type(&Type::Record(schema.clone())),
                            crate::syntax::print_type(&Type::Record(t.schema.clone()))
                        ),
                    });
                }
                Value::List(t.rows.iter().map(|r| Value::Record(r.clone())).collect())
            }
            NrcTerm::Empty => Value::List(Vec::new()),
            NrcTerm::Singleton(a) => Value::List(alloc::vec![self.eval(a)?]),
            NrcTerm::Concat(a, b) => match (self.eval(a)?, self.eval(b)?) {
                (Value::List(mut xs), Value::List(ys)) => {
                    xs.extend(ys);
                    Value::List(xs)
                }
                (x, y) => return Err(EvalError::IllTyped(format!("{x} ++ {y}"))),
            },
            NrcTerm::For(x, src, body) => {
                let Value::List(items) = self.eval(src)? else {
                    return Err(EvalError::IllTyped(String::from("for over a non-list")));
                };
                let mut out = Vec::new();
                for item in items {
                    self.env.push((x.clone(), item));
                    let r = self.eval(body);
                    self.env.pop();
                    match r? {
                        Value::List(ys) => out.extend(ys),
                        v => return Err(EvalError::IllTyped(format!("for body produced {v}"))),
                    }
                }
                Value::List(out)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::extract_nrc;
    use crate::syntax::{name, parse};
    use crate::types::Context;

    fn q(s: &str) -> NrcTerm {
        extract_nrc(&parse(s).unwrap().main, &Context::new()).unwrap()
    }

    fn schema() -> RowType {
        RowType::new([(name("oid"), Type::Int), (name("a"), Type::Int)])
    }

    fn row(oid: i64, a: i64) -> Row {
        [(name("oid"), Value::Int(oid)), (name("a"), Value::Int(a))].into_iter().collect()
    }

    #[test]
    fn empty_table_gives_empty_list() {
        let mut db = Database::new();
        db.insert("t", schema(), Vec::new()).unwrap();
        assert_eq!(eval(&q(r#"for (x <- table "t" {oid : Int, a : Int}) [x.a]"#), &db), Ok(Value::List(Vec::new())));
    }

    #[test]
    fn rows_in_oid_order() {
        let mut db = Database::new();
        db.insert("T", schema(), alloc::vec![row(2, 20), row(1, 10)]).unwrap();
        let v = eval(&q(r#"for (x <- table "t" {oid : Int, a : Int}) [x.a + 1]"#), &db).unwrap();
        assert_eq!(v, Value::List(alloc::vec![Value::Int(11), Value::Int(21)]));
    }

    #[test]
    fn database_validation() {
        let mut db = Database::new();
        assert!(matches!(
            db.insert("t", schema(), alloc::vec![row(1, 1), row(1, 2)]),
            Err(DatabaseError::DuplicateOid { .. })
        ));
        let missing: Row = [(name("a"), Value::Int(1))].into_iter().collect();
        assert!(matches!(db.insert("t", schema(), alloc::vec![missing]), Err(DatabaseError::SchemaViolation { .. })));
    }

    #[test]
    fn errors() {
        let db = Database::new();
        assert!(matches!(eval(&q(r#"table "t" {oid : Int}"#), &db), Err(EvalError::MissingTable(_))));
        assert_eq!(eval(&q("9223372036854775807 + 1"), &db), Err(EvalError::Overflow));
    }
}
