//! Differential testing of emitted SQL against an embedded SQLite engine.
//!
//! Tables are created under their lower-cased names, matching the `FROM`
//! clauses produced by the SQL generator. Booleans are stored as 0/1.

use rusqlite::types::Value as SqlValue;
use rusqlite::Connection;
use tracelinks_core::runtime::{eval, Database, Value};
use tracelinks_core::sqlgen::{quote_ident, translate, Column, SqlQuery};
use tracelinks_core::syntax::{Label, Type};
use tracelinks_core::NrcTerm;

#[derive(Debug, thiserror::Error)]
pub enum SqliteError {
    #[error("sqlite: {0}")]
    Engine(#[from] rusqlite::Error),
    #[error("sqlite returned {actual} for column `{column}` of type {expected}")]
    Decode { column: String, expected: Type, actual: String },
    #[error(transparent)]
    Sql(#[from] tracelinks_core::sqlgen::SqlError),
    #[error(transparent)]
    Eval(#[from] tracelinks_core::runtime::EvalError),
}

/// Outcome of comparing the SQL engine with the reference evaluator.
#[derive(Clone, Debug, PartialEq)]
pub struct Agreement {
    pub sql: String,
    /// Rows returned by SQLite, decoded to values, sorted.
    pub engine: Vec<Value>,
    /// Elements of the evaluated result, sorted.
    pub reference: Vec<Value>,
}

impl Agreement {
    pub fn agrees(&self) -> bool {
        self.engine == self.reference
    }
}

/// Opens an in-memory SQLite database holding a copy of `db`.
pub fn load(db: &Database) -> Result<Connection, SqliteError> {
    let conn = Connection::open_in_memory()?;
    for (name, table) in db.tables() {
        let tname = quote_ident(&name.to_ascii_lowercase());
        let cols: Vec<String> = table
            .schema
            .fields
            .iter()
            .map(|(l, t)| format!("{} {}", quote_ident(l), if *t == Type::String { "TEXT" } else { "INTEGER" }))
            .collect();
        conn.execute(&format!("CREATE TABLE {tname} ({})", cols.join(", ")), [])?;
        let labels: Vec<&Label> = table.schema.fields.iter().map(|(l, _)| l).collect();
        let insert = format!(
            "INSERT INTO {tname} ({}) VALUES ({})",
            labels.iter().map(|l| quote_ident(l)).collect::<Vec<_>>().join(", "),
            (1..=labels.len()).map(|i| format!("?{i}")).collect::<Vec<_>>().join(", ")
        );
        let mut stmt = conn.prepare(&insert)?;
        for row in &table.rows {
            let params: Vec<SqlValue> = labels.iter().map(|l| to_sql(&row[*l])).collect();
            stmt.execute(rusqlite::params_from_iter(params))?;
        }
    }
    Ok(conn)
}

fn to_sql(v: &Value) -> SqlValue {
    match v {
        Value::Bool(b) => SqlValue::Integer(i64::from(*b)),
        Value::Int(i) => SqlValue::Integer(*i),
        Value::Str(s) => SqlValue::Text(s.clone()),
        Value::List(_) | Value::Record(_) => SqlValue::Null,
    }
}

fn from_sql(col: &Column, v: SqlValue) -> Result<Value, SqliteError> {
    let bad = |v: &SqlValue| SqliteError::Decode { column: col.name.clone(), expected: col.ty.clone(), actual: format!("{v:?}") };
    match (&col.ty, v) {
        (Type::Bool, SqlValue::Integer(i)) => Ok(Value::Bool(i != 0)),
        (Type::Int, SqlValue::Integer(i)) => Ok(Value::Int(i)),
        (Type::String, SqlValue::Text(s)) => Ok(Value::Str(s)),
        (_, v) => Err(bad(&v)),
    }
}

/// Rebuilds a result element from one row of flattened columns.
fn unflatten(columns: &[Column], cells: Vec<Value>) -> Value {
    if let [c] = columns {
        if c.path.is_empty() {
            return cells.into_iter().next().expect("one cell per column");
        }
    }
    let mut root = Value::record([]);
    for (c, v) in columns.iter().zip(cells) {
        let mut cur = &mut root;
        for (i, l) in c.path.iter().enumerate() {
            let Value::Record(fs) = cur else { unreachable!("paths only descend into records") };
            let next = if i + 1 == c.path.len() { v.clone() } else { Value::record([]) };
            cur = fs.entry(l.clone()).or_insert(next);
        }
    }
    root
}

/// Runs translated SQL and decodes the rows.
pub fn execute(conn: &Connection, q: &SqlQuery) -> Result<Vec<Value>, SqliteError> {
    let sql = q.to_string();
    let mut stmt = conn.prepare(&sql)?;
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        let mut cells = Vec::new();
        for (i, c) in q.columns.iter().enumerate() {
            cells.push(from_sql(c, row.get::<_, SqlValue>(i)?)?);
        }
        out.push(unflatten(&q.columns, cells));
    }
    Ok(out)
}

/// Translates `m : ty` to SQL, runs it on SQLite and on the reference
/// evaluator, and returns both results as sorted multisets.
pub fn check_agreement(m: &NrcTerm, ty: &Type, db: &Database) -> Result<Agreement, SqliteError> {
    let q = translate(m, ty)?;
    let conn = load(db)?;
    let mut engine = execute(&conn, &q)?;
    engine.sort();
    let mut reference = match eval(m, db)? {
        Value::List(xs) => xs,
        other => vec![other],
    };
    reference.sort();
    Ok(Agreement { sql: q.to_string(), engine, reference })
}
