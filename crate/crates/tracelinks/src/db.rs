//! JSON databases and JSON rendering of query results.
//!
//! A database file maps table names to a column declaration and a list of
//! rows:
//!
//! ```json
//! { "Agencies": { "columns": { "oid": "int", "name": "string" },
//!                 "rows": [ { "oid": 1, "name": "EdinTours" } ] } }
//! ```
//!
//! The `oid : Int` column may be omitted from `columns`; it is always part
//! of the schema.

use std::path::Path;

use serde_json::{Map, Value as Json};
use tracelinks_core::runtime::{Database, DatabaseError, Row, Value};
use tracelinks_core::syntax::{name, RowType, Type};

#[derive(Debug, thiserror::Error)]
pub enum DbError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed database file: {0}")]
    Parse(String),
    #[error("schema violation in table `{table}`: {detail}")]
    SchemaViolation { table: String, detail: String },
    #[error("table `{table}`: duplicate oid {oid}")]
    DuplicateOid { table: String, oid: i64 },
}

impl From<DatabaseError> for DbError {
    fn from(e: DatabaseError) -> Self {
        match e {
            DatabaseError::SchemaViolation { table, detail } => DbError::SchemaViolation { table, detail },
            DatabaseError::DuplicateOid { table, oid } => DbError::DuplicateOid { table, oid },
        }
    }
}

impl DbError {
    /// Stable identifier used in `--json` diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            DbError::Io { .. } => "Io",
            DbError::Parse(_) => "ParseError",
            DbError::SchemaViolation { .. } => "SchemaViolation",
            DbError::DuplicateOid { .. } => "DuplicateOid",
        }
    }
}

/// Reads and validates a database file.
pub fn load_db(path: impl AsRef<Path>) -> Result<Database, DbError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| DbError::Io { path: path.display().to_string(), source })?;
    parse_db(&text)
}

/// Parses and validates database JSON.
pub fn parse_db(text: &str) -> Result<Database, DbError> {
    let json: Json = serde_json::from_str(text).map_err(|e| DbError::Parse(e.to_string()))?;
    let tables = json.as_object().ok_or_else(|| DbError::Parse("top level must be an object".into()))?;
    let mut db = Database::new();
    for (tname, tjson) in tables {
        let violation = |detail: String| DbError::SchemaViolation { table: tname.clone(), detail };
        let tobj = tjson.as_object().ok_or_else(|| violation("table entry must be an object".into()))?;
        let columns = tobj
            .get("columns")
            .and_then(Json::as_object)
            .ok_or_else(|| violation("missing `columns` object".into()))?;
        let mut fields = Vec::new();
        for (c, ty) in columns {
            let ty = match ty.as_str() {
                Some("int") => Type::Int,
                Some("string") => Type::String,
                Some("bool") => Type::Bool,
                _ => return Err(violation(format!("column `{c}` has unknown type {ty}"))),
            };
            fields.push((name(c), ty));
        }
        if !columns.contains_key("oid") {
            fields.push((name("oid"), Type::Int));
        }
        let schema = RowType::new(fields);
        let rows_json =
            tobj.get("rows").and_then(Json::as_array).ok_or_else(|| violation("missing `rows` array".into()))?;
        let mut rows = Vec::new();
        for (i, r) in rows_json.iter().enumerate() {
            let robj = r.as_object().ok_or_else(|| violation(format!("row {i} is not an object")))?;
            let mut row = Row::new();
            for (c, v) in robj {
                row.insert(name(c), base_value(v).ok_or_else(|| violation(format!("row {i}: `{c}` holds {v}")))?);
            }
            rows.push(row);
        }
        db.insert(tname, schema, rows)?;
    }
    Ok(db)
}

fn base_value(v: &Json) -> Option<Value> {
    match v {
        Json::Bool(b) => Some(Value::Bool(*b)),
        Json::Number(n) => n.as_i64().map(Value::Int),
        Json::String(s) => Some(Value::Str(s.clone())),
        _ => None,
    }
}

/// Renders a query result as JSON. Records keep label order.
pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Bool(b) => Json::Bool(*b),
        Value::Int(i) => Json::from(*i),
        Value::Str(s) => Json::String(s.clone()),
        Value::List(xs) => Json::Array(xs.iter().map(value_to_json).collect()),
        Value::Record(fs) => Json::Object(fs.iter().map(|(l, v)| (l.to_string(), value_to_json(v))).collect()),
    }
}

/// Renders a database in the file format read by [`parse_db`].
pub fn db_to_json(db: &Database) -> Json {
    let mut out = Map::new();
    for (n, t) in db.tables() {
        let columns: Map<String, Json> = t
            .schema
            .fields
            .iter()
            .map(|(l, ty)| {
                let s = match ty {
                    Type::Bool => "bool",
                    Type::String => "string",
                    _ => "int",
                };
                (l.to_string(), Json::from(s))
            })
            .collect();
        let rows: Vec<Json> = t.rows.iter().map(|r| value_to_json(&Value::Record(r.clone()))).collect();
        let mut tobj = Map::new();
        tobj.insert("columns".into(), Json::Object(columns));
        tobj.insert("rows".into(), Json::Array(rows));
        out.insert(n.to_string(), Json::Object(tobj));
    }
    Json::Object(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_empty_database() {
        assert_eq!(parse_db("{}").unwrap().total_rows(), 0);
    }

    #[test]
    fn missing_oid_is_a_schema_violation() {
        let e = parse_db(r#"{"t": {"columns": {"a": "int"}, "rows": [{"a": 1}]}}"#).unwrap_err();
        assert!(matches!(e, DbError::SchemaViolation { .. }), "{e}");
    }

    #[test]
    fn duplicate_oids_are_rejected() {
        let e = parse_db(r#"{"t": {"columns": {"a": "int"}, "rows": [{"oid": 1, "a": 1}, {"oid": 1, "a": 2}]}}"#)
            .unwrap_err();
        assert!(matches!(e, DbError::DuplicateOid { oid: 1, .. }), "{e}");
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(parse_db("{"), Err(DbError::Parse(_))));
        assert!(matches!(parse_db("[]"), Err(DbError::Parse(_))));
    }

    #[test]
    fn json_roundtrip() {
        let src = r#"{"t": {"columns": {"a": "string", "b": "bool", "oid": "int"}, "rows": [{"a": "x", "b": true, "oid": 4}]}}"#;
        let db = parse_db(src).unwrap();
        let again = parse_db(&db_to_json(&db).to_string()).unwrap();
        assert_eq!(db, again);
    }
}
