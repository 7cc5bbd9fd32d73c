//! Seeded random generation of databases, queries and constructors for
//! the property suites.
//!
//! Query generation is type-directed: a result type is chosen first and
//! every subterm is built at a known type, so generated queries always
//! typecheck. Queries are NRC terms but not necessarily normal: sources of
//! comprehensions may be other comprehensions, conditionals or unions.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracelinks_core::runtime::{Database, Row, Value};
use tracelinks_core::syntax::{name, Label, Literal, Name, RowType, Term, Type};
use tracelinks_core::types::to_constructor;
use tracelinks_core::{Constructor, Kind};

/// Size limits for [`generate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_tables: usize,
    /// Columns per table besides `oid`.
    pub max_columns: usize,
    pub max_rows: usize,
    /// Nesting depth of query constructs.
    pub max_depth: usize,
    /// Allow nested collections in results.
    pub nested: bool,
}

impl Budget {
    /// One table with one column and a single comprehension.
    pub fn small() -> Budget {
        Budget { max_tables: 1, max_columns: 1, max_rows: 3, max_depth: 1, nested: false }
    }

    /// Databases of at most five rows and flat results, for brute-force
    /// checks over row subsets.
    pub fn tiny() -> Budget {
        Budget { max_tables: 2, max_columns: 2, max_rows: 3, max_depth: 3, nested: false }
    }

    /// The largest budget: three columns plus `oid`, eight rows, depth four.
    pub fn full() -> Budget {
        Budget { max_tables: 3, max_columns: 3, max_rows: 8, max_depth: 4, nested: true }
    }

    /// Like [`Budget::full`] without nested collections in results.
    pub fn flat() -> Budget {
        Budget { nested: false, ..Budget::full() }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::full()
    }
}

/// A generated database, a closed query over it and the query's type.
#[derive(Clone, Debug)]
pub struct Generated {
    pub db: Database,
    pub query: Term,
    pub ty: Type,
    pub con: Constructor,
}

const TABLE_NAMES: &[&str] = &["people", "Orders", "trips", "Items"];
const COLUMN_NAMES: &[&str] = &["a", "b", "name", "group", "price"];
const FIELD_NAMES: &[&str] = &["k", "l", "m"];
const STRINGS: &[&str] = &["x", "y", "O'Neil", ""];

/// Generates a database and a query over it, deterministically per seed.
pub fn generate(seed: u64, budget: &Budget) -> Generated {
    let mut g = Gen::new(seed, budget.clone());
    let schemas = g.schemas();
    let db = g.database(&schemas);
    g.tables = schemas;
    let elem = g.elem_type(budget.max_depth);
    let ty = Type::list(elem);
    let query = g.query(&ty, budget.max_depth);
    let con = to_constructor(&ty).expect("generated types are query types");
    Generated { db, query, ty, con }
}

/// A random closed query-type constructor with at most `depth` levels of
/// list or record structure.
pub fn query_constructor(rng: &mut impl Rng, depth: usize) -> Constructor {
    let base = [Constructor::BoolC, Constructor::IntC, Constructor::StringC];
    if depth == 0 || rng.random_bool(0.3) {
        return base.choose(rng).expect("nonempty").clone();
    }
    if rng.random_bool(0.5) {
        Constructor::list(query_constructor(rng, depth - 1))
    } else {
        let n = rng.random_range(0..=3);
        Constructor::record_of((0..n).map(|i| (name(FIELD_NAMES[i]), query_constructor(rng, depth - 1))))
    }
}

/// A seeded generator state.
pub struct Gen {
    pub rng: ChaCha8Rng,
    budget: Budget,
    tables: Vec<(Name, RowType)>,
    /// Variables in scope with their record types.
    scope: Vec<(Name, RowType)>,
    counter: usize,
}

impl Gen {
    pub fn new(seed: u64, budget: Budget) -> Gen {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), budget, tables: Vec::new(), scope: Vec::new(), counter: 0 }
    }

    fn base_type(&mut self) -> Type {
        [Type::Bool, Type::Int, Type::String].choose(&mut self.rng).expect("nonempty").clone()
    }

    fn schemas(&mut self) -> Vec<(Name, RowType)> {
        let n = self.rng.random_range(1..=self.budget.max_tables);
        (0..n)
            .map(|i| {
                let k = self.rng.random_range(1..=self.budget.max_columns);
                let mut cols: Vec<&str> = COLUMN_NAMES.to_vec();
                let mut fields = vec![(name("oid"), Type::Int)];
                for _ in 0..k {
                    let j = self.rng.random_range(0..cols.len());
                    let c = cols.remove(j);
                    let t = self.base_type();
                    fields.push((name(c), t));
                }
                (name(TABLE_NAMES[i]), RowType::new(fields))
            })
            .collect()
    }

    fn database(&mut self, schemas: &[(Name, RowType)]) -> Database {
        let mut db = Database::new();
        let mut next_oid = 1;
        for (n, schema) in schemas {
            let rows = self.rng.random_range(0..=self.budget.max_rows);
            let mut out = Vec::new();
            for _ in 0..rows {
                let mut row = Row::new();
                for (l, t) in &schema.fields {
                    let v = if &**l == "oid" {
                        next_oid += self.rng.random_range(1..=2);
                        Value::Int(next_oid)
                    } else {
                        self.value(t)
                    };
                    row.insert(l.clone(), v);
                }
                out.push(row);
            }
            db.insert(n, schema.clone(), out).expect("generated rows match their schema");
        }
        db
    }

    fn value(&mut self, t: &Type) -> Value {
        match t {
            Type::Bool => Value::Bool(self.rng.random_bool(0.5)),
            Type::Int => Value::Int(self.rng.random_range(-2..=4)),
            _ => Value::str(STRINGS.choose(&mut self.rng).expect("nonempty")),
        }
    }

    fn literal(&mut self, t: &Type) -> Term {
        match self.value(t) {
            Value::Bool(b) => Term::Const(Literal::Bool(b)),
            Value::Int(i) => Term::int(i),
            Value::Str(s) => Term::Const(Literal::Str(s)),
            _ => unreachable!("base types only"),
        }
    }

    fn fresh(&mut self) -> Name {
        let n = name(&format!("x{}", self.counter));
        self.counter += 1;
        n
    }

    fn flat_record_type(&mut self) -> Type {
        let n = self.rng.random_range(1..=FIELD_NAMES.len());
        Type::record((0..n).map(|i| (name(FIELD_NAMES[i]), self.base_type())))
    }

    /// A result element type: a base type or a record, possibly with a
    /// nested collection.
    pub fn elem_type(&mut self, depth: usize) -> Type {
        match self.rng.random_range(0..3) {
            0 => self.base_type(),
            1 if self.budget.nested && depth >= 2 => {
                let inner = if self.rng.random_bool(0.5) { self.base_type() } else { self.flat_record_type() };
                Type::record([(name("k"), self.base_type()), (name("sub"), Type::list(inner))])
            }
            _ => self.flat_record_type(),
        }
    }

    /// A query of type `ty`, a list type.
    pub fn query(&mut self, ty: &Type, depth: usize) -> Term {
        let Type::List(elem) = ty else { panic!("query needs a list type") };
        if depth == 0 {
            return if self.rng.random_bool(0.85) { Term::singleton(self.elem(elem, 0)) } else { Term::EmptyList };
        }
        // The smallest budget always yields one comprehension over a table.
        let choice = if self.budget.max_depth == 1 { 0 } else { self.rng.random_range(0..10) };
        match choice {
            0..=3 => {
                let (tname, schema) = self.tables.choose(&mut self.rng).expect("at least one table").clone();
                let x = self.fresh();
                let src = Term::Table(tname, schema.clone());
                let body = self.under(x.clone(), schema, |g| g.query(ty, depth - 1));
                Term::for_(&x, src, body)
            }
            4 => {
                let rt = self.flat_record_type();
                let Type::Record(row) = &rt else { unreachable!() };
                let src = self.query(&Type::list(rt.clone()), depth - 1);
                let x = self.fresh();
                let body = self.under(x.clone(), row.clone(), |g| g.query(ty, depth - 1));
                Term::for_(&x, src, body)
            }
            5 | 6 => {
                let c = self.base(&Type::Bool, 1);
                let t = self.query(ty, depth - 1);
                let e = if self.rng.random_bool(0.6) { Term::EmptyList } else { self.query(ty, depth - 1) };
                Term::if_(c, t, e)
            }
            7 => Term::concat(self.query(ty, depth - 1), self.query(ty, depth - 1)),
            _ => Term::singleton(self.elem(elem, depth - 1)),
        }
    }

    fn under<T>(&mut self, x: Name, row: RowType, f: impl FnOnce(&mut Gen) -> T) -> T {
        self.scope.push((x, row));
        let r = f(self);
        self.scope.pop();
        r
    }

    fn elem(&mut self, t: &Type, depth: usize) -> Term {
        match t {
            Type::Record(row) => {
                let fields: Vec<(Label, Type)> = row.fields.clone();
                Term::record(fields.into_iter().map(|(l, ft)| {
                    let v = self.elem(&ft, depth);
                    (l, v)
                }))
            }
            Type::List(_) => self.query(t, depth.min(2)),
            _ => self.base(t, 2),
        }
    }

    /// A base-typed expression over the variables in scope.
    fn base(&mut self, t: &Type, depth: usize) -> Term {
        let projections: Vec<Term> = self
            .scope
            .iter()
            .flat_map(|(x, row)| {
                row.fields.iter().filter(|(_, ft)| ft == t).map(|(l, _)| Term::project(Term::Var(x.clone()), l))
            })
            .collect();
        let roll = self.rng.random_range(0..10);
        if depth > 0 && roll >= 7 {
            return match t {
                Type::Int if roll == 7 => Term::plus(self.base(t, depth - 1), self.base(t, depth - 1)),
                Type::Bool if roll <= 8 => {
                    let u = self.base_type();
                    Term::eq(self.base(&u, depth - 1), self.base(&u, depth - 1))
                }
                _ => {
                    let c = self.base(&Type::Bool, depth - 1);
                    Term::if_(c, self.base(t, depth - 1), self.base(t, depth - 1))
                }
            };
        }
        match projections.choose(&mut self.rng) {
            Some(p) if roll < 6 => p.clone(),
            _ => self.literal(t),
        }
    }
}

/// Wraps a query of type `ty` in a few administrative redexes that
/// normalization has to remove.
pub fn with_redexes(rng: &mut impl Rng, q: Term, ty: &Type) -> Term {
    let mut m = q;
    for _ in 0..rng.random_range(1..=3) {
        m = match rng.random_range(0..5) {
            0 => Term::app(Term::lam("r", ty.clone(), Term::var("r")), m),
            1 => Term::project(Term::record([(name("res"), m), (name("junk"), Term::int(1))]), "res"),
            2 => {
                let c = to_constructor(ty).expect("query type");
                let id = Term::tylam("a", Kind::Type, Term::lam("z", Type::Embed(Constructor::var("a")), Term::var("z")));
                Term::app(Term::tyapp(id, c), m)
            }
            3 => Term::if_(Term::bool(true), m, Term::EmptyList),
            _ => Term::for_("u", Term::singleton(Term::int(1)), m),
        };
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use tracelinks_core::typecheck::type_of;
    use tracelinks_core::types::{types_equal, Context};

    #[test]
    fn generated_queries_typecheck() {
        for seed in 0..200 {
            let g = generate(seed, &Budget::full());
            let t = type_of(&Context::new(), &g.query).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!(types_equal(&Context::new(), &t, &g.ty).unwrap(), "seed {seed}");
            assert!(g.db.total_rows() <= 3 * 8);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(7, &Budget::full());
        let b = generate(7, &Budget::full());
        assert_eq!(a.query, b.query);
        assert_eq!(a.db, b.db);
    }

    #[test]
    fn redexes_preserve_types() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..50 {
            let g = generate(seed, &Budget::flat());
            let m = with_redexes(&mut rng, g.query, &g.ty);
            let t = type_of(&Context::new(), &m).unwrap();
            assert!(types_equal(&Context::new(), &t, &g.ty).unwrap());
        }
    }
}
