//! The standard library of type functions and trace analyses.
//!
//! Builtins are kept as source text under `stdlib/*.lt` and parsed and
//! typechecked when loaded. Each file may use the names declared by the
//! files loaded before it.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::normalize::{self, NormalizeConfig, NormalizeError, NrcTerm};
use crate::selftrace::{self, SelfTraceError};
use crate::syntax::{parse_with, Constructor, Decl, Env, Kind, Motive, Name, ParseError, Term, Type};
use crate::typecheck::{type_of, TypingError};
use crate::types::{kind_of_constructor, Context, TypeError};

/// Source files of the standard library, in load order.
pub const SOURCES: &[(&str, &str)] = &[
    ("value.lt", include_str!("../stdlib/value.lt")),
    ("wherep.lt", include_str!("../stdlib/wherep.lt")),
    ("lineage.lt", include_str!("../stdlib/lineage.lt")),
];

/// Names exported by the standard library.
pub const BUILTIN_NAMES: &[&str] =
    &["TRACE", "VALUE", "WHERE", "W", "LINEAGE", "L", "value", "wherep", "fake", "lineage", "linnotation"];

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum StdlibError {
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("stdlib/{file}: {error}")]
    Parse { file: &'static str, error: ParseError },
    #[error("builtin `{name}` is ill-typed: {error}")]
    IllTyped { name: String, error: TypingError },
    #[error("builtin `{name}` is ill-kinded: {error}")]
    IllKinded { name: String, error: TypeError },
    #[error("builtin `{0}` has free variables")]
    NotClosed(String),
}

/// What a builtin name stands for.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinDef {
    /// A type-level function or constant.
    Constructor { con: Constructor, kind: Kind },
    /// A closed term together with its type and the motives of the
    /// `typecase` nodes it contains.
    Term { term: Term, declared_type: Type, motives: Vec<Motive> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Builtin {
    pub name: Name,
    pub def: BuiltinDef,
}

impl Builtin {
    pub fn term(&self) -> Option<&Term> {
        match &self.def {
            BuiltinDef::Term { term, .. } => Some(term),
            BuiltinDef::Constructor { .. } => None,
        }
    }

    pub fn declared_type(&self) -> Option<&Type> {
        match &self.def {
            BuiltinDef::Term { declared_type, .. } => Some(declared_type),
            BuiltinDef::Constructor { .. } => None,
        }
    }

    pub fn constructor(&self) -> Option<&Constructor> {
        match &self.def {
            BuiltinDef::Constructor { con, .. } => Some(con),
            BuiltinDef::Term { .. } => None,
        }
    }
}

/// The loaded standard library. Every declaration of every file is kept,
/// including helpers such as `wherep_tr`.
#[derive(Clone, Debug)]
pub struct Stdlib {
    env: Env,
    builtins: BTreeMap<Name, Builtin>,
}

/// The three trace analyses offered by [`Stdlib::analyze`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Value,
    Where,
    Lineage,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "value" => Some(Mode::Value),
            "where" => Some(Mode::Where),
            "lineage" => Some(Mode::Lineage),
            _ => None,
        }
    }

    /// The analysis function implementing this mode.
    pub fn function_name(self) -> &'static str {
        match self {
            Mode::Value => "value",
            Mode::Where => "wherep",
            Mode::Lineage => "lineage",
        }
    }
}

/// Errors of the analysis pipeline.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Stdlib(#[from] StdlibError),
    #[error(transparent)]
    Typing(#[from] TypingError),
    #[error(transparent)]
    SelfTrace(#[from] SelfTraceError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
}

impl Stdlib {
    /// Parses, kind-checks and typechecks every builtin.
    pub fn load() -> Result<Stdlib, StdlibError> {
        let mut env = Env::default();
        let mut builtins = BTreeMap::new();
        for (file, src) in SOURCES {
            let prog = parse_with(src, &env).map_err(|error| StdlibError::Parse { file, error })?;
            for decl in prog.decls {
                let b = match decl {
                    Decl::Con(n, c) => {
                        let kind = kind_of_constructor(&mut Context::new(), &c)
                            .map_err(|error| StdlibError::IllKinded { name: String::from(&*n), error })?;
                        env.cons.insert(String::from(&*n), c.clone());
                        Builtin { name: n, def: BuiltinDef::Constructor { con: c, kind } }
                    }
                    Decl::Term(n, m) => {
                        if !m.free_vars().is_empty() || !m.free_tyvars().is_empty() {
                            return Err(StdlibError::NotClosed(String::from(&*n)));
                        }
                        let declared_type = type_of(&Context::new(), &m)
                            .map_err(|error| StdlibError::IllTyped { name: String::from(&*n), error })?;
                        let mut motives = Vec::new();
                        collect_motives(&m, &mut motives);
                        env.terms.insert(String::from(&*n), m.clone());
                        Builtin { name: n, def: BuiltinDef::Term { term: m, declared_type, motives } }
                    }
                };
                builtins.insert(b.name.clone(), b);
            }
        }
        Ok(Stdlib { env, builtins })
    }

    /// The environment in which user programs are parsed.
    pub fn env(&self) -> &Env {
        &self.env
    }

    /// Looks up a builtin or helper by name.
    pub fn get(&self, n: &str) -> Result<&Builtin, StdlibError> {
        self.builtins.get(n).ok_or_else(|| StdlibError::UnknownBuiltin(String::from(n)))
    }

    pub fn builtins(&self) -> impl Iterator<Item = &Builtin> {
        self.builtins.values()
    }

    /// The closed term bound to `n`.
    pub fn term(&self, n: &str) -> Result<&Term, StdlibError> {
        self.get(n)?.term().ok_or_else(|| StdlibError::UnknownBuiltin(String::from(n)))
    }

    /// The constructor bound to `n`.
    pub fn constructor(&self, n: &str) -> Result<&Constructor, StdlibError> {
        self.get(n)?.constructor().ok_or_else(|| StdlibError::UnknownBuiltin(String::from(n)))
    }

    /// `value @c`.
    pub fn value_at(&self, c: &Constructor) -> Result<Term, StdlibError> {
        Ok(Term::tyapp(self.term("value")?.clone(), c.clone()))
    }

    /// Builds `f @(TRACE at) (self_trace(normalize q))`, the composition of
    /// an analysis `f : ∀a. T(TRACE a) -> T(F a)` with the traced query.
    /// For `value`, which is polymorphic over all types, the instance is the
    /// same.
    pub fn compose(&self, f: &Term, q: &Term, at: &Constructor, cfg: &NormalizeConfig) -> Result<Term, AnalyzeError> {
        let qn = normalize::normalize(q, cfg)?;
        let traced = selftrace::self_trace_with(&Context::new(), &qn, &self.value_at(&selftrace::trace_bool())?)?;
        let inst = Term::tyapp(f.clone(), selftrace::trace_type(at));
        let whole = Term::app(inst, traced);
        type_of(&Context::new(), &whole)?;
        Ok(whole)
    }

    /// Runs the analysis `mode` over the closed query `q : T(at)` and returns
    /// the resulting NRC query.
    pub fn analyze(&self, mode: Mode, q: &Term, at: &Constructor, cfg: &NormalizeConfig) -> Result<NrcTerm, AnalyzeError> {
        let f = self.term(mode.function_name())?.clone();
        self.apply(&f, q, at, cfg)
    }

    /// Like [`Stdlib::analyze`] with an arbitrary closed analysis function.
    pub fn apply(&self, f: &Term, q: &Term, at: &Constructor, cfg: &NormalizeConfig) -> Result<NrcTerm, AnalyzeError> {
        let whole = self.compose(f, q, at, cfg)?;
        let nf = normalize::normalize(&whole, cfg)?;
        let nrc = normalize::extract_nrc(&nf, &Context::new())?;
        Ok(if cfg.dedup_lineage { normalize::dedup_concat(&nrc) } else { nrc })
    }
}

fn collect_motives(m: &Term, out: &mut Vec<Motive>) {
    if let Term::Typecase(_, motive, _) = m {
        out.push((**motive).clone());
    }
    m.for_each_child(|c| collect_motives(c, out));
}

/// Loads the standard library and returns the builtin `n`.
pub fn get_builtin(n: &str) -> Result<Builtin, StdlibError> {
    if !BUILTIN_NAMES.contains(&n) {
        return Err(StdlibError::UnknownBuiltin(String::from(n)));
    }
    Stdlib::load()?.get(n).cloned()
}

/// Loads the standard library and runs [`Stdlib::analyze`].
pub fn analyze(mode: Mode, q: &Term, at: &Constructor, cfg: &NormalizeConfig) -> Result<NrcTerm, AnalyzeError> {
    Stdlib::load()?.analyze(mode, q, at, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_equal, parse_with, print, Printer};

    fn lib() -> Stdlib {
        Stdlib::load().unwrap()
    }

    fn tm(lib: &Stdlib, s: &str) -> Term {
        parse_with(s, lib.env()).unwrap().main
    }

    fn nf(lib: &Stdlib, s: &str) -> Term {
        normalize::normalize(&tm(lib, s), &NormalizeConfig::default()).unwrap()
    }

    #[test]
    fn loads_and_types() {
        let lib = lib();
        for n in BUILTIN_NAMES {
            assert!(lib.get(n).is_ok(), "{n}");
        }
        let p = Printer::new().fold_env(lib.env());
        let ty = |n: &str| p.ty(lib.get(n).unwrap().declared_type().unwrap());
        assert_eq!(ty("value"), "forall a. T(a) -> T(VALUE a)");
        assert_eq!(ty("wherep"), "forall a. T(TRACE a) -> T(WHERE a)");
        assert_eq!(ty("lineage"), "forall a. T(TRACE a) -> T(LINEAGE a)");
        assert!(matches!(get_builtin("nope"), Err(StdlibError::UnknownBuiltin(_))));
    }

    #[test]
    fn fake_example() {
        let lib = lib();
        let r = nf(&lib, "fake @Int 7");
        assert!(alpha_equal(&r, &tm(&lib, r#"{val = 7, tbl = "facts", col = "alternative", row = -1}"#)), "{}", print(&r));
    }

    #[test]
    fn linnotation_of_literal_is_empty() {
        let lib = lib();
        assert_eq!(nf(&lib, "linnotation @Int (Lit 3)"), Term::EmptyList);
    }

    #[test]
    fn value_of_plus_trace() {
        let lib = lib();
        let r = nf(&lib, "value @(Trace Int) (OpPlus {l = Lit 2, r = Lit 3})");
        assert!(alpha_equal(&r, &tm(&lib, "2 + 3")), "{}", print(&r));
    }
}
