//! The compilation pipeline behind the command-line front end: parsing
//! against the standard library, typechecking, normalization, tracing,
//! analysis and evaluation.

use tracelinks_core::normalize::{self, NormalizeConfig, NormalizeError, NrcTerm};
use tracelinks_core::runtime::{eval, Database, EvalError, Value};
use tracelinks_core::selftrace::{self, SelfTraceError};
use tracelinks_core::sqlgen::{self, SqlError};
use tracelinks_core::stdlib::{AnalyzeError, Mode, Stdlib, StdlibError};
use tracelinks_core::syntax::{parse_with, ParseError, Printer, Program, Term, Type};
use tracelinks_core::typecheck::{is_query_type, type_of, TypingError};
use tracelinks_core::types::{canon, to_constructor, Context};
use tracelinks_core::Constructor;

/// Every failure of the pipeline, with enough structure for diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{file}:{error}")]
    Parse { file: String, error: ParseError },
    #[error(transparent)]
    Typing(#[from] TypingError),
    #[error("the program has type {0}, which is not a query type")]
    NotAQuery(String),
    #[error("`{0}` is not a closed term")]
    NotClosed(String),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    SelfTrace(#[from] SelfTraceError),
    #[error(transparent)]
    Stdlib(#[from] StdlibError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sql(#[from] SqlError),
}

impl From<AnalyzeError> for PipelineError {
    fn from(e: AnalyzeError) -> Self {
        match e {
            AnalyzeError::Stdlib(e) => e.into(),
            AnalyzeError::Typing(e) => e.into(),
            AnalyzeError::SelfTrace(e) => e.into(),
            AnalyzeError::Normalize(e) => e.into(),
        }
    }
}

impl PipelineError {
    /// Is this a breach of an internal invariant rather than a user error?
    pub fn is_internal(&self) -> bool {
        matches!(self, PipelineError::Normalize(NormalizeError::ResidualConstruct { .. }) | PipelineError::Stdlib(_))
    }

    /// Stable identifier used in `--json` diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Parse { .. } => "ParseError",
            PipelineError::Typing(e) => e.code(),
            PipelineError::NotAQuery(_) => "NotAQueryType",
            PipelineError::NotClosed(_) => "NotClosed",
            PipelineError::Normalize(e) => match e {
                NormalizeError::FuelExhausted { .. } => "FuelExhausted",
                NormalizeError::InvalidConfig(_) => "InvalidConfig",
                NormalizeError::ResidualConstruct { .. } => "ResidualConstruct",
                NormalizeError::NotAQueryContext => "NotAQueryContext",
            },
            PipelineError::SelfTrace(e) => match e {
                SelfTraceError::NotInNormalForm(_) => "NotInNormalForm",
                SelfTraceError::NotAQueryType(_) => "NotAQueryType",
                SelfTraceError::ShapeMismatch(_) => "ShapeMismatch",
                SelfTraceError::Typing(e) => e.code(),
                SelfTraceError::Kind(_) => "KindError",
            },
            PipelineError::Stdlib(_) => "StdlibError",
            PipelineError::Eval(e) => match e {
                EvalError::MissingTable(_) => "MissingTable",
                EvalError::SchemaMismatch { .. } => "SchemaMismatch",
                EvalError::UnboundVariable(_) => "UnboundVariable",
                EvalError::Overflow => "Overflow",
                EvalError::IllTyped(_) => "IllTyped",
            },
            PipelineError::Sql(e) => match e {
                SqlError::NotFlat(_) => "NotFlat",
                SqlError::UnsupportedShape { .. } => "UnsupportedShape",
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// A loaded standard library together with normalizer settings.
#[derive(Clone, Debug)]
pub struct Session {
    pub lib: Stdlib,
    pub cfg: NormalizeConfig,
}

/// A typechecked query and its type.
#[derive(Clone, Debug)]
pub struct Query {
    pub term: Term,
    pub ty: Type,
    pub con: Constructor,
}

impl Session {
    pub fn new(cfg: NormalizeConfig) -> Result<Session> {
        Ok(Session { lib: Stdlib::load()?, cfg })
    }

    /// A printer that folds the standard library's constructor names.
    pub fn printer(&self) -> Printer {
        Printer::new().fold_env(self.lib.env())
    }

    /// Parses a source file in the scope of the standard library.
    pub fn parse(&self, file: &str, src: &str) -> Result<Program> {
        parse_with(src, self.lib.env()).map_err(|error| PipelineError::Parse { file: file.to_string(), error })
    }

    /// Parses and typechecks the main expression of a source file.
    pub fn check(&self, file: &str, src: &str) -> Result<(Term, Type)> {
        let prog = self.parse(file, src)?;
        let ty = type_of(&Context::new(), &prog.main)?;
        Ok((prog.main, ty))
    }

    /// Like [`Session::check`], additionally requiring a query type.
    pub fn query(&self, file: &str, src: &str) -> Result<Query> {
        let (term, ty) = self.check(file, src)?;
        self.query_of(term, ty)
    }

    pub fn query_of(&self, term: Term, ty: Type) -> Result<Query> {
        let ty = default_unknown(&canon(&ty).map_err(TypingError::from)?);
        let con = match to_constructor(&ty) {
            Some(c) if is_query_type(&ty) => c,
            _ => return Err(PipelineError::NotAQuery(self.printer().ty(&ty))),
        };
        Ok(Query { term, ty, con })
    }

    pub fn normalize(&self, m: &Term) -> Result<Term> {
        Ok(normalize::normalize(m, &self.cfg)?)
    }

    /// Normalizes a query and reads it back as NRC.
    pub fn to_nrc(&self, q: &Query) -> Result<NrcTerm> {
        let nf = self.normalize(&q.term)?;
        Ok(normalize::extract_nrc(&nf, &Context::new())?)
    }

    /// The self-traced form of the normalized query.
    pub fn trace(&self, q: &Query) -> Result<Term> {
        let nf = self.normalize(&q.term)?;
        let value_bool = self.lib.value_at(&selftrace::trace_bool())?;
        Ok(selftrace::self_trace_with(&Context::new(), &nf, &value_bool)?)
    }

    /// Runs a builtin analysis.
    pub fn analyze(&self, mode: Mode, q: &Query) -> Result<NrcTerm> {
        Ok(self.lib.analyze(mode, &q.term, &q.con, &self.cfg)?)
    }

    /// Runs an arbitrary closed analysis function.
    pub fn apply(&self, f: &Term, q: &Query) -> Result<NrcTerm> {
        if !f.free_vars().is_empty() || !f.free_tyvars().is_empty() {
            return Err(PipelineError::NotClosed(self.printer().term(f)));
        }
        Ok(self.lib.apply(f, &q.term, &q.con, &self.cfg)?)
    }

    /// The NRC query computing `q`, or its analysis under `mode`.
    pub fn compile(&self, mode: Option<Mode>, q: &Query) -> Result<NrcTerm> {
        match mode {
            None => {
                let nrc = self.to_nrc(q)?;
                Ok(if self.cfg.dedup_lineage { normalize::dedup_concat(&nrc) } else { nrc })
            }
            Some(m) => self.analyze(m, q),
        }
    }

    pub fn run(&self, mode: Option<Mode>, q: &Query, db: &Database) -> Result<Value> {
        Ok(eval(&self.compile(mode, q)?, db)?)
    }

    /// SQL text for `q` or its analysis, together with the NRC query and
    /// its type.
    pub fn sql(&self, mode: Option<Mode>, q: &Query) -> Result<(String, NrcTerm, Type)> {
        let nrc = self.compile(mode, q)?;
        let ty = self.result_type(mode, q)?;
        Ok((sqlgen::emit_sql(&nrc, &ty)?, nrc, ty))
    }

    /// The type of `q`, or of its analysis under `mode`, in canonical form.
    pub fn result_type(&self, mode: Option<Mode>, q: &Query) -> Result<Type> {
        match mode {
            None => Ok(canon(&q.ty).map_err(TypingError::from)?),
            Some(m) => self.applied_type(self.lib.term(m.function_name())?, q),
        }
    }

    /// The result type of the analysis `f` applied to the trace of `q`.
    pub fn applied_type(&self, f: &Term, q: &Query) -> Result<Type> {
        let inst = Term::tyapp(f.clone(), selftrace::trace_type(&q.con));
        match canon(&type_of(&Context::new(), &inst)?).map_err(TypingError::from)? {
            Type::Fun(_, cod) => Ok(*cod),
            other => Err(PipelineError::NotAQuery(self.printer().ty(&other))),
        }
    }
}

/// Replaces the unknown element type of empty lists by `Int`.
fn default_unknown(t: &Type) -> Type {
    match t {
        Type::Unknown => Type::Int,
        Type::List(a) => Type::list(default_unknown(a)),
        Type::Record(r) => Type::Record(tracelinks_core::RowType::new(
            r.fields.iter().map(|(l, t)| (l.clone(), default_unknown(t))),
        )),
        other => other.clone(),
    }
}
