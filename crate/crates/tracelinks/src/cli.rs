//! The `tracelinks` command-line interface.
//!
//! Exit status is 0 on success, 1 for errors in the user's input and 2 when
//! an internal invariant is breached.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};
use tracelinks_core::normalize::{self, NormalizeConfig, NrcTerm, DEFAULT_FUEL};
use tracelinks_core::stdlib::Mode;
use tracelinks_core::syntax::{print, Term};
use tracelinks_core::types::Context;

use crate::db::{load_db, value_to_json, DbError};
use crate::pipeline::{PipelineError, Query, Session};
use crate::props;
use crate::sqlite::{check_agreement, SqliteError};

/// Environment variable overriding the default normalization fuel.
pub const FUEL_VAR: &str = "TRACELINKS_FUEL";

#[derive(Parser, Debug)]
#[command(name = "tracelinks", version, about = "Compiler for a query language with self-tracing provenance analyses")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Maximum number of normalization steps.
    #[arg(long, global = true, value_name = "N")]
    fuel: Option<usize>,
    /// Maximum number of unrollings of each recursive function.
    #[arg(long, global = true, value_name = "N")]
    unroll_limit: Option<usize>,
    /// Write every intermediate term of normalization to FILE, one per line.
    #[arg(long, global = true, value_name = "FILE")]
    trace_steps: Option<PathBuf>,
    /// Print types and terms with Unicode symbols.
    #[arg(long, global = true)]
    unicode: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, kind-check and typecheck a program and print its type.
    Check { file: PathBuf },
    /// Print the normal form of a program.
    Normalize { file: PathBuf },
    /// Print the self-traced form of a query.
    Trace { file: PathBuf },
    /// Run a provenance analysis and print the resulting query.
    Analyze {
        /// Analysis to apply: value, where or lineage.
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        file: PathBuf,
        /// Remove duplicate branches of unions, as for lineage sets.
        #[arg(long)]
        dedup: bool,
    },
    /// Compose an analysis function from FN with the trace of a query.
    Apply {
        /// File holding a closed function of type `forall a. T(TRACE a) -> ...`.
        #[arg(long = "fn", value_name = "FN")]
        function: PathBuf,
        file: PathBuf,
        /// Remove duplicate branches of unions, as for lineage sets.
        #[arg(long)]
        dedup: bool,
    },
    /// Evaluate a query, or its analysis, against a JSON database.
    Run {
        file: PathBuf,
        /// JSON database to evaluate against.
        #[arg(long, value_name = "DB")]
        db: PathBuf,
        #[command(flatten)]
        analysis: Analysis,
    },
    /// Print the SQL for a query or its analysis.
    Sql {
        file: PathBuf,
        #[command(flatten)]
        analysis: Analysis,
        /// JSON database used by --check.
        #[arg(long, value_name = "DB")]
        db: Option<PathBuf>,
        /// Compare SQLite's answer with the reference evaluator on DB.
        #[arg(long, requires = "db")]
        check: bool,
    },
    /// Run the property suites on generated inputs.
    Selftest {
        /// Seed of the first case; case i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cases per suite instead of the defaults.
        #[arg(long)]
        cases: Option<usize>,
        /// Run only the named suite; may be repeated.
        #[arg(long)]
        suite: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct Analysis {
    /// Analysis to apply to the query: value, where or lineage.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Remove duplicate branches of unions, as for lineage sets.
    #[arg(long)]
    dedup: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("unknown mode `{s}`; expected value, where or lineage"))
}

/// Errors reported by the front end.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Db(#[from] DbError),
    #[error(transparent)]
    Sqlite(#[from] SqliteError),
    #[error("invalid value of {FUEL_VAR}: `{0}`")]
    BadFuel(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("SQLite disagrees with the evaluator")]
    Disagreement,
    #[error("{0} property suite(s) failed")]
    SuitesFailed(usize),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "Io",
            CliError::Pipeline(e) => e.code(),
            CliError::Db(e) => e.code(),
            CliError::Sqlite(_) => "Sqlite",
            CliError::BadFuel(_) => "BadFuel",
            CliError::UnknownSuite(_) => "UnknownSuite",
            CliError::Disagreement => "Disagreement",
            CliError::SuitesFailed(_) => "SuitesFailed",
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Pipeline(e) if e.is_internal() => 2,
            CliError::Disagreement | CliError::SuitesFailed(_) | CliError::Sqlite(_) => 2,
            _ => 1,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn run(args: impl IntoIterator<Item = String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut ctx = Ctx { cli: &cli, sources: Vec::new() };
    match ctx.dispatch(out) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            if cli.json {
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&ctx.error_json(&e)).unwrap_or_default());
            } else {
                let _ = writeln!(err, "{}", ctx.render_error(&e));
            }
            code
        }
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    /// Files read so far, for rendering error spans.
    sources: Vec<(String, String)>,
}

impl Ctx<'_> {
    fn config(&self, dedup: bool) -> Result<NormalizeConfig, CliError> {
        let env_fuel = match std::env::var(FUEL_VAR) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| CliError::BadFuel(v))?),
            Err(_) => None,
        };
        let mut cfg = NormalizeConfig { fuel: self.cli.fuel.or(env_fuel).unwrap_or(DEFAULT_FUEL), ..Default::default() };
        if let Some(u) = self.cli.unroll_limit {
            cfg.unroll_limit = u;
        }
        cfg.dedup_lineage = dedup;
        Ok(cfg)
    }

    fn read(&mut self, path: &Path) -> Result<(String, String), CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        let name = path.display().to_string();
        self.sources.push((name.clone(), text.clone()));
        Ok((name, text))
    }

    fn query(&mut self, s: &Session, path: &Path) -> Result<Query, CliError> {
        let (name, text) = self.read(path)?;
        Ok(s.query(&name, &text)?)
    }

    fn show(&self, s: &Session, t: &Term) -> String {
        s.printer().unicode(self.cli.unicode).term(t)
    }

    fn show_ty(&self, s: &Session, t: &tracelinks_core::Type) -> String {
        s.printer().unicode(self.cli.unicode).ty(t)
    }

    /// Normalizes `m`, writing every step when `--trace-steps` is given.
    fn normalize(&self, s: &Session, m: &Term) -> Result<Term, CliError> {
        let Some(path) = &self.cli.trace_steps else { return Ok(s.normalize(m)?) };
        let mut lines = String::new();
        let r = normalize::normalize_traced(m, &s.cfg, |t| {
            lines.push_str(&print(t));
            lines.push('\n');
        });
        fs::write(path, lines).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Ok(r.map_err(PipelineError::from)?)
    }

    /// The NRC query of an analysis, honouring `--trace-steps`.
    fn analysis(&self, s: &Session, f: &Term, q: &Query) -> Result<NrcTerm, CliError> {
        if self.cli.trace_steps.is_none() {
            return Ok(s.apply(f, q)?);
        }
        let whole = s.lib.compose(f, &q.term, &q.con, &s.cfg).map_err(PipelineError::from)?;
        let nf = self.normalize(s, &whole)?;
        let nrc = normalize::extract_nrc(&nf, &Context::new()).map_err(PipelineError::from)?;
        Ok(if s.cfg.dedup_lineage { normalize::dedup_concat(&nrc) } else { nrc })
    }

    fn compile(&self, s: &Session, mode: Option<Mode>, q: &Query) -> Result<NrcTerm, CliError> {
        match mode {
            Some(m) => self.analysis(s, s.lib.term(m.function_name()).map_err(PipelineError::from)?, q),
            None => Ok(s.compile(None, q)?),
        }
    }

    fn emit(&self, out: &mut dyn Write, text: &str, json: Json) -> Result<(), CliError> {
        let r = if self.cli.json {
            writeln!(out, "{}", serde_json::to_string_pretty(&json).unwrap_or_default())
        } else {
            writeln!(out, "{text}")
        };
        r.map_err(|source| CliError::Io { path: "<stdout>".into(), source })
    }

    fn dispatch(&mut self, out: &mut dyn Write) -> Result<(), CliError> {
        let cli = self.cli;
        match &cli.command {
            Command::Check { file } => {
                let s = Session::new(self.config(false)?)?;
                let (name, text) = self.read(file)?;
                let (_, ty) = s.check(&name, &text)?;
                let shown = self.show_ty(&s, &ty);
                self.emit(out, &shown, json!({ "type": shown }))
            }
            Command::Normalize { file } => {
                let s = Session::new(self.config(false)?)?;
                let (name, text) = self.read(file)?;
                let (m, ty) = s.check(&name, &text)?;
                let nf = self.normalize(&s, &m)?;
                let shown = self.show(&s, &nf);
                self.emit(out, &shown, json!({ "term": shown, "type": self.show_ty(&s, &ty) }))
            }
            Command::Trace { file } => {
                let s = Session::new(self.config(false)?)?;
                let q = self.query(&s, file)?;
                let t = s.trace(&q)?;
                let shown = self.show(&s, &t);
                let ty = tracelinks_core::typecheck::type_of(&Context::new(), &t).map_err(PipelineError::from)?;
                self.emit(out, &shown, json!({ "term": shown, "type": self.show_ty(&s, &ty) }))
            }
            Command::Analyze { mode, file, dedup } => {
                let s = Session::new(self.config(*dedup)?)?;
                let q = self.query(&s, file)?;
                let nrc = self.compile(&s, Some(*mode), &q)?;
                let ty = s.result_type(Some(*mode), &q)?;
                let shown = self.show(&s, &nrc.to_term());
                self.emit(
                    out,
                    &shown,
                    json!({ "mode": mode.function_name(), "query": shown, "type": self.show_ty(&s, &ty) }),
                )
            }
            Command::Apply { function, file, dedup } => {
                let s = Session::new(self.config(*dedup)?)?;
                let (fname, ftext) = self.read(function)?;
                let (f, _) = s.check(&fname, &ftext)?;
                let q = self.query(&s, file)?;
                let nrc = self.analysis(&s, &f, &q)?;
                let ty = s.applied_type(&f, &q)?;
                let shown = self.show(&s, &nrc.to_term());
                self.emit(out, &shown, json!({ "query": shown, "type": self.show_ty(&s, &ty) }))
            }
            Command::Run { file, db, analysis } => {
                let s = Session::new(self.config(analysis.dedup)?)?;
                let q = self.query(&s, file)?;
                let db = load_db(db)?;
                let nrc = self.compile(&s, analysis.mode, &q)?;
                let v = tracelinks_core::runtime::eval(&nrc, &db).map_err(PipelineError::from)?;
                let j = value_to_json(&v);
                let text = serde_json::to_string_pretty(&j).unwrap_or_default();
                self.emit(out, &text, json!({ "result": j }))
            }
            Command::Sql { file, analysis, db, check } => {
                let s = Session::new(self.config(analysis.dedup)?)?;
                let q = self.query(&s, file)?;
                let nrc = self.compile(&s, analysis.mode, &q)?;
                let ty = s.result_type(analysis.mode, &q)?;
                let sql = tracelinks_core::sqlgen::emit_sql(&nrc, &ty).map_err(PipelineError::from)?;
                if !*check {
                    return self.emit(out, &sql, json!({ "sql": sql }));
                }
                let db = load_db(db.as_ref().expect("clap requires --db with --check"))?;
                let a = check_agreement(&nrc, &ty, &db)?;
                let text = format!(
                    "{sql}\n-- check: {} ({} rows)",
                    if a.agrees() { "SQLite agrees with the evaluator" } else { "MISMATCH" },
                    a.reference.len()
                );
                self.emit(out, &text, json!({ "sql": sql, "check": { "agrees": a.agrees(), "rows": a.reference.len() } }))?;
                if a.agrees() {
                    Ok(())
                } else {
                    Err(CliError::Disagreement)
                }
            }
            Command::Selftest { seed, cases, suite } => {
                let s = Session::new(self.config(false)?)?;
                for n in suite {
                    if !props::SUITES.iter().any(|(k, _)| k == n) {
                        return Err(CliError::UnknownSuite(n.clone()));
                    }
                }
                let mut reports = Vec::new();
                for (name, default) in props::SUITES {
                    if !suite.is_empty() && !suite.iter().any(|n| n == name) {
                        continue;
                    }
                    let r = props::run_suite(&s, name, *seed, cases.unwrap_or(*default)).expect("known suite");
                    if !cli.json {
                        writeln!(out, "{}", r.line()).map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
                    }
                    reports.push(r);
                }
                let failed = reports.iter().filter(|r| !r.passed()).count();
                if cli.json {
                    let suites: Vec<Json> = reports
                        .iter()
                        .map(|r| {
                            json!({ "name": r.name, "cases": r.cases, "failures": r.failures, "passed": r.passed() })
                        })
                        .collect();
                    self.emit(out, "", json!({ "seed": seed, "suites": suites, "passed": failed == 0 }))?;
                }
                if failed == 0 {
                    Ok(())
                } else {
                    Err(CliError::SuitesFailed(failed))
                }
            }
        }
    }

    fn parse_span(&self, e: &CliError) -> Option<(String, usize, usize)> {
        match e {
            CliError::Pipeline(PipelineError::Parse { file, error }) => Some((file.clone(), error.line, error.col)),
            _ => None,
        }
    }

    /// Error text with the offending source line for parse errors.
    fn render_error(&self, e: &CliError) -> String {
        let mut s = format!("error[{}]: {e}", e.code());
        if let Some((file, line, col)) = self.parse_span(e) {
            if let Some((_, text)) = self.sources.iter().find(|(n, _)| *n == file) {
                if let Some(src) = text.lines().nth(line.saturating_sub(1)) {
                    s.push_str(&format!("\n  --> {file}:{line}:{col}\n   |\n   | {src}\n   | {}^", " ".repeat(col.saturating_sub(1))));
                }
            }
        }
        if let CliError::Pipeline(PipelineError::Typing(t)) = e {
            let d = t.diagnostic();
            if let Some(sub) = d.subterm {
                s.push_str(&format!("\n  in: {sub}"));
            }
        }
        s
    }

    fn error_json(&self, e: &CliError) -> Json {
        let span = self.parse_span(e).map(|(file, line, col)| json!({ "file": file, "line": line, "col": col }));
        let (expected, actual, subterm) = match e {
            CliError::Pipeline(PipelineError::Typing(t)) => {
                let d = t.diagnostic();
                (d.expected.map(|t| t.to_string()), d.actual.map(|t| t.to_string()), d.subterm)
            }
            _ => (None, None, None),
        };
        json!({ "error": {
            "code": e.code(),
            "message": e.to_string(),
            "span": span,
            "expected": expected,
            "actual": actual,
            "subterm": subterm,
            "exit": e.exit_code(),
        } })
    }
}
