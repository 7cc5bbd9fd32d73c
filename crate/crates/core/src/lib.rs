#![no_std]
//! Core of the `tracelinks` compiler.
//!
//! The crate implements a small query calculus with intensional type
//! analysis: constructors with `Typerec` and `Rmap`, terms with `typecase`,
//! `tracecase`, `rmap` and `rfold`, a self-tracing rewrite of query terms,
//! and a normalizer that reduces compositions of trace analyses and traced
//! queries down to the nested relational calculus.
//!
//! Everything here is pure and allocation-only, so the crate builds without
//! `std`. File IO, JSON databases, the CLI and the random generators live in
//! the companion `tracelinks` crate.

extern crate alloc;

pub mod normalize;
pub mod runtime;
pub mod selftrace;
pub mod sqlgen;
pub mod stdlib;
pub mod syntax;
pub mod typecheck;
pub mod types;

pub use normalize::{NormalFormClass, NormalizeConfig, NrcTerm};
pub use syntax::{Constructor, Kind, Literal, Name, RowConstructor, RowType, Term, Type};
pub use types::Context;
