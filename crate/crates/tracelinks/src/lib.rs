//! Command-line front end, JSON databases and test generators for the
//! `tracelinks-core` compiler.

pub mod cli;
pub mod db;
pub mod gen;
pub mod pipeline;
pub mod props;
pub mod sqlite;
