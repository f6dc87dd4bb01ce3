//! File formats and the command-line runner around `envelop-core`.
//!
//! Model files are JSON ([`schema`]), event logs and occurrence lists are
//! JSON lines ([`logio`]), tabular results are CSV with a `#schema=1`
//! comment line ([`output`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod logio;
pub mod output;
pub mod schema;

pub use error::CliError;
