// Negated float comparisons in guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appearance;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod inference;
pub mod learning;
pub mod observation;
pub mod oracle;
pub mod runtime;
pub mod scenario;
pub mod spatiotemporal;
pub mod topology;
pub mod trace;

pub use error::{Error, Result};
