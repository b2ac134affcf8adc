//! Signal Temporal Logic: syntax, parsing and monitoring over sampled signals.

mod ast;
mod monitor;
mod parser;

use thiserror::Error;

pub use ast::{Comparator, Formula, Interval};
pub use monitor::{robustness, satisfies, TIME_EPS};
pub use parser::parse;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StlError {
    #[error("parse error at offset {position}: found {found}, expected one of [{}]", expected.join(", "))]
    Parse { position: usize, found: String, expected: Vec<String> },
    #[error("invalid interval [{a}, {b}]: need 0 <= a <= b")]
    Interval { a: f64, b: f64 },
    #[error("formula needs the signal up to t = {required}, but it ends at {available}")]
    InsufficientHorizon { required: f64, available: f64 },
    #[error("time {t} outside signal domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },
    #[error("predicate refers to x{index} but the signal has {dim} dimensions")]
    IndexOutOfRange { index: usize, dim: usize },
}
