//! Library surface of the scenario front end: the strict scenario schema and
//! the deterministic CSV/JSON emitters, shared by the binary and its tests.

pub mod output;
pub mod scenario;
