//! Static analysis of power-system cases: case files, power flow,
//! continuation power flow, market and security constrained optimal power
//! flow, and wind-farm reactive-support ranking.

// `!(x > 0.0)` is used on purpose so that NaN fails the check; bus loops
// index several parallel arrays at once
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod case;
pub mod io;
pub mod network;

pub use case::PowerCase;
pub use io::{parse_case, serialize_case, ParseError};
pub mod cpf;
pub mod opf;
pub mod powerflow;
pub mod scenario;
pub mod sensitivity;
