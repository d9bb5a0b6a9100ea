//! Fast self-contained oracle suite.
//!
//! Every check here recomputes its expected answer through an independent
//! route (finite differences, a hand-written update formula, value
//! iteration, or a second copy of a lookup table) so a regression in the
//! main implementation cannot hide. The CLI `verify` command runs
//! [`run_all`]; tests call the individual oracles directly.

mod finite_diff;
mod oracles;

pub use finite_diff::{finite_difference_gradients, max_relative_error};
pub use oracles::*;
