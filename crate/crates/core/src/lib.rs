//! Multiplierless constant matrix-vector multiplication.
//!
//! `shiftadd` compiles a constant fixed-point matrix `M` into a shift-and-add
//! adder graph computing `y^T = x^T M`, minimizing the number (and width) of
//! two-operand adders under an optional adder-depth constraint:
//!
//! 1. [`csd`] recodes entries into canonical signed digits and normalizes the
//!    matrix by power-of-two row/column scaling.
//! 2. [`decompose`] factors `M = M1 * M2` along a depth-capped spanning tree
//!    over the matrix columns.
//! 3. [`cse`] greedily extracts common two-term subexpressions from each
//!    factor and reduces the leftover digits into depth-balanced adder trees.
//!
//! The result is an [`graph::AdderGraph`] that can be checked bit-exactly
//! ([`verify`]), and emitted as Verilog or JSON ([`codegen`]).

pub mod bench;
pub mod codegen;
pub mod csd;
pub mod cse;
pub mod decompose;
pub mod dyadic;
mod error;
pub mod fxp;
pub mod graph;
pub mod verify;

pub use cse::{solve, solve_stage2, solve_with, Selection, Solution, SolveOptions};
pub use dyadic::{Dyadic, Matrix};
pub use error::Error;
pub use fxp::{BitWidthSpec, QInterval, Sign};
pub use graph::AdderGraph;
