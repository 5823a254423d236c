//! Grids, fields and the discrete non-local operator.

mod field;
mod grid;
mod operator;

pub use field::{sample_function_to_field, ScalarField};
pub use grid::Grid;
pub use operator::{assemble_operator, assemble_profile, DiscreteOperator, OperatorMode};
