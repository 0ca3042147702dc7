//! Periodic lattice geometry, field containers and the discrete calculus.

mod calculus;
mod field;
mod grid;
pub mod io;

pub use calculus::{
    apply_operator, backward_difference, backward_divergence, forward_difference,
    forward_gradient, shift_backward, shift_forward,
};
pub(crate) use calculus::{apply_operator_into, divergence_into};
pub use field::{EdgeField, MatrixField, NodeField};
pub use grid::TorusGrid;
